//! Diagnostics: support confinement, stability ratios, annulus bounds,
//! hierarchy of `μ_{k,d}` and residuals of final candidates.

use crate::energy::{comparison_field, grad_i, grad_iinf, Potential};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::grid::{sigma_of, Configuration, DomainMask, Field};
use crate::linalg::dot;
use crate::minimizer::{mu_k_search, MinimizeResult, Model, SearchOptions, SolverOptions};
use crate::norms::{dual_norm_xd, norm_xd, projected_residual};
use crate::params::ModelParams;
use crate::radial::{eval_w, RadialProfile};
use crate::split::{barycenter, emerging_split};
use serde::Serialize;
use std::io::Write;

/// Hypothesis surrogate: per-bump `L²(B(x_i,ρ))` deviation relative to `‖w‖₂`.
pub const DEVIATION_GATE: f64 = 0.2;
/// Hypothesis surrogate: `σ(x) ≤ σ₀ · SIGMA_GATE`.
pub const SIGMA_GATE: f64 = 0.5;

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Check {
    pub name: String,
    /// What the check measures.
    pub source: String,
    pub measured: f64,
    pub bound: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    /// `measured ≤ bound + tolerance`.
    pub fn upper(name: &str, source: &str, measured: f64, bound: f64, tolerance: f64) -> Check {
        Check {
            name: name.into(),
            source: source.into(),
            measured,
            bound,
            tolerance,
            pass: measured <= bound + tolerance,
        }
    }

    /// `measured ≥ bound - tolerance`.
    pub fn lower(name: &str, source: &str, measured: f64, bound: f64, tolerance: f64) -> Check {
        Check {
            name: name.into(),
            source: source.into(),
            measured,
            bound,
            tolerance,
            pass: measured >= bound - tolerance,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct VerificationReport {
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
}

impl VerificationReport {
    pub fn push(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn extend(&mut self, cs: impl IntoIterator<Item = Check>) {
        self.checks.extend(cs);
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// One row per check: `name,measured,bound,pass`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["name", "measured", "bound", "pass"])?;
        for c in &self.checks {
            w.write_record([c.name.clone(), format!("{:.16e}", c.measured), format!("{:.16e}", c.bound), c.pass.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Invalid(e.to_string()))
    }
}

/// `Σ_j w(· - x_j)` on the mask.
pub fn sum_of_bumps(dm: &DomainMask, profile: &RadialProfile) -> Field {
    (0..dm.len())
        .map(|c| if dm.inside[c] { (0..dm.k()).map(|j| eval_w(profile, dm.r(c, j))).sum() } else { 0.0 })
        .collect()
}

fn nearest(dm: &DomainMask, c: usize) -> f64 {
    (0..dm.k()).map(|j| dm.r(c, j)).fold(f64::INFINITY, f64::min)
}

fn mass_fraction(dm: &DomainMask, f: &[f64], outside: impl Fn(usize) -> bool) -> f64 {
    let (mut out, mut tot) = (0.0, 0.0);
    for &c in &dm.cells {
        let c = c as usize;
        tot += f[c];
        if outside(c) {
            out += f[c];
        }
    }
    if tot > 0.0 {
        out / tot
    } else {
        0.0
    }
}

/// Leakage fractions of `u` outside the `R₀`-balls, of `u^δ` outside the
/// `(ρ - σ₀/2)`-balls and of `u` on `A(x,d) \ A(x,d/2)`.
pub fn check_support(dm: &DomainMask, u: &[f64], params: &ModelParams, tol: f64) -> Vec<Check> {
    let emerging: Field = u.iter().map(|v| (v - params.delta).max(0.0)).collect();
    let r_outer = params.r_star + 0.5 * dm.d;
    vec![
        Check::upper(
            "support_outside_r0",
            "mass fraction of u outside the R0-balls",
            mass_fraction(dm, u, |c| nearest(dm, c) >= params.r0),
            0.0,
            tol,
        ),
        Check::upper(
            "emerging_outside_rho",
            "mass fraction of the emerging part outside the (rho - sigma0/2)-balls",
            mass_fraction(dm, &emerging, |c| nearest(dm, c) >= params.rho - 0.5 * params.sigma0),
            0.0,
            tol,
        ),
        Check::upper(
            "margin_shell",
            "mass fraction of u on A(x,d) minus A(x,d/2)",
            mass_fraction(dm, u, |c| nearest(dm, c) >= r_outer),
            0.0,
            tol,
        ),
    ]
}

/// Comparison with `w̃ = ½Σ w(t_κ(· - x_i))` outside the `R*`-balls.
///
/// `slack` shifts the comparison outward to absorb the grid smearing of
/// the free boundary (use `h` for grid minimizers, `0` for exact inputs).
/// Returns the pointwise check and the support-radius check.
pub fn support_comparison_bound(
    dm: &DomainMask,
    u: &[f64],
    profile: &RadialProfile,
    params: &ModelParams,
    kappa: f64,
    slack: f64,
) -> Result<Vec<Check>> {
    let rs = params.r_star;
    let outer: Vec<usize> = dm.cells.iter().map(|&c| c as usize).filter(|&c| nearest(dm, c) >= rs).collect();
    let top = outer.iter().map(|&c| u[c]).fold(0.0, f64::max);
    if top > kappa {
        return Err(Error::PreconditionFail(format!("u = {top:e} exceeds kappa = {kappa:e} outside the R*-balls")));
    }
    let cmp = if slack == 0.0 {
        comparison_field(dm, kappa, profile, params)?
    } else {
        if !(kappa > 0.0 && kappa <= params.delta) {
            return Err(Error::PreconditionFail(format!("kappa = {kappa} outside (0, delta]")));
        }
        let t = params.t_kappa(kappa);
        (0..dm.len())
            .map(|c| 0.5 * (0..dm.k()).map(|j| eval_w(profile, t * (dm.r(c, j) - slack).max(0.0))).sum::<f64>())
            .collect()
    };
    let excess = outer.iter().map(|&c| u[c] - cmp[c]).fold(f64::NEG_INFINITY, f64::max);
    let reach = dm.cells.iter().map(|&c| c as usize).filter(|&c| u[c] > 0.0).map(|c| nearest(dm, c)).fold(0.0, f64::max);
    let radius = rs + kappa.powf((2.0 - params.q) / 3.0) + slack;
    Ok(vec![
        Check::upper("comparison_pointwise", "max of u minus the comparison field outside the R*-balls", excess.max(0.0), 0.0, 0.0),
        Check::upper("comparison_support", "support radius of u against the kappa-inflated balls", reach, radius, 0.0),
    ])
}

/// Outcome of a stability ratio evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Stability {
    Ratio(f64),
    /// Both sides vanish at machine scale.
    Degenerate,
}

/// `max_i ‖u - w(· - x_i)‖_{L²(B(x_i, ρ))}`.
pub fn bump_l2_deviation(dm: &DomainMask, u: &[f64], profile: &RadialProfile, rho: f64) -> f64 {
    (0..dm.k())
        .map(|i| {
            let s: f64 = dm
                .cells
                .iter()
                .map(|&c| c as usize)
                .filter(|&c| dm.r(c, i) < rho)
                .map(|c| (u[c] - eval_w(profile, dm.r(c, i))).powi(2))
                .sum();
            (s * dm.vol()).sqrt()
        })
        .fold(0.0, f64::max)
}

/// `‖u - Σw_j‖_{x,d} / ‖(I^∞)'(u) - (I^∞)'(Σw_j)‖_{*,u}` under numerically
/// checked hypotheses.
pub fn stability_ratio(dm: &DomainMask, u: &[f64], profile: &RadialProfile, params: &ModelParams, beta_tol: f64) -> Result<Stability> {
    let q = params.q;
    let config = Configuration { points: dm.centers.clone() };
    let sig = sigma_of(&config, params.r_star);
    if sig > SIGMA_GATE * params.sigma0 {
        return Err(Error::HypothesisFail(format!("sigma(x) = {sig:e} above {SIGMA_GATE} sigma0")));
    }
    if u.iter().any(|v| *v < 0.0) {
        return Err(Error::HypothesisFail("u has negative values".into()));
    }
    let split = emerging_split(u, dm, params.delta).map_err(|e| Error::HypothesisFail(format!("emergence: {e}")))?;
    for i in 0..dm.k() {
        let b = barycenter(&split, i, dm)?;
        let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        if nb > beta_tol {
            return Err(Error::HypothesisFail(format!("barycentre {i} has |beta| = {nb:e}")));
        }
    }
    let w_norm = crate::radial::radial_integrals(profile).l2.sqrt();
    let dev = bump_l2_deviation(dm, u, profile, params.rho);
    if dev > DEVIATION_GATE * w_norm {
        return Err(Error::HypothesisFail(format!("L2 deviation {dev:e} above {DEVIATION_GATE} |w|_2")));
    }
    let sw = sum_of_bumps(dm, profile);
    let diff: Field = u.iter().zip(&sw).map(|(a, b)| a - b).collect();
    let num = norm_xd(dm, &diff);
    let gu = grad_iinf(dm, u, q);
    let gw = grad_iinf(dm, &sw, q);
    let gd: Field = gu.iter().zip(&gw).map(|(a, b)| a - b).collect();
    let (den, _) = projected_residual(dm, &gd, &split)?;
    let floor = 1e3 * f64::EPSILON * norm_xd(dm, u).max(f64::MIN_POSITIVE);
    if den <= floor {
        return Ok(if num <= floor { Stability::Degenerate } else { Stability::Ratio(num / floor) });
    }
    Ok(Stability::Ratio(num / den))
}

/// `‖u - Σw_j‖_{L^∞}` on `A(x,d)` outside the balls of radius `r`.
pub fn annulus_deviation(dm: &DomainMask, u: &[f64], profile: &RadialProfile, r: f64) -> f64 {
    dm.cells
        .iter()
        .map(|&c| c as usize)
        .filter(|&c| nearest(dm, c) >= r)
        .map(|c| (u[c] - (0..dm.k()).map(|j| eval_w(profile, dm.r(c, j))).sum::<f64>()).abs())
        .fold(0.0, f64::max)
}

/// Fitted `C_R`: the annulus deviation over the bracket
/// `max_i L² deviation + σ(x) + α`. The bound only asserts that `C_R` exists,
/// so the check passes whenever the ratio is finite.
pub fn annulus_linf_check(dm: &DomainMask, u: &[f64], profile: &RadialProfile, params: &ModelParams, alpha: f64, r: f64) -> Result<Check> {
    if !(r > params.rho && r <= params.r_star) {
        return Err(Error::Invalid(format!("annulus radius {r} outside (rho, R*]")));
    }
    let lhs = annulus_deviation(dm, u, profile, r);
    let config = Configuration { points: dm.centers.clone() };
    let bracket = bump_l2_deviation(dm, u, profile, params.rho) + sigma_of(&config, params.r_star) + alpha;
    let c_r = if bracket > 0.0 { lhs / bracket } else if lhs == 0.0 { 0.0 } else { f64::INFINITY };
    let source = format!("annulus sup deviation {lhs:e} over the bracket {bracket:e}");
    Ok(Check { pass: c_r.is_finite(), ..Check::upper("annulus_linf", &source, c_r, f64::INFINITY, 0.0) })
}

/// Searches for `μ_{1,d}` and `μ_{2,d}` and checks `μ₂ > μ₁ + m₀ - tol·m₀`.
#[allow(clippy::too_many_arguments)]
pub fn check_mu_hierarchy(
    model: &Model,
    d: f64,
    h: f64,
    pot: &Potential,
    seeds1: &[Configuration],
    seeds2: &[Configuration],
    opts: &SolverOptions,
    sopts: &SearchOptions,
    tol: f64,
    exec: Exec,
) -> Result<(Check, f64, f64)> {
    let one = mu_k_search(model, 1, d, h, pot, seeds1, opts, sopts, exec)?;
    let two = mu_k_search(model, 2, d, h, pot, seeds2, opts, sopts, exec)?;
    let m0 = model.params.m0;
    let gap = two.best_mu - one.best_mu;
    Ok((Check::lower("mu_hierarchy", "mu_2 minus mu_1 against m0", gap, m0, tol * m0), one.best_mu, two.best_mu))
}

/// Unprojected patch dual norm of `I'(u)` and the largest multiplier.
pub fn residual_pde(result: &MinimizeResult, pot: &Potential, q: f64, tol: f64) -> Result<Vec<Check>> {
    let dm = &result.domain;
    let g = grad_i(dm, &result.u, &pot.sample(dm), q);
    let r = dual_norm_xd(dm, &g)?;
    let lam = result.lambdas.iter().map(|l| l.iter().map(|v| v * v).sum::<f64>().sqrt()).fold(0.0, f64::max);
    Ok(vec![
        Check::upper("residual_dual", "patch dual norm of I'(u)", r, 0.0, tol),
        Check::upper("lambda_max", "largest Lagrange multiplier", lam, 0.0, tol),
    ])
}

/// One sample for the multiplier bound: multipliers of `(I^∞)'(u) + f`
/// against the deviation of `u` from `w` and the dual norm of `f`.
pub struct MultiplierSample {
    pub lambda: f64,
    pub deviation: f64,
    pub inhomogeneity: f64,
}

pub fn multiplier_sample(dm: &DomainMask, u: &[f64], f: &[f64], profile: &RadialProfile, params: &ModelParams) -> Result<MultiplierSample> {
    let split = emerging_split(u, dm, params.delta)?;
    let g: Field = grad_iinf(dm, u, params.q).iter().zip(f).map(|(a, b)| a + b).collect();
    let (_, lams) = projected_residual(dm, &g, &split)?;
    Ok(MultiplierSample {
        lambda: lams.iter().map(|l| l.iter().map(|v| v * v).sum::<f64>().sqrt()).fold(0.0, f64::max),
        deviation: bump_l2_deviation(dm, u, profile, params.rho),
        inhomogeneity: dual_norm_xd(dm, f)?,
    })
}

/// Smallest `C` with `λ ≤ C (deviation + inhomogeneity)` over the samples.
pub fn fit_multiplier_constant(samples: &[MultiplierSample]) -> f64 {
    samples
        .iter()
        .filter(|s| s.deviation + s.inhomogeneity > 0.0)
        .map(|s| s.lambda / (s.deviation + s.inhomogeneity))
        .fold(0.0, f64::max)
}

/// Largest ratio over a family; the fitted constant of an existence bound.
pub fn fitted_constant(values: &[f64]) -> f64 {
    values.iter().copied().filter(|v| v.is_finite()).fold(0.0, f64::max)
}

/// `max(a,b)/min(a,b) ≤ factor`.
pub fn stable_within(a: f64, b: f64, factor: f64) -> bool {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    lo > 0.0 && hi / lo <= factor
}

/// `∫ u` over the mask.
pub fn total_mass(dm: &DomainMask, u: &[f64]) -> f64 {
    dot(dm, u, &vec![1.0; u.len()])
}
