//! Energy functionals, gradients, Nehari scaling and the comparison
//! constructions used in the support estimates.

use crate::error::{Error, Result};
use crate::grid::{dist, Configuration, DomainMask, Field};
use crate::linalg::{dirichlet_form, dot, neg_laplacian};
use crate::norms::dual_norm_xd;
use crate::params::ModelParams;
use crate::radial::{eval_w, RadialProfile};
use crate::split::EmergingSplit;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKind {
    Unit,
    RadialDip,
    CompactBump,
}

#[derive(Clone, Debug, Serialize)]
pub struct Potential {
    pub kind: PotentialKind,
    pub alpha: f64,
    /// Upper bound for `K`.
    pub a1: f64,
    /// `K < 1` outside `B(0, a2)`.
    pub a2: f64,
}

pub fn potential_make(kind: PotentialKind, alpha: f64) -> Result<Potential> {
    if !(alpha >= 0.0) {
        return Err(Error::Invalid(format!("alpha = {alpha}")));
    }
    let (a1, a2) = match kind {
        PotentialKind::Unit => (1.0, 0.0),
        PotentialKind::RadialDip => (1.0, 0.0),
        PotentialKind::CompactBump => (1.0 + 2.0 * alpha, ((4.0 / 3.0) * 2f64.ln()).sqrt()),
    };
    let alpha = if kind == PotentialKind::Unit { 0.0 } else { alpha };
    Ok(Potential { kind, alpha, a1, a2 })
}

impl Potential {
    pub fn value(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        match self.kind {
            PotentialKind::Unit => 1.0,
            PotentialKind::RadialDip => 1.0 - self.alpha / (1.0 + r2),
            PotentialKind::CompactBump => 1.0 + self.alpha * (2.0 * (-r2).exp() - (-r2 / 4.0).exp()),
        }
    }

    /// `K` at every cell of the box.
    pub fn sample(&self, dm: &DomainMask) -> Field {
        (0..dm.len()).map(|c| self.value(dm.x(c))).collect()
    }

    /// Estimate of `‖K - 1‖_{L^p_loc}` (p = N): the largest discrete `L^p`
    /// norm over unit balls centred on a lattice of stride `R*/2`.
    pub fn lp_loc(&self, n: usize, r_star: f64, extent: f64) -> f64 {
        if self.alpha == 0.0 {
            return 0.0;
        }
        let stride = r_star / 2.0;
        let m = (extent / stride).ceil() as i64;
        let hq: f64 = 0.05;
        let nq = (1.0 / hq).ceil() as i64;
        let p = n as f64;
        let mut best = 0.0f64;
        let mut centre = vec![-m; n];
        loop {
            let c: Vec<f64> = centre.iter().map(|&i| i as f64 * stride).collect();
            let mut s = 0.0;
            let mut off = vec![-nq; n];
            loop {
                let y: Vec<f64> = off.iter().map(|&i| i as f64 * hq).collect();
                if y.iter().map(|v| v * v).sum::<f64>() < 1.0 {
                    let x: Vec<f64> = c.iter().zip(&y).map(|(a, b)| a + b).collect();
                    s += (self.value(&x) - 1.0).abs().powf(p);
                }
                if !advance(&mut off, -nq, nq) {
                    break;
                }
            }
            best = best.max((s * hq.powi(n as i32)).powf(1.0 / p));
            if !advance(&mut centre, -m, m) {
                break;
            }
        }
        best
    }

    /// Sampled (K2)–(K4) checks on the box of `dm`.
    pub fn check(&self, dm: &DomainMask) -> Vec<(String, bool)> {
        let k = self.sample(dm);
        let cap = k.iter().all(|&v| v <= self.a1 + 1e-12);
        let mut edge = true;
        let mut set = true;
        for c in 0..dm.len() {
            let idx = dm.grid.index_of(c);
            let on_edge = idx.iter().zip(&dm.grid.shape).any(|(&i, &s)| i == 0 || i + 1 == s);
            if on_edge && (k[c] - 1.0).abs() > 0.05 * self.alpha.max(1e-300) && self.alpha > 0.0 {
                edge = false;
            }
            // far-field K - 1 underflows to 0, so only K > 1 is flagged
            if self.kind != PotentialKind::Unit && k[c] > 1.0 && dist(dm.x(c), &vec![0.0; dm.dim()]) > self.a2 + 1e-12 {
                set = false;
            }
        }
        vec![("K <= a1".into(), cap), ("K -> 1 at box edge".into(), edge), ("{K >= 1} in B(0,a2)".into(), set)]
    }
}

fn advance(idx: &mut [i64], lo: i64, hi: i64) -> bool {
    for v in idx.iter_mut().rev() {
        if *v < hi {
            *v += 1;
            return true;
        }
        *v = lo;
    }
    false
}

fn lq_sum(dm: &DomainMask, u: &[f64], q: f64) -> f64 {
    dm.vol() * dm.exec.sum(u.len(), |i| if u[i] > 0.0 { u[i].powf(q) } else { 0.0 })
}

fn weighted_l2(dm: &DomainMask, u: &[f64], v: &[f64], kv: &[f64]) -> f64 {
    dm.vol() * dm.exec.sum(u.len(), |i| kv[i] * u[i] * v[i])
}

/// `I(u) = ½∫|∇u|² - K u² + (1/q)∫|u|^q`.
pub fn energy_i(dm: &DomainMask, u: &[f64], kv: &[f64], q: f64) -> f64 {
    0.5 * (dirichlet_form(dm, u, u) - weighted_l2(dm, u, u, kv)) + lq_sum(dm, u, q) / q
}

/// `I^∞`, the functional with `K ≡ 1`.
pub fn energy_iinf(dm: &DomainMask, u: &[f64], q: f64) -> f64 {
    0.5 * (dirichlet_form(dm, u, u) - dot(dm, u, u)) + lq_sum(dm, u, q) / q
}

/// `J_δ` of a nonnegative piece; the support measure counts cells with positive value.
pub fn j_delta(dm: &DomainMask, piece: &[f64], kv: &[f64], delta: f64, q: f64) -> f64 {
    let quad = 0.5 * (dirichlet_form(dm, piece, piece) - weighted_l2(dm, piece, piece, kv));
    let lin = delta * dm.vol() * dm.exec.sum(piece.len(), |i| kv[i] * piece[i]);
    let pow = dm.vol()
        * dm.exec.sum(piece.len(), |i| {
            if piece[i] > 0.0 {
                (delta + piece[i]).powf(q) - delta.powf(q)
            } else {
                0.0
            }
        });
    quad - lin + pow / q
}

/// Density of `I'(u)`: `-Δu - K u + u^{q-1}` on the mask, zero elsewhere.
pub fn grad_i(dm: &DomainMask, u: &[f64], kv: &[f64], q: f64) -> Field {
    let mut g = neg_laplacian(dm, u);
    for i in 0..g.len() {
        g[i] = if dm.inside[i] {
            let p = if u[i] > 0.0 { u[i].powf(q - 1.0) } else { 0.0 };
            g[i] - kv[i] * u[i] + p
        } else {
            0.0
        };
    }
    g
}

/// Density of `(I^∞)'(u)`.
pub fn grad_iinf(dm: &DomainMask, u: &[f64], q: f64) -> Field {
    grad_i(dm, u, &vec![1.0; dm.len()], q)
}

/// Data of the scalar map `t ↦ I'(rest + t p) p` for one emerging piece.
struct NehariLine<'a> {
    dm: &'a DomainMask,
    rest: Field,
    piece: &'a [f64],
    quad: f64,
    cross: f64,
    q: f64,
}

impl NehariLine<'_> {
    fn f(&self, t: f64) -> f64 {
        let q = self.q;
        let s = self.dm.exec.sum(self.piece.len(), |i| {
            let p = self.piece[i];
            if p > 0.0 {
                (self.rest[i] + t * p).powf(q - 1.0) * p
            } else {
                0.0
            }
        });
        t * self.quad + self.cross + self.dm.vol() * s
    }

    fn df(&self, t: f64) -> f64 {
        let q = self.q;
        let s = self.dm.exec.sum(self.piece.len(), |i| {
            let p = self.piece[i];
            if p > 0.0 {
                (self.rest[i] + t * p).powf(q - 2.0) * p * p
            } else {
                0.0
            }
        });
        self.quad + (q - 1.0) * self.dm.vol() * s
    }
}

fn nehari_line<'a>(dm: &'a DomainMask, split: &'a EmergingSplit, i: usize, kv: &[f64], q: f64) -> Result<NehariLine<'a>> {
    let piece = &split.pieces[i].values;
    let mut rest = split.reassemble();
    for (r, p) in rest.iter_mut().zip(piece) {
        *r -= p;
    }
    let quad = dirichlet_form(dm, piece, piece) - weighted_l2(dm, piece, piece, kv);
    if !(quad < 0.0) {
        return Err(Error::HypothesisViolated(i));
    }
    let cross = dirichlet_form(dm, &rest, piece) - weighted_l2(dm, &rest, piece, kv);
    Ok(NehariLine { dm, rest, piece, quad, cross, q })
}

/// `d/dt I(u + (t-1) u_i^δ)` at `t`.
pub fn nehari_derivative(dm: &DomainMask, split: &EmergingSplit, i: usize, kv: &[f64], q: f64, t: f64) -> Result<f64> {
    Ok(nehari_line(dm, split, i, kv, q)?.f(t))
}

/// Unique `t > 0` with `I'(u_δ + Σ_{j≠i} u_j^δ + t u_i^δ) u_i^δ = 0`.
pub fn nehari_scale(dm: &DomainMask, split: &EmergingSplit, i: usize, kv: &[f64], q: f64) -> Result<f64> {
    let line = nehari_line(dm, split, i, kv, q)?;
    if !(line.f(0.0) > 0.0) {
        return Err(Error::NoRoot(i));
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while line.f(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::NoRoot(i));
        }
    }
    let mut t = if lo == 0.0 { 1.0 } else { 0.5 * (lo + hi) };
    for _ in 0..200 {
        let ft = line.f(t);
        if ft == 0.0 {
            return Ok(t);
        }
        if ft > 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let d = line.df(t);
        let mut next = t - ft / d;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - t).abs() <= 1e-15 * t || hi - lo <= 1e-15 * hi {
            return Ok(next);
        }
        t = next;
    }
    Ok(t)
}

/// Scale every piece onto its Nehari condition; returns the new field and the scalings.
pub fn nehari_project(dm: &DomainMask, split: &EmergingSplit, kv: &[f64], q: f64) -> Result<(Field, Vec<f64>)> {
    let mut ts = Vec::with_capacity(split.pieces.len());
    let mut sp = split.clone();
    for i in 0..split.pieces.len() {
        let t = nehari_scale(dm, &sp, i, kv, q)?;
        for v in sp.pieces[i].values.iter_mut() {
            *v *= t;
        }
        ts.push(t);
    }
    Ok((sp.reassemble(), ts))
}

/// `max_i ‖(Σ_j w_j)^{q-1} - Σ_j w_j^{q-1}‖_{L^r(B(x_i, 2R₀))}`, integrated on
/// a fine lattice over each pairwise lens of the supports; `r = ∞` allowed.
pub fn overlap_defect(config: &Configuration, profile: &RadialProfile, params: &ModelParams, r_exp: f64) -> Result<f64> {
    let sig = crate::grid::sigma_of(config, profile.r_star);
    if sig > params.sigma0 {
        return Err(Error::PreconditionFail(format!("sigma(x) = {sig} exceeds sigma0 = {}", params.sigma0)));
    }
    let n = config.dim();
    let k = config.k();
    let rs = profile.r_star;
    let q = profile.q;
    let res = match n {
        1 => 4000,
        2 => 400,
        _ => 60,
    };
    let mut acc = vec![0.0f64; k];
    for j in 0..k {
        for l in j + 1..k {
            let (a, b) = (&config.points[j], &config.points[l]);
            let dd = dist(a, b);
            if dd >= 2.0 * rs {
                continue;
            }
            let e: Vec<f64> = a.iter().zip(b).map(|(x, y)| (y - x) / dd).collect();
            let perp = basis_perp(&e);
            let s_lo = dd - rs;
            let s_hi = rs;
            let half = (rs * rs - (dd / 2.0).powi(2)).max(0.0).sqrt();
            let hs = (s_hi - s_lo) / res as f64;
            let hp = 2.0 * half / res as f64;
            let cell = hs * hp.powi(n as i32 - 1);
            let mut off = vec![0i64; n - 1];
            loop {
                for is in 0..res {
                    let s = s_lo + (is as f64 + 0.5) * hs;
                    let mut x: Vec<f64> = a.iter().zip(&e).map(|(c, ev)| c + s * ev).collect();
                    for (t, v) in off.iter().zip(&perp) {
                        let y = -half + (*t as f64 + 0.5) * hp;
                        for d in 0..n {
                            x[d] += y * v[d];
                        }
                    }
                    if dist(&x, a) >= rs || dist(&x, b) >= rs {
                        continue;
                    }
                    let ws: Vec<f64> = config.points.iter().map(|c| eval_w(profile, dist(&x, c))).collect();
                    let sum: f64 = ws.iter().sum();
                    let sep: f64 = ws.iter().map(|w| if *w > 0.0 { w.powf(q - 1.0) } else { 0.0 }).sum();
                    let f = (sum.powf(q - 1.0) - sep).abs();
                    for (i, c) in config.points.iter().enumerate() {
                        if dist(&x, c) < 2.0 * params.r0 {
                            if r_exp.is_infinite() {
                                acc[i] = acc[i].max(f);
                            } else {
                                acc[i] += f.powf(r_exp) * cell;
                            }
                        }
                    }
                }
                if n == 1 || !advance(&mut off, 0, res as i64 - 1) {
                    break;
                }
            }
        }
    }
    let worst = acc.into_iter().fold(0.0, f64::max);
    Ok(if r_exp.is_infinite() { worst } else { worst.powf(1.0 / r_exp) })
}

fn basis_perp(e: &[f64]) -> Vec<Vec<f64>> {
    let n = e.len();
    let mut out: Vec<Vec<f64>> = Vec::new();
    for a in 0..n {
        let mut v = vec![0.0; n];
        v[a] = 1.0;
        for b in std::iter::once(e).chain(out.iter().map(|v| v.as_slice())).collect::<Vec<_>>() {
            let p: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            for d in 0..n {
                v[d] -= p * b[d];
            }
        }
        let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nv > 1e-8 {
            out.push(v.into_iter().map(|x| x / nv).collect());
        }
        if out.len() == n - 1 {
            break;
        }
    }
    out
}

/// `w̃ = ½ Σ_i w(t_κ (x - x_i))` on every cell of the box.
pub fn comparison_field(dm: &DomainMask, kappa: f64, profile: &RadialProfile, params: &ModelParams) -> Result<Field> {
    if !(kappa > 0.0 && kappa <= params.delta) {
        return Err(Error::PreconditionFail(format!("kappa = {kappa} outside (0, delta]")));
    }
    let t = params.t_kappa(kappa);
    Ok((0..dm.len())
        .map(|c| 0.5 * (0..dm.k()).map(|j| eval_w(profile, t * dm.r(c, j))).sum::<f64>())
        .collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct EnergyReport {
    pub i_value: f64,
    pub iinf_value: f64,
    pub jdelta_per_bump: Vec<f64>,
    pub nehari_residuals: Vec<f64>,
    pub grad_dual_norm: f64,
}

pub fn energy_report(dm: &DomainMask, u: &[f64], split: &EmergingSplit, kv: &[f64], q: f64) -> Result<EnergyReport> {
    let g = grad_i(dm, u, kv, q);
    Ok(EnergyReport {
        i_value: energy_i(dm, u, kv, q),
        iinf_value: energy_iinf(dm, u, q),
        jdelta_per_bump: split.pieces.iter().map(|p| j_delta(dm, &p.values, kv, split.delta, q)).collect(),
        nehari_residuals: split.pieces.iter().map(|p| dot(dm, &g, &p.values)).collect(),
        grad_dual_norm: dual_norm_xd(dm, &g)?,
    })
}
