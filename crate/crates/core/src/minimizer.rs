//! Barycentre-constrained Nehari minimization on ball-union domains.

use crate::energy::{energy_i, grad_i, nehari_project, Potential};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::grid::{build_domain, dist, sigma_of, Configuration, DomainMask, Field};
use crate::linalg::{cholesky_solve, dot, SubsetOp};
use crate::norms::projected_residual;
use crate::params::{default_sigma0, derive_constants, ModelParams};
use crate::radial::{eval_w, solve_ground_state, RadialProfile};
use crate::split::{barycenter, emerging_split, EmergingSplit};
use serde::{Deserialize, Serialize};

/// Ground state together with the constants derived from it.
#[derive(Clone, Debug)]
pub struct Model {
    pub profile: RadialProfile,
    pub params: ModelParams,
}

impl Model {
    pub fn new(profile: RadialProfile, params: ModelParams) -> Model {
        Model { profile, params }
    }

    /// Solve the ground state and derive constants with the default margin.
    pub fn build(q: f64, n: usize, a1: f64) -> Result<Model> {
        let profile = solve_ground_state(q, n, 1e-10)?;
        let params = derive_constants(&profile, default_sigma0(&profile), a1)?;
        Ok(Model { profile, params })
    }

    /// Default margin `d = σ₀/2`.
    pub fn default_d(&self) -> f64 {
        0.5 * self.params.sigma0
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    pub max_iter: usize,
    /// Stationarity and barycentre tolerance; `1e-6 m₀` when absent.
    pub eps_res: Option<f64>,
    /// Weight of `Σ|β_i|²` in the merit function; `10/h` when absent.
    pub penalty_weight: Option<f64>,
    /// Steps between Nehari projections.
    pub nehari_every: usize,
    pub cg_tol: f64,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { max_iter: 50_000, eps_res: None, penalty_weight: None, nehari_every: 1, cg_tol: 1e-10, seed: 0 }
    }
}

#[derive(Clone, Debug)]
pub struct MinimizeResult {
    pub domain: DomainMask,
    pub u: Field,
    pub mu: f64,
    pub barycenters: Vec<Vec<f64>>,
    pub nehari_residuals: Vec<f64>,
    pub lambdas: Vec<Vec<f64>>,
    pub residual_star_u: f64,
    pub support_radii: Vec<f64>,
    pub iterations: usize,
    /// Preconditioned tangential gradient norm at exit.
    pub stationarity: f64,
    pub converged: bool,
}

/// Pointwise maximum of translated ground states on the mask.
pub fn initial_guess(dm: &DomainMask, profile: &RadialProfile) -> Field {
    (0..dm.len())
        .map(|c| {
            if !dm.inside[c] {
                return 0.0;
            }
            (0..dm.k()).map(|j| eval_w(profile, dm.r(c, j))).fold(0.0, f64::max)
        })
        .collect()
}

fn check_config(model: &Model, config: &Configuration, d: f64) -> Result<()> {
    let sig = sigma_of(config, model.params.r_star);
    if sig > model.params.sigma0 {
        return Err(Error::PreconditionFail(format!("sigma(x) = {sig:e} exceeds sigma0 = {:e}", model.params.sigma0)));
    }
    if !(0.0..=model.params.sigma0).contains(&d) {
        return Err(Error::PreconditionFail(format!("d = {d} outside [0, sigma0]")));
    }
    Ok(())
}

/// `μ_d(x)` on the lattice of spacing `h`.
pub fn minimize_mu(
    model: &Model,
    config: &Configuration,
    d: f64,
    h: f64,
    pot: &Potential,
    opts: &SolverOptions,
) -> Result<MinimizeResult> {
    check_config(model, config, d)?;
    let dm = build_domain(config, d, h, &model.params)?;
    let u0 = initial_guess(&dm, &model.profile);
    minimize_from(model, dm, pot, u0, opts)
}

/// Clamp to `[0, ∞)` in the `ρ`-balls, to `[0, δ]` elsewhere on the mask, zero off it.
fn project(dm: &DomainMask, delta: f64, u: &mut [f64]) {
    for (c, v) in u.iter_mut().enumerate() {
        *v = if !dm.inside[c] {
            0.0
        } else if dm.rho_owner[c] == -1 {
            v.clamp(0.0, delta)
        } else {
            v.max(0.0)
        };
    }
}

struct Constraint {
    /// Densities `(x - x_i)_a u_i^δ`, gathered on the free set.
    b: Vec<Vec<f64>>,
    /// Metric Riesz representers of `b`.
    r: Vec<Vec<f64>>,
    gram: Vec<Vec<f64>>,
    piece_norm2: Vec<f64>,
}

struct State {
    u: Field,
    split: EmergingSplit,
    betas: Vec<Vec<f64>>,
    merit: f64,
}

fn evaluate(dm: &DomainMask, kv: &[f64], q: f64, wpen: f64, u: Field, split: EmergingSplit) -> Result<State> {
    let betas: Vec<Vec<f64>> = (0..dm.k()).map(|i| barycenter(&split, i, dm)).collect::<Result<_>>()?;
    let pen: f64 = betas.iter().flatten().map(|b| b * b).sum();
    let merit = energy_i(dm, &u, kv, q) + wpen * pen;
    Ok(State { u, split, betas, merit })
}

/// Split, Nehari-project and evaluate a trial field.
fn settle(dm: &DomainMask, kv: &[f64], q: f64, delta: f64, wpen: f64, mut u: Field, nehari: bool) -> Result<State> {
    project(dm, delta, &mut u);
    let mut split = emerging_split(&u, dm, delta)?;
    if nehari {
        let (un, _) = nehari_project(dm, &split, kv, q)?;
        u = un;
        split = emerging_split(&u, dm, delta)?;
    }
    evaluate(dm, kv, q, wpen, u, split)
}

/// Quasi-Newton restoration of `β_i = 0` along the representers of the base point.
fn restore(
    dm: &DomainMask,
    kv: &[f64],
    q: f64,
    delta: f64,
    wpen: f64,
    op: &SubsetOp,
    con: &Constraint,
    mut st: State,
    tol: f64,
    steps: usize,
    nehari: bool,
) -> Result<State> {
    let dim = dm.dim();
    for _ in 0..steps {
        let worst = st.betas.iter().flatten().fold(0.0f64, |m, b| m.max(b.abs()));
        if worst <= tol {
            break;
        }
        let rhs: Vec<f64> = (0..dm.k() * dim).map(|m| 0.5 * con.piece_norm2[m / dim] * st.betas[m / dim][m % dim]).collect();
        let Some(c) = cholesky_solve(&con.gram, &rhs, 1e-14) else { break };
        let mut u = st.u.clone();
        for (m, cm) in c.iter().enumerate() {
            for (k, &cell) in op.cells.iter().enumerate() {
                u[cell as usize] -= cm * con.r[m][k];
            }
        }
        match settle(dm, kv, q, delta, wpen, u, nehari) {
            Ok(next) => st = next,
            Err(_) => break,
        }
    }
    Ok(st)
}

/// Projected, preconditioned descent from `u0` on a prepared domain.
pub fn minimize_from(model: &Model, dm: DomainMask, pot: &Potential, u0: Field, opts: &SolverOptions) -> Result<MinimizeResult> {
    let q = model.params.q;
    let delta = model.params.delta;
    let dim = dm.dim();
    let k = dm.k();
    let kv = pot.sample(&dm);
    let eps = opts.eps_res.unwrap_or(1e-6 * model.params.m0);
    let wpen = opts.penalty_weight.unwrap_or(10.0 / dm.grid.h);
    let cg_cap = 20 * dm.cells.len().max(100);
    // barycentres are driven to round-off before returning
    let polish = 1e-12 * dm.radius;

    let mut st = settle(&dm, &kv, q, delta, wpen, u0, true)?;
    let mut tau = 1.0f64;
    let mut iterations = 0;
    let mut stationarity = f64::INFINITY;
    let mut converged = false;
    let mut warm: Option<(Vec<u32>, Vec<f64>)> = None;

    while iterations < opts.max_iter {
        let g = grad_i(&dm, &st.u, &kv, q);
        let free: Vec<u32> = dm
            .cells
            .iter()
            .copied()
            .filter(|&c| {
                let c = c as usize;
                let lower = st.u[c] <= 0.0 && g[c] > 0.0;
                let upper = dm.rho_owner[c] == -1 && st.u[c] >= delta && g[c] < 0.0;
                !(lower || upper)
            })
            .collect();
        let u_ref = &st.u;
        let op = SubsetOp::new(&dm, &free, |c| 1.0 + (q - 1.0) * u_ref[c].max(delta).powf(q - 2.0));
        let gb = op.gather(&g);
        let x0 = warm.as_ref().filter(|(cells, _)| *cells == free).map(|(_, s)| s.as_slice());
        let (s, _) = op.solve_from(&gb, x0, opts.cg_tol, cg_cap)?;

        let mut con = Constraint { b: Vec::new(), r: Vec::new(), gram: Vec::new(), piece_norm2: Vec::new() };
        for i in 0..k {
            let p = &st.split.pieces[i].values;
            con.piece_norm2.push(dot(&dm, p, p));
            for a in 0..dim {
                let b: Vec<f64> = free.iter().map(|&c| (dm.x(c as usize)[a] - dm.centers[i][a]) * p[c as usize]).collect();
                con.b.push(b);
            }
        }
        let jobs: Vec<usize> = (0..k * dim).collect();
        let reps = Exec::Sequential.map(&jobs, |&m| op.solve(&con.b[m], opts.cg_tol, cg_cap).map(|x| x.0));
        for r in reps {
            con.r.push(r?);
        }
        con.gram = (0..k * dim).map(|m| (0..k * dim).map(|n| op.dot(&con.b[m], &con.r[n])).collect()).collect();
        let cvec: Vec<f64> = (0..k * dim).map(|m| op.dot(&con.b[m], &s)).collect();
        let lam = cholesky_solve(&con.gram, &cvec, 1e-14).ok_or(Error::DegenerateGram(0))?;
        let mut dir = s.clone();
        for (m, l) in lam.iter().enumerate() {
            for (dk, rk) in dir.iter_mut().zip(&con.r[m]) {
                *dk -= l * rk;
            }
        }
        warm = Some((free.clone(), s));
        let slope = op.dot(&gb, &dir);
        stationarity = slope.max(0.0).sqrt();
        let worst_beta = st.betas.iter().flatten().fold(0.0f64, |m, b| m.max(b.abs()));
        if stationarity <= eps && worst_beta <= eps {
            converged = true;
            st = restore(&dm, &kv, q, delta, wpen, &op, &con, st, polish, 20, true)?;
            break;
        }
        iterations += 1;

        // backtracking on the merit
        let mut accepted = None;
        let mut t = (2.0 * tau).min(1.0);
        while t > 1e-12 {
            let mut trial = st.u.clone();
            for (kk, &cell) in free.iter().enumerate() {
                trial[cell as usize] -= t * dir[kk];
            }
            let nehari = iterations % opts.nehari_every.max(1) == 0;
            if let Ok(cand) = settle(&dm, &kv, q, delta, wpen, trial, nehari) {
                let cand = restore(&dm, &kv, q, delta, wpen, &op, &con, cand, 0.1 * eps, 4, nehari)?;
                if cand.merit <= st.merit - 1e-4 * t * slope.max(0.0) {
                    accepted = Some(cand);
                    break;
                }
            }
            t *= 0.5;
        }
        match accepted {
            Some(next) => {
                tau = t;
                st = next;
            }
            None => {
                // no representable decrease left
                converged = stationarity <= 1e3 * eps;
                st = restore(&dm, &kv, q, delta, wpen, &op, &con, st, polish, 20, true)?;
                break;
            }
        }
    }
    if !converged && iterations >= opts.max_iter {
        return Err(Error::MaxIterations(opts.max_iter));
    }
    finish(model, dm, &kv, st, iterations, stationarity, converged)
}

fn finish(
    model: &Model,
    dm: DomainMask,
    kv: &[f64],
    st: State,
    iterations: usize,
    stationarity: f64,
    converged: bool,
) -> Result<MinimizeResult> {
    let q = model.params.q;
    let g = grad_i(&dm, &st.u, kv, q);
    let nehari_residuals = st.split.pieces.iter().map(|p| dot(&dm, &g, &p.values)).collect();
    let (residual_star_u, lambdas) = projected_residual(&dm, &g, &st.split)?;
    let support_radii = support_radii(&dm, &st.u);
    Ok(MinimizeResult {
        mu: energy_i(&dm, &st.u, kv, q),
        barycenters: st.betas,
        nehari_residuals,
        lambdas,
        residual_star_u,
        support_radii,
        iterations,
        stationarity,
        converged,
        u: st.u,
        domain: dm,
    })
}

/// Largest distance from `x_i` of a positive cell whose nearest centre is `x_i`.
pub fn support_radii(dm: &DomainMask, u: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0f64; dm.k()];
    for &c in &dm.cells {
        let c = c as usize;
        if u[c] > 0.0 {
            let (j, r) = (0..dm.k()).map(|j| (j, dm.r(c, j))).fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
            out[j] = out[j].max(r);
        }
    }
    out
}

/// Unique minimizer of `I` over fields equal to `u` on `∪B(x_i, core_radius)`
/// and with values in `[0, δ]` elsewhere on the mask.
pub fn outer_relaxation(
    model: &Model,
    dm: &DomainMask,
    u: &[f64],
    pot: &Potential,
    core_radius: f64,
    max_iter: usize,
) -> Result<Field> {
    let p = &model.params;
    if core_radius < p.rho - 0.5 * p.sigma0 || core_radius >= p.r_star {
        return Err(Error::PreconditionFail(format!("core radius {core_radius} outside [rho - sigma0/2, R*)")));
    }
    let q = p.q;
    let delta = p.delta;
    let kv = pot.sample(dm);
    let outer: Vec<u32> = dm.cells.iter().copied().filter(|&c| (0..dm.k()).all(|j| dm.r(c as usize, j) >= core_radius)).collect();
    let mut v = u.to_vec();
    for &c in &outer {
        v[c as usize] = v[c as usize].clamp(0.0, delta);
    }
    let local_energy = |v: &[f64]| energy_i(dm, v, &kv, q);
    let mut e = local_energy(&v);
    let mut t = 1.0f64;
    for _ in 0..max_iter {
        let g = grad_i(dm, &v, &kv, q);
        let free: Vec<u32> = outer
            .iter()
            .copied()
            .filter(|&c| {
                let c = c as usize;
                !((v[c] <= 0.0 && g[c] > 0.0) || (v[c] >= delta && g[c] < 0.0))
            })
            .collect();
        if free.is_empty() {
            return Ok(v);
        }
        let vr = &v;
        let op = SubsetOp::new(dm, &free, |c| 1.0 + (q - 1.0) * vr[c].max(1e-3 * delta).powf(q - 2.0));
        let gb = op.gather(&g);
        let (s, _) = op.solve(&gb, 1e-12, 20 * free.len().max(100))?;
        let slope = op.dot(&gb, &s);
        if slope.sqrt() <= 1e-13 * delta.max(1e-300).sqrt() * 1e-3 || slope <= 0.0 {
            return Ok(v);
        }
        let mut step = (2.0 * t).min(1.0);
        let mut accepted = false;
        while step > 1e-14 {
            let mut trial = v.clone();
            for (kk, &c) in free.iter().enumerate() {
                let c = c as usize;
                trial[c] = (trial[c] - step * s[kk]).clamp(0.0, delta);
            }
            let et = local_energy(&trial);
            if et <= e - 1e-4 * step * slope {
                v = trial;
                e = et;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            return Ok(v);
        }
        t = step;
    }
    Err(Error::MaxIterations(max_iter))
}

/// Multipliers `λ_i` and `‖I'(u)‖_{*,u}` of a result.
pub fn extract_multipliers(model: &Model, result: &MinimizeResult, pot: &Potential) -> Result<(Vec<Vec<f64>>, f64)> {
    let dm = &result.domain;
    let kv = pot.sample(dm);
    let g = grad_i(dm, &result.u, &kv, model.params.q);
    let split = emerging_split(&result.u, dm, model.params.delta)?;
    let (norm, lambdas) = projected_residual(dm, &g, &split)?;
    Ok((lambdas, norm))
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SearchOptions {
    /// Initial coordinate step; `R*/4` when absent.
    pub initial_step: Option<f64>,
    /// Stop once the step falls below this; `h` when absent.
    pub min_step: Option<f64>,
    /// Additional random starting configurations drawn from the search box.
    pub random_starts: usize,
    pub max_evaluations: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions { initial_step: None, min_step: None, random_starts: 0, max_evaluations: 400 }
    }
}

#[derive(Clone, Debug)]
pub struct SearchOutcome {
    pub best_config: Configuration,
    pub best_mu: f64,
    pub seed_mus: Vec<Option<f64>>,
    pub evaluations: usize,
}

/// Half-width `L = 4R* + a₂` of the search box.
pub fn search_box(model: &Model, pot: &Potential) -> f64 {
    4.0 * model.params.r_star + pot.a2
}

/// Coordinate ascent for `μ_{k,d} = sup μ_d(x)` over admissible configurations.
#[allow(clippy::too_many_arguments)]
pub fn mu_k_search(
    model: &Model,
    k: usize,
    d: f64,
    h: f64,
    pot: &Potential,
    seeds: &[Configuration],
    opts: &SolverOptions,
    sopts: &SearchOptions,
    exec: Exec,
) -> Result<SearchOutcome> {
    use rand::{Rng, SeedableRng};
    if seeds.is_empty() || seeds.iter().any(|s| s.k() != k) {
        return Err(Error::Invalid(format!("need nonempty seeds with k = {k} points")));
    }
    let l = search_box(model, pot);
    let admissible = |c: &Configuration| {
        sigma_of(c, model.params.r_star) <= model.params.sigma0 && c.points.iter().flatten().all(|v| v.abs() <= l)
    };
    let eval = |c: &Configuration| -> Option<f64> {
        if !admissible(c) {
            return None;
        }
        minimize_mu(model, c, d, h, pot, opts).ok().map(|r| r.mu)
    };
    let mut starts: Vec<Configuration> = seeds.to_vec();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(opts.seed);
    let dim = seeds[0].dim();
    let mut drawn = 0;
    let mut attempts = 0;
    while drawn < sopts.random_starts && attempts < 10_000 {
        attempts += 1;
        let pts: Vec<Vec<f64>> = (0..k).map(|_| (0..dim).map(|_| rng.gen_range(-l..l)).collect()).collect();
        let c = Configuration { points: pts };
        if admissible(&c) {
            starts.push(c);
            drawn += 1;
        }
    }
    let seed_mus: Vec<Option<f64>> = exec.map(seeds, eval);
    let mut evaluations = seeds.len();
    let mut best: Option<(Configuration, f64)> = None;
    for (si, start) in starts.iter().enumerate() {
        let mut cur = start.clone();
        let mut cur_mu = match if si < seeds.len() { seed_mus[si] } else { eval(start) } {
            Some(m) => m,
            None => continue,
        };
        if si >= seeds.len() {
            evaluations += 1;
        }
        let mut step = sopts.initial_step.unwrap_or(model.params.r_star / 4.0);
        let min_step = sopts.min_step.unwrap_or(h);
        while step >= min_step && evaluations < sopts.max_evaluations {
            let mut moves = Vec::new();
            for j in 0..k {
                for a in 0..dim {
                    for sgn in [1.0, -1.0] {
                        let mut c = cur.clone();
                        c.points[j][a] += sgn * step;
                        moves.push(c);
                    }
                }
            }
            let vals = exec.map(&moves, eval);
            evaluations += moves.len();
            let top = vals
                .iter()
                .enumerate()
                .filter_map(|(i, v)| v.map(|v| (i, v)))
                .fold(None, |acc: Option<(usize, f64)>, x| match acc {
                    Some(a) if a.1 >= x.1 => Some(a),
                    _ => Some(x),
                });
            match top {
                Some((i, v)) if v > cur_mu + 1e-12 * cur_mu.abs() => {
                    cur = moves[i].clone();
                    cur_mu = v;
                }
                _ => step *= 0.5,
            }
        }
        if best.as_ref().is_none_or(|b| cur_mu > b.1) {
            best = Some((cur, cur_mu));
        }
    }
    let (best_config, best_mu) = best.ok_or_else(|| Error::PreconditionFail("no seed admits a minimizer".into()))?;
    Ok(SearchOutcome { best_config, best_mu, seed_mus, evaluations })
}

#[derive(Clone, Debug)]
pub struct SweepEntry {
    pub alpha: f64,
    pub result: MinimizeResult,
    /// `max_i ‖u - w(· - x_i)‖_{L^∞(B(x_i, R₀))}`.
    pub deviation: f64,
    pub lambda_max: f64,
}

/// Deviation from translated ground states on the `R₀`-balls.
pub fn bump_deviation(model: &Model, dm: &DomainMask, u: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for c in 0..dm.len() {
        for j in 0..dm.k() {
            let r = dm.r(c, j);
            if r < model.params.r0 {
                let others: f64 = (0..dm.k()).filter(|&i| i != j).map(|i| eval_w(&model.profile, dm.r(c, i))).sum();
                let target = eval_w(&model.profile, r) + others;
                worst = worst.max((u[c] - target).abs());
            }
        }
    }
    worst
}

/// Minimizers for each `α` of a decreasing list.
#[allow(clippy::too_many_arguments)]
pub fn alpha_sweep(
    model: &Model,
    kind: crate::energy::PotentialKind,
    alphas: &[f64],
    config: &Configuration,
    d: f64,
    h: f64,
    opts: &SolverOptions,
    exec: Exec,
) -> Result<Vec<SweepEntry>> {
    if alphas.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::Invalid("alphas must be decreasing".into()));
    }
    let runs = exec.map(alphas, |&alpha| -> Result<SweepEntry> {
        let pot = crate::energy::potential_make(kind, alpha)?;
        let result = minimize_mu(model, config, d, h, &pot, opts)?;
        let deviation = bump_deviation(model, &result.domain, &result.u);
        let lambda_max = result.lambdas.iter().map(|l| l.iter().map(|v| v * v).sum::<f64>().sqrt()).fold(0.0, f64::max);
        Ok(SweepEntry { alpha, result, deviation, lambda_max })
    });
    runs.into_iter().collect()
}

/// Euclidean distance helper re-exported for callers building configurations.
pub fn point_distance(a: &[f64], b: &[f64]) -> f64 {
    dist(a, b)
}
