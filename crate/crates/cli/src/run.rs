//! Pipelines behind each manifest command.

use crate::manifest::{Command, Manifest};
use multibump::energy::{energy_report, potential_make, Potential};
use multibump::exec::Exec;
use multibump::grid::{read_field_csv, write_field_csv, write_rows_csv, Configuration};
use multibump::minimizer::{alpha_sweep, minimize_mu, mu_k_search, MinimizeResult, Model};
use multibump::params::{default_sigma0, derive_constants};
use multibump::radial::{boundary_fit, m0_nehari, solve_ground_state, write_profile_csv};
use multibump::split::emerging_split;
use multibump::verify::{annulus_linf_check, check_support, residual_pde, stability_ratio, support_comparison_bound, Check, Stability, VerificationReport};
use serde::Serialize;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

pub struct Invocation {
    pub manifest: PathBuf,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub seed: Option<u64>,
    pub verbose: bool,
}

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure { code: 1, message: message.into() }
}

impl From<multibump::Error> for Failure {
    fn from(e: multibump::Error) -> Failure {
        Failure { code: e.exit_code() as u8, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Failure {
        invalid(e.to_string())
    }
}

struct Ctx {
    out: PathBuf,
    verbose: bool,
}

impl Ctx {
    fn log(&self, msg: &str) {
        if self.verbose {
            eprintln!("{msg}");
        }
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>, Failure> {
        Ok(BufWriter::new(File::create(self.out.join(name))?))
    }

    fn write_toml<T: Serialize>(&self, name: &str, value: &T) -> Result<(), Failure> {
        let text = toml::to_string(value).map_err(|e| invalid(e.to_string()))?;
        fs::write(self.out.join(name), text)?;
        Ok(())
    }
}

pub fn run(inv: &Invocation) -> Result<(), Failure> {
    let text = fs::read_to_string(&inv.manifest).map_err(|e| invalid(format!("cannot read {}: {e}", inv.manifest.display())))?;
    let mut m = Manifest::parse(&text).map_err(|e| invalid(format!("invalid manifest: {e}")))?;
    if let Some(s) = inv.seed {
        m.seed = s;
    }
    m.solver.seed = m.seed;
    let base = inv.manifest.parent().map(Path::to_path_buf).unwrap_or_default();
    let out = inv.out.clone().or_else(|| m.out.as_ref().map(|o| base.join(o))).ok_or_else(|| invalid("no output directory: pass --out or set `out`"))?;
    if let Some(input) = &m.export.input {
        let p = base.join(input);
        let p = p.canonicalize().map_err(|e| invalid(format!("export.input {}: {e}", p.display())))?;
        m.export.input = Some(p);
    }
    configure_threads(inv.threads)?;
    fs::create_dir_all(&out)?;
    m.out = Some(fs::canonicalize(&out)?);
    let ctx = Ctx { out, verbose: inv.verbose };

    if m.command == Command::Export {
        ctx.write_toml("manifest.resolved.toml", &m)?;
        return export(&ctx, &m);
    }
    let (model, pot) = resolve(&ctx, &mut m)?;
    ctx.write_toml("manifest.resolved.toml", &m)?;
    match m.command {
        Command::GroundState => ground_state(&ctx, &model),
        Command::Minimize => minimize(&ctx, &m, &model, &pot).map(|_| ()),
        Command::Search => search(&ctx, &m, &model, &pot),
        Command::Sweep => sweep(&ctx, &m, &model),
        Command::Verify => verify(&ctx, &m, &model, &pot),
        Command::Export => unreachable!(),
    }
}

#[cfg(feature = "parallel")]
fn configure_threads(threads: Option<usize>) -> Result<(), Failure> {
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| invalid(e.to_string()))?;
    }
    Ok(())
}

#[cfg(not(feature = "parallel"))]
fn configure_threads(_threads: Option<usize>) -> Result<(), Failure> {
    Ok(())
}

/// Solve the ground state, derive constants and fill every defaulted key.
fn resolve(ctx: &Ctx, m: &mut Manifest) -> Result<(Model, Potential), Failure> {
    let pot = potential_make(m.potential.kind, m.potential.alpha)?;
    ctx.log(&format!("ground state q = {}, N = {}", m.model.q, m.model.n));
    let profile = solve_ground_state(m.model.q, m.model.n, m.model.tol)?;
    let a1 = match m.model.a1 {
        Some(a) => a,
        None => {
            let mut a = pot.a1;
            for &alpha in &m.sweep.alphas {
                a = a.max(potential_make(m.potential.kind, alpha)?.a1);
            }
            a
        }
    };
    let params = derive_constants(&profile, m.model.sigma0.unwrap_or_else(|| default_sigma0(&profile)), a1)?;
    m.model.a1 = Some(a1);
    m.model.sigma0 = Some(params.sigma0);
    let h = *m.domain.h.get_or_insert(params.r_star / 32.0);
    m.domain.d.get_or_insert(0.5 * params.sigma0);
    m.solver.eps_res.get_or_insert(1e-6 * params.m0);
    m.solver.penalty_weight.get_or_insert(10.0 / h);
    if m.command == Command::Search {
        m.search.initial_step.get_or_insert(params.r_star / 4.0);
        m.search.min_step.get_or_insert(h);
    }
    if m.command == Command::Verify {
        m.verify.annulus_radius.get_or_insert(params.r_star);
    }
    Ok((Model::new(profile, params), pot))
}

fn config_of(m: &Manifest) -> Result<Configuration, Failure> {
    Ok(Configuration::new(m.domain.centers.clone())?)
}

#[derive(Serialize)]
struct GroundStateReport {
    q: f64,
    n: usize,
    w0: f64,
    r_star: f64,
    m0: f64,
    m0_nehari: f64,
    boundary_exponent: f64,
    boundary_prefactor: f64,
}

fn ground_state(ctx: &Ctx, model: &Model) -> Result<(), Failure> {
    let p = &model.profile;
    let (e, c) = boundary_fit(p)?;
    ctx.write_toml(
        "ground_state.toml",
        &GroundStateReport { q: p.q, n: p.n, w0: p.w0, r_star: p.r_star, m0: p.m0, m0_nehari: m0_nehari(p), boundary_exponent: e, boundary_prefactor: c },
    )?;
    fs::write(ctx.out.join("constants.toml"), model.params.report(p))?;
    write_profile_csv(p, ctx.create("profile.csv")?)?;
    Ok(())
}

#[derive(Serialize)]
struct MinimizeSummary {
    mu: f64,
    mu_over_m0: f64,
    iterations: usize,
    converged: bool,
    stationarity: f64,
    residual_star_u: f64,
    barycenters: Vec<Vec<f64>>,
    nehari_residuals: Vec<f64>,
    lambdas: Vec<Vec<f64>>,
    support_radii: Vec<f64>,
}

fn summary(r: &MinimizeResult, m0: f64) -> MinimizeSummary {
    MinimizeSummary {
        mu: r.mu,
        mu_over_m0: r.mu / m0,
        iterations: r.iterations,
        converged: r.converged,
        stationarity: r.stationarity,
        residual_star_u: r.residual_star_u,
        barycenters: r.barycenters.clone(),
        nehari_residuals: r.nehari_residuals.clone(),
        lambdas: r.lambdas.clone(),
        support_radii: r.support_radii.clone(),
    }
}

fn minimize(ctx: &Ctx, m: &Manifest, model: &Model, pot: &Potential) -> Result<MinimizeResult, Failure> {
    let cfg = config_of(m)?;
    ctx.log(&format!("minimizing with k = {}", cfg.k()));
    let r = minimize_mu(model, &cfg, m.domain.d.unwrap_or_default(), m.domain.h.unwrap_or_default(), pot, &m.solver)?;
    ctx.log(&format!("mu = {:.12} after {} iterations", r.mu, r.iterations));
    ctx.write_toml("result.toml", &summary(&r, model.params.m0))?;
    let split = emerging_split(&r.u, &r.domain, model.params.delta)?;
    let rep = energy_report(&r.domain, &r.u, &split, &pot.sample(&r.domain), model.params.q)?;
    ctx.write_toml("energy.toml", &rep)?;
    write_field_csv(&r.domain, &r.u, ctx.create("field.csv")?)?;
    Ok(r)
}

#[derive(Serialize)]
struct SearchReport {
    best_mu: f64,
    best_config: Vec<Vec<f64>>,
    /// `μ_d` of each seed; NaN where the seed was rejected or failed.
    seed_mus: Vec<f64>,
    evaluations: usize,
}

fn search(ctx: &Ctx, m: &Manifest, model: &Model, pot: &Potential) -> Result<(), Failure> {
    let seeds: Vec<Configuration> = if m.search.seeds.is_empty() {
        vec![config_of(m)?]
    } else {
        m.search.seeds.iter().map(|s| Configuration::new(s.clone())).collect::<multibump::Result<_>>()?
    };
    let res = mu_k_search(
        model,
        m.search.k,
        m.domain.d.unwrap_or_default(),
        m.domain.h.unwrap_or_default(),
        pot,
        &seeds,
        &m.solver,
        &m.search.options(),
        Exec::default(),
    )?;
    ctx.write_toml(
        "search.toml",
        &SearchReport {
            best_mu: res.best_mu,
            best_config: res.best_config.points,
            seed_mus: res.seed_mus.iter().map(|v| v.unwrap_or(f64::NAN)).collect(),
            evaluations: res.evaluations,
        },
    )
}

fn sweep(ctx: &Ctx, m: &Manifest, model: &Model) -> Result<(), Failure> {
    let cfg = config_of(m)?;
    let entries = alpha_sweep(model, m.potential.kind, &m.sweep.alphas, &cfg, m.domain.d.unwrap_or_default(), m.domain.h.unwrap_or_default(), &m.solver, Exec::default())?;
    let mut w = csv_writer(ctx.create("sweep.csv")?);
    w.write_record(["alpha", "mu", "deviation", "lambda_max", "support_max", "iterations", "converged"]).map_err(csv_err)?;
    for (i, e) in entries.iter().enumerate() {
        let r = &e.result;
        let smax = r.support_radii.iter().copied().fold(0.0, f64::max);
        w.write_record([
            format!("{:.16e}", e.alpha),
            format!("{:.16e}", r.mu),
            format!("{:.16e}", e.deviation),
            format!("{:.16e}", e.lambda_max),
            format!("{:.16e}", smax),
            r.iterations.to_string(),
            r.converged.to_string(),
        ])
        .map_err(csv_err)?;
        write_field_csv(&r.domain, &r.u, ctx.create(&format!("field_{i}.csv"))?)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_writer<W: std::io::Write>(w: W) -> csv::Writer<W> {
    csv::Writer::from_writer(w)
}

fn csv_err(e: csv::Error) -> Failure {
    invalid(e.to_string())
}

fn verify(ctx: &Ctx, m: &Manifest, model: &Model, pot: &Potential) -> Result<(), Failure> {
    let r = minimize(ctx, m, model, pot)?;
    let p = &model.params;
    let dm = &r.domain;
    let mut rep = VerificationReport::default();
    rep.extend(check_support(dm, &r.u, p, m.verify.support_tol));
    let outside = dm
        .cells
        .iter()
        .map(|&c| c as usize)
        .filter(|&c| (0..dm.k()).all(|j| dm.r(c, j) >= p.r_star))
        .map(|c| r.u[c])
        .fold(0.0, f64::max);
    if outside > 0.0 {
        rep.extend(support_comparison_bound(dm, &r.u, &model.profile, p, outside.min(p.delta), dm.grid.h)?);
        rep.notes.push("comparison field shifted outward by h".into());
    } else {
        rep.notes.push("u vanishes outside the R*-balls; comparison skipped".into());
    }
    match stability_ratio(dm, &r.u, &model.profile, p, m.solver.eps_res.unwrap_or(1e-6 * p.m0)) {
        Ok(Stability::Ratio(v)) => rep.push(Check::upper("stability_ratio", "region norm of u - sum w over the projected dual residual", v, f64::INFINITY, 0.0)),
        Ok(Stability::Degenerate) => rep.notes.push("stability ratio degenerate, skipped".into()),
        Err(e) => rep.notes.push(format!("stability ratio skipped: {e}")),
    }
    rep.notes.push("stability hypotheses: L2 deviation <= 0.2 |w|_2, sigma <= sigma0/2".into());
    let radius = m.verify.annulus_radius.unwrap_or(p.r_star);
    rep.push(annulus_linf_check(dm, &r.u, &model.profile, p, pot.alpha, radius)?);
    rep.extend(residual_pde(&r, pot, p.q, m.verify.residual_tol)?);
    fs::write(ctx.out.join("verification.toml"), rep.to_toml()?)?;
    rep.write_csv(ctx.create("verification.csv")?)?;
    Ok(())
}

fn export(ctx: &Ctx, m: &Manifest) -> Result<(), Failure> {
    let input = m.export.input.as_ref().ok_or_else(|| invalid("export.input missing"))?;
    let file = File::open(input).map_err(|e| invalid(format!("cannot open {}: {e}", input.display())))?;
    let rows = read_field_csv(file)?;
    let dim = rows.first().map(|r| r.0.len()).unwrap_or(m.model.n);
    if rows.iter().any(|r| r.0.len() != dim) {
        return Err(invalid("ragged field CSV"));
    }
    write_rows_csv(dim, &rows, ctx.create("field.csv")?)?;
    Ok(())
}
