mod common;

use common::*;
use multibump::energy::{comparison_field, potential_make, PotentialKind};
use multibump::exec::Exec;
use multibump::grid::{DomainMask, Field};
use multibump::minimizer::{minimize_mu, MinimizeResult, SearchOptions, SolverOptions};
use multibump::verify::*;
use multibump::Error;

fn unit() -> multibump::energy::Potential {
    potential_make(PotentialKind::Unit, 0.0).unwrap()
}

fn single_minimizer(div: f64) -> MinimizeResult {
    let m = model();
    minimize_mu(m, &config(&[[0.0, 0.0]]), m.default_d(), m.params.r_star / div, &unit(), &SolverOptions::default()).unwrap()
}

/// Two lattice-aligned bumps at distance ≥ 2R*, so σ(x) = 0.
fn pair(div: f64) -> DomainMask {
    let m = model();
    let h = m.params.r_star / div;
    let s = (m.params.r_star / h).ceil() * h;
    domain(&[[-s, 0.0], [s, 0.0]], div)
}

fn perturbed(dm: &DomainMask, eps: f64) -> Field {
    let rp = 0.5 * model().params.rho;
    let mut u = bumps(dm);
    for &c in &dm.cells {
        let c = c as usize;
        for j in 0..dm.k() {
            let r = dm.r(c, j);
            if r < rp {
                u[c] += eps * (std::f64::consts::FRAC_PI_2 * r / rp).cos().powi(2);
            }
        }
    }
    u
}

#[test]
fn support_of_exact_ground_state() {
    let m = model();
    let p = &m.params;
    let dm = domain(&[[0.0, 0.0]], 32.0);
    let u = bumps(&dm);
    let checks = check_support(&dm, &u, p, 1e-6);
    assert_eq!(checks.len(), 3);
    assert!(checks.iter().all(|c| c.pass && c.measured == 0.0), "{checks:?}");
    // emerging support is the level set r = R* - 4σ₀
    let reach = (0..dm.len()).filter(|&c| u[c] > p.delta).map(|c| dm.r(c, 0)).fold(0.0, f64::max);
    let level = p.r_star - 4.0 * p.sigma0;
    assert!(reach <= level && reach > level - dm.grid.h * 2f64.sqrt(), "{reach} vs {level}");

    let flat: Field = (0..dm.len()).map(|c| if dm.inside[c] { 1.0 } else { 0.0 }).collect();
    let leaky = check_support(&dm, &flat, p, 1e-6);
    assert!(!leaky[1].pass && leaky[1].measured > 1e-3);
}

#[test]
fn support_of_unit_minimizer() {
    let m = model();
    let r = single_minimizer(32.0);
    let checks = check_support(&r.domain, &r.u, &m.params, 1e-6);
    assert!(checks.iter().all(|c| c.pass), "{checks:?}");
}

#[test]
fn comparison_examples() {
    let m = model();
    let p = &m.params;
    let dm = domain(&[[0.0, 0.0]], 32.0);
    let kappa = 0.5 * p.delta;
    let zero = support_comparison_bound(&dm, &dm.zero(), &m.profile, p, kappa, 0.0).unwrap();
    assert!(zero.iter().all(|c| c.pass), "{zero:?}");
    // the comparison field itself, capped at κ to meet the precondition
    let cmp: Field = comparison_field(&dm, kappa, &m.profile, p).unwrap().into_iter().map(|v| v.min(kappa)).collect();
    let same = support_comparison_bound(&dm, &cmp, &m.profile, p, kappa, 0.0).unwrap();
    assert!(same.iter().all(|c| c.pass), "{same:?}");
    assert_eq!(same[0].measured, 0.0);

    // a wider mask reaches past the κ-inflated ball, where w̃ vanishes
    let wide = multibump::grid::build_domain(&config(&[[0.0, 0.0]]), 4.0 * kappa.powf((2.0 - p.q) / 3.0), p.r_star / 32.0, p).unwrap();
    let mut stray = wide.zero();
    let far = (0..wide.len()).filter(|&c| wide.inside[c]).max_by(|&a, &b| wide.r(a, 0).total_cmp(&wide.r(b, 0))).unwrap();
    stray[far] = 0.5 * kappa;
    let bad = support_comparison_bound(&wide, &stray, &m.profile, p, kappa, 0.0).unwrap();
    assert!(!bad[0].pass && !bad[1].pass, "{bad:?}");

    let big: Field = vec![2.0 * kappa; dm.len()];
    assert!(matches!(support_comparison_bound(&dm, &big, &m.profile, p, kappa, 0.0), Err(Error::PreconditionFail(_))));

    let r = single_minimizer(32.0);
    let outside = (0..r.domain.len()).filter(|&c| r.domain.r(c, 0) >= p.r_star).map(|c| r.u[c]).fold(0.0, f64::max);
    let k = outside.clamp(1e-3 * p.delta, p.delta);
    let fin = support_comparison_bound(&r.domain, &r.u, &m.profile, p, k, r.domain.grid.h).unwrap();
    assert!(fin.iter().all(|c| c.pass), "{fin:?}");
}

#[test]
fn stability_examples() {
    let m = model();
    let dm = pair(16.0);
    let sw = sum_of_bumps(&dm, &m.profile);
    assert_eq!(sw, bumps(&dm));
    assert_eq!(stability_ratio(&dm, &sw, &m.profile, &m.params, 1e-8).unwrap(), Stability::Degenerate);

    let ratio = |eps: f64| match stability_ratio(&dm, &perturbed(&dm, eps), &m.profile, &m.params, 1e-8).unwrap() {
        Stability::Ratio(r) => r,
        Stability::Degenerate => panic!("degenerate at eps = {eps}"),
    };
    let (a, b) = (ratio(1e-2), ratio(1e-3));
    assert!(stable_within(a, b, 3.0), "{a} vs {b}");

    let neg: Field = sw.iter().map(|v| v - 1e-3).collect();
    assert!(matches!(stability_ratio(&dm, &neg, &m.profile, &m.params, 1e-8), Err(Error::HypothesisFail(_))));
    let doubled: Field = sw.iter().map(|v| 2.0 * v).collect();
    assert!(matches!(stability_ratio(&dm, &doubled, &m.profile, &m.params, 1e-8), Err(Error::HypothesisFail(_))));
    let close = domain(&[[0.0, 0.0], [2.0 * m.params.r_star - 0.9 * m.params.sigma0, 0.0]], 16.0);
    let u = bumps(&close);
    assert!(matches!(stability_ratio(&close, &u, &m.profile, &m.params, 1e-8), Err(Error::HypothesisFail(_))));
    // an off-centre perturbation moves the barycentres
    let mut skew = sw.clone();
    for &c in &dm.cells {
        let c = c as usize;
        if dm.x(c)[1] > 0.0 && dm.r(c, 0) < m.params.rho {
            skew[c] *= 1.05;
        }
    }
    assert!(matches!(stability_ratio(&dm, &skew, &m.profile, &m.params, 1e-8), Err(Error::HypothesisFail(_))));
}

#[test]
fn annulus_examples() {
    let m = model();
    let p = &m.params;
    let dm = pair(16.0);
    let u = bumps(&dm);
    assert_eq!(annulus_deviation(&dm, &u, &m.profile, p.r_star), 0.0);
    let c = annulus_linf_check(&dm, &u, &m.profile, p, 0.0, p.r_star).unwrap();
    assert!(c.pass && c.measured == 0.0 && c.bound.is_infinite());
    let v = perturbed(&dm, 1e-2);
    let c = annulus_linf_check(&dm, &v, &m.profile, p, 0.0, 0.5 * (p.rho + p.r_star)).unwrap();
    assert!(c.pass && c.measured.is_finite());
    assert!(annulus_linf_check(&dm, &u, &m.profile, p, 0.0, p.rho).is_err());
    // the deviation can only grow as the excluded balls shrink
    let shifted: Field = u.iter().map(|x| if *x > 0.0 { x * 1.01 } else { 0.0 }).collect();
    let outer = annulus_deviation(&dm, &shifted, &m.profile, p.r_star);
    let inner = annulus_deviation(&dm, &shifted, &m.profile, 0.5 * (p.rho + p.r_star));
    assert!(inner >= outer);
}

#[test]
fn residual_examples() {
    let m = model();
    let r = single_minimizer(16.0);
    let tol = 1e-3 * m.params.m0;
    let checks = residual_pde(&r, &unit(), m.params.q, tol).unwrap();
    assert!(checks.iter().all(|c| c.pass), "{checks:?}");

    let mut noise = r.clone();
    let mut s = 0x2545f4914f6cdd1du64;
    for &c in &noise.domain.cells {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
        noise.u[c as usize] = (s >> 11) as f64 / (1u64 << 53) as f64;
    }
    let control = residual_pde(&noise, &unit(), m.params.q, tol).unwrap();
    assert!(!control[0].pass && control[0].measured > 1e3 * checks[0].measured.max(tol * 1e-3));
}

#[test]
fn multiplier_bound_fit() {
    let m = model();
    let dm = pair(16.0);
    let exact = multiplier_sample(&dm, &bumps(&dm), &dm.zero(), &m.profile, &m.params).unwrap();
    assert_eq!(exact.deviation, 0.0);
    assert_eq!(exact.inhomogeneity, 0.0);

    let family = |eps: f64| -> Vec<MultiplierSample> {
        let u = perturbed(&dm, eps);
        [0.0, 1.0, 3.0]
            .iter()
            .map(|&a| {
                let f: Field = (0..dm.len()).map(|c| if dm.inside[c] { a * eps * dm.x(c)[0].sin() } else { 0.0 }).collect();
                multiplier_sample(&dm, &u, &f, &m.profile, &m.params).unwrap()
            })
            .collect()
    };
    let (s1, s2) = (family(1e-2), family(1e-3));
    let (c1, c2) = (fit_multiplier_constant(&s1), fit_multiplier_constant(&s2));
    assert!(c1 > 0.0 && stable_within(c1, c2, 3.0), "{c1} vs {c2}");
    for s in s1.iter().chain(&s2) {
        assert!(s.lambda <= c1.max(c2) * (s.deviation + s.inhomogeneity) * (1.0 + 1e-12));
    }
    assert!(exact.lambda <= 1e-6);
}

#[test]
fn hierarchy_smoke() {
    // coarse spacing: the tolerance is widened to cover the grid energy error
    let m = model();
    let h = m.params.r_star / 16.0;
    let pot = potential_make(PotentialKind::CompactBump, 0.1).unwrap();
    let seeds1 = vec![config(&[[0.0, 0.0]])];
    let seeds2 = vec![config(&[[0.0, 0.0], [2.0 * m.params.r0, 0.0]])];
    let sopts = SearchOptions { initial_step: Some(2.0 * h), min_step: Some(2.0 * h), random_starts: 0, max_evaluations: 5 };
    let (check, mu1, mu2) =
        check_mu_hierarchy(m, m.default_d(), h, &pot, &seeds1, &seeds2, &SolverOptions::default(), &sopts, 2e-2, Exec::default()).unwrap();
    assert!(check.pass, "{check:?}");
    assert!(mu2 > mu1);
}

#[test]
fn report_serialisation() {
    let mut rep = VerificationReport::default();
    rep.push(Check::upper("a", "first", 1.0, 2.0, 0.0));
    rep.extend([Check::lower("b", "second", 1.0, 2.0, 0.5)]);
    rep.notes.push("note".into());
    assert!(!rep.all_pass());
    assert!(rep.get("a").unwrap().pass);
    assert!(rep.get("missing").is_none());
    let text = rep.to_toml().unwrap();
    let back: toml::Value = toml::from_str(&text).unwrap();
    assert_eq!(back["checks"].as_array().unwrap().len(), 2);
    let mut buf = Vec::new();
    rep.write_csv(&mut buf).unwrap();
    let s = String::from_utf8(buf).unwrap();
    assert!(s.starts_with("name,measured,bound,pass\n"));
    assert_eq!(s.lines().count(), 3);
    assert!(total_mass(&pair(16.0), &bumps(&pair(16.0))) > 0.0);
}
