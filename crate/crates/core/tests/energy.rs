mod common;

use common::*;
use multibump::energy::*;
use multibump::grid::Field;
use multibump::norms::{dual_norm_xd, norm_xd};
use multibump::split::emerging_split;
use multibump::Error;
use proptest::prelude::*;

#[test]
fn potential_families() {
    let dm = domain(&[[0.0, 0.0]], 16.0);
    let unit = potential_make(PotentialKind::Unit, 0.3).unwrap();
    assert!(unit.sample(&dm).iter().all(|&k| k == 1.0));
    assert_eq!(unit.lp_loc(2, model().params.r_star, 20.0), 0.0);

    let bump = potential_make(PotentialKind::CompactBump, 0.1).unwrap();
    let radius = ((4.0 / 3.0) * 2f64.ln()).sqrt();
    assert!((bump.a2 - radius).abs() < 1e-15);
    // sampled boundary of {K >= 1} along a fine ray
    let last = (0..200_000).map(|i| i as f64 * 1e-5).filter(|&r| bump.value(&[r, 0.0]) >= 1.0).fold(0.0, f64::max);
    assert!((last - radius).abs() < 2e-5);
    assert!((bump.a1 - 1.2).abs() < 1e-15);

    let dip = potential_make(PotentialKind::RadialDip, 0.1).unwrap();
    assert_eq!(dip.a1, 1.0);
    assert!(dip.sample(&dm).iter().all(|&k| k < 1.0));
    assert!(potential_make(PotentialKind::RadialDip, -0.1).is_err());

    let wide = domain(&[[0.0, 0.0], [30.0, 0.0]], 8.0);
    for p in [&bump, &dip] {
        let checks = p.check(&wide);
        assert!(checks[0].1 && checks[2].1, "{checks:?}");
    }
    assert!(bump.lp_loc(2, model().params.r_star, 10.0) > 0.0);
}

#[test]
fn functional_examples() {
    let m = model();
    let dm = domain(&[[0.0, 0.0]], 64.0);
    let kv = ones(&dm);
    assert_eq!(energy_i(&dm, &dm.zero(), &kv, Q), 0.0);
    let u = bumps(&dm);
    assert_eq!(energy_i(&dm, &u, &kv, Q), energy_iinf(&dm, &u, Q));
    assert!((energy_i(&dm, &u, &kv, Q) - m.params.m0).abs() < 1e-3 * m.params.m0);
    assert_eq!(grad_i(&dm, &dm.zero(), &kv, Q), dm.zero());
}

#[test]
fn jdelta_examples() {
    let m = model();
    let dm = domain(&[[0.0, 0.0]], 32.0);
    let kv = ones(&dm);
    assert_eq!(j_delta(&dm, &dm.zero(), &kv, m.params.delta, Q), 0.0);
    let piece: Field = bumps(&dm).iter().map(|w| (w - m.params.delta).max(0.0)).collect();
    assert!(j_delta(&dm, &piece, &kv, m.params.delta, Q) > 0.0);
}

fn noisy(seed: u64, amp: f64, div: f64) -> (multibump::grid::DomainMask, Field) {
    let dm = domain(&[[0.0, 0.0], [2.0 * model().params.r_star, 0.0]], div);
    let mut s = seed | 1;
    let u = bumps(&dm)
        .into_iter()
        .map(|w| {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            let r = (s >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0;
            (w * (1.0 + amp * r)).max(0.0)
        })
        .collect();
    (dm, u)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn energy_decomposition(seed in any::<u64>(), amp in 0.0f64..0.3, alpha in 0.0f64..0.2) {
        let (dm, u) = noisy(seed, amp, 12.0);
        let d = model().params.delta;
        let kv = potential_make(PotentialKind::CompactBump, alpha).unwrap().sample(&dm);
        let sp = emerging_split(&u, &dm, d).unwrap();
        let whole = energy_i(&dm, &u, &kv, Q);
        let parts = energy_i(&dm, &sp.u_sub, &kv, Q) + sp.pieces.iter().map(|p| j_delta(&dm, &p.values, &kv, d, Q)).sum::<f64>();
        prop_assert!((whole - parts).abs() <= 1e-6 * whole.abs().max(1.0), "{} vs {}", whole, parts);
    }

    #[test]
    fn gradient_matches_central_difference(seed in any::<u64>(), amp in 0.05f64..0.3) {
        let (dm, u) = noisy(seed, amp, 10.0);
        let (_, dir) = noisy(seed ^ 0x9e37, 1.0, 10.0);
        let kv = potential_make(PotentialKind::RadialDip, 0.1).unwrap().sample(&dm);
        let g = grad_i(&dm, &u, &kv, Q);
        let eps = 1e-5;
        let plus: Field = u.iter().zip(&dir).map(|(a, b)| a + eps * b).collect();
        let minus: Field = u.iter().zip(&dir).map(|(a, b)| a - eps * b).collect();
        let fd = (energy_i(&dm, &plus, &kv, Q) - energy_i(&dm, &minus, &kv, Q)) / (2.0 * eps);
        let an = multibump::linalg::dot(&dm, &g, &dir);
        prop_assert!((fd - an).abs() <= 1e-6 * an.abs().max(1.0), "{} vs {}", fd, an);
    }

    #[test]
    fn nehari_scale_inverts_prescaling(t in 0.5f64..2.0) {
        let m = model();
        let dm = domain(&[[0.0, 0.0]], 16.0);
        let kv = ones(&dm);
        let sp = emerging_split(&bumps(&dm), &dm, m.params.delta).unwrap();
        let (un, _) = nehari_project(&dm, &sp, &kv, Q).unwrap();
        let mut scaled = emerging_split(&un, &dm, m.params.delta).unwrap();
        scaled.pieces[0].values.iter_mut().for_each(|v| *v /= t);
        let got = nehari_scale(&dm, &scaled, 0, &kv, Q).unwrap();
        prop_assert!((got - t).abs() <= 1e-9 * t, "{} vs {}", got, t);
        let tol = 1e-6 * got;
        prop_assert!(nehari_derivative(&dm, &scaled, 0, &kv, Q, got - tol).unwrap() > 0.0);
        prop_assert!(nehari_derivative(&dm, &scaled, 0, &kv, Q, got + tol).unwrap() < 0.0);
    }
}

#[test]
fn nehari_scale_of_ground_state() {
    let m = model();
    let dm = domain(&[[0.0, 0.0]], 64.0);
    let sp = emerging_split(&bumps(&dm), &dm, m.params.delta).unwrap();
    let t = nehari_scale(&dm, &sp, 0, &ones(&dm), Q).unwrap();
    assert!((t - 1.0).abs() < 1e-3, "t = {t}");
}

#[test]
fn nehari_scale_refines_at_second_order() {
    let m = model();
    let t: Vec<f64> = [16.0, 32.0, 64.0]
        .iter()
        .map(|&div| {
            let dm = domain(&[[0.0, 0.0]], div);
            let sp = emerging_split(&bumps(&dm), &dm, m.params.delta).unwrap();
            nehari_scale(&dm, &sp, 0, &ones(&dm), Q).unwrap()
        })
        .collect();
    let order = ((t[0] - t[1]) / (t[1] - t[2])).log2();
    assert!((order - 2.0).abs() < 0.3, "order {order}, t = {t:?}");
}

#[test]
fn nehari_hypothesis_violation() {
    let m = model();
    let dm = domain(&[[0.0, 0.0]], 16.0);
    // a one-cell spike has a positive quadratic form
    let mut u = dm.zero();
    let c = dm.cells.iter().map(|&c| c as usize).min_by(|&a, &b| dm.r(a, 0).total_cmp(&dm.r(b, 0))).unwrap();
    u[c] = 1.0;
    let sp = emerging_split(&u, &dm, m.params.delta).unwrap();
    assert!(matches!(nehari_scale(&dm, &sp, 0, &ones(&dm), Q), Err(Error::HypothesisViolated(0))));
}

#[test]
fn overlap_defect_examples() {
    let m = model();
    let (p, mp) = (&m.profile, &m.params);
    let rs = mp.r_star;
    assert_eq!(overlap_defect(&config(&[[0.0, 0.0]]), p, mp, 2.0).unwrap(), 0.0);
    assert_eq!(overlap_defect(&config(&[[0.0, 0.0], [2.0 * rs, 0.0]]), p, mp, 2.0).unwrap(), 0.0);
    assert!(matches!(overlap_defect(&config(&[[0.0, 0.0], [2.0 * rs - 2.0 * mp.sigma0, 0.0]]), p, mp, 2.0), Err(Error::PreconditionFail(_))));
    for r in [2.0, f64::INFINITY] {
        let sig = [0.25 * mp.sigma0, 0.5 * mp.sigma0, mp.sigma0 * (1.0 - 1e-9)];
        let vals: Vec<f64> = sig.iter().map(|s| overlap_defect(&config(&[[0.0, 0.0], [2.0 * rs - s, 0.0]]), p, mp, r).unwrap()).collect();
        let slope = (vals[2] / vals[0]).ln() / 4f64.ln();
        let expected = 2.0 * (Q - 1.0) / (2.0 - Q) + 3.0 / (2.0 * r);
        assert!(slope >= expected - 0.3, "r = {r}: slope {slope} vs {expected}");
    }
}

#[test]
fn comparison_field_examples() {
    let m = model();
    let (p, mp) = (&m.profile, &m.params);
    let dm = domain(&[[0.0, 0.0]], 32.0);
    let kappa = 0.5 * mp.delta;
    let wt = comparison_field(&dm, kappa, p, mp).unwrap();
    let reach = mp.r_star + kappa.powf((2.0 - Q) / 3.0);
    for c in 0..dm.len() {
        let r = dm.r(c, 0);
        if wt[c] > 0.0 {
            assert!(r < reach + 1e-12);
        }
        if (r - mp.r_star).abs() < 0.5 * dm.grid.h && r <= mp.r_star {
            assert!(wt[c] > kappa, "w~ = {} at r = {r}", wt[c]);
        }
    }
    let full = comparison_field(&dm, mp.delta, p, mp).unwrap();
    assert!((0..dm.len()).all(|c| full[c] == 0.0 || dm.r(c, 0) < mp.r0));
    let tiny = comparison_field(&dm, 1e-30, p, mp).unwrap();
    let u = bumps(&dm);
    assert!((0..dm.len()).filter(|&c| dm.inside[c]).all(|c| (tiny[c] - 0.5 * u[c]).abs() < 1e-3 * mp.w0));
    assert!(matches!(comparison_field(&dm, 2.0 * mp.delta, p, mp), Err(Error::PreconditionFail(_))));
}

#[test]
fn potential_perturbation_bound() {
    let dm = domain(&[[-8.0, 0.0], [8.0, 0.0]], 12.0);
    let u = bumps(&dm);
    let nu = norm_xd(&dm, &u);
    let fitted: Vec<f64> = [0.05, 0.1, 0.2]
        .iter()
        .map(|&a| {
            let kv = potential_make(PotentialKind::CompactBump, a).unwrap().sample(&dm);
            let diff: Field = grad_i(&dm, &u, &kv, Q).iter().zip(grad_iinf(&dm, &u, Q)).map(|(x, y)| x - y).collect();
            dual_norm_xd(&dm, &diff).unwrap() / (a * nu)
        })
        .collect();
    let (lo, hi) = fitted.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &v| (l.min(v), h.max(v)));
    assert!(hi / lo < 3.0, "{fitted:?}");
}
