mod common;

use multibump::params::{default_sigma0, derive_constants};
use multibump::radial::*;
use multibump::Error;
use proptest::prelude::*;

/// `R* = ∫_0^{w0} dw / sqrt(2w^q/q - w²)` under `w = w0 t^{2/(2-q)}`, which
/// leaves only an inverse square root at `t = 1`; tanh-sinh quadrature.
fn first_integral_support(q: f64) -> f64 {
    let w0 = (2.0 / q).powf(1.0 / (2.0 - q));
    let m = 2.0 / (2.0 - q);
    let f = |t: f64| {
        if t <= 0.0 || t >= 1.0 {
            return 0.0;
        }
        let w = w0 * t.powf(m);
        let dw = w0 * m * t.powf(m - 1.0);
        // sqrt(2w^q/q - w²) = w sqrt((w0/w)^{2-q} - 1) = w sqrt(1 - t²) / t
        dw * t / (w * ((1.0 - t) * (1.0 + t)).sqrt())
    };
    quadrature::double_exponential::integrate(f, 0.0, 1.0, 1e-14).integral
}

#[test]
fn one_dimensional_oracles() {
    for q in [1.2, 1.5, 1.8] {
        let p = solve_ground_state(q, 1, 1e-10).unwrap();
        let w0 = (2.0 / q).powf(1.0 / (2.0 - q));
        assert!((p.w0 - w0).abs() <= 1e-6 * w0, "q = {q}");
        let rs = first_integral_support(q);
        assert!((p.r_star - rs).abs() <= 1e-5 * rs, "q = {q}: {} vs {rs}", p.r_star);
        // with t = sin θ the integral is π/(2-q) in closed form
        assert!((rs - std::f64::consts::PI / (2.0 - q)).abs() <= 1e-6 * rs);
    }
    let p = solve_ground_state(1.5, 1, 1e-10).unwrap();
    assert!((p.w0 - 16.0 / 9.0).abs() < 1e-6);
}

/// Shooting with fixed-step midpoint integration: an order-2 scheme that
/// shares nothing with the adaptive solver.
fn midpoint_w0(q: f64, n: usize, hs: f64) -> f64 {
    let rhs = |r: f64, w: f64, v: f64| -> (f64, f64) { (v, -((n - 1) as f64) / r * v - w + w.max(0.0).powf(q - 1.0)) };
    let overshoots = |w0: f64| -> bool {
        let a = (w0.powf(q - 1.0) - w0) / n as f64;
        let (mut r, mut w, mut v) = (hs, w0 + 0.5 * a * hs * hs, a * hs);
        while r < 40.0 {
            let (k1w, k1v) = rhs(r, w, v);
            let (k2w, k2v) = rhs(r + 0.5 * hs, w + 0.5 * hs * k1w, v + 0.5 * hs * k1v);
            w += hs * k2w;
            v += hs * k2v;
            r += hs;
            if w <= 0.0 {
                return true;
            }
            if v >= 0.0 {
                return false;
            }
        }
        false
    };
    let (mut lo, mut hi) = (1.0 + 1e-9, 20.0);
    for _ in 0..70 {
        let mid = 0.5 * (lo + hi);
        if overshoots(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn two_dimensional_peak_under_richardson_extrapolation() {
    let p = solve_ground_state(1.5, 2, 1e-10).unwrap();
    let a = midpoint_w0(1.5, 2, 0.02);
    let b = midpoint_w0(1.5, 2, 0.01);
    let c = midpoint_w0(1.5, 2, 0.005);
    let order = ((a - b) / (b - c)).log2();
    assert!((order - 2.0).abs() < 0.3, "observed order {order}");
    let extrapolated = c + (c - b) / 3.0;
    assert!((p.w0 - extrapolated).abs() < 1e-6 * p.w0, "{} vs {extrapolated}", p.w0);
}

#[test]
fn profile_invariants() {
    for (q, n) in [(1.2, 2), (1.5, 2), (1.8, 2), (1.5, 3), (1.5, 1)] {
        let p = solve_ground_state(q, n, 1e-10).unwrap();
        assert_eq!(p.w_vals[0], p.w0);
        assert!(p.w_vals.iter().all(|&w| w <= p.w0));
        let inside: Vec<f64> = p.r_grid.iter().zip(&p.w_vals).filter(|(r, _)| **r < p.r_star).map(|(_, w)| *w).collect();
        assert!(inside.windows(2).all(|w| w[1] < w[0] || w[1] == 0.0), "q={q} N={n}");
        assert_eq!(eval_w(&p, p.r_star), 0.0);
        assert_eq!(eval_w(&p, 2.0 * p.r_star), 0.0);
        assert_eq!(eval_w(&p, 0.0), p.w0);
        let h = 1e-4 * p.r_star;
        // w'(R*) = 0: the difference quotient decays like h^{m-1}, m = 2/(2-q)
        let m = 2.0 / (2.0 - q);
        assert!(eval_w(&p, p.r_star - h) / h <= 2.0 * c_q(q) * h.powf(m - 1.0), "q={q} N={n}");
        assert!(p.m0 > 0.0);
        assert!(ode_residual(&p, 0.9 * p.r_star) <= 1e-5 * p.w0.max(1.0), "q={q} N={n}");
    }
}

#[test]
fn boundary_law() {
    let p = solve_ground_state(1.5, 2, 1e-10).unwrap();
    let (e, c) = boundary_fit(&p).unwrap();
    assert!((e - 4.0).abs() < 0.03 * 4.0);
    assert!((c * 144.0 - 1.0).abs() < 0.1);
    assert!((c_q(1.5) - 1.0 / 144.0).abs() < 1e-15);
    let p12 = solve_ground_state(1.2, 2, 1e-10).unwrap();
    let (e12, _) = boundary_fit(&p12).unwrap();
    assert!((e12 - 2.5).abs() < 0.03 * 2.5);
    assert!(matches!(boundary_fit_window(&p, p.dr * 3.0), Err(Error::WindowTooCoarse(_))));
}

#[test]
fn energy_identity() {
    let p = solve_ground_state(1.5, 2, 1e-10).unwrap();
    assert!((m0_energy(&p) - m0_nehari(&p)).abs() <= 1e-6 * p.m0);
    let mut z = p.clone();
    z.w_vals.iter_mut().for_each(|w| *w = 0.0);
    z.dw_vals.iter_mut().for_each(|w| *w = 0.0);
    assert_eq!(m0_energy(&z), 0.0);
}

#[test]
fn derived_constants() {
    let p = solve_ground_state(1.5, 2, 1e-10).unwrap();
    let mp = derive_constants(&p, default_sigma0(&p), 1.4).unwrap();
    assert!(mp.sigma0 < default_sigma0(&p));
    assert_eq!(mp.delta, eval_w(&p, p.r_star - 4.0 * mp.sigma0));
    assert_eq!(mp.k0, (4.0 * mp.r0 / mp.rho).powi(2).floor() as u64 + 1);
    assert!(((mp.k0 as f64) < (8.0 / 3f64.sqrt()).powi(2) + 1.0));
    // independent re-check of the inequalities
    assert!(mp.delta < mp.sigma0 * mp.sigma0);
    assert!(mp.r0 < 2.0 / 3f64.sqrt() * mp.rho);
    for j in 0..64 {
        let kappa = mp.delta * 10f64.powf(-3.0 * j as f64 / 63.0);
        let r = p.r_star * p.r_star / (p.r_star + kappa.powf((2.0 - mp.q) / 3.0));
        assert!(eval_w(&p, r) > 2.0 * kappa);
    }
    let report: toml::Value = toml::from_str(&mp.report(&p)).unwrap();
    assert!(report.get("constants").and_then(|c| c.get("k0")).is_some());
}

#[test]
fn profile_csv() {
    let p = solve_ground_state(1.5, 1, 1e-8).unwrap();
    let mut buf = Vec::new();
    write_profile_csv(&p, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("r,w"));
    let first: Vec<f64> = lines.next().unwrap().split(',').map(|s| s.parse().unwrap()).collect();
    assert_eq!(first, vec![0.0, p.w0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn one_dimensional_peak_for_any_exponent(q in 1.02f64..1.98) {
        let p = solve_ground_state(q, 1, 1e-10).unwrap();
        let w0 = (2.0 / q).powf(1.0 / (2.0 - q));
        prop_assert!((p.w0 - w0).abs() <= 1e-6 * w0);
        prop_assert!((p.r_star - std::f64::consts::PI / (2.0 - q)).abs() <= 1e-5 * p.r_star);
        let (e, _) = boundary_fit(&p).unwrap();
        prop_assert!((e - 2.0 / (2.0 - q)).abs() <= 0.03 * 2.0 / (2.0 - q));
    }

    #[test]
    fn interpolation_is_monotone(q in 1.2f64..1.8, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let p = solve_ground_state(q, 2, 1e-9).unwrap();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(eval_w(&p, lo * 1.1 * p.r_star) >= eval_w(&p, hi * 1.1 * p.r_star));
    }
}
