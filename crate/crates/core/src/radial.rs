//! Radial ground state of `-Δw - w + w^{q-1} = 0`.
//!
//! The peak value is found by shooting from the origin. Touchdown at the
//! support radius is degenerate (`w ~ C (R* - r)^{2/(2-q)}`), so forward
//! trajectories lose accuracy before they reach it; the tail is recomputed by
//! integrating inward from the touchdown series and matching the forward
//! solution at a level where the latter is still reliable.

use crate::error::{Error, Result};
use crate::ode::{self, Tolerance};
use std::f64::consts::PI;
use std::io::Write;

#[derive(Clone, Debug)]
pub struct RadialProfile {
    pub q: f64,
    pub n: usize,
    /// Uniform nodes `k * dr`, extending past `r_star`.
    pub r_grid: Vec<f64>,
    pub w_vals: Vec<f64>,
    pub dw_vals: Vec<f64>,
    pub w0: f64,
    pub r_star: f64,
    pub m0: f64,
    pub dr: f64,
    /// Number of intervals on `[0, r_star]`.
    pub intervals: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Shot {
    Over,
    Under,
}

/// Signed power `|x|^{p} sgn(x)`.
pub fn spow(x: f64, p: f64) -> f64 {
    if x > 0.0 {
        x.powf(p)
    } else if x < 0.0 {
        -(-x).powf(p)
    } else {
        0.0
    }
}

/// Surface measure of the unit sphere in `R^n` (2 for n = 1).
pub fn sphere_area(n: usize) -> f64 {
    let h = n as f64 / 2.0;
    2.0 * PI.powf(h) / gamma(h)
}

fn gamma(x: f64) -> f64 {
    // x is a positive half-integer here
    if (x - 0.5).abs() < 1e-12 {
        PI.sqrt()
    } else if (x - 1.0).abs() < 1e-12 {
        1.0
    } else {
        (x - 1.0) * gamma(x - 1.0)
    }
}

/// Touchdown prefactor `C_q` in `w ~ C_q (R* - r)^{2/(2-q)}`.
pub fn c_q(q: f64) -> f64 {
    ((2.0 - q).powi(2) / (2.0 * q)).powf(1.0 / (2.0 - q))
}

struct Shooter {
    q: f64,
    n: usize,
    tol: Tolerance,
}

const R_START: f64 = 1e-4;
const MATCH_LEVEL: f64 = 1e-3;
const TAIL_START: f64 = 1e-3;
const CROSS_LEVEL: f64 = 1e-9;

impl Shooter {
    fn rhs(&self, r: f64, y: &[f64; 2]) -> [f64; 2] {
        let nm1 = (self.n - 1) as f64;
        [y[1], spow(y[0], self.q - 1.0) - y[0] - nm1 / r * y[1]]
    }

    fn start(&self, w0: f64) -> [f64; 2] {
        let a = (w0.powf(self.q - 1.0) - w0) / self.n as f64;
        [w0 + 0.5 * a * R_START * R_START, a * R_START]
    }

    fn classify(&self, w0: f64) -> Result<Shot> {
        if w0 <= 1.0 {
            return Ok(Shot::Under);
        }
        let f = |r: f64, y: &[f64; 2]| self.rhs(r, y);
        // crossing a tiny positive level instead of 0 keeps the integrator off
        // the kink of w^{q-1}, which is severe as q -> 1
        let floor = CROSS_LEVEL * w0;
        let ev = |_: f64, y: &[f64; 2], e: usize| if e == 0 { y[0] - floor } else { -y[1] };
        let leg = ode::integrate(&f, R_START, self.start(w0), 1e4, 1e-3, self.tol, &ev, 2)
            .map_err(|e| Error::NonConvergence(format!("classify {w0}: {e}")))?;
        match leg.event {
            Some(0) => Ok(Shot::Over),
            Some(_) => Ok(Shot::Under),
            None => Err(Error::NonConvergence("trajectory neither crossed nor turned".into())),
        }
    }

    /// Closest start of the backward tail at which `w` is still a normal number.
    fn tail_start(&self) -> f64 {
        let m = 2.0 / (2.0 - self.q);
        let c = (2.0 - self.q) / (2.0 * self.q).sqrt();
        TAIL_START.max(1e-250f64.powf(1.0 / m) / c)
    }

    /// Series for `w, w'` at distance `dd` inside the touchdown radius `rs`.
    fn tail(&self, rs: f64, dd: f64) -> [f64; 2] {
        let q = self.q;
        let m = 2.0 / (2.0 - q);
        let c = (2.0 - q) / (2.0 * q).sqrt();
        let e = (self.n - 1) as f64 * c / (rs * (4.0 * m - 2.0));
        let v = c * dd + e * dd * dd;
        let dv = -(c + 2.0 * e * dd);
        [v.powf(m), m * v.powf(m - 1.0) * dv]
    }
}

pub fn solve_ground_state(q: f64, n: usize, tol: f64) -> Result<RadialProfile> {
    solve_ground_state_with(q, n, tol, 4096)
}

/// As [`solve_ground_state`] with an explicit number of tabulation intervals
/// on `[0, R*]`.
pub fn solve_ground_state_with(q: f64, n: usize, tol: f64, intervals: usize) -> Result<RadialProfile> {
    if !(q > 1.0 && q < 2.0) || n == 0 || !(tol > 0.0) || intervals < 16 {
        return Err(Error::Invalid(format!("q = {q}, N = {n}, tol = {tol}")));
    }
    let rtol = (tol * 1e-2).clamp(1e-13, 1e-6);
    let sh = Shooter { q, n, tol: Tolerance { rtol, atol: 1e-16, max_steps: 2_000_000 } };

    let mut lo = 1.0;
    let mut hi = 1.5 * (2.0 / q).powf(1.0 / (2.0 - q));
    let mut expand = 0;
    while sh.classify(hi)? != Shot::Over {
        lo = hi;
        hi *= 2.0;
        expand += 1;
        if expand > 60 {
            return Err(Error::NonConvergence("no overshooting peak value".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match sh.classify(mid)? {
            Shot::Over => hi = mid,
            Shot::Under => lo = mid,
        }
    }
    if (hi - lo) > 1e-13 * hi {
        return Err(Error::NonConvergence(format!("bracket width {:e}", hi - lo)));
    }
    let w0 = lo;

    // forward leg to the matching level
    let f = |r: f64, y: &[f64; 2]| sh.rhs(r, y);
    let w_match = MATCH_LEVEL * w0;
    let ev = |_: f64, y: &[f64; 2], _: usize| y[0] - w_match;
    let fwd = ode::integrate(&f, R_START, sh.start(w0), 1e4, 1e-3, sh.tol, &ev, 1)
        .map_err(Error::NonConvergence)?;
    if fwd.event.is_none() {
        return Err(Error::NonConvergence("forward leg never reached the matching level".into()));
    }
    let (r_m, w_m) = (fwd.t, fwd.y[0]);

    let back_tol = Tolerance { rtol, atol: 0.0, max_steps: 2_000_000 };
    let mismatch = |rs: f64| -> Result<f64> {
        let dd = sh.tail_start().min(0.5 * (rs - r_m));
        let leg = ode::integrate(&f, rs - dd, sh.tail(rs, dd), r_m, dd * 1e-2, back_tol, &|_, _, _| 1.0, 0)
            .map_err(Error::NonConvergence)?;
        Ok(leg.y[0] - w_m)
    };
    let m = 2.0 / (2.0 - q);
    let guess = r_m + (w_m / c_q(q)).powf(1.0 / m);
    let mut a = r_m + 1e-6 * guess;
    let mut fa = mismatch(a)?;
    let mut b = guess;
    let mut fb = mismatch(b)?;
    let mut tries = 0;
    while fa > 0.0 {
        a = r_m + 0.5 * (a - r_m);
        fa = mismatch(a)?;
        tries += 1;
        if tries > 60 {
            return Err(Error::NonConvergence("cannot bracket the support radius".into()));
        }
    }
    while fb < 0.0 {
        b = r_m + 2.0 * (b - r_m);
        fb = mismatch(b)?;
        tries += 1;
        if tries > 120 {
            return Err(Error::NonConvergence("cannot bracket the support radius".into()));
        }
    }
    // Illinois false position
    let mut side = 0;
    for _ in 0..200 {
        let c = (a * fb - b * fa) / (fb - fa);
        if !(c > a && c < b) || (b - a) <= 1e-14 * b {
            break;
        }
        let fc = mismatch(c)?;
        if fc == 0.0 {
            a = c;
            b = c;
            break;
        }
        if fc < 0.0 {
            a = c;
            fa = fc;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            b = c;
            fb = fc;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
    }
    let r_star = 0.5 * (a + b);

    // tabulate
    let dr = r_star / intervals as f64;
    let total = intervals + intervals / 8 + 1;
    let r_grid: Vec<f64> = (0..total).map(|k| k as f64 * dr).collect();
    let mut w_vals = vec![0.0; total];
    let mut dw_vals = vec![0.0; total];
    w_vals[0] = w0;
    let mut t = R_START;
    let mut y = sh.start(w0);
    let mut k = 1;
    while k <= intervals && r_grid[k] <= r_m {
        let leg = ode::integrate(&f, t, y, r_grid[k], 1e-3, sh.tol, &|_, _, _| 1.0, 0)
            .map_err(Error::NonConvergence)?;
        t = leg.t;
        y = leg.y;
        w_vals[k] = y[0];
        dw_vals[k] = y[1];
        k += 1;
    }
    let dd = sh.tail_start().min(0.5 * (r_star - r_m));
    let mut t = r_star - dd;
    let mut y = sh.tail(r_star, dd);
    for j in (k..intervals).rev() {
        let dj = r_star - r_grid[j];
        if dj <= dd {
            let s = sh.tail(r_star, dj);
            w_vals[j] = s[0];
            dw_vals[j] = s[1];
            continue;
        }
        let leg = ode::integrate(&f, t, y, r_grid[j], dd * 1e-2, back_tol, &|_, _, _| 1.0, 0)
            .map_err(Error::NonConvergence)?;
        t = leg.t;
        y = leg.y;
        w_vals[j] = y[0];
        dw_vals[j] = y[1];
    }
    let mut p = RadialProfile {
        q,
        n,
        r_grid,
        w_vals,
        dw_vals,
        w0,
        r_star,
        m0: 0.0,
        dr,
        intervals,
    };
    p.m0 = m0_energy(&p);
    Ok(p)
}

/// Monotone cubic Hermite interpolation of `v = w^{(2-q)/2}`, which is smooth
/// up to touchdown, mapped back to `w`; exactly zero from `R*` on.
pub fn eval_w(p: &RadialProfile, r: f64) -> f64 {
    let r = r.abs();
    if r >= p.r_star {
        return 0.0;
    }
    if r == 0.0 {
        return p.w0;
    }
    let m = 2.0 / (2.0 - p.q);
    let s = r / p.dr;
    let k = (s.floor() as usize).min(p.intervals - 1);
    let t = s - k as f64;
    let (v0, d0) = transformed(p, k, m);
    let (v1, d1) = transformed(p, k + 1, m);
    let (m0, m1) = (d0 * p.dr, d1 * p.dr);
    let t2 = t * t;
    let t3 = t2 * t;
    let v = (2.0 * t3 - 3.0 * t2 + 1.0) * v0
        + (t3 - 2.0 * t2 + t) * m0
        + (-2.0 * t3 + 3.0 * t2) * v1
        + (t3 - t2) * m1;
    v.clamp(v1, v0).powf(m)
}

fn transformed(p: &RadialProfile, k: usize, m: f64) -> (f64, f64) {
    let w = p.w_vals[k];
    if w > 0.0 {
        let v = w.powf(1.0 / m);
        (v, v / (m * w) * p.dw_vals[k])
    } else {
        (0.0, -(2.0 - p.q) / (2.0 * p.q).sqrt())
    }
}

/// Least-squares fit of `log w` against `log(R* - r)` on `(R* - window, R*)`.
pub fn boundary_fit(p: &RadialProfile) -> Result<(f64, f64)> {
    boundary_fit_window(p, 0.02 * p.r_star)
}

pub fn boundary_fit_window(p: &RadialProfile, window: f64) -> Result<(f64, f64)> {
    let pts: Vec<(f64, f64)> = p
        .r_grid
        .iter()
        .zip(&p.w_vals)
        .take(p.intervals)
        .filter(|(r, w)| **r > p.r_star - window && **w > 0.0)
        .map(|(r, w)| ((p.r_star - r).ln(), w.ln()))
        .collect();
    if pts.len() < 8 {
        return Err(Error::WindowTooCoarse(pts.len()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    Ok((slope, (my - slope * mx).exp()))
}

/// The three radial integrals `‖∇w‖², ‖w‖², ‖w‖_q^q` over `R^N`.
#[derive(Clone, Copy, Debug)]
pub struct RadialIntegrals {
    pub grad2: f64,
    pub l2: f64,
    pub lq: f64,
}

pub fn radial_integrals(p: &RadialProfile) -> RadialIntegrals {
    let m = p.intervals;
    let nm1 = (p.n - 1) as i32;
    let simpson = |g: &dyn Fn(usize) -> f64| {
        let mut s = g(0) + g(m);
        for k in 1..m {
            s += if k % 2 == 1 { 4.0 } else { 2.0 } * g(k);
        }
        s * p.dr / 3.0
    };
    let wt = |k: usize| p.r_grid[k].powi(nm1);
    let area = sphere_area(p.n);
    let grad2 = area * simpson(&|k| p.dw_vals[k].powi(2) * wt(k));
    let l2 = area * simpson(&|k| p.w_vals[k].powi(2) * wt(k));
    let lq = area * simpson(&|k| p.w_vals[k].max(0.0).powf(p.q) * wt(k));
    RadialIntegrals { grad2, l2, lq }
}

/// `I^∞(w)` by radial quadrature of the functional itself.
pub fn m0_energy(p: &RadialProfile) -> f64 {
    let ri = radial_integrals(p);
    0.5 * (ri.grad2 - ri.l2) + ri.lq / p.q
}

/// `(1/q - 1/2) ‖w‖_q^q`, equal to `I^∞(w)` on the Nehari manifold.
pub fn m0_nehari(p: &RadialProfile) -> f64 {
    (1.0 / p.q - 0.5) * radial_integrals(p).lq
}

/// Residual of the radial equation at interior nodes, using central
/// differences of the stored derivative.
pub fn ode_residual(p: &RadialProfile, r_max: f64) -> f64 {
    let nm1 = (p.n - 1) as f64;
    let mut worst = 0.0f64;
    for k in 1..p.intervals {
        let r = p.r_grid[k];
        if r > r_max {
            break;
        }
        let d2 = (p.dw_vals[k + 1] - p.dw_vals[k - 1]) / (2.0 * p.dr);
        let res = d2 + nm1 / r * p.dw_vals[k] + p.w_vals[k] - spow(p.w_vals[k], p.q - 1.0);
        worst = worst.max(res.abs());
    }
    worst
}

/// CSV with header `r,w` and 17 significant digits.
pub fn write_profile_csv<W: Write>(p: &RadialProfile, out: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    wr.write_record(["r", "w"])?;
    for (r, w) in p.r_grid.iter().zip(&p.w_vals) {
        wr.write_record([format!("{r:.16e}"), format!("{w:.16e}")])?;
    }
    wr.flush()?;
    Ok(())
}
