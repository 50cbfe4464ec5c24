//! Adaptive Dormand–Prince 5(4) integrator with sign-change events.

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

#[derive(Clone, Copy, Debug)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

/// One embedded step; returns the 5th order solution and the error estimate.
pub fn step<const D: usize, F>(f: &F, t: f64, y: &[f64; D], h: f64) -> ([f64; D], [f64; D])
where
    F: Fn(f64, &[f64; D]) -> [f64; D],
{
    let mut k = [[0.0; D]; 7];
    k[0] = f(t, y);
    for s in 1..7 {
        let mut ys = *y;
        for (j, kj) in k.iter().enumerate().take(s) {
            let a = A[s][j];
            if a != 0.0 {
                for d in 0..D {
                    ys[d] += h * a * kj[d];
                }
            }
        }
        k[s] = f(t + C[s] * h, &ys);
    }
    let mut y5 = *y;
    let mut err = [0.0; D];
    for d in 0..D {
        let mut acc = 0.0;
        for s in 0..6 {
            acc += A[6][s] * k[s][d];
        }
        y5[d] = y[d] + h * acc;
        let mut e = 0.0;
        for s in 0..7 {
            e += E[s] * k[s][d];
        }
        err[d] = h * e;
    }
    (y5, err)
}

/// Outcome of an integration leg.
#[derive(Clone, Copy, Debug)]
pub struct Leg<const D: usize> {
    pub t: f64,
    pub y: [f64; D],
    /// Index of the event that stopped the leg, if any.
    pub event: Option<usize>,
    pub steps: usize,
}

/// Integrate from `t0` towards `t1` (either direction), stopping at the first
/// point where some event function crosses from positive to non-positive.
pub fn integrate<const D: usize, F, G>(
    f: &F,
    t0: f64,
    y0: [f64; D],
    t1: f64,
    h0: f64,
    tol: Tolerance,
    events: &G,
    nev: usize,
) -> Result<Leg<D>, String>
where
    F: Fn(f64, &[f64; D]) -> [f64; D],
    G: Fn(f64, &[f64; D], usize) -> f64,
{
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let span = (t1 - t0).abs();
    let mut t = t0;
    let mut y = y0;
    let mut h = h0.abs().min(span).max(f64::MIN_POSITIVE) * dir;
    let mut steps = 0;
    let mut gprev: Vec<f64> = (0..nev).map(|e| events(t, &y, e)).collect();
    while (t1 - t) * dir > 0.0 {
        if steps >= tol.max_steps {
            return Err(format!("step cap {} reached at t = {t}", tol.max_steps));
        }
        if (t + h - t1) * dir > 0.0 {
            h = t1 - t;
        }
        let (yn, err) = step(f, t, &y, h);
        let mut en = 0.0f64;
        for d in 0..D {
            let sc = tol.atol + tol.rtol * y[d].abs().max(yn[d].abs());
            en = en.max((err[d] / sc).abs());
        }
        if !en.is_finite() {
            h *= 0.25;
            if h.abs() < 1e-300 {
                return Err("step size underflow".into());
            }
            continue;
        }
        if en > 1.0 {
            h *= (0.9 * en.powf(-0.2)).max(0.2);
            if h.abs() <= t.abs().max(span) * 1e-15 {
                return Err(format!("step size underflow at t = {t}"));
            }
            continue;
        }
        steps += 1;
        let tn = t + h;
        let hit = (0..nev).find(|&e| gprev[e] > 0.0 && events(tn, &yn, e) <= 0.0);
        if let Some(e) = hit {
            // bisect on the fraction of the accepted step
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            let mut yhit = yn;
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                let (ym, _) = step(f, t, &y, mid * h);
                if events(t + mid * h, &ym, e) <= 0.0 {
                    hi = mid;
                    yhit = ym;
                } else {
                    lo = mid;
                }
            }
            return Ok(Leg { t: t + hi * h, y: yhit, event: Some(e), steps });
        }
        t = tn;
        y = yn;
        for (e, g) in gprev.iter_mut().enumerate() {
            *g = events(t, &y, e);
        }
        let fac = if en == 0.0 { 5.0 } else { (0.9 * en.powf(-0.2)).clamp(0.2, 5.0) };
        h *= fac;
    }
    Ok(Leg { t: t1, y, event: None, steps })
}
