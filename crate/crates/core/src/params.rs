//! Margin σ₀ and the constants derived from it.

use crate::error::{Error, Result};
use crate::radial::{eval_w, RadialProfile};
use serde::Serialize;

/// Floor below which σ₀ is not halved any further.
pub const SIGMA_FLOOR: f64 = 1e-6;
/// Number of κ samples used for the comparison inequality.
pub const KAPPA_SAMPLES: usize = 32;

#[derive(Clone, Debug, Serialize)]
pub struct ModelParams {
    pub q: f64,
    pub n: usize,
    pub sigma0: f64,
    pub delta: f64,
    pub rho: f64,
    pub r0: f64,
    pub a1: f64,
    pub t_star: f64,
    pub k0: u64,
    pub r_star: f64,
    pub w0: f64,
    pub m0: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Inequality {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

fn ineq(name: &str, lhs: f64, rhs: f64) -> Inequality {
    Inequality { name: name.to_string(), lhs, rhs, holds: lhs < rhs }
}

impl ModelParams {
    fn from_sigma(p: &RadialProfile, sigma0: f64, a1: f64) -> ModelParams {
        let q = p.q;
        let rho = p.r_star - 3.0 * sigma0;
        let r0 = p.r_star + sigma0.powf((2.0 - q) / 2.0);
        ModelParams {
            q,
            n: p.n,
            sigma0,
            delta: eval_w(p, p.r_star - 4.0 * sigma0),
            rho,
            r0,
            a1,
            t_star: (2.0 - q) / 2.0,
            k0: (4.0 * r0 / rho).powi(p.n as i32).floor() as u64 + 1,
            r_star: p.r_star,
            w0: p.w0,
            m0: p.m0,
        }
    }

    /// `t_κ = R* / (R* + κ^{(2-q)/3})`.
    pub fn t_kappa(&self, kappa: f64) -> f64 {
        self.r_star / (self.r_star + kappa.powf((2.0 - self.q) / 3.0))
    }

    /// Every defining inequality, each written as `lhs < rhs`.
    pub fn inequalities(&self, p: &RadialProfile) -> Vec<Inequality> {
        let q = self.q;
        let rs = self.r_star;
        let mut out = vec![ineq("delta < sigma0^2", self.delta, self.sigma0 * self.sigma0)];
        // comparison level, sampled on a log grid in (1e-3 delta, delta]
        let mut worst: Option<(f64, f64)> = None;
        for j in 0..KAPPA_SAMPLES {
            let s = j as f64 / (KAPPA_SAMPLES - 1) as f64;
            let kappa = self.delta * 10f64.powf(-3.0 * (1.0 - s)) * if j == 0 { 1.0 + 1e-9 } else { 1.0 };
            let lhs = 2.0 * kappa;
            let rhs = eval_w(p, rs * rs / (rs + kappa.powf((2.0 - q) / 3.0)));
            if worst.is_none_or(|(l, r)| lhs / r.max(f64::MIN_POSITIVE) > l / r.max(f64::MIN_POSITIVE)) {
                worst = Some((lhs, rhs));
            }
        }
        let (l, r) = worst.unwrap_or((0.0, 0.0));
        out.push(ineq("2 kappa < w(R*^2/(R*+kappa^((2-q)/3)))", l, r));
        out.push(ineq("R0 < (2/sqrt3) rho", self.r0, 2.0 / 3f64.sqrt() * self.rho));
        let b1 = (2.0 * rs / ((rs + 1.0).powi(2) * self.a1)).powf(3.0 / (2.0 * (2.0 - q)));
        let b2 = (self.t_star / self.a1).powf(1.0 / (2.0 - q));
        let b3 = ((q - 1.0) / 2.0).powf(1.0 / (2.0 - q));
        out.push(ineq("delta < min(eq bounds)", self.delta, b1.min(b2).min(b3)));
        out.push(ineq("0 < delta", 0.0, self.delta));
        out
    }

    /// Structured-text constants report.
    pub fn report(&self, p: &RadialProfile) -> String {
        #[derive(Serialize)]
        struct Rep<'a> {
            constants: &'a ModelParams,
            inequality: Vec<Inequality>,
        }
        toml::to_string(&Rep { constants: self, inequality: self.inequalities(p) })
            .unwrap_or_default()
    }
}

/// Halve σ₀ from `sigma0_init` until every inequality holds.
pub fn derive_constants(p: &RadialProfile, sigma0_init: f64, a1: f64) -> Result<ModelParams> {
    if !(sigma0_init > 0.0 && sigma0_init < 1.0) || !(a1 >= 1.0) {
        return Err(Error::Invalid(format!("sigma0_init = {sigma0_init}, a1 = {a1}")));
    }
    let mut s = sigma0_init;
    while s >= SIGMA_FLOOR {
        if 4.0 * s < p.r_star {
            let mp = ModelParams::from_sigma(p, s, a1);
            if mp.inequalities(p).iter().all(|i| i.holds) {
                return Ok(mp);
            }
        }
        s *= 0.5;
    }
    Err(Error::NoAdmissibleSigma(SIGMA_FLOOR))
}

/// Default starting margin, `0.05 R*`.
pub fn default_sigma0(p: &RadialProfile) -> f64 {
    (0.05 * p.r_star).min(0.5)
}
