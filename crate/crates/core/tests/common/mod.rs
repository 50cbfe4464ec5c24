#![allow(dead_code)]

use multibump::grid::{build_domain, Configuration, DomainMask, Field};
use multibump::minimizer::{initial_guess, Model};
use std::sync::OnceLock;

pub const Q: f64 = 1.5;

/// Ground state for `q = 1.5`, `N = 2` with cap `a1 = 1.4`.
pub fn model() -> &'static Model {
    static M: OnceLock<Model> = OnceLock::new();
    M.get_or_init(|| Model::build(Q, 2, 1.4).expect("ground state"))
}

pub fn config(points: &[[f64; 2]]) -> Configuration {
    Configuration::new(points.iter().map(|p| p.to_vec()).collect()).unwrap()
}

/// Mask for `points` at spacing `R*/div` and margin `σ₀/2`.
pub fn domain(points: &[[f64; 2]], div: f64) -> DomainMask {
    let m = model();
    build_domain(&config(points), m.default_d(), m.params.r_star / div, &m.params).unwrap()
}

/// Translated ground states sampled on the mask.
pub fn bumps(dm: &DomainMask) -> Field {
    initial_guess(dm, &model().profile)
}

pub fn ones(dm: &DomainMask) -> Field {
    vec![1.0; dm.len()]
}
