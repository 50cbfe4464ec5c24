//! Run manifests: TOML with a pinned schema version.

use multibump::energy::PotentialKind;
use multibump::minimizer::{SearchOptions, SolverOptions};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    GroundState,
    Minimize,
    Search,
    Sweep,
    Verify,
    Export,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema_version: u32,
    pub command: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub domain: DomainSection,
    #[serde(default)]
    pub potential: PotentialSection,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub search: SearchSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub export: ExportSection,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub q: f64,
    pub n: usize,
    /// Starting margin before halving; `min(0.05 R*, 0.5)` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma0: Option<f64>,
    /// Cap on `K`; the largest cap over the requested potentials when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a1: Option<f64>,
    pub tol: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection { q: 1.5, n: 2, sigma0: None, a1: None, tol: 1e-10 }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct DomainSection {
    /// Grid spacing; `R*/32` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    /// Margin; `σ₀/2` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    pub centers: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct PotentialSection {
    pub kind: PotentialKind,
    pub alpha: f64,
}

impl Default for PotentialSection {
    fn default() -> Self {
        PotentialSection { kind: PotentialKind::Unit, alpha: 0.0 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SearchSection {
    pub k: usize,
    /// Seed configurations; the domain centres when empty.
    pub seeds: Vec<Vec<Vec<f64>>>,
    /// `R*/4` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_step: Option<f64>,
    /// `h` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_step: Option<f64>,
    pub random_starts: usize,
    pub max_evaluations: usize,
}

impl Default for SearchSection {
    fn default() -> Self {
        let o = SearchOptions::default();
        SearchSection {
            k: 1,
            seeds: Vec::new(),
            initial_step: o.initial_step,
            min_step: o.min_step,
            random_starts: o.random_starts,
            max_evaluations: o.max_evaluations,
        }
    }
}

impl SearchSection {
    pub fn options(&self) -> SearchOptions {
        SearchOptions {
            initial_step: self.initial_step,
            min_step: self.min_step,
            random_starts: self.random_starts,
            max_evaluations: self.max_evaluations,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub alphas: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    /// Leakage tolerance for the support checks.
    pub support_tol: f64,
    /// Annulus radius in `(ρ, R*]`; `R*` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub annulus_radius: Option<f64>,
    /// Tolerance on the residual and multipliers of a solution candidate.
    pub residual_tol: f64,
}

impl Default for VerifySection {
    fn default() -> Self {
        VerifySection { support_tol: 1e-4, annulus_radius: None, residual_tol: 1e-3 }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ExportSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
}

impl Manifest {
    pub fn parse(text: &str) -> Result<Manifest, String> {
        let m: Manifest = toml::from_str(text).map_err(|e| e.to_string())?;
        if m.schema_version != SCHEMA_VERSION {
            return Err(format!("schema_version {} is not supported (expected {SCHEMA_VERSION})", m.schema_version));
        }
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<(), String> {
        let mo = &self.model;
        if !(mo.q > 1.0 && mo.q < 2.0) {
            return Err(format!("model.q = {} must lie in (1, 2)", mo.q));
        }
        if mo.n == 0 || mo.n > 3 {
            return Err(format!("model.n = {} must be 1, 2 or 3", mo.n));
        }
        if !(mo.tol > 0.0) {
            return Err("model.tol must be positive".into());
        }
        if self.domain.h.is_some_and(|h| !(h > 0.0)) {
            return Err("domain.h must be positive".into());
        }
        if let Some(c) = self.domain.centers.iter().find(|c| c.len() != mo.n) {
            return Err(format!("domain.centers entry {c:?} does not have {} coordinates", mo.n));
        }
        if !(self.solver.cg_tol > 0.0) || self.solver.eps_res.is_some_and(|e| !(e > 0.0)) {
            return Err("solver tolerances must be positive".into());
        }
        let needs_centers = matches!(self.command, Command::Minimize | Command::Sweep | Command::Verify);
        if needs_centers && self.domain.centers.is_empty() {
            return Err("domain.centers is required for this command".into());
        }
        if self.command == Command::Sweep && self.sweep.alphas.is_empty() {
            return Err("sweep.alphas is required for the sweep command".into());
        }
        if self.command == Command::Export && self.export.input.is_none() {
            return Err("export.input is required for the export command".into());
        }
        Ok(())
    }
}
