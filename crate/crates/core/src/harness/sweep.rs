use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Perturbation, PerturbationKind, RunConfig};
use super::record::RunRecord;
use super::train::{train_seed, RunContext};
use crate::integration::{MethodId, MethodSpec};
use crate::{Error, Result};

/// A base run config crossed with methods, perturbation strengths and seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub base: RunConfig,
    pub methods: Vec<MethodId>,
    pub perturbation: Option<PerturbationKind>,
    #[serde(default)]
    pub sigmas: Vec<f64>,
}

impl SweepConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: SweepConfig = toml::from_str(text)?;
        cfg.base.validate()?;
        if cfg.methods.is_empty() {
            return Err(Error::invalid("sweep lists no methods"));
        }
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn perturbations(&self) -> Vec<Perturbation> {
        match self.perturbation {
            None => vec![Perturbation::None],
            Some(kind) if self.sigmas.is_empty() => vec![Perturbation::of(kind, 0.0).normalized()],
            Some(kind) => self.sigmas.iter().map(|&s| Perturbation::of(kind, s).normalized()).collect(),
        }
    }

    /// One config per (method, perturbation), seeds left on each.
    pub fn cells(&self) -> Vec<RunConfig> {
        let mut out = Vec::new();
        for &m in &self.methods {
            for &p in &self.perturbations() {
                let mut cfg = self.base.clone();
                cfg.method = MethodSpec { id: m, ..self.base.method.clone() };
                cfg.perturbation = p;
                out.push(cfg);
            }
        }
        out
    }
}

/// One failed cell; the sweep carries on without it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellError {
    pub method: MethodId,
    pub perturbation: Perturbation,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub records: Vec<RunRecord>,
    pub errors: Vec<CellError>,
}

/// Run every (method, perturbation, seed) cell in parallel. Per-cell
/// failures become error entries; results come back in cell order.
pub fn sweep(cfg: &SweepConfig) -> SweepOutcome {
    let jobs: Vec<(RunConfig, u64)> =
        cfg.cells().into_iter().flat_map(|c| c.seeds.clone().into_iter().map(move |s| (c.clone(), s))).collect();
    let results: Vec<std::result::Result<RunRecord, CellError>> = jobs
        .par_iter()
        .map(|(c, seed)| {
            RunContext::load(c).and_then(|ctx| train_seed(c, *seed, &ctx)).map_err(|e| CellError {
                method: c.method.id,
                perturbation: c.perturbation,
                seed: *seed,
                error: e.to_string(),
            })
        })
        .collect();
    let mut out = SweepOutcome::default();
    for r in results {
        match r {
            Ok(rec) => out.records.push(rec),
            Err(e) => out.errors.push(e),
        }
    }
    out
}
