use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::integration::{Counters, GateLog};
use crate::rl::Losses;
use crate::{Error, Result};

/// Deterministic evaluation at one training step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub step: usize,
    pub returns: Vec<f64>,
    pub mean: f64,
    /// Latest update losses at this point, if learning has started.
    pub losses: Option<Losses>,
}

/// Training-time episode return, ending at `step`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeReturn {
    pub step: usize,
    pub value: f64,
}

/// Per-seed trace of one run. Self-describing: embeds its config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: RunConfig,
    pub config_hash: String,
    /// Hash shared by every seed of the same cell.
    pub cell_hash: String,
    pub seed: u64,
    pub evals: Vec<EvalPoint>,
    pub train_returns: Vec<EpisodeReturn>,
    pub gate: Option<GateLog>,
    pub counters: Counters,
    pub last_losses: Option<Losses>,
    /// Mean eval return over the trailing window.
    pub final_window: f64,
    pub final_window_evals: usize,
    /// Unperturbed expert return used for ENA.
    pub j_exp: Option<f64>,
    pub j_ref: f64,
    /// Always true: `j_exp` comes from the clean gains file, never from a
    /// perturbed expert.
    pub j_exp_unperturbed: bool,
    pub constants_version: u32,
    pub rng_provenance: String,
    pub wall_clock_secs: f64,
    /// Set when the run stopped early; the record is partial.
    pub aborted: Option<String>,
}

impl RunRecord {
    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn file_name(&self) -> String {
        format!(
            "{}__{}__{}__seed{}.json",
            self.config.env,
            self.config.method.id,
            self.config.perturbation.label(),
            self.seed
        )
    }

    /// Equal to `other` in every numeric output (wall clock excluded).
    pub fn same_outputs(&self, other: &RunRecord) -> bool {
        let strip = |r: &RunRecord| RunRecord { wall_clock_secs: 0.0, ..r.clone() };
        strip(self) == strip(other)
    }
}

/// Mean of the eval means at or after `(1 - fraction) * total_steps`; the
/// last eval when the window holds none.
pub fn final_window_mean(evals: &[EvalPoint], total_steps: usize, fraction: f64) -> (f64, usize) {
    let start = (1.0 - fraction) * total_steps as f64;
    let window: Vec<f64> = evals.iter().filter(|e| e.step as f64 >= start).map(|e| e.mean).collect();
    if window.is_empty() {
        return (evals.last().map_or(f64::NAN, |e| e.mean), usize::from(!evals.is_empty()));
    }
    (window.iter().sum::<f64>() / window.len() as f64, window.len())
}
