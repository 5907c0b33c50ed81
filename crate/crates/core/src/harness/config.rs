use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::envs::EnvId;
use crate::experts::UndertuneScope;
use crate::integration::{MethodId, MethodSpec};
use crate::rl::SacConfig;
use crate::{Error, Result};

/// Expert perturbation for the degradation sweep. Undertuning hits the
/// training-time expert; bias and noise hit deployment evaluation only.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Perturbation {
    #[default]
    None,
    Undertune { sigma: f64 },
    ActionBias { sigma: f64 },
    ObsNoise { sigma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationKind {
    Undertune,
    ActionBias,
    ObsNoise,
}

impl Perturbation {
    pub fn of(kind: PerturbationKind, sigma: f64) -> Self {
        match kind {
            PerturbationKind::Undertune => Perturbation::Undertune { sigma },
            PerturbationKind::ActionBias => Perturbation::ActionBias { sigma },
            PerturbationKind::ObsNoise => Perturbation::ObsNoise { sigma },
        }
    }

    pub fn sigma(&self) -> f64 {
        match *self {
            Perturbation::None => 0.0,
            Perturbation::Undertune { sigma } | Perturbation::ActionBias { sigma } | Perturbation::ObsNoise { sigma } => sigma,
        }
    }

    /// Zero-sigma perturbations are no perturbation at all.
    pub fn normalized(self) -> Self {
        if self.sigma() == 0.0 {
            Perturbation::None
        } else {
            self
        }
    }

    pub fn label(&self) -> String {
        match self {
            Perturbation::None => "none".into(),
            Perturbation::Undertune { sigma } => format!("undertune_{sigma}"),
            Perturbation::ActionBias { sigma } => format!("action_bias_{sigma}"),
            Perturbation::ObsNoise { sigma } => format!("obs_noise_{sigma}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub env: EnvId,
    pub method: MethodSpec,
    pub seeds: Vec<u64>,
    pub total_steps: usize,
    pub eval_interval: usize,
    pub eval_episodes: usize,
    /// Trailing fraction of the budget averaged into the final scalar.
    pub final_window_fraction: f64,
    pub perturbation: Perturbation,
    pub undertune_scope: UndertuneScope,
    pub sac: SacConfig,
    /// Training steps per gate-statistics window.
    pub gate_window: usize,
    /// Keep every n-th gate sample in the record.
    pub gate_decimation: usize,
    pub gains_dir: PathBuf,
    /// Optional task-constants override; the compiled-in table otherwise.
    pub constants: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            env: EnvId::FourTank,
            method: MethodSpec::default(),
            seeds: (0..5).collect(),
            total_steps: 50_000,
            eval_interval: 2_500,
            eval_episodes: 5,
            final_window_fraction: 0.2,
            perturbation: Perturbation::None,
            undertune_scope: UndertuneScope::All,
            sac: SacConfig::default(),
            gate_window: 1_000,
            gate_decimation: 100,
            gains_dir: PathBuf::from("gains"),
            constants: None,
        }
    }
}

impl RunConfig {
    pub fn new(env: EnvId, method: MethodId) -> Self {
        Self {
            env,
            method: MethodSpec::new(method),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.method.validate()?;
        if self.eval_interval == 0 || self.eval_episodes == 0 {
            return Err(Error::invalid("eval interval and episode count must be positive"));
        }
        if !(self.final_window_fraction > 0.0 && self.final_window_fraction <= 1.0) {
            return Err(Error::invalid("final window fraction must lie in (0, 1]"));
        }
        if self.seeds.is_empty() {
            return Err(Error::invalid("no seeds"));
        }
        if self.perturbation.sigma() < 0.0 {
            return Err(Error::invalid("perturbation sigma must be non-negative"));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serialises to TOML")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    /// SHA-256 over the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("run config serialises to JSON");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    /// Hash with the seed list cleared: equal for every seed of one cell.
    pub fn cell_hash(&self) -> String {
        Self { seeds: Vec::new(), ..self.clone() }.hash()
    }

    /// Copy carrying a single seed, as embedded in that seed's record.
    pub fn for_seed(&self, seed: u64) -> Self {
        Self { seeds: vec![seed], ..self.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let mut cfg = RunConfig::new(EnvId::GlassFurnace, MethodId::JsrlTt);
        cfg.perturbation = Perturbation::ObsNoise { sigma: 0.1 };
        cfg.method.rho_warm = 0.25;
        cfg.sac.init_alpha = 0.2;
        let text = cfg.to_toml();
        let back = RunConfig::from_toml(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
        let mut other = cfg.clone();
        other.seeds = vec![9];
        assert_ne!(other.hash(), cfg.hash());
        assert_eq!(other.cell_hash(), cfg.cell_hash());
    }

    #[test]
    fn minimal_toml_uses_defaults() {
        let cfg = RunConfig::from_toml("env = \"fourtank\"\n[method]\nid = \"ibrl\"\n").unwrap();
        assert_eq!(cfg.method.id, MethodId::Ibrl);
        assert_eq!(cfg.total_steps, 50_000);
        assert!(RunConfig::from_toml("env = \"fourtank\"\neval_interval = 0\n").is_err());
        assert!(RunConfig::from_toml("env = \"cheetah\"\n").is_err());
    }
}
