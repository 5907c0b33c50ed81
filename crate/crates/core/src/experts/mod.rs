//! Expert controllers with exposed internal state, their tuning protocols
//! and the perturbations used in the degradation sweep.

mod cpg;
mod de;
mod pid;
mod relay;
mod tasks;

use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub use cpg::{de_tune_cpg, Cpg, CpgBounds, CpgPlant, ResonantPlant};
pub use de::{differential_evolution, DeConfig, DeResult, DeStrategy};
pub use pid::{LoopOutput, PidExpert, PidGains, PidLoop, SetpointSource};
pub use relay::{relay_experiment, DelayPlant, RelayResult, RelaySettings, SisoPlant, TuningRule};
pub use tasks::{
    circle_bank_action, expert_return, middle_index, relay_autotune, rollout, EnvLoopPlant, LoopTuning,
    OperatingPoint, TuningProvenance,
};

use crate::envs::EnvId;
use crate::seeding::unit_from_counter;
use crate::{Error, Result};

/// Uniform random actions; the state is a step counter so the controller
/// stays a pure function of `(observation, z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomExpert {
    pub action_dim: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExpertController {
    #[serde(rename = "pid_loops")]
    Pid(PidExpert),
    Cpg(Cpg),
    Random(RandomExpert),
}

impl ExpertController {
    pub fn action_dim(&self) -> usize {
        match self {
            ExpertController::Pid(p) => p.action_dim,
            ExpertController::Cpg(c) => c.action_dim(),
            ExpertController::Random(r) => r.action_dim,
        }
    }

    pub fn state_dim(&self) -> usize {
        match self {
            ExpertController::Pid(p) => p.state_dim(),
            ExpertController::Cpg(_) | ExpertController::Random(_) => 1,
        }
    }

    pub fn initial_state(&self, obs: &[f64]) -> Vec<f64> {
        match self {
            ExpertController::Pid(p) => p.initial_state(obs),
            ExpertController::Cpg(c) => c.initial_state(),
            ExpertController::Random(_) => vec![0.0],
        }
    }

    /// One control step: action in `[-1, 1]^d` and the next internal state.
    pub fn act(&self, obs: &[f64], z: &[f64], dt: f64) -> (Vec<f64>, Vec<f64>) {
        match self {
            ExpertController::Pid(p) => p.act(obs, z, dt),
            ExpertController::Cpg(c) => c.act(z, dt),
            ExpertController::Random(r) => {
                let counter = z[0] as u64;
                let d = r.action_dim as u64;
                let a = (0..d)
                    .map(|i| 2.0 * unit_from_counter(r.seed, counter * d + i) - 1.0)
                    .collect();
                (a, vec![z[0] + 1.0])
            }
        }
    }

    /// Flat view of the tunable parameters.
    pub fn params(&self) -> Vec<f64> {
        match self {
            ExpertController::Pid(p) => p
                .loops
                .iter()
                .flat_map(|l| [l.gains.kp, l.gains.ki, l.gains.kd, l.gains.tf])
                .collect(),
            ExpertController::Cpg(c) => c.to_params(),
            ExpertController::Random(_) => Vec::new(),
        }
    }
}

/// Free function form of [`ExpertController::act`].
pub fn expert_act(controller: &ExpertController, obs: &[f64], z: &[f64], dt: f64) -> (Vec<f64>, Vec<f64>) {
    controller.act(obs, z, dt)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UndertuneScope {
    /// Every positive gain (Kp, Ki, Kd; CPG frequency and amplitudes).
    #[default]
    All,
    /// Proportional gains only.
    Proportional,
}

/// Log-scale miscalibration: each positive gain `g -> g exp(sigma xi)` with
/// one standard normal draw per parameter. Filter constants and biases are
/// left alone.
pub fn undertune<R: Rng + ?Sized>(
    controller: &ExpertController,
    sigma: f64,
    scope: UndertuneScope,
    rng: &mut R,
) -> ExpertController {
    let mut out = controller.clone();
    if sigma == 0.0 {
        return out;
    }
    let mut scale = |g: &mut f64, in_scope: bool| {
        // Draw regardless of scope so the streams line up across scopes.
        let xi: f64 = rng.sample(StandardNormal);
        if in_scope && *g > 0.0 {
            *g *= (sigma * xi).exp();
        }
    };
    match &mut out {
        ExpertController::Pid(p) => {
            for l in &mut p.loops {
                scale(&mut l.gains.kp, true);
                scale(&mut l.gains.ki, scope == UndertuneScope::All);
                scale(&mut l.gains.kd, scope == UndertuneScope::All);
            }
        }
        ExpertController::Cpg(c) => {
            scale(&mut c.frequency, scope == UndertuneScope::All);
            for a in &mut c.amplitudes {
                scale(a, true);
            }
        }
        ExpertController::Random(_) => {}
    }
    out
}

/// `clip(action + bias, -1, 1)`.
pub fn bias_action(action: &[f64], bias: &[f64]) -> Vec<f64> {
    action.iter().zip(bias).map(|(a, b)| (a + b).clamp(-1.0, 1.0)).collect()
}

/// Tuned controller plus its measured return and tuning provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainFile {
    pub task: EnvId,
    pub controller: ExpertController,
    /// Mean expert return over `j_exp_seeds` reset seeds.
    pub j_exp: f64,
    pub j_exp_std: f64,
    pub j_exp_seeds: usize,
    pub provenance: TuningProvenance,
}

impl GainFile {
    pub fn path_for(dir: &Path, task: EnvId) -> PathBuf {
        dir.join(format!("{task}.json"))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::MissingGains(path.to_path_buf())
            } else {
                Error::io(path, e)
            }
        })?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn pid(&self) -> Option<&PidExpert> {
        match &self.controller {
            ExpertController::Pid(p) => Some(p),
            _ => None,
        }
    }
}
