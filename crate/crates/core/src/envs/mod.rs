//! Deterministic task simulators.
//!
//! Every simulator maps `(seed)` to an initial [`EnvState`] and advances it
//! with a clipped action in `[-1, 1]^d`. Per-step rewards lie in
//! `[0, reward_ceiling_per_step]`, so an episode return never exceeds
//! [`EnvSpec::j_ref`].

mod constants;
mod fourtank;
mod furnace;
mod integrator;
mod ode;
mod perturb;
mod plane;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use constants::{FourTankParams, FurnaceParams, PlaneParams, TaskConstants, TuningParams};
pub use fourtank::FourTank;
pub use furnace::GlassFurnace;
pub use integrator::IntegratorToy;
pub use perturb::perturb_observation;
pub use plane::{wrap_angle, Plane3DCircle, PlaneState};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EnvId {
    #[serde(rename = "fourtank")]
    FourTank,
    #[serde(rename = "plane3dcircle")]
    Plane3DCircle,
    #[serde(rename = "glassfurnace")]
    GlassFurnace,
    /// One-dimensional integrator with a quadratic reward; smoke tests only.
    #[serde(rename = "integrator")]
    Integrator,
}

impl EnvId {
    pub const BENCHMARK: [EnvId; 3] = [EnvId::FourTank, EnvId::Plane3DCircle, EnvId::GlassFurnace];

    pub fn as_str(self) -> &'static str {
        match self {
            EnvId::FourTank => "fourtank",
            EnvId::Plane3DCircle => "plane3dcircle",
            EnvId::GlassFurnace => "glassfurnace",
            EnvId::Integrator => "integrator",
        }
    }
}

impl fmt::Display for EnvId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnvId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fourtank" => Ok(EnvId::FourTank),
            "plane3dcircle" => Ok(EnvId::Plane3DCircle),
            "glassfurnace" => Ok(EnvId::GlassFurnace),
            "integrator" => Ok(EnvId::Integrator),
            other => Err(Error::UnknownEnv(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub id: EnvId,
    pub action_dim: usize,
    pub obs_dim: usize,
    pub horizon: usize,
    pub reward_ceiling_per_step: f64,
    /// Episodic ceiling, `reward_ceiling_per_step * horizon`.
    pub j_ref: f64,
    /// Tuned-expert mean return, filled in from the gains file.
    pub j_exp: Option<f64>,
    pub terminating: bool,
}

impl EnvSpec {
    pub(crate) fn new(
        id: EnvId,
        action_dim: usize,
        obs_dim: usize,
        horizon: usize,
        terminating: bool,
    ) -> Self {
        let reward_ceiling_per_step = 1.0;
        Self {
            id,
            action_dim,
            obs_dim,
            horizon,
            reward_ceiling_per_step,
            j_ref: reward_ceiling_per_step * horizon as f64,
            j_exp: None,
            terminating,
        }
    }
}

/// Full simulator state in physical units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Internal {
    FourTank {
        /// Tank levels in cm.
        levels: [f64; 4],
        /// Setpoints for tanks 1 and 2, cm.
        setpoints: [f64; 2],
    },
    Plane(PlaneState),
    GlassFurnace {
        /// Zone temperatures in K.
        temps: [f64; 4],
        /// Setpoints before and after the scheduled change, K.
        setpoints: [[f64; 4]; 2],
    },
    Integrator {
        x: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub observation: Vec<f64>,
    pub internal: Internal,
    pub step_index: usize,
    pub done: bool,
    /// Terminal through failure (crash), as opposed to horizon exhaustion.
    pub terminated: bool,
}

pub trait Simulator: Send + Sync {
    fn spec(&self) -> &EnvSpec;

    /// Seconds of simulated time per step.
    fn dt(&self) -> f64;

    fn reset(&self, seed: u64) -> EnvState;

    /// Advance `state` by one step and return the reward.
    fn step_in_place(&self, state: &mut EnvState, action: &[f64]) -> Result<f64>;

    fn step(&self, state: &EnvState, action: &[f64]) -> Result<(EnvState, f64)> {
        let mut next = state.clone();
        let r = self.step_in_place(&mut next, action)?;
        Ok((next, r))
    }
}

/// Build the simulator for `id` from the given constants.
pub fn make(id: EnvId, constants: &TaskConstants) -> Box<dyn Simulator> {
    match id {
        EnvId::FourTank => Box::new(FourTank::new(constants.fourtank.clone())),
        EnvId::Plane3DCircle => Box::new(Plane3DCircle::new(constants.plane3dcircle.clone())),
        EnvId::GlassFurnace => Box::new(GlassFurnace::new(constants.glassfurnace.clone())),
        EnvId::Integrator => Box::new(IntegratorToy::default()),
    }
}

/// Reset `env_id` with the compiled-in constants.
pub fn reset(env_id: &str, seed: u64) -> Result<EnvState> {
    let id: EnvId = env_id.parse()?;
    Ok(make(id, &TaskConstants::builtin()).reset(seed))
}

/// Validate and clip an action into the box. Shared by all simulators.
pub(crate) fn clip_action(spec: &EnvSpec, action: &[f64]) -> Result<Vec<f64>> {
    if action.len() != spec.action_dim {
        return Err(Error::Dimension {
            context: "action",
            expected: spec.action_dim,
            got: action.len(),
        });
    }
    if action.iter().any(|a| !a.is_finite()) {
        return Err(Error::invalid(format!("non-finite action {action:?}")));
    }
    Ok(action.iter().map(|a| a.clamp(-1.0, 1.0)).collect())
}

/// Bounded tracking factor in (0, 1].
pub(crate) fn tracking_factor(error: f64, scale: f64) -> f64 {
    (-error.abs() / scale).exp()
}

/// Shared step prologue: reject finished episodes, clip the action.
pub(crate) fn begin_step(spec: &EnvSpec, state: &EnvState, action: &[f64]) -> Result<Vec<f64>> {
    if state.done {
        return Err(Error::EpisodeDone {
            step_index: state.step_index,
        });
    }
    clip_action(spec, action)
}

pub(crate) fn finish_step(spec: &EnvSpec, state: &mut EnvState) {
    state.step_index += 1;
    if state.step_index >= spec.horizon {
        state.done = true;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn env_ids_parse() {
        for id in EnvId::BENCHMARK {
            assert_eq!(id.as_str().parse::<EnvId>().unwrap(), id);
        }
        assert!(matches!("cheetahrun".parse::<EnvId>(), Err(Error::UnknownEnv(_))));
        assert!(reset("nope", 1).is_err());
    }

    #[test]
    fn spec_ceilings() {
        let c = TaskConstants::builtin();
        let expect = [
            (EnvId::Plane3DCircle, 10_000, 3, 10_000.0, true),
            (EnvId::FourTank, 500, 2, 500.0, false),
            (EnvId::GlassFurnace, 5760, 4, 5760.0, false),
        ];
        for (id, horizon, adim, jref, term) in expect {
            let env = make(id, &c);
            let s = env.spec();
            assert_eq!(s.horizon, horizon);
            assert_eq!(s.action_dim, adim);
            assert_eq!(s.j_ref, jref);
            assert_eq!(s.j_ref, s.reward_ceiling_per_step * s.horizon as f64);
            assert_eq!(s.terminating, term);
        }
    }
}
