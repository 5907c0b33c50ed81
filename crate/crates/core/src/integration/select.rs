use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::rl::{QEnsemble, Scoring};
use crate::{Error, Result};

/// Pessimism and temperature of the stochastic gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateConfig {
    pub kappa: f64,
    pub tau: f64,
}

impl GateConfig {
    pub fn new(kappa: f64, tau: f64) -> Result<Self> {
        let g = Self { kappa, tau };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::invalid(format!("gate temperature must be positive, got {}", self.tau)));
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return Err(Error::invalid(format!("gate pessimism must be non-negative, got {}", self.kappa)));
        }
        Ok(())
    }
}

/// Largest logit fed to the sigmoid. Keeps `p` strictly inside (0, 1) in
/// double precision so both arms always have support.
pub const LOGIT_CLAMP: f64 = 36.0;

/// `sigma(delta / tau)`, with the logit clamped to `+-LOGIT_CLAMP`.
pub fn gate_probability(delta: f64, tau: f64) -> f64 {
    let x = (delta / tau).clamp(-LOGIT_CLAMP, LOGIT_CLAMP);
    crate::rl::sigmoid(x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateDecision {
    pub action: Vec<f64>,
    pub p: f64,
    /// True when the expert arm was drawn.
    pub b: bool,
    pub delta: f64,
}

/// Score difference `Q(s, a_exp) - Q(s, a_pol)` under `scoring`.
pub fn score_gap<Q: QEnsemble + ?Sized>(
    state: &[f64],
    policy_action: &[f64],
    expert_action: &[f64],
    ensemble: &Q,
    scoring: Scoring,
) -> f64 {
    scoring.score(&ensemble.q_values(state, expert_action)) - scoring.score(&ensemble.q_values(state, policy_action))
}

/// Softmax gate over pessimistic scores: `b ~ Bernoulli(sigma(delta/tau))`.
pub fn edge_select<Q: QEnsemble + ?Sized, R: Rng + ?Sized>(
    state: &[f64],
    policy_action: &[f64],
    expert_action: &[f64],
    ensemble: &Q,
    gate: GateConfig,
    rng: &mut R,
) -> GateDecision {
    gated_select(state, policy_action, expert_action, ensemble, Scoring::Lcb { kappa: gate.kappa }, gate.tau, rng)
}

/// [`edge_select`] with an arbitrary scoring rule.
pub fn gated_select<Q: QEnsemble + ?Sized, R: Rng + ?Sized>(
    state: &[f64],
    policy_action: &[f64],
    expert_action: &[f64],
    ensemble: &Q,
    scoring: Scoring,
    tau: f64,
    rng: &mut R,
) -> GateDecision {
    let delta = score_gap(state, policy_action, expert_action, ensemble, scoring);
    let p = gate_probability(delta, tau);
    let b = rng.random::<f64>() < p;
    GateDecision {
        action: if b { expert_action } else { policy_action }.to_vec(),
        p,
        b,
        delta,
    }
}

/// Deterministic argmax; an exact tie goes to the policy. Returns the
/// action and whether the expert won.
pub fn ibrl_select<Q: QEnsemble + ?Sized>(
    state: &[f64],
    policy_action: &[f64],
    expert_action: &[f64],
    ensemble: &Q,
    scoring: Scoring,
) -> (Vec<f64>, bool) {
    let expert = score_gap(state, policy_action, expert_action, ensemble, scoring) > 0.0;
    (if expert { expert_action } else { policy_action }.to_vec(), expert)
}

/// In-episode handoff step for training progress in `[0, 1]`, decayed
/// linearly from the horizon to zero.
pub fn jsrl_horizon(progress: f64, horizon: usize) -> usize {
    ((1.0 - progress.clamp(0.0, 1.0)) * horizon as f64).round() as usize
}

/// Expert while `t_episode < h`, then the policy.
pub fn jsrl_curriculum_select(t_episode: usize, h: usize, expert_action: &[f64], policy_action: &[f64]) -> Vec<f64> {
    if t_episode < h { expert_action } else { policy_action }.to_vec()
}

/// True while the global step is inside the warm-start fraction.
pub fn jsrl_tt_is_expert(global_step: usize, rho_warm: f64, total_steps: usize) -> bool {
    (global_step as f64) < rho_warm * total_steps as f64
}

pub fn jsrl_tt_select(
    global_step: usize,
    rho_warm: f64,
    total_steps: usize,
    expert_action: &[f64],
    policy_action: &[f64],
) -> Vec<f64> {
    if jsrl_tt_is_expert(global_step, rho_warm, total_steps) { expert_action } else { policy_action }.to_vec()
}

/// `clip(a_e + bound * a_res, -1, 1)` elementwise.
pub fn residual_select(expert_action: &[f64], residual_action: &[f64], bound: f64) -> Vec<f64> {
    expert_action
        .iter()
        .zip(residual_action)
        .map(|(e, r)| (e + bound * r).clamp(-1.0, 1.0))
        .collect()
}

/// Ensemble mean and population standard deviation.
pub fn ensemble_moments(qs: &[f64]) -> (f64, f64) {
    let n = qs.len() as f64;
    let mean = qs.iter().sum::<f64>() / n;
    let var = qs.iter().map(|q| (q - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// One Gaussian draw per arm from the ensemble's mean and spread; the
/// larger draw wins. Ties go to the policy.
pub fn literal_thompson_select<Q: QEnsemble + ?Sized, R: Rng + ?Sized>(
    state: &[f64],
    policy_action: &[f64],
    expert_action: &[f64],
    ensemble: &Q,
    rng: &mut R,
) -> (Vec<f64>, bool) {
    let (me, se) = ensemble_moments(&ensemble.q_values(state, expert_action));
    let (mp, sp) = ensemble_moments(&ensemble.q_values(state, policy_action));
    let qe = me + se * rng.sample::<f64, _>(StandardNormal);
    let qp = mp + sp * rng.sample::<f64, _>(StandardNormal);
    let expert = qe > qp;
    (if expert { expert_action } else { policy_action }.to_vec(), expert)
}
