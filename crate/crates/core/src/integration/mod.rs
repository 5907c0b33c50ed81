//! Expert-integration mechanisms. Each one wraps the SAC learner and
//! changes only how the executed action is chosen (and, for the argmax
//! family, the TD bootstrap).

mod log;
mod select;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use log::{coverage_check, hoeffding_slack, CoverageCheck, Counters, GateLog, GateSample, GateWindow, HISTOGRAM_BINS};
pub use select::{
    edge_select, ensemble_moments, gate_probability, gated_select, ibrl_select, jsrl_curriculum_select,
    jsrl_horizon, jsrl_tt_is_expert, jsrl_tt_select, literal_thompson_select, residual_select, score_gap,
    GateConfig, GateDecision, LOGIT_CLAMP,
};

use crate::envs::EnvId;
use crate::rl::{Composer, QEnsemble, Scoring, TargetMode};
use crate::{Error, Result};

/// Base methods and ablation variants, named as on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodId {
    Sac,
    Expert,
    Edge,
    Ibrl,
    JsrlCurriculum,
    JsrlTt,
    Residual,
    GatingArgmax,
    ArgmaxLcb,
    NoPessimism,
    BootstrapArgmax,
    BootstrapLcbGated,
    NoStateAug,
    NoObsNorm,
    RandomExpert,
    StorePolicyAction,
    ExpertPrefill,
    LiteralThompson,
    LiteralThompsonK10,
}

impl MethodId {
    pub const BASE: [MethodId; 7] = [
        MethodId::Sac,
        MethodId::Expert,
        MethodId::Edge,
        MethodId::Ibrl,
        MethodId::JsrlCurriculum,
        MethodId::JsrlTt,
        MethodId::Residual,
    ];

    pub const VARIANTS: [MethodId; 12] = [
        MethodId::GatingArgmax,
        MethodId::ArgmaxLcb,
        MethodId::NoPessimism,
        MethodId::BootstrapArgmax,
        MethodId::BootstrapLcbGated,
        MethodId::NoStateAug,
        MethodId::NoObsNorm,
        MethodId::RandomExpert,
        MethodId::StorePolicyAction,
        MethodId::ExpertPrefill,
        MethodId::LiteralThompson,
        MethodId::LiteralThompsonK10,
    ];

    /// Gate form by scoring rule: softmax/LCB, softmax/min, argmax/mean,
    /// argmax/LCB.
    pub const FOUR_CORNERS: [MethodId; 4] =
        [MethodId::Edge, MethodId::NoPessimism, MethodId::GatingArgmax, MethodId::ArgmaxLcb];

    pub fn as_str(self) -> &'static str {
        match self {
            MethodId::Sac => "sac",
            MethodId::Expert => "expert",
            MethodId::Edge => "edge",
            MethodId::Ibrl => "ibrl",
            MethodId::JsrlCurriculum => "jsrl_curriculum",
            MethodId::JsrlTt => "jsrl_tt",
            MethodId::Residual => "residual",
            MethodId::GatingArgmax => "gating_argmax",
            MethodId::ArgmaxLcb => "argmax_lcb",
            MethodId::NoPessimism => "no_pessimism",
            MethodId::BootstrapArgmax => "bootstrap_argmax",
            MethodId::BootstrapLcbGated => "bootstrap_lcb_gated",
            MethodId::NoStateAug => "no_state_aug",
            MethodId::NoObsNorm => "no_obs_norm",
            MethodId::RandomExpert => "random_expert",
            MethodId::StorePolicyAction => "store_policy_action",
            MethodId::ExpertPrefill => "expert_prefill",
            MethodId::LiteralThompson => "literal_thompson",
            MethodId::LiteralThompsonK10 => "literal_thompson_k10",
        }
    }

    pub fn is_variant(self) -> bool {
        Self::VARIANTS.contains(&self)
    }

    pub fn uses_expert(self) -> bool {
        self != MethodId::Sac
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MethodId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::BASE
            .iter()
            .chain(Self::VARIANTS.iter())
            .copied()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::UnknownMethod(s.to_string()))
    }
}

/// Tuned `(kappa, tau)` per task. The integrator toy uses `(1, 1)`.
pub fn tuned_gate(env: EnvId) -> GateConfig {
    let (kappa, tau) = match env {
        EnvId::FourTank => (0.12, 1.64),
        EnvId::Plane3DCircle => (4.05, 8.51),
        EnvId::GlassFurnace => (2.61, 0.24),
        EnvId::Integrator => (1.0, 1.0),
    };
    GateConfig { kappa, tau }
}

/// Which form of the pessimistic score the gate uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LcbForm {
    /// `min - kappa * range`.
    #[default]
    MinRange,
    /// `mean - kappa * std`.
    MeanStd,
}

/// Ensemble reduction inside the IBRL argmax.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IbrlScoring {
    #[default]
    Mean,
    Min,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MethodSpec {
    pub id: MethodId,
    /// `None` uses the per-task tuned values from [`tuned_gate`].
    pub gate: Option<GateConfig>,
    pub lcb_form: LcbForm,
    pub ibrl_scoring: IbrlScoring,
    pub rho_warm: f64,
    pub residual_bound: f64,
    /// Expert prefill length at the full 1M-step budget; scaled by the run's
    /// budget ratio.
    pub prefill_steps_full_scale: usize,
    pub full_scale_steps: usize,
}

impl Default for MethodSpec {
    fn default() -> Self {
        Self {
            id: MethodId::Edge,
            gate: None,
            lcb_form: LcbForm::MinRange,
            ibrl_scoring: IbrlScoring::Mean,
            rho_warm: 0.1,
            residual_bound: 1.0,
            prefill_steps_full_scale: 100_000,
            full_scale_steps: 1_000_000,
        }
    }
}

/// How each step's executed action is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Selector {
    Policy,
    Expert,
    Gate { scoring: Scoring, tau: f64 },
    Argmax { scoring: Scoring },
    Thompson,
    Handoff,
    WarmStart { rho_warm: f64 },
    Residual { bound: f64 },
}

/// The resolved knobs of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Behavior {
    pub selector: Selector,
    pub target_mode: TargetMode,
    pub composer: Composer,
    pub augment: bool,
    pub normalize: bool,
    pub random_expert: bool,
    pub store_policy_action: bool,
    pub prefill_steps: usize,
    pub n_critics: usize,
    /// Whether the learner trains at all.
    pub learns: bool,
}

impl MethodSpec {
    pub fn new(id: MethodId) -> Self {
        Self { id, ..Self::default() }
    }

    pub fn gate_for(&self, env: EnvId) -> GateConfig {
        self.gate.unwrap_or_else(|| tuned_gate(env))
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(g) = &self.gate {
            g.validate()?;
        }
        if !(0.0..=1.0).contains(&self.rho_warm) {
            return Err(Error::invalid(format!("rho_warm {} outside [0, 1]", self.rho_warm)));
        }
        if !(self.residual_bound > 0.0) {
            return Err(Error::invalid("residual bound must be positive"));
        }
        Ok(())
    }

    fn lcb(&self, kappa: f64) -> Scoring {
        match self.lcb_form {
            LcbForm::MinRange => Scoring::Lcb { kappa },
            LcbForm::MeanStd => Scoring::MeanStd { kappa },
        }
    }

    /// Resolve the id into concrete behaviour. `total_steps` is the run's
    /// learning budget, used to scale the expert prefill.
    pub fn behavior(&self, env: EnvId, total_steps: usize) -> Behavior {
        let GateConfig { kappa, tau } = self.gate_for(env);
        let edge = Selector::Gate { scoring: self.lcb(kappa), tau };
        let mut b = Behavior {
            selector: edge,
            target_mode: TargetMode::Standard,
            composer: Composer::Direct,
            augment: true,
            normalize: true,
            random_expert: false,
            store_policy_action: false,
            prefill_steps: 0,
            n_critics: 2,
            learns: true,
        };
        match self.id {
            MethodId::Sac => {
                b.selector = Selector::Policy;
                b.augment = false;
            }
            MethodId::Expert => {
                b.selector = Selector::Expert;
                b.learns = false;
            }
            MethodId::Edge => {}
            MethodId::Ibrl => {
                let scoring = match self.ibrl_scoring {
                    IbrlScoring::Mean => Scoring::Mean,
                    IbrlScoring::Min => Scoring::Min,
                };
                b.selector = Selector::Argmax { scoring };
                b.target_mode = TargetMode::IbrlMax;
            }
            MethodId::JsrlCurriculum => b.selector = Selector::Handoff,
            MethodId::JsrlTt => b.selector = Selector::WarmStart { rho_warm: self.rho_warm },
            MethodId::Residual => {
                b.selector = Selector::Residual { bound: self.residual_bound };
                b.composer = Composer::Residual { bound: self.residual_bound };
            }
            MethodId::GatingArgmax => b.selector = Selector::Argmax { scoring: Scoring::Mean },
            MethodId::ArgmaxLcb => b.selector = Selector::Argmax { scoring: self.lcb(kappa) },
            MethodId::NoPessimism => b.selector = Selector::Gate { scoring: Scoring::Min, tau },
            MethodId::BootstrapArgmax => b.target_mode = TargetMode::IbrlMax,
            MethodId::BootstrapLcbGated => b.target_mode = TargetMode::LcbGated { kappa, tau },
            MethodId::NoStateAug => b.augment = false,
            MethodId::NoObsNorm => b.normalize = false,
            MethodId::RandomExpert => b.random_expert = true,
            MethodId::StorePolicyAction => b.store_policy_action = true,
            MethodId::ExpertPrefill => {
                let ratio = total_steps as f64 / self.full_scale_steps as f64;
                b.prefill_steps = (self.prefill_steps_full_scale as f64 * ratio).round() as usize;
            }
            MethodId::LiteralThompson => b.selector = Selector::Thompson,
            MethodId::LiteralThompsonK10 => {
                b.selector = Selector::Thompson;
                b.n_critics = 10;
            }
        }
        b
    }
}

impl Behavior {
    /// The action written to the replay buffer: the executed one, unless
    /// the `store_policy_action` breaker is on.
    pub fn stored_action(&self, policy_action: &[f64], executed: &[f64]) -> Vec<f64> {
        if self.store_policy_action { policy_action } else { executed }.to_vec()
    }
}

/// Per-step inputs to a selector.
#[derive(Debug, Clone, Copy)]
pub struct StepContext<'a> {
    /// Critic input (normalised augmented state).
    pub state: &'a [f64],
    /// Actor output; for the residual method this is the correction.
    pub policy_action: &'a [f64],
    pub expert_action: &'a [f64],
    pub t_episode: usize,
    /// Current handoff step of the curriculum.
    pub handoff: usize,
    pub global_step: usize,
    pub total_steps: usize,
}

/// Which arm produced the executed action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Policy,
    Expert,
    /// Residual: both contribute.
    Mixed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub action: Vec<f64>,
    pub arm: Arm,
    /// `(p, delta)` when a stochastic gate fired.
    pub gate: Option<(f64, f64)>,
}

impl Selector {
    pub fn select<Q: QEnsemble + ?Sized, R: Rng + ?Sized>(
        &self,
        ctx: &StepContext<'_>,
        ensemble: &Q,
        rng: &mut R,
        counters: &mut Counters,
    ) -> Selection {
        let arm = |expert: bool| if expert { Arm::Expert } else { Arm::Policy };
        let (pol, exp) = (ctx.policy_action, ctx.expert_action);
        match *self {
            Selector::Policy => {
                counters.policy_only += 1;
                Selection { action: pol.to_vec(), arm: Arm::Policy, gate: None }
            }
            Selector::Expert => {
                counters.expert_only += 1;
                Selection { action: exp.to_vec(), arm: Arm::Expert, gate: None }
            }
            Selector::Gate { scoring, tau } => {
                counters.gate_draws += 1;
                let d = gated_select(ctx.state, pol, exp, ensemble, scoring, tau, rng);
                Selection { action: d.action, arm: arm(d.b), gate: Some((d.p, d.delta)) }
            }
            Selector::Argmax { scoring } => {
                counters.argmax += 1;
                let (action, e) = ibrl_select(ctx.state, pol, exp, ensemble, scoring);
                Selection { action, arm: arm(e), gate: None }
            }
            Selector::Thompson => {
                counters.thompson_draws += 1;
                let (action, e) = literal_thompson_select(ctx.state, pol, exp, ensemble, rng);
                Selection { action, arm: arm(e), gate: None }
            }
            Selector::Handoff => {
                counters.handoff_tests += 1;
                let e = ctx.t_episode < ctx.handoff;
                Selection { action: jsrl_curriculum_select(ctx.t_episode, ctx.handoff, exp, pol), arm: arm(e), gate: None }
            }
            Selector::WarmStart { rho_warm } => {
                counters.warm_start_tests += 1;
                let e = jsrl_tt_is_expert(ctx.global_step, rho_warm, ctx.total_steps);
                Selection { action: if e { exp } else { pol }.to_vec(), arm: arm(e), gate: None }
            }
            Selector::Residual { bound } => {
                counters.residual_adds += 1;
                Selection { action: residual_select(exp, pol, bound), arm: Arm::Mixed, gate: None }
            }
        }
    }

    /// Whether the selector needs critic evaluations.
    pub fn uses_critics(&self) -> bool {
        matches!(self, Selector::Gate { .. } | Selector::Argmax { .. } | Selector::Thompson)
    }
}
