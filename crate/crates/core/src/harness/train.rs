use std::time::Instant;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::config::{Perturbation, RunConfig};
use super::record::{final_window_mean, EpisodeReturn, EvalPoint, RunRecord};
use crate::envs::{self, perturb_observation, EnvState, Simulator, TaskConstants};
use crate::experts::{bias_action, undertune, ExpertController, GainFile, RandomExpert};
use crate::integration::{jsrl_horizon, Behavior, Counters, GateLog, Selector, StepContext};
use crate::rl::{augment, Batch, Losses, ReplayBuffer, RunningNorm, Sac, Source, Transition};
use crate::seeding::{self, Stream};
use crate::{Error, Result};

/// Task constants and the clean tuned expert for a run.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub constants: TaskConstants,
    pub gains: Option<GainFile>,
}

impl RunContext {
    /// Load constants and, for expert-using methods, the gains file.
    pub fn load(cfg: &RunConfig) -> Result<Self> {
        let constants = match &cfg.constants {
            Some(p) => TaskConstants::load(p)?,
            None => TaskConstants::builtin(),
        };
        let gains = if cfg.method.id.uses_expert() {
            Some(GainFile::load(&GainFile::path_for(&cfg.gains_dir, cfg.env))?)
        } else {
            None
        };
        Ok(Self { constants, gains })
    }

    pub fn with_gains(constants: TaskConstants, gains: Option<GainFile>) -> Self {
        Self { constants, gains }
    }
}

/// Training-time and deployment-time controllers of one seed.
struct Experts {
    train: ExpertController,
    eval: ExpertController,
    /// Additive deployment bias on the expert's action.
    bias: Option<Vec<f64>>,
}

fn build_experts(cfg: &RunConfig, behavior: &Behavior, gains: &GainFile, seed: u64, action_dim: usize) -> Experts {
    let clean = gains.controller.clone();
    if behavior.random_expert {
        let random = ExpertController::Random(RandomExpert {
            action_dim,
            seed: seeding::derive(seed, Stream::RandomExpert, 0),
        });
        return Experts {
            train: random.clone(),
            eval: random,
            bias: None,
        };
    }
    let mut experts = Experts {
        train: clean.clone(),
        eval: clean,
        bias: None,
    };
    match cfg.perturbation.normalized() {
        Perturbation::Undertune { sigma } => {
            let mut rng = seeding::rng(seed, Stream::Undertune, 0);
            experts.train = undertune(&experts.train, sigma, cfg.undertune_scope, &mut rng);
        }
        Perturbation::ActionBias { sigma } => {
            let mut rng = seeding::rng(seed, Stream::ActionBias, 0);
            experts.bias = Some((0..action_dim).map(|_| sigma * rng.sample::<f64, _>(StandardNormal)).collect());
        }
        Perturbation::ObsNoise { .. } | Perturbation::None => {}
    }
    experts
}

/// Learner state plus the resolved method behaviour.
struct Agent {
    sac: Option<Sac>,
    norm: RunningNorm,
    behavior: Behavior,
    obs_dim: usize,
    z_dim: usize,
}

impl Agent {
    fn features(&self, obs: &[f64], z: &[f64]) -> Result<Vec<f64>> {
        if self.z_dim == 0 {
            augment(obs, &[], self.obs_dim, 0)
        } else {
            augment(obs, z, self.obs_dim, self.z_dim)
        }
    }

    fn normalized(&self, raw: &[f64]) -> Vec<f64> {
        if self.behavior.normalize {
            self.norm.apply(raw)
        } else {
            raw.to_vec()
        }
    }
}

/// Minibatch in normalised coordinates, using the current statistics.
fn make_batch(norm: Option<&RunningNorm>, replay: &ReplayBuffer, idx: &[usize]) -> Batch {
    let n = idx.len();
    let t0 = replay.get(idx[0]);
    let (sd, ad) = (t0.state.len(), t0.action.len());
    let mut b = Batch {
        states: Array2::zeros((n, sd)),
        actions: Array2::zeros((n, ad)),
        rewards: Array1::zeros(n),
        next_states: Array2::zeros((n, sd)),
        dones: Array1::zeros(n),
        expert_actions: Array2::zeros((n, ad)),
        next_expert_actions: Array2::zeros((n, ad)),
    };
    for (row, &i) in idx.iter().enumerate() {
        let t = replay.get(i);
        let s = norm.map_or_else(|| t.state.clone(), |n| n.apply(&t.state));
        let s2 = norm.map_or_else(|| t.next_state.clone(), |n| n.apply(&t.next_state));
        for j in 0..sd {
            b.states[[row, j]] = s[j];
            b.next_states[[row, j]] = s2[j];
        }
        for j in 0..ad {
            b.actions[[row, j]] = t.action[j];
            b.expert_actions[[row, j]] = t.expert_action[j];
            b.next_expert_actions[[row, j]] = t.next_expert_action[j];
        }
        b.rewards[row] = t.reward;
        b.dones[row] = if t.done { 1.0 } else { 0.0 };
    }
    b
}

/// Deployment action: the actor's mean through the method's selector.
/// Curriculum and warm-start methods deploy the bare policy.
fn deployment_action(
    agent: &Agent,
    state_n: &[f64],
    expert_action: &[f64],
    rng: &mut ChaCha8Rng,
    counters: &mut Counters,
) -> Vec<f64> {
    let Some(sac) = &agent.sac else {
        return expert_action.to_vec();
    };
    let policy = sac.deterministic_action(state_n);
    let selector = match agent.behavior.selector {
        Selector::Handoff | Selector::WarmStart { .. } => Selector::Policy,
        s => s,
    };
    let ctx = StepContext {
        state: state_n,
        policy_action: &policy,
        expert_action,
        t_episode: 0,
        handoff: 0,
        global_step: 0,
        total_steps: 0,
    };
    selector.select(&ctx, sac, rng, counters).action
}

fn evaluate(
    cfg: &RunConfig,
    env: &dyn Simulator,
    agent: &Agent,
    experts: Option<&Experts>,
    seed: u64,
    eval_index: u64,
) -> Result<Vec<f64>> {
    let dt = env.dt();
    let mut gate_rng = seeding::rng(seed, Stream::EvalGate, eval_index);
    let mut noise_rng = seeding::rng(seed, Stream::ObsNoise, eval_index);
    let noise = match cfg.perturbation.normalized() {
        Perturbation::ObsNoise { sigma } => sigma,
        _ => 0.0,
    };
    let mut scratch = Counters::default();
    let mut returns = Vec::with_capacity(cfg.eval_episodes);
    for e in 0..cfg.eval_episodes {
        let mut state = env.reset(seeding::derive(seed, Stream::EvalEpisode, e as u64));
        let sense = |s: &EnvState, rng: &mut ChaCha8Rng| -> Vec<f64> {
            if noise > 0.0 {
                perturb_observation(&s.observation, noise, rng)
            } else {
                s.observation.clone()
            }
        };
        let mut obs = sense(&state, &mut noise_rng);
        let mut z = experts.map_or_else(Vec::new, |x| x.eval.initial_state(&obs));
        let mut ret = 0.0;
        while !state.done {
            let (a_exp, z_next) = match experts {
                Some(x) => {
                    let (a, zn) = x.eval.act(&obs, &z, dt);
                    (x.bias.as_ref().map_or(a.clone(), |b| bias_action(&a, b)), zn)
                }
                None => (vec![0.0; env.spec().action_dim], Vec::new()),
            };
            let s_n = agent.normalized(&agent.features(&obs, &z)?);
            let action = deployment_action(agent, &s_n, &a_exp, &mut gate_rng, &mut scratch);
            ret += env.step_in_place(&mut state, &action)?;
            obs = sense(&state, &mut noise_rng);
            z = z_next;
        }
        returns.push(ret);
    }
    Ok(returns)
}

pub const RNG_PROVENANCE: &str = "ChaCha8 streams keyed by (seed, stream tag, index) via splitmix64";

/// Train one seed. Non-finite losses end the run early with a flagged,
/// partial record rather than an error.
pub fn train_seed(cfg: &RunConfig, seed: u64, ctx: &RunContext) -> Result<RunRecord> {
    cfg.validate()?;
    let started = Instant::now();
    let env = envs::make(cfg.env, &ctx.constants);
    let spec = env.spec().clone();
    let dt = env.dt();
    let behavior = cfg.method.behavior(cfg.env, cfg.total_steps);
    let experts = match (&ctx.gains, cfg.method.id.uses_expert()) {
        (Some(g), true) => {
            if g.task != cfg.env {
                return Err(Error::invalid(format!("gains file is for {}, run is on {}", g.task, cfg.env)));
            }
            Some(build_experts(cfg, &behavior, g, seed, spec.action_dim))
        }
        (None, true) => return Err(Error::MissingGains(GainFile::path_for(&cfg.gains_dir, cfg.env))),
        _ => None,
    };
    let z_dim = match &experts {
        Some(x) if behavior.augment => x.train.state_dim(),
        _ => 0,
    };
    let state_dim = spec.obs_dim + z_dim;
    let sac = if behavior.learns {
        let sac_cfg = crate::rl::SacConfig {
            n_critics: behavior.n_critics,
            ..cfg.sac.clone()
        };
        let mut sac = Sac::new(state_dim, spec.action_dim, sac_cfg, &mut seeding::rng(seed, Stream::Init, 0))?;
        sac.target_mode = behavior.target_mode;
        sac.set_composer(behavior.composer);
        Some(sac)
    } else {
        None
    };
    let mut agent = Agent {
        sac,
        norm: RunningNorm::new(state_dim),
        behavior: behavior.clone(),
        obs_dim: spec.obs_dim,
        z_dim,
    };

    let mut actor_rng = seeding::rng(seed, Stream::Actor, 0);
    let mut update_rng = seeding::rng(seed, Stream::Actor, 1);
    let mut gate_rng = seeding::rng(seed, Stream::Gate, 0);
    let mut replay_rng = seeding::rng(seed, Stream::Replay, 0);
    let mut replay = ReplayBuffer::new(cfg.sac.buffer_capacity.max(1));
    let mut counters = Counters::default();
    let mut gate_log = GateLog::new(cfg.gate_window, cfg.gate_decimation);
    let mut evals = Vec::new();
    let mut train_returns = Vec::new();
    let mut last_losses = None;
    let mut aborted = None;

    let eval_now = |agent: &Agent, step: usize, evals: &mut Vec<EvalPoint>, losses: Option<Losses>| -> Result<()> {
        let returns = evaluate(cfg, env.as_ref(), agent, experts.as_ref(), seed, evals.len() as u64)?;
        let mean = returns.iter().sum::<f64>() / returns.len() as f64;
        evals.push(EvalPoint { step, returns, mean, losses });
        Ok(())
    };
    eval_now(&agent, 0, &mut evals, None)?;

    let prefill = if agent.sac.is_some() { behavior.prefill_steps } else { 0 };
    let total = cfg.total_steps;
    let min_replay = cfg.sac.learning_starts.max(cfg.sac.batch_size).max(1);
    // Environment steps so far, prefill included.
    let mut t_all = 0usize;
    let mut episode = 0u64;
    'episodes: while t_all < prefill + total {
        let mut state = env.reset(seeding::derive(seed, Stream::EnvEpisode, episode));
        episode += 1;
        let main_step = t_all.saturating_sub(prefill);
        let handoff = jsrl_horizon(main_step as f64 / total.max(1) as f64, spec.horizon);
        let mut z = experts.as_ref().map_or_else(Vec::new, |x| x.train.initial_state(&state.observation));
        let (mut a_exp, mut z_next) = match &experts {
            Some(x) => x.train.act(&state.observation, &z, dt),
            None => (vec![0.0; spec.action_dim], Vec::new()),
        };
        let mut s_raw = agent.features(&state.observation, &z)?;
        let mut ep_return = 0.0;
        let mut t_episode = 0usize;
        while !state.done && t_all < prefill + total {
            let in_prefill = t_all < prefill;
            let main_step = t_all.saturating_sub(prefill);
            if agent.behavior.normalize {
                agent.norm.update(&s_raw);
            }
            let s_n = agent.normalized(&s_raw);
            let policy = match &agent.sac {
                Some(sac) => sac.sample_action(&s_n, &mut actor_rng),
                None => a_exp.clone(),
            };
            let selection = if in_prefill {
                counters.prefill += 1;
                crate::integration::Selection {
                    action: a_exp.clone(),
                    arm: crate::integration::Arm::Expert,
                    gate: None,
                }
            } else {
                let sctx = StepContext {
                    state: &s_n,
                    policy_action: &policy,
                    expert_action: &a_exp,
                    t_episode,
                    handoff,
                    global_step: main_step,
                    total_steps: total,
                };
                match &agent.sac {
                    Some(sac) => agent.behavior.selector.select(&sctx, sac, &mut gate_rng, &mut counters),
                    None => Selector::Expert.select(&sctx, &NoCritics, &mut gate_rng, &mut counters),
                }
            };
            if let Some((p, delta)) = selection.gate {
                gate_log.record(main_step, p, selection.arm == crate::integration::Arm::Expert, delta);
            }
            let executed: Vec<f64> = selection.action.iter().map(|a| a.clamp(-1.0, 1.0)).collect();
            let r = env.step_in_place(&mut state, &executed)?;
            ep_return += r;
            t_episode += 1;
            t_all += 1;
            z = z_next;
            let next = match &experts {
                Some(x) => x.train.act(&state.observation, &z, dt),
                None => (vec![0.0; spec.action_dim], Vec::new()),
            };
            let s2_raw = agent.features(&state.observation, &z)?;
            if agent.sac.is_some() {
                let stored = agent.behavior.stored_action(&policy, &executed);
                replay.push(Transition {
                    state: s_raw.clone(),
                    action: stored,
                    reward: r,
                    next_state: s2_raw.clone(),
                    done: state.terminated,
                    expert_action: a_exp.clone(),
                    next_expert_action: next.0.clone(),
                    source: match selection.arm {
                        crate::integration::Arm::Policy => Source::Policy,
                        crate::integration::Arm::Expert => Source::Expert,
                        crate::integration::Arm::Mixed => Source::Mixed,
                    },
                });
            }
            (a_exp, z_next) = next;
            s_raw = s2_raw;
            if in_prefill {
                continue;
            }
            let main_done = main_step + 1;
            if replay.len() >= min_replay {
                let norm = agent.behavior.normalize.then_some(&agent.norm);
                if let Some(sac) = agent.sac.as_mut() {
                    let mut failed = None;
                    for _ in 0..cfg.sac.updates_per_step.max(1) {
                        let idx = replay.sample_indices(cfg.sac.batch_size, &mut replay_rng);
                        let batch = make_batch(norm, &replay, &idx);
                        match sac.update(&batch, &mut update_rng) {
                            Ok(l) => last_losses = Some(l),
                            Err(e) => {
                                failed = Some(e.to_string());
                                break;
                            }
                        }
                    }
                    if let Some(msg) = failed {
                        log::warn!("seed {seed}: run aborted at step {main_done}: {msg}");
                        aborted = Some(format!("step {main_done}: {msg}"));
                        break 'episodes;
                    }
                }
            }
            if main_done % cfg.eval_interval == 0 {
                eval_now(&agent, main_done, &mut evals, last_losses)?;
            }
        }
        if state.done {
            train_returns.push(EpisodeReturn {
                step: t_all.saturating_sub(prefill),
                value: ep_return,
            });
        }
    }

    let (final_window, final_window_evals) = final_window_mean(&evals, total, cfg.final_window_fraction);
    Ok(RunRecord {
        config: cfg.for_seed(seed),
        config_hash: cfg.for_seed(seed).hash(),
        cell_hash: cfg.cell_hash(),
        seed,
        evals,
        train_returns,
        gate: matches!(behavior.selector, Selector::Gate { .. }).then_some(gate_log),
        counters,
        last_losses,
        final_window,
        final_window_evals,
        j_exp: ctx.gains.as_ref().map(|g| g.j_exp),
        j_ref: spec.j_ref,
        j_exp_unperturbed: true,
        constants_version: ctx.constants.version,
        rng_provenance: RNG_PROVENANCE.to_string(),
        wall_clock_secs: started.elapsed().as_secs_f64(),
        aborted,
    })
}

/// Placeholder ensemble for methods that never consult critics.
struct NoCritics;

impl crate::rl::QEnsemble for NoCritics {
    fn n_critics(&self) -> usize {
        0
    }

    fn q_values(&self, _: &[f64], _: &[f64]) -> Vec<f64> {
        Vec::new()
    }
}

/// Every seed of `cfg`, in order.
pub fn train_run(cfg: &RunConfig) -> Result<Vec<RunRecord>> {
    let ctx = RunContext::load(cfg)?;
    cfg.seeds.iter().map(|&s| train_seed(cfg, s, &ctx)).collect()
}
