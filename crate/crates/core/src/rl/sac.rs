use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::actor::Actor;
use super::adam::Adam;
use super::mlp::{hcat, rows, Activation, Mlp};
use super::{pessimistic_score, QEnsemble};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SacConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub n_critics: usize,
    pub gamma: f64,
    pub polyak: f64,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub lr_alpha: f64,
    pub batch_size: usize,
    pub init_alpha: f64,
    /// Defaults to `-action_dim`.
    pub target_entropy: Option<f64>,
    pub buffer_capacity: usize,
    /// Environment steps before the first gradient update.
    pub learning_starts: usize,
    pub updates_per_step: usize,
    /// Layer norm on critic hidden layers. Keeps Q bounded when the
    /// buffer holds only expert actions.
    pub critic_layer_norm: bool,
}

impl Default for SacConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            activation: Activation::Relu,
            n_critics: 2,
            gamma: 0.99,
            polyak: 0.005,
            lr_actor: 3e-4,
            lr_critic: 3e-4,
            lr_alpha: 3e-4,
            batch_size: 128,
            init_alpha: 0.1,
            target_entropy: None,
            buffer_capacity: 1_000_000,
            learning_starts: 1000,
            updates_per_step: 1,
            critic_layer_norm: true,
        }
    }
}

/// How the TD target bootstraps at the next state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetMode {
    /// `min_n Qbar(s', a') - alpha log pi(a'|s')`, `a' ~ pi`.
    Standard,
    /// Max of the policy bootstrap and `min_n Qbar(s', a_exp')`.
    IbrlMax,
    /// Gate-weighted mix of the two bootstraps, with the gate probability
    /// from the pessimistic score on the target critics.
    LcbGated { kappa: f64, tau: f64 },
}

/// How the actor's output becomes the executed action.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Composer {
    Direct,
    /// `clip(a_exp + bound * a_res, -1, 1)`.
    Residual { bound: f64 },
}

impl Composer {
    pub fn compose(&self, policy: &[f64], expert: &[f64]) -> Vec<f64> {
        match *self {
            Composer::Direct => policy.to_vec(),
            Composer::Residual { bound } => policy
                .iter()
                .zip(expert)
                .map(|(p, e)| (e + bound * p).clamp(-1.0, 1.0))
                .collect(),
        }
    }

    /// Executed actions and `d executed / d policy` elementwise.
    fn compose_batch(&self, policy: &Array2<f64>, expert: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
        match *self {
            Composer::Direct => (policy.clone(), Array2::ones(policy.raw_dim())),
            Composer::Residual { bound } => {
                let raw = expert + &(policy * bound);
                let grad = raw.mapv(|v| if (-1.0..=1.0).contains(&v) { bound } else { 0.0 });
                (raw.mapv(|v| v.clamp(-1.0, 1.0)), grad)
            }
        }
    }
}

/// A minibatch in normalised augmented coordinates.
#[derive(Debug, Clone)]
pub struct Batch {
    pub states: Array2<f64>,
    pub actions: Array2<f64>,
    pub rewards: Array1<f64>,
    pub next_states: Array2<f64>,
    /// 1.0 where the transition ended in failure.
    pub dones: Array1<f64>,
    pub expert_actions: Array2<f64>,
    pub next_expert_actions: Array2<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Losses {
    pub critic: f64,
    pub actor: f64,
    pub alpha_loss: f64,
    pub alpha: f64,
    /// `-E[log pi]` of the actor samples.
    pub entropy: f64,
    pub q_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sac {
    pub cfg: SacConfig,
    pub state_dim: usize,
    pub action_dim: usize,
    pub actor: Actor,
    pub critics: Vec<Mlp>,
    pub targets: Vec<Mlp>,
    pub log_alpha: f64,
    pub target_entropy: f64,
    pub target_mode: TargetMode,
    pub composer: Composer,
    actor_opt: Adam,
    critic_opts: Vec<Adam>,
    alpha_opt: Adam,
}

fn min_rows(qs: &[Array1<f64>]) -> (Array1<f64>, Vec<usize>) {
    let n = qs[0].len();
    let mut m = qs[0].clone();
    let mut arg = vec![0; n];
    for (k, q) in qs.iter().enumerate().skip(1) {
        for i in 0..n {
            if q[i] < m[i] {
                m[i] = q[i];
                arg[i] = k;
            }
        }
    }
    (m, arg)
}

fn column(m: Array2<f64>) -> Array1<f64> {
    m.index_axis_move(Axis(1), 0)
}

impl Sac {
    pub fn new<R: Rng + ?Sized>(state_dim: usize, action_dim: usize, cfg: SacConfig, rng: &mut R) -> Result<Self> {
        if cfg.n_critics < 2 {
            return Err(Error::invalid("the critic ensemble needs at least two members"));
        }
        let actor = Actor::new(state_dim, action_dim, &cfg.hidden, cfg.activation, rng);
        let mut sizes = vec![state_dim + action_dim];
        sizes.extend_from_slice(&cfg.hidden);
        sizes.push(1);
        let critics: Vec<Mlp> = (0..cfg.n_critics).map(|_| Mlp::new(&sizes, cfg.activation, None, rng).with_layer_norm(cfg.critic_layer_norm)).collect();
        let targets = critics.clone();
        let critic_opts = critics.iter().map(|c| Adam::new(c.n_params(), cfg.lr_critic)).collect();
        Ok(Self {
            state_dim,
            action_dim,
            actor_opt: Adam::new(actor.net.n_params(), cfg.lr_actor),
            actor,
            critics,
            targets,
            log_alpha: cfg.init_alpha.ln(),
            target_entropy: cfg.target_entropy.unwrap_or(-(action_dim as f64)),
            target_mode: TargetMode::Standard,
            composer: Composer::Direct,
            critic_opts,
            alpha_opt: Adam::new(1, cfg.lr_alpha),
            cfg,
        })
    }

    /// A residual actor starts from a zero correction, so the composed
    /// action is the expert's until learning moves it.
    pub fn set_composer(&mut self, composer: Composer) {
        if matches!(composer, Composer::Residual { .. }) {
            self.actor.zero_mean_head();
        }
        self.composer = composer;
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }

    /// Stochastic actor output for one state.
    pub fn sample_action<R: Rng + ?Sized>(&self, state: &[f64], rng: &mut R) -> Vec<f64> {
        let s = rows(&[state]);
        let eps = self.actor.draw_noise(1, rng);
        self.actor.sample(&s, &eps).action.row(0).to_vec()
    }

    pub fn deterministic_action(&self, state: &[f64]) -> Vec<f64> {
        self.actor.deterministic(&rows(&[state])).row(0).to_vec()
    }

    fn q_all(nets: &[Mlp], s: &Array2<f64>, a: &Array2<f64>) -> Vec<Array1<f64>> {
        let x = hcat(s, a);
        nets.iter().map(|n| column(n.predict(&x))).collect()
    }

    /// TD targets; `eps` is the actor noise at the next states.
    pub fn td_target(&self, b: &Batch, eps: &Array2<f64>) -> Array1<f64> {
        let smp = self.actor.sample(&b.next_states, eps);
        let (a2, _) = self.composer.compose_batch(&smp.action, &b.next_expert_actions);
        let q_pol = Self::q_all(&self.targets, &b.next_states, &a2);
        let (min_pol, _) = min_rows(&q_pol);
        let v_pol = &min_pol - &(&smp.log_prob * self.alpha());
        let v = match self.target_mode {
            TargetMode::Standard => v_pol,
            TargetMode::IbrlMax => {
                let (min_exp, _) = min_rows(&Self::q_all(&self.targets, &b.next_states, &b.next_expert_actions));
                Array1::from_shape_fn(v_pol.len(), |i| v_pol[i].max(min_exp[i]))
            }
            TargetMode::LcbGated { kappa, tau } => {
                let q_exp = Self::q_all(&self.targets, &b.next_states, &b.next_expert_actions);
                let (min_exp, _) = min_rows(&q_exp);
                Array1::from_shape_fn(v_pol.len(), |i| {
                    let col = |qs: &[Array1<f64>]| qs.iter().map(|q| q[i]).collect::<Vec<_>>();
                    let delta = pessimistic_score(&col(&q_exp), kappa) - pessimistic_score(&col(&q_pol), kappa);
                    let p = super::sigmoid(delta / tau);
                    p * min_exp[i] + (1.0 - p) * v_pol[i]
                })
            }
        };
        let not_done = b.dones.mapv(|d| 1.0 - d);
        &b.rewards + &(not_done * &v * self.cfg.gamma)
    }

    /// Mean squared TD error of critic `n` and its parameter gradient.
    pub fn critic_loss_grad(&self, n: usize, b: &Batch, y: &Array1<f64>) -> (f64, Vec<f64>) {
        let x = hcat(&b.states, &b.actions);
        let (out, cache) = self.critics[n].forward(&x);
        let q = column(out);
        let diff = &q - y;
        let m = diff.len() as f64;
        let loss = diff.mapv(|d| d * d).sum() / m;
        let dout = (diff * (2.0 / m)).insert_axis(Axis(1));
        (loss, self.critics[n].backward(&cache, &dout).0)
    }

    /// `mean(alpha log pi - min_n Q_n)` over the batch, its gradient in the
    /// actor parameters, and the sample log-probs.
    pub fn actor_loss_grad(&self, b: &Batch, eps: &Array2<f64>) -> (f64, Vec<f64>, Array1<f64>) {
        let alpha = self.alpha();
        let smp = self.actor.sample(&b.states, eps);
        let (a, da_dpol) = self.composer.compose_batch(&smp.action, &b.expert_actions);
        let x = hcat(&b.states, &a);
        let fwd: Vec<_> = self.critics.iter().map(|c| c.forward(&x)).collect();
        let qs: Vec<Array1<f64>> = fwd.iter().map(|(o, _)| column(o.clone())).collect();
        let (qmin, arg) = min_rows(&qs);
        let m = qmin.len() as f64;
        let loss = (&smp.log_prob * alpha - &qmin).sum() / m;
        let mut dq_da = Array2::<f64>::zeros(a.raw_dim());
        for (k, (critic, (_, cache))) in self.critics.iter().zip(&fwd).enumerate() {
            let dout = Array2::from_shape_fn((arg.len(), 1), |(i, _)| if arg[i] == k { -1.0 / m } else { 0.0 });
            let (_, dx) = critic.backward(cache, &dout);
            dq_da += &dx.slice(ndarray::s![.., self.state_dim..]);
        }
        let d_action = dq_da * &da_dpol;
        let d_logp = Array1::from_elem(qmin.len(), alpha / m);
        let grad = self.actor.backward(&smp, &d_action, &d_logp);
        (loss, grad, smp.log_prob)
    }

    /// `-mean(log_alpha (log pi + target_entropy))` and its derivative.
    pub fn alpha_loss_grad(&self, log_prob: &Array1<f64>) -> (f64, f64) {
        let g = -(log_prob.mean().unwrap_or(0.0) + self.target_entropy);
        (self.log_alpha * g, g)
    }

    pub fn update<R: Rng + ?Sized>(&mut self, b: &Batch, rng: &mut R) -> Result<Losses> {
        let n = b.states.nrows();
        let eps_next = self.actor.draw_noise(n, rng);
        let y = self.td_target(b, &eps_next);
        let mut critic_loss = 0.0;
        for k in 0..self.critics.len() {
            let (l, g) = self.critic_loss_grad(k, b, &y);
            critic_loss += l;
            self.critic_opts[k].step(&mut self.critics[k].params, &g);
        }
        let eps = self.actor.draw_noise(n, rng);
        let (actor_loss, g, log_prob) = self.actor_loss_grad(b, &eps);
        self.actor_opt.step(&mut self.actor.net.params, &g);
        let (alpha_loss, ga) = self.alpha_loss_grad(&log_prob);
        let mut la = [self.log_alpha];
        self.alpha_opt.step(&mut la, &[ga]);
        self.log_alpha = la[0];
        for (t, c) in self.targets.iter_mut().zip(&self.critics) {
            t.polyak_from(c, self.cfg.polyak);
        }
        let losses = Losses {
            critic: critic_loss,
            actor: actor_loss,
            alpha_loss,
            alpha: self.alpha(),
            entropy: -log_prob.mean().unwrap_or(0.0),
            q_mean: y.mean().unwrap_or(0.0),
        };
        if ![losses.critic, losses.actor, losses.alpha_loss, losses.alpha].iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteLoss {
                what: "sac update",
                diagnostics: format!(
                    "{losses:?}; reward range [{:.3e}, {:.3e}], |state| max {:.3e}",
                    b.rewards.fold(f64::INFINITY, |a, &v| a.min(v)),
                    b.rewards.fold(f64::NEG_INFINITY, |a, &v| a.max(v)),
                    b.states.fold(0.0f64, |a, &v| a.max(v.abs())),
                ),
            });
        }
        Ok(losses)
    }
}

impl QEnsemble for Sac {
    fn n_critics(&self) -> usize {
        self.critics.len()
    }

    fn q_values(&self, state: &[f64], action: &[f64]) -> Vec<f64> {
        let mut x = state.to_vec();
        x.extend_from_slice(action);
        let x = rows(&[&x]);
        self.critics.iter().map(|c| c.predict(&x)[[0, 0]]).collect()
    }
}
