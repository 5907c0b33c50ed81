use std::f64::consts::{LN_2, PI};

use ndarray::{s, Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::mlp::{Activation, Cache, Mlp};

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// `log(1 - tanh(u)^2)`, stable for large `|u|`.
fn log_tanh_jacobian(u: f64) -> f64 {
    2.0 * (LN_2 - u - softplus(-2.0 * u))
}

/// Tanh-squashed diagonal Gaussian policy. The network emits the mean and
/// a raw log-std per action dimension; the log-std is squashed smoothly
/// into `log_std_bounds`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Actor {
    pub net: Mlp,
    pub act_dim: usize,
    pub log_std_bounds: (f64, f64),
}

/// Reparameterised sample with everything the backward pass needs.
pub struct ActorSample {
    pub action: Array2<f64>,
    pub log_prob: Array1<f64>,
    eps: Array2<f64>,
    log_std: Array2<f64>,
    raw: Array2<f64>,
    cache: Cache,
}

impl Actor {
    pub fn new<R: Rng + ?Sized>(
        obs_dim: usize,
        act_dim: usize,
        hidden: &[usize],
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let mut sizes = vec![obs_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(2 * act_dim);
        let mut net = Mlp::new(&sizes, activation, Some(3e-3), rng);
        let log_std_bounds = (-5.0, 2.0);
        // Start near unit standard deviation.
        let raw0 = Self::raw_for(log_std_bounds, 0.0);
        for b in &mut net.output_bias_mut()[act_dim..] {
            *b += raw0;
        }
        Self {
            net,
            act_dim,
            log_std_bounds,
        }
    }

    /// Zero the mean head so the initial mean action is exactly 0 for any
    /// input. Gradients still reach it through the hidden activations.
    pub fn zero_mean_head(&mut self) {
        let sizes = &self.net.sizes;
        let (fan_in, fan_out) = (sizes[sizes.len() - 2], sizes[sizes.len() - 1]);
        let off = self.net.n_params() - (fan_in + 1) * fan_out;
        for i in 0..=fan_in {
            for j in 0..self.act_dim {
                self.net.params[off + i * fan_out + j] = 0.0;
            }
        }
    }

    fn raw_for((lo, hi): (f64, f64), log_std: f64) -> f64 {
        (2.0 * (log_std - lo) / (hi - lo) - 1.0).atanh()
    }

    fn squash_log_std(&self, raw: f64) -> f64 {
        let (lo, hi) = self.log_std_bounds;
        lo + 0.5 * (hi - lo) * (raw.tanh() + 1.0)
    }

    fn heads(&self, out: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
        let d = self.act_dim;
        (out.slice(s![.., ..d]).to_owned(), out.slice(s![.., d..]).to_owned())
    }

    /// Squashed mean, the deterministic evaluation action.
    pub fn deterministic(&self, states: &Array2<f64>) -> Array2<f64> {
        let (mu, _) = self.heads(&self.net.predict(states));
        mu.mapv(f64::tanh)
    }

    pub fn draw_noise<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Array2<f64> {
        Array2::from_shape_simple_fn((batch, self.act_dim), || rng.sample(StandardNormal))
    }

    pub fn sample(&self, states: &Array2<f64>, eps: &Array2<f64>) -> ActorSample {
        let (out, cache) = self.net.forward(states);
        let (mu, raw) = self.heads(&out);
        let log_std = raw.mapv(|r| self.squash_log_std(r));
        let u = &mu + &(log_std.mapv(f64::exp) * eps);
        let action = u.mapv(f64::tanh);
        let half_ln_2pi = 0.5 * (2.0 * PI).ln();
        let mut log_prob = Array1::zeros(states.nrows());
        for i in 0..states.nrows() {
            let mut lp = 0.0;
            for j in 0..self.act_dim {
                let e = eps[[i, j]];
                lp += -0.5 * e * e - log_std[[i, j]] - half_ln_2pi - log_tanh_jacobian(u[[i, j]]);
            }
            log_prob[i] = lp;
        }
        ActorSample {
            action,
            log_prob,
            eps: eps.clone(),
            log_std,
            raw,
            cache,
        }
    }

    /// Log-density of a squashed action `a` in (-1, 1)^d.
    pub fn log_prob(&self, states: &Array2<f64>, actions: &Array2<f64>) -> Array1<f64> {
        let (mu, raw) = self.heads(&self.net.predict(states));
        let half_ln_2pi = 0.5 * (2.0 * PI).ln();
        let mut out = Array1::zeros(states.nrows());
        for i in 0..states.nrows() {
            for j in 0..self.act_dim {
                let ls = self.squash_log_std(raw[[i, j]]);
                let u = actions[[i, j]].atanh();
                let z = (u - mu[[i, j]]) / ls.exp();
                out[i] += -0.5 * z * z - ls - half_ln_2pi - log_tanh_jacobian(u);
            }
        }
        out
    }

    /// Parameter gradient of `L` given `dL/da` per action and `dL/dlogp`
    /// per row, holding the noise fixed.
    pub fn backward(&self, s: &ActorSample, d_action: &Array2<f64>, d_log_prob: &Array1<f64>) -> Vec<f64> {
        let (lo, hi) = self.log_std_bounds;
        let d = self.act_dim;
        let n = s.action.nrows();
        let mut dout = Array2::zeros((n, 2 * d));
        for i in 0..n {
            for j in 0..d {
                let t = s.action[[i, j]];
                let sigma = s.log_std[[i, j]].exp();
                let e = s.eps[[i, j]];
                let dlp = d_log_prob[i];
                // d logp / du = 2 tanh(u) (Jacobian term); d logp / dlog_std = -1
                // at fixed noise.
                let du = d_action[[i, j]] * (1.0 - t * t) + dlp * 2.0 * t;
                let dls = du * sigma * e - dlp;
                let draw = dls * 0.5 * (hi - lo) * (1.0 - s.raw[[i, j]].tanh().powi(2));
                dout[[i, j]] = du;
                dout[[i, d + j]] = draw;
            }
        }
        self.net.backward(&s.cache, &dout).0
    }
}
