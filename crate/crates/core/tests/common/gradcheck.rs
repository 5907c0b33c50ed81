//! Central finite-difference checks of every SAC loss gradient on a tiny
//! network.

use edgebench::rl::{Activation, Batch, Composer, Sac, SacConfig};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const STATE: usize = 3;
pub const ACTION: usize = 2;

pub fn tiny_sac(seed: u64, activation: Activation, critic_layer_norm: bool) -> Sac {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = SacConfig {
        hidden: vec![4],
        activation,
        init_alpha: 0.3,
        critic_layer_norm,
        ..SacConfig::default()
    };
    let mut sac = Sac::new(STATE, ACTION, cfg, &mut rng).unwrap();
    // Move away from the near-zero output initialisation.
    for p in sac.actor.net.params.iter_mut() {
        *p += 0.3 * rng.sample::<f64, _>(StandardNormal);
    }
    for c in sac.critics.iter_mut() {
        for p in c.params.iter_mut() {
            *p += 0.3 * rng.sample::<f64, _>(StandardNormal);
        }
    }
    sac
}

pub fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_fn((r, c), |_| scale * rng.sample::<f64, _>(StandardNormal))
}

pub fn tiny_batch(seed: u64) -> Batch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 3;
    Batch {
        states: random_matrix(&mut rng, n, STATE, 1.0),
        actions: random_matrix(&mut rng, n, ACTION, 0.5).mapv(|v| v.clamp(-0.9, 0.9)),
        rewards: Array1::from_shape_fn(n, |_| rng.random::<f64>()),
        next_states: random_matrix(&mut rng, n, STATE, 1.0),
        dones: Array1::from(vec![0.0, 1.0, 0.0]),
        expert_actions: random_matrix(&mut rng, n, ACTION, 0.2),
        next_expert_actions: random_matrix(&mut rng, n, ACTION, 0.2),
    }
}

/// `max |g - fd| / max |fd|`.
pub fn relative_error(g: &[f64], fd: &[f64]) -> f64 {
    let scale = fd.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    assert!(scale > 1e-8, "degenerate gradient");
    g.iter().zip(fd).fold(0.0f64, |a, (x, y)| a.max((x - y).abs())) / scale
}

fn central_difference(params: &mut [f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let h = 1e-6;
    (0..params.len())
        .map(|i| {
            let orig = params[i];
            params[i] = orig + h;
            let up = f(params);
            params[i] = orig - h;
            let down = f(params);
            params[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Relative errors `(critic, actor, alpha)`, the critic one maximised
/// over the ensemble.
pub fn gradient_errors(activation: Activation, composer: Composer, critic_layer_norm: bool) -> (f64, f64, f64) {
    let mut sac = tiny_sac(11, activation, critic_layer_norm);
    sac.composer = composer;
    let b = tiny_batch(12);
    let y = sac.td_target(&b, &random_matrix(&mut ChaCha8Rng::seed_from_u64(13), 3, ACTION, 1.0));

    let mut critic = 0.0f64;
    for k in 0..sac.critics.len() {
        let (_, g) = sac.critic_loss_grad(k, &b, &y);
        let mut params = sac.critics[k].params.clone();
        let mut probe = sac.clone();
        let fd = central_difference(&mut params, |p| {
            probe.critics[k].params.copy_from_slice(p);
            probe.critic_loss_grad(k, &b, &y).0
        });
        critic = critic.max(relative_error(&g, &fd));
    }

    let eps = random_matrix(&mut ChaCha8Rng::seed_from_u64(14), 3, ACTION, 1.0);
    let (_, g, log_prob) = sac.actor_loss_grad(&b, &eps);
    let mut params = sac.actor.net.params.clone();
    let mut probe = sac.clone();
    let fd = central_difference(&mut params, |p| {
        probe.actor.net.params.copy_from_slice(p);
        probe.actor_loss_grad(&b, &eps).0
    });
    let actor = relative_error(&g, &fd);

    let (_, ga) = sac.alpha_loss_grad(&log_prob);
    let mut la = [sac.log_alpha];
    let mut probe = sac.clone();
    let fd = central_difference(&mut la, |p| {
        probe.log_alpha = p[0];
        probe.alpha_loss_grad(&log_prob).0
    });
    (critic, actor, relative_error(&[ga], &fd))
}

/// Every (activation, composer, critic layer norm) combination.
pub fn all_cases() -> Vec<(Activation, Composer, bool)> {
    let mut out = Vec::new();
    for activation in [Activation::Tanh, Activation::Relu] {
        for composer in [Composer::Direct, Composer::Residual { bound: 0.3 }] {
            for ln in [false, true] {
                out.push((activation, composer, ln));
            }
        }
    }
    out
}
