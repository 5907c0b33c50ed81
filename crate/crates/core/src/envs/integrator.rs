use rand::Rng;

use super::{begin_step, finish_step, EnvId, EnvSpec, EnvState, Internal, Simulator};
use crate::seeding::{self, Stream};
use crate::Result;

/// `x <- clip(x + 0.2 a, -2, 2)`, reward `max(0, 1 - 4 x^2)`, 50 steps.
/// A fast task for smoke tests; the optimal policy drives `x` to 0.
#[derive(Debug, Clone)]
pub struct IntegratorToy {
    spec: EnvSpec,
}

impl Default for IntegratorToy {
    fn default() -> Self {
        Self {
            spec: EnvSpec::new(EnvId::Integrator, 1, 1, 50, false),
        }
    }
}

impl IntegratorToy {
    pub const GAIN: f64 = 0.2;
}

impl Simulator for IntegratorToy {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn dt(&self) -> f64 {
        1.0
    }

    fn reset(&self, seed: u64) -> EnvState {
        let x = seeding::rng(seed, Stream::EnvEpisode, 0).random_range(-1.0..=1.0);
        EnvState {
            observation: vec![x],
            internal: Internal::Integrator { x },
            step_index: 0,
            done: false,
            terminated: false,
        }
    }

    fn step_in_place(&self, state: &mut EnvState, action: &[f64]) -> Result<f64> {
        let a = begin_step(&self.spec, state, action)?;
        let Internal::Integrator { x } = &mut state.internal else {
            unreachable!("IntegratorToy stepped with a foreign state")
        };
        *x = (*x + Self::GAIN * a[0]).clamp(-2.0, 2.0);
        let r = (1.0 - 4.0 * *x * *x).max(0.0);
        state.observation = vec![*x];
        finish_step(&self.spec, state);
        Ok(r)
    }
}
