//! Compact SAC backbone: MLPs with analytic gradients, a critic ensemble
//! with Polyak targets, adaptive entropy temperature, replay, running
//! observation normalisation and expert-state augmentation.

mod actor;
mod adam;
mod mlp;
mod norm;
mod replay;
mod sac;

use serde::{Deserialize, Serialize};

pub use actor::{Actor, ActorSample};
pub use adam::Adam;
pub use mlp::{hcat, rows, Activation, Mlp};
pub use norm::RunningNorm;
pub use replay::{ReplayBuffer, Source, Transition};
pub use sac::{Batch, Composer, Losses, Sac, SacConfig, TargetMode};

use crate::{Error, Result};

/// Anything that scores a state-action pair with several value estimates.
pub trait QEnsemble {
    fn n_critics(&self) -> usize;
    fn q_values(&self, state: &[f64], action: &[f64]) -> Vec<f64>;
}

/// `[s, z]`, checked against the declared widths.
pub fn augment(obs: &[f64], z: &[f64], obs_dim: usize, z_dim: usize) -> Result<Vec<f64>> {
    if obs.len() != obs_dim {
        return Err(Error::Dimension {
            context: "observation",
            expected: obs_dim,
            got: obs.len(),
        });
    }
    if z.len() != z_dim {
        return Err(Error::Dimension {
            context: "expert state",
            expected: z_dim,
            got: z.len(),
        });
    }
    if obs.iter().chain(z).any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite value in augmented state"));
    }
    let mut s = Vec::with_capacity(obs_dim + z_dim);
    s.extend_from_slice(obs);
    s.extend_from_slice(z);
    Ok(s)
}

/// `min_n Q_n - kappa (max_n Q_n - min_n Q_n)`.
pub fn pessimistic_score(qs: &[f64], kappa: f64) -> f64 {
    let lo = qs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = qs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    lo - kappa * (hi - lo)
}

/// How an ensemble's outputs collapse to one score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scoring {
    /// `min - kappa * range`.
    Lcb { kappa: f64 },
    /// `mean - kappa * std` (population std).
    MeanStd { kappa: f64 },
    Mean,
    Min,
}

impl Scoring {
    pub fn score(&self, qs: &[f64]) -> f64 {
        let n = qs.len() as f64;
        let mean = qs.iter().sum::<f64>() / n;
        match *self {
            Scoring::Lcb { kappa } => pessimistic_score(qs, kappa),
            Scoring::MeanStd { kappa } => {
                let var = qs.iter().map(|q| (q - mean).powi(2)).sum::<f64>() / n;
                mean - kappa * var.sqrt()
            }
            Scoring::Mean => mean,
            Scoring::Min => pessimistic_score(qs, 0.0),
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
