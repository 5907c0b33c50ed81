use std::f64::consts::TAU;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::de::{differential_evolution, DeConfig, DeResult};
use crate::seeding::{self, Stream};

/// Central pattern generator: `a_i = amp_i sin(theta + phase_i)` with the
/// shared phase `theta` advancing at `2 pi f` rad/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cpg {
    pub frequency: f64,
    pub amplitudes: Vec<f64>,
    pub phases: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpgBounds {
    pub frequency: (f64, f64),
    pub amplitude: (f64, f64),
    pub phase: (f64, f64),
}

impl Default for CpgBounds {
    fn default() -> Self {
        Self {
            frequency: (0.5, 5.0),
            amplitude: (0.0, 1.0),
            phase: (0.0, TAU),
        }
    }
}

impl CpgBounds {
    /// Flat box: frequency, then amplitudes, then phases.
    pub fn boxes(&self, joints: usize) -> Vec<(f64, f64)> {
        let mut b = vec![self.frequency];
        b.extend(std::iter::repeat_n(self.amplitude, joints));
        b.extend(std::iter::repeat_n(self.phase, joints));
        b
    }
}

impl Cpg {
    pub fn action_dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn to_params(&self) -> Vec<f64> {
        let mut p = vec![self.frequency];
        p.extend(&self.amplitudes);
        p.extend(&self.phases);
        p
    }

    pub fn from_params(p: &[f64]) -> Self {
        let n = (p.len() - 1) / 2;
        Self {
            frequency: p[0],
            amplitudes: p[1..1 + n].to_vec(),
            phases: p[1 + n..1 + 2 * n].to_vec(),
        }
    }

    pub fn initial_state(&self) -> Vec<f64> {
        vec![0.0]
    }

    pub fn act(&self, z: &[f64], dt: f64) -> (Vec<f64>, Vec<f64>) {
        let theta = z[0];
        let a = self
            .amplitudes
            .iter()
            .zip(&self.phases)
            .map(|(amp, ph)| (amp * (theta + ph).sin()).clamp(-1.0, 1.0))
            .collect();
        (a, vec![(theta + TAU * self.frequency * dt).rem_euclid(TAU)])
    }
}

/// Anything that scores a CPG over an episode.
pub trait CpgPlant: Sync {
    fn episode_return(&self, cpg: &Cpg, seed: u64) -> f64;
}

/// Six damped oscillators with a shared natural frequency driven by the CPG.
/// Reward per step is the mean joint speed relative to the resonant peak,
/// clipped to `[0, 1]`, so the return peaks when the CPG drives at
/// resonance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonantPlant {
    pub natural_frequency: f64,
    pub damping: f64,
    pub dt: f64,
    pub steps: usize,
}

impl Default for ResonantPlant {
    fn default() -> Self {
        Self {
            natural_frequency: 2.0,
            damping: 0.1,
            dt: 0.01,
            steps: 500,
        }
    }
}

impl CpgPlant for ResonantPlant {
    fn episode_return(&self, cpg: &Cpg, seed: u64) -> f64 {
        let w0 = TAU * self.natural_frequency;
        let peak = w0 / (2.0 * self.damping);
        let n = cpg.action_dim();
        let mut rng = seeding::rng(seed, Stream::EnvEpisode, 0);
        let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(-0.1..0.1)).collect();
        let mut v = vec![0.0; n];
        let mut z = vec![rng.random_range(0.0..TAU)];
        let mut ret = 0.0;
        for _ in 0..self.steps {
            let (a, z2) = cpg.act(&z, self.dt);
            z = z2;
            let mut speed = 0.0;
            for i in 0..n {
                // Semi-implicit Euler.
                let acc = w0 * w0 * (a[i] - x[i]) - 2.0 * self.damping * w0 * v[i];
                v[i] += self.dt * acc;
                x[i] += self.dt * v[i];
                speed += v[i].abs();
            }
            ret += (speed / n as f64 / peak).clamp(0.0, 1.0);
        }
        ret
    }
}

/// Tune a CPG with differential evolution; fitness is the mean return over
/// `seeds_per_eval` fixed seeds drawn from `rng`.
pub fn de_tune_cpg(
    plant: &dyn CpgPlant,
    joints: usize,
    bounds: &CpgBounds,
    cfg: &DeConfig,
    seeds_per_eval: usize,
    rng: &mut ChaCha8Rng,
) -> (Cpg, DeResult) {
    let seeds: Vec<u64> = (0..seeds_per_eval).map(|_| rng.random()).collect();
    let fitness = |p: &[f64]| {
        let cpg = Cpg::from_params(p);
        seeds.iter().map(|&s| plant.episode_return(&cpg, s)).sum::<f64>() / seeds.len() as f64
    };
    let res = differential_evolution(fitness, &bounds.boxes(joints), cfg, rng);
    (Cpg::from_params(&res.best), res)
}
