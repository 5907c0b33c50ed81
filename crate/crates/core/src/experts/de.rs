use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeStrategy {
    Rand1Bin,
    Best1Bin,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeConfig {
    pub strategy: DeStrategy,
    /// Population size is `pop_multiplier * dim`.
    pub pop_multiplier: usize,
    pub iterations: usize,
    /// Mutation factor drawn uniformly per generation from this range.
    pub mutation: (f64, f64),
    pub crossover: f64,
    /// Finish with a bounded coordinate pattern search from the best point.
    pub polish: bool,
    /// Evaluation budget of the polish, per dimension.
    pub polish_evals_per_dim: usize,
}

impl Default for DeConfig {
    fn default() -> Self {
        Self {
            strategy: DeStrategy::Rand1Bin,
            pop_multiplier: 5,
            iterations: 30,
            mutation: (0.5, 1.0),
            crossover: 0.7,
            polish: true,
            polish_evals_per_dim: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeResult {
    pub best: Vec<f64>,
    pub best_fitness: f64,
    /// Best fitness of the initial population.
    pub initial_best: f64,
    /// Best fitness after each generation (polish excluded).
    pub history: Vec<f64>,
    pub evaluations: usize,
}

/// Maximise `fitness` over the box `bounds` with differential evolution.
/// The initial population is a Latin hypercube; mutant components that leave
/// the box are redrawn uniformly inside it.
pub fn differential_evolution(
    mut fitness: impl FnMut(&[f64]) -> f64,
    bounds: &[(f64, f64)],
    cfg: &DeConfig,
    rng: &mut ChaCha8Rng,
) -> DeResult {
    let dim = bounds.len();
    let np = (cfg.pop_multiplier * dim).max(5);
    let mut evaluations = 0;
    let mut eval = |x: &[f64]| {
        evaluations += 1;
        let f = fitness(x);
        if f.is_nan() {
            f64::NEG_INFINITY
        } else {
            f
        }
    };

    let mut pop: Vec<Vec<f64>> = vec![vec![0.0; dim]; np];
    for (j, &(lo, hi)) in bounds.iter().enumerate() {
        let mut strata: Vec<usize> = (0..np).collect();
        strata.shuffle(rng);
        for (i, s) in strata.into_iter().enumerate() {
            let u = (s as f64 + rng.random::<f64>()) / np as f64;
            pop[i][j] = lo + u * (hi - lo);
        }
    }
    let mut fit: Vec<f64> = pop.iter().map(|x| eval(x)).collect();
    let argmax = |fit: &[f64]| {
        (0..fit.len()).fold(0, |b, i| if fit[i] > fit[b] { i } else { b })
    };
    let mut best = argmax(&fit);
    let initial_best = fit[best];
    let mut history = Vec::with_capacity(cfg.iterations);

    for _ in 0..cfg.iterations {
        let f = rng.random_range(cfg.mutation.0..=cfg.mutation.1);
        for i in 0..np {
            let mut pick = |excl: &[usize]| loop {
                let r = rng.random_range(0..np);
                if !excl.contains(&r) {
                    break r;
                }
            };
            let r1 = pick(&[i]);
            let r2 = pick(&[i, r1]);
            let r3 = pick(&[i, r1, r2]);
            let base = match cfg.strategy {
                DeStrategy::Rand1Bin => r1,
                DeStrategy::Best1Bin => best,
            };
            let (a, b) = match cfg.strategy {
                DeStrategy::Rand1Bin => (r2, r3),
                DeStrategy::Best1Bin => (r1, r2),
            };
            let jrand = rng.random_range(0..dim);
            let trial: Vec<f64> = (0..dim)
                .map(|j| {
                    if j != jrand && rng.random::<f64>() >= cfg.crossover {
                        return pop[i][j];
                    }
                    let v = pop[base][j] + f * (pop[a][j] - pop[b][j]);
                    let (lo, hi) = bounds[j];
                    if (lo..=hi).contains(&v) {
                        v
                    } else {
                        rng.random_range(lo..=hi)
                    }
                })
                .collect();
            let ft = eval(&trial);
            if ft >= fit[i] {
                pop[i] = trial;
                fit[i] = ft;
                if ft > fit[best] {
                    best = i;
                }
            }
        }
        history.push(fit[best]);
    }

    let mut x = pop[best].clone();
    let mut fx = fit[best];
    if cfg.polish {
        let budget = cfg.polish_evals_per_dim * dim;
        let mut step: Vec<f64> = bounds.iter().map(|(lo, hi)| 0.1 * (hi - lo)).collect();
        let mut used = 0;
        'outer: while used < budget {
            let mut improved = false;
            for j in 0..dim {
                for sign in [1.0, -1.0] {
                    if used >= budget {
                        break 'outer;
                    }
                    let (lo, hi) = bounds[j];
                    let cand = (x[j] + sign * step[j]).clamp(lo, hi);
                    if cand == x[j] {
                        continue;
                    }
                    let mut y = x.clone();
                    y[j] = cand;
                    let fy = eval(&y);
                    used += 1;
                    if fy > fx {
                        x = y;
                        fx = fy;
                        improved = true;
                        break;
                    }
                }
            }
            if !improved {
                for (s, (lo, hi)) in step.iter_mut().zip(bounds) {
                    *s /= 2.0;
                    if *s < 1e-12 * (hi - lo) {
                        break 'outer;
                    }
                }
            }
        }
    }

    DeResult {
        best: x,
        best_fitness: fx,
        initial_best,
        history,
        evaluations,
    }
}
