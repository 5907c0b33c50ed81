//! Evaluation statistics: ENA, IQM, bootstrap intervals, Mann-Whitney U,
//! Holm-Bonferroni and one-sided permutation tests. Everything here is a
//! pure function of its inputs (and seed).

use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::{Error, Result};

/// Expert-normalised advantage with its inputs kept alongside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ena {
    pub value: f64,
    pub j: f64,
    pub j_exp: f64,
    pub j_ref: f64,
}

/// `(j - j_exp) / (j_ref - j_exp)`: 0 at the expert, 1 at the ceiling.
pub fn ena(j: f64, j_exp: f64, j_ref: f64) -> Result<Ena> {
    if j_ref == j_exp {
        return Err(Error::invalid("ENA undefined when the ceiling equals the expert return"));
    }
    Ok(Ena {
        value: (j - j_exp) / (j_ref - j_exp),
        j,
        j_exp,
        j_ref,
    })
}

fn check_finite(xs: &[f64], what: &str) -> Result<()> {
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid(format!("non-finite value in {what}")));
    }
    Ok(())
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Mean of the sorted values after dropping `floor(n/4)` from each end.
/// Below four values nothing is dropped.
pub fn trimmed_iqm(xs: &[f64]) -> f64 {
    let v = sorted(xs);
    let k = v.len() / 4;
    let mid = &v[k..v.len() - k];
    mid.iter().sum::<f64>() / mid.len() as f64
}

/// Interquartile mean; needs at least four finite values.
pub fn iqm(xs: &[f64]) -> Result<f64> {
    if xs.len() < 4 {
        return Err(Error::invalid(format!("IQM needs at least 4 values, got {}", xs.len())));
    }
    check_finite(xs, "IQM input")?;
    Ok(trimmed_iqm(xs))
}

/// Linear-interpolation quantile of sorted data.
fn quantile_sorted(v: &[f64], q: f64) -> f64 {
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

pub const BOOTSTRAP_RESAMPLES: usize = 5000;
pub const BOOTSTRAP_SEED: u64 = 42;

/// Percentile bootstrap interval of the IQM.
pub fn bootstrap_ci_iqm(xs: &[f64], n_resamples: usize, seed: u64, level: f64) -> Result<(f64, f64)> {
    iqm(xs)?;
    if n_resamples == 0 || !(0.0 < level && level < 1.0) {
        return Err(Error::invalid("bootstrap needs resamples and a level in (0, 1)"));
    }
    if xs.iter().all(|&x| x == xs[0]) {
        return Ok((xs[0], xs[0]));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = xs.len();
    let mut buf = vec![0.0; n];
    let mut stats: Vec<f64> = (0..n_resamples)
        .map(|_| {
            for b in buf.iter_mut() {
                *b = xs[rng.random_range(0..n)];
            }
            trimmed_iqm(&buf)
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    let alpha = 1.0 - level;
    Ok((quantile_sorted(&stats, alpha / 2.0), quantile_sorted(&stats, 1.0 - alpha / 2.0)))
}

/// Midranks (1-based) of the pooled sample, and the tie-group sizes.
fn midranks(pooled: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..pooled.len()).collect();
    idx.sort_by(|&a, &b| pooled[a].total_cmp(&pooled[b]));
    let mut ranks = vec![0.0; pooled.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && pooled[idx[j + 1]] == pooled[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        ties.push(j - i + 1);
        i = j + 1;
    }
    (ranks, ties)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// `U` of the first sample: pairs `(x, y)` with `x > y`, ties counting half.
    pub u: f64,
    pub p: f64,
    pub exact: bool,
}

/// Combined sample size up to which the exact null distribution is used.
pub const MWU_EXACT_MAX_N: usize = 20;

fn mwu_setup(x: &[f64], y: &[f64]) -> Result<(Vec<f64>, Vec<usize>, f64)> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::invalid("Mann-Whitney needs two non-empty samples"));
    }
    check_finite(x, "Mann-Whitney input")?;
    check_finite(y, "Mann-Whitney input")?;
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let n1 = x.len() as f64;
    let r1: f64 = ranks[..x.len()].iter().sum();
    Ok((ranks, ties, r1 - n1 * (n1 + 1.0) / 2.0))
}

/// Two-sided Mann-Whitney U; exact up to [`MWU_EXACT_MAX_N`] pooled values,
/// tie-corrected normal approximation with continuity correction beyond.
pub fn mann_whitney_two_sided(x: &[f64], y: &[f64]) -> Result<MannWhitney> {
    if x.len() + y.len() <= MWU_EXACT_MAX_N {
        mann_whitney_exact(x, y)
    } else {
        mann_whitney_normal(x, y)
    }
}

/// Exact permutation distribution of `U` given the observed midranks
/// (ties included), by dynamic programming over doubled rank sums.
/// `p = min(1, 2 min(P(U <= u), P(U >= u)))`.
pub fn mann_whitney_exact(x: &[f64], y: &[f64]) -> Result<MannWhitney> {
    let (ranks, _, u) = mwu_setup(x, y)?;
    let n1 = x.len();
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let max_sum: usize = doubled.iter().sum();
    // ways[k][s]: subsets of size k with doubled rank sum s.
    let mut ways = vec![vec![0f64; max_sum + 1]; n1 + 1];
    ways[0][0] = 1.0;
    for &d in &doubled {
        for k in (1..=n1).rev() {
            let (lo, hi) = ways.split_at_mut(k);
            for s in (d..=max_sum).rev() {
                hi[0][s] += lo[k - 1][s - d];
            }
        }
    }
    let total: f64 = ways[n1].iter().sum();
    let offset = n1 * (n1 + 1);
    let observed = (2.0 * u).round() as usize + offset;
    let (mut le, mut ge) = (0.0, 0.0);
    for (s, &w) in ways[n1].iter().enumerate() {
        if s <= observed {
            le += w;
        }
        if s >= observed {
            ge += w;
        }
    }
    let p = (2.0 * le.min(ge) / total).min(1.0);
    Ok(MannWhitney { u, p, exact: true })
}

pub fn mann_whitney_normal(x: &[f64], y: &[f64]) -> Result<MannWhitney> {
    let (_, ties, u) = mwu_setup(x, y)?;
    let (n1, n2) = (x.len() as f64, y.len() as f64);
    let n = n1 + n2;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (n * (n - 1.0));
    let var = n1 * n2 / 12.0 * ((n + 1.0) - tie_term);
    let mean = n1 * n2 / 2.0;
    let p = if var <= 0.0 {
        1.0
    } else {
        let z = ((u - mean).abs() - 0.5).max(0.0) / var.sqrt();
        let normal = Normal::standard();
        (2.0 * (1.0 - normal.cdf(z))).min(1.0)
    };
    Ok(MannWhitney { u, p, exact: false })
}

/// Holm step-down adjustment over the whole input family.
pub fn holm_bonferroni(ps: &[f64]) -> Result<Vec<f64>> {
    if ps.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::invalid(format!("p-values must lie in [0, 1]: {ps:?}")));
    }
    let m = ps.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| ps[a].total_cmp(&ps[b]));
    let mut out = vec![0.0; m];
    let mut running = 0.0f64;
    for (i, &k) in order.iter().enumerate() {
        running = running.max(((m - i) as f64 * ps[k]).min(1.0));
        out[k] = running;
    }
    Ok(out)
}

/// Alternative hypothesis of a one-sided permutation test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// H1: IQM(a) < IQM(b).
    Less,
    /// H1: IQM(a) > IQM(b).
    Greater,
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "less" | "<" => Ok(Direction::Less),
            "greater" | ">" => Ok(Direction::Greater),
            other => Err(Error::invalid(format!("unknown test direction `{other}`"))),
        }
    }
}

impl Direction {
    fn at_least_as_extreme(self, stat: f64, observed: f64) -> bool {
        // Tolerate summation-order noise in the statistic.
        let eps = 1e-12 * (1.0 + observed.abs());
        match self {
            Direction::Less => stat <= observed + eps,
            Direction::Greater => stat >= observed - eps,
        }
    }
}

fn iqm_difference(pooled: &[f64], n_a: usize) -> f64 {
    trimmed_iqm(&pooled[..n_a]) - trimmed_iqm(&pooled[n_a..])
}

fn permutation_input(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("permutation test needs two non-empty samples"));
    }
    check_finite(a, "permutation input")?;
    check_finite(b, "permutation input")?;
    Ok(a.iter().chain(b).copied().collect())
}

pub const PERMUTATION_SHUFFLES: usize = 100_000;

/// Monte-Carlo one-sided permutation test on `IQM(a) - IQM(b)` with
/// additive smoothing: `p = (1 + count) / (1 + n_shuffles)`. Arms with
/// fewer than four values use the plain mean.
pub fn permutation_one_sided<R: Rng + ?Sized>(
    a: &[f64],
    b: &[f64],
    direction: Direction,
    n_shuffles: usize,
    rng: &mut R,
) -> Result<f64> {
    let mut pooled = permutation_input(a, b)?;
    let observed = iqm_difference(&pooled, a.len());
    let mut count = 0usize;
    for _ in 0..n_shuffles {
        pooled.shuffle(rng);
        if direction.at_least_as_extreme(iqm_difference(&pooled, a.len()), observed) {
            count += 1;
        }
    }
    Ok((1 + count) as f64 / (1 + n_shuffles) as f64)
}

/// Exhaustive version over every split of the pooled sample. The observed
/// split is one of them, so `p = count / splits`.
pub fn permutation_exact(a: &[f64], b: &[f64], direction: Direction) -> Result<f64> {
    let pooled = permutation_input(a, b)?;
    let n = pooled.len();
    if n > 24 {
        return Err(Error::invalid("exhaustive permutation test limited to 24 values"));
    }
    let observed = iqm_difference(&pooled, a.len());
    let (mut count, mut total) = (0u64, 0u64);
    let mut left = Vec::with_capacity(a.len());
    let mut right = Vec::with_capacity(b.len());
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != a.len() {
            continue;
        }
        left.clear();
        right.clear();
        for (i, &v) in pooled.iter().enumerate() {
            if mask >> i & 1 == 1 { left.push(v) } else { right.push(v) }
        }
        total += 1;
        if direction.at_least_as_extreme(trimmed_iqm(&left) - trimmed_iqm(&right), observed) {
            count += 1;
        }
    }
    Ok(count as f64 / total as f64)
}

/// `***`, `**`, `*` at 0.001, 0.01, 0.05; empty otherwise.
pub fn significance_marker(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

/// First evaluation after which a curve never drops below `threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Crossing {
    pub index: Option<usize>,
    pub step: Option<usize>,
    /// The curve never settled above the threshold within the budget.
    pub censored: bool,
}

pub fn first_permanent_crossing(steps: &[usize], values: &[f64], threshold: f64) -> Crossing {
    let mut first = None;
    for i in (0..values.len()).rev() {
        if values[i] >= threshold {
            first = Some(i);
        } else {
            break;
        }
    }
    Crossing {
        index: first,
        step: first.map(|i| steps[i]),
        censored: first.is_none(),
    }
}
