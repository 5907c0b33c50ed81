mod common;

use common::oracles::{holm_oracle, iqm_oracle, mwu_oracle, permutation_oracle};
use edgebench::stats::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn small_sample(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    // Coarse grid so ties show up.
    (0..n).map(|_| rng.random_range(0..6) as f64 * 0.5).collect()
}

#[test]
fn iqm_matches_trim_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let xs: Vec<f64> = (0..100).map(|_| rng.sample(StandardNormal)).collect();
    assert!((iqm(&xs).unwrap() - iqm_oracle(&xs)).abs() < 1e-12);
    for n in 4..=12 {
        let xs = small_sample(&mut rng, n);
        assert!((iqm(&xs).unwrap() - iqm_oracle(&xs)).abs() < 1e-12, "{xs:?}");
    }
}

#[test]
fn mwu_exact_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..200 {
        let n1 = rng.random_range(1..=6);
        let n2 = rng.random_range(1..=12 - n1);
        let x = small_sample(&mut rng, n1);
        let y = small_sample(&mut rng, n2);
        let r = mann_whitney_two_sided(&x, &y).unwrap();
        let (u, p) = mwu_oracle(&x, &y);
        assert!(r.exact);
        assert_eq!(r.u, u, "{x:?} {y:?}");
        assert!((r.p - p).abs() < 1e-12, "{x:?} {y:?}: {} vs {p}", r.p);
    }
}

#[test]
fn mwu_normal_close_to_exact_at_fifteen() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for shift in [0.0, 0.3, 0.8] {
        let x: Vec<f64> = (0..15).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let y: Vec<f64> = (0..15).map(|_| shift + rng.sample::<f64, _>(StandardNormal)).collect();
        let e = mann_whitney_exact(&x, &y).unwrap();
        let a = mann_whitney_normal(&x, &y).unwrap();
        assert_eq!(e.u, a.u);
        assert!((e.p - a.p).abs() < 0.01, "shift {shift}: exact {} normal {}", e.p, a.p);
    }
    // Beyond twenty pooled values the normal path is taken.
    assert!(!mann_whitney_two_sided(&[0.0; 11], &[1.0; 10]).unwrap().exact);
}

#[test]
fn holm_matches_definition() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..200 {
        let m = rng.random_range(1..=12);
        let ps: Vec<f64> = (0..m).map(|_| rng.random::<f64>().powi(3)).collect();
        assert_eq!(holm_bonferroni(&ps).unwrap(), holm_oracle(&ps));
    }
}

#[test]
fn permutation_exact_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let na = rng.random_range(1..=6);
        let nb = rng.random_range(1..=12 - na);
        let a = small_sample(&mut rng, na);
        let b = small_sample(&mut rng, nb);
        for (dir, less) in [(Direction::Less, true), (Direction::Greater, false)] {
            let p = permutation_exact(&a, &b, dir).unwrap();
            assert!((p - permutation_oracle(&a, &b, less)).abs() < 1e-12, "{a:?} {b:?}");
        }
    }
}

#[test]
fn permutation_monte_carlo_tracks_enumeration() {
    let a = [1.0, 2.5, 3.0];
    let b = [2.0, 4.0, 5.0];
    let exact = permutation_oracle(&a, &b, true);
    let n = PERMUTATION_SHUFFLES;
    let p = permutation_one_sided(&a, &b, Direction::Less, n, &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
    // Four binomial standard errors plus the smoothing offset.
    let bound = 4.0 * (exact * (1.0 - exact) / n as f64).sqrt() + 1.0 / (1 + n) as f64;
    assert!((p - exact).abs() <= bound, "mc {p} exact {exact}");
}

#[test]
fn permutation_null_and_floor() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut low = 0;
    for _ in 0..100 {
        let a: Vec<f64> = (0..10).map(|_| rng.sample(StandardNormal)).collect();
        let p = permutation_one_sided(&a, &a, Direction::Less, 2000, &mut rng).unwrap();
        if p < 0.4 {
            low += 1;
        }
    }
    assert_eq!(low, 0);
    let a: Vec<f64> = (0..20).map(|i| i as f64).collect();
    let b: Vec<f64> = (0..20).map(|i| 100.0 + i as f64).collect();
    let p = permutation_one_sided(&a, &b, Direction::Less, 100_000, &mut rng).unwrap();
    assert_eq!(p, 1.0 / 100_001.0);
    let p = permutation_one_sided(&a, &b, Direction::Greater, 1000, &mut rng).unwrap();
    assert_eq!(p, 1.0);
    assert!("sideways".parse::<Direction>().is_err());
}

#[test]
fn bootstrap_is_deterministic_and_degenerate_safe() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let xs: Vec<f64> = (0..30).map(|_| rng.sample(StandardNormal)).collect();
    let a = bootstrap_ci_iqm(&xs, BOOTSTRAP_RESAMPLES, BOOTSTRAP_SEED, 0.95).unwrap();
    let b = bootstrap_ci_iqm(&xs, BOOTSTRAP_RESAMPLES, BOOTSTRAP_SEED, 0.95).unwrap();
    assert_eq!(a, b);
    let point = iqm(&xs).unwrap();
    assert!(a.0 <= point && point <= a.1);
    assert_eq!(bootstrap_ci_iqm(&[3.5; 9], 100, 42, 0.95).unwrap(), (3.5, 3.5));
}

/// Asymptotic standard deviation of the 25%-trimmed mean of a standard
/// normal, times sqrt(n).
fn trimmed_mean_sd_normal() -> f64 {
    let q = 0.674_489_750_196_081_7_f64;
    let phi = (-q * q / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let inner = 0.5 - 2.0 * q * phi;
    let winsorized = inner + 2.0 * 0.25 * q * q;
    (winsorized / 0.25).sqrt()
}

#[test]
fn bootstrap_width_matches_normal_theory() {
    let n = 100;
    let analytic = trimmed_mean_sd_normal() / (n as f64).sqrt();
    // Monte-Carlo check of the analytic standard error itself.
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let reps: Vec<f64> = (0..1000)
        .map(|_| {
            let xs: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            iqm(&xs).unwrap()
        })
        .collect();
    let m = reps.iter().sum::<f64>() / reps.len() as f64;
    let mc = (reps.iter().map(|r| (r - m).powi(2)).sum::<f64>() / (reps.len() - 1) as f64).sqrt();
    assert!((mc / analytic - 1.0).abs() < 0.1, "mc {mc} analytic {analytic}");

    let target = 2.0 * 1.96 * analytic;
    let widths: Vec<f64> = (0..20)
        .map(|_| {
            let xs: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let (lo, hi) = bootstrap_ci_iqm(&xs, BOOTSTRAP_RESAMPLES, BOOTSTRAP_SEED, 0.95).unwrap();
            hi - lo
        })
        .collect();
    let mean_width = widths.iter().sum::<f64>() / widths.len() as f64;
    assert!((mean_width / target - 1.0).abs() < 0.3, "width {mean_width} vs {target}");
}

proptest! {
    #[test]
    fn ena_affine_invariant(j in -1e3f64..1e3, j_exp in -1e3f64..1e3, gap in 1.0f64..1e3, c in 0.01f64..100.0, d in -1e3f64..1e3) {
        let j_ref = j_exp + gap;
        let a = ena(j, j_exp, j_ref).unwrap().value;
        let b = ena(c * j + d, c * j_exp + d, c * j_ref + d).unwrap().value;
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()) * 1e3, "{} {}", a, b);
    }

    #[test]
    fn iqm_within_range(xs in prop::collection::vec(-1e6f64..1e6, 4..60)) {
        let v = iqm(&xs).unwrap();
        let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(lo - 1e-9 <= v && v <= hi + 1e-9);
    }

    #[test]
    fn holm_monotone_and_conservative(ps in prop::collection::vec(0f64..=1.0, 1..20)) {
        let c = holm_bonferroni(&ps).unwrap();
        for (raw, adj) in ps.iter().zip(&c) {
            prop_assert!(adj >= raw);
        }
        let mut idx: Vec<usize> = (0..ps.len()).collect();
        idx.sort_by(|&a, &b| ps[a].total_cmp(&ps[b]));
        for w in idx.windows(2) {
            prop_assert!(c[w[0]] <= c[w[1]]);
        }
    }

    #[test]
    fn mwu_p_in_unit_interval(x in prop::collection::vec(-5f64..5.0, 1..15), y in prop::collection::vec(-5f64..5.0, 1..15)) {
        let r = mann_whitney_two_sided(&x, &y).unwrap();
        prop_assert!(r.p > 0.0 && r.p <= 1.0);
        prop_assert!(r.u >= 0.0 && r.u <= (x.len() * y.len()) as f64);
    }

    #[test]
    fn permutation_p_in_unit_interval(a in prop::collection::vec(-5f64..5.0, 1..8), b in prop::collection::vec(-5f64..5.0, 1..8), seed in 0u64..1000) {
        let p = permutation_one_sided(&a, &b, Direction::Less, 200, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert!(p > 0.0 && p <= 1.0);
    }
}
