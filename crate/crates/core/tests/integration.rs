use edgebench::envs::EnvId;
use edgebench::experts::{ExpertController, RandomExpert};
use edgebench::integration::{
    coverage_check, edge_select, gate_probability, ibrl_select, jsrl_curriculum_select, jsrl_horizon, jsrl_tt_is_expert,
    jsrl_tt_select, literal_thompson_select, residual_select, Arm, Counters, GateConfig, GateLog, MethodId, MethodSpec,
    Selector, StepContext,
};
use edgebench::rl::{QEnsemble, ReplayBuffer, Scoring, Source, Transition};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Critic ensemble frozen to a function of the action.
struct Frozen<F: Fn(&[f64]) -> Vec<f64>>(F);

impl<F: Fn(&[f64]) -> Vec<f64>> QEnsemble for Frozen<F> {
    fn n_critics(&self) -> usize {
        self.0(&[0.0]).len()
    }
    fn q_values(&self, _state: &[f64], action: &[f64]) -> Vec<f64> {
        self.0(action)
    }
}

/// Two-critic ensemble scoring the expert action `e` at `qe` and anything
/// else at `qp`.
fn two_arm(e: f64, qe: Vec<f64>, qp: Vec<f64>) -> Frozen<impl Fn(&[f64]) -> Vec<f64>> {
    Frozen(move |a: &[f64]| if a[0] == e { qe.clone() } else { qp.clone() })
}

const Z99: f64 = 2.5758293035489004;

fn within_binomial_99(hits: usize, n: usize, p: f64) -> bool {
    let rate = hits as f64 / n as f64;
    (rate - p).abs() <= Z99 * (p * (1.0 - p) / n as f64).sqrt()
}

#[test]
fn gate_probability_anchors() {
    assert_eq!(gate_probability(0.0, 0.7), 0.5);
    assert!((gate_probability(1.5, 1.5) - 0.7310585786300049).abs() < 1e-15);
    // Far out in either tail both arms keep support.
    let lo = gate_probability(-1e9, 0.1);
    let hi = gate_probability(1e9, 0.1);
    assert!(lo > 0.0 && lo < 1e-15);
    assert!(hi < 1.0 && hi > 1.0 - 1e-15);
}

#[test]
fn gate_draws_match_bernoulli() {
    let tau = 0.8;
    for p in [0.1f64, 0.5, 0.9] {
        let delta = tau * (p / (1.0 - p)).ln();
        // LCB with two equal critics is the common value itself.
        let q = two_arm(0.25, vec![delta, delta], vec![0.0, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 10_000;
        let mut hits = 0;
        for _ in 0..n {
            let d = edge_select(&[0.0], &[-0.5], &[0.25], &q, GateConfig { kappa: 1.0, tau }, &mut rng);
            assert!((d.p - p).abs() < 1e-12);
            assert_eq!(d.b, d.action == [0.25]);
            hits += d.b as usize;
        }
        assert!(within_binomial_99(hits, n, p), "p={p}: {hits}/{n}");
        if p == 0.1 {
            let rate = hits as f64 / n as f64;
            assert!((0.08..=0.12).contains(&rate));
        }
    }
}

proptest! {
    #[test]
    fn gate_monotone_in_delta(d1 in -5.0..5.0f64, gap in 1e-3..3.0f64, tau in 0.5..5.0f64) {
        prop_assert!(gate_probability(d1, tau) < gate_probability(d1 + gap, tau));
    }

    #[test]
    fn gate_decreasing_in_tau(delta in 0.01..5.0f64, t1 in 0.2..5.0f64, gap in 1e-3..3.0f64) {
        prop_assert!(gate_probability(delta, t1) > gate_probability(delta, t1 + gap));
    }

    #[test]
    fn gate_full_support(
        qe in prop::collection::vec(-1e12..1e12f64, 2..6),
        qp in prop::collection::vec(-1e12..1e12f64, 2..6),
        kappa in 0.0..10.0f64,
        tau in 1e-3..10.0f64,
    ) {
        let q = two_arm(1.0, qe, qp);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let d = edge_select(&[0.0], &[0.0], &[1.0], &q, GateConfig { kappa, tau }, &mut rng);
        prop_assert!(d.p > 0.0 && d.p < 1.0);
    }

    #[test]
    fn min_scoring_is_zero_pessimism(qs in prop::collection::vec(-100.0..100.0f64, 2..10)) {
        prop_assert_eq!(Scoring::Min.score(&qs), Scoring::Lcb { kappa: 0.0 }.score(&qs));
    }
}

#[test]
fn ibrl_argmax_examples() {
    let q = two_arm(0.3, vec![2.0, 2.0], vec![1.0, 1.0]);
    assert_eq!(ibrl_select(&[0.0], &[-0.3], &[0.3], &q, Scoring::Mean), (vec![0.3], true));
    let tie = two_arm(0.3, vec![1.0, 3.0], vec![2.0, 2.0]);
    assert_eq!(ibrl_select(&[0.0], &[-0.3], &[0.3], &tie, Scoring::Mean), (vec![-0.3], false));
    // Ensemble min reads the same pair differently.
    assert_eq!(ibrl_select(&[0.0], &[-0.3], &[0.3], &tie, Scoring::Min), (vec![-0.3], false));
}

fn store(replay: &mut ReplayBuffer, executed: Vec<f64>, expert: &[f64], arm: Arm) {
    replay.push(Transition {
        state: vec![0.0],
        action: executed,
        reward: 0.0,
        next_state: vec![0.0],
        done: false,
        expert_action: expert.to_vec(),
        next_expert_action: expert.to_vec(),
        source: match arm {
            Arm::Policy => Source::Policy,
            Arm::Expert => Source::Expert,
            Arm::Mixed => Source::Mixed,
        },
    });
}

/// Run a selector for `steps` against a critic that ranks the expert
/// above every policy action; returns the stored policy-arm count.
fn blind_spot_run(selector: Selector, steps: usize) -> usize {
    let q = two_arm(0.5, vec![1.0, 1.2], vec![0.0, 0.1]);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut replay = ReplayBuffer::new(steps);
    let mut counters = Counters::default();
    for t in 0..steps {
        let policy = [rng.random_range(-1.0..0.4)];
        let ctx = StepContext {
            state: &[0.0],
            policy_action: &policy,
            expert_action: &[0.5],
            t_episode: t,
            handoff: 0,
            global_step: t,
            total_steps: steps,
        };
        let sel = selector.select(&ctx, &q, &mut rng, &mut counters);
        store(&mut replay, sel.action, &[0.5], sel.arm);
    }
    replay.iter().filter(|t| t.source == Source::Policy).count()
}

#[test]
fn blind_spot_contrast() {
    let steps = 10_000;
    assert_eq!(blind_spot_run(Selector::Argmax { scoring: Scoring::Mean }, steps), 0);
    let (kappa, tau) = (1.0, 1.0);
    // LCB gap: (1.0 - 0.2) - (0.0 - 0.1) = 0.9.
    let p = gate_probability(0.9, tau);
    let edge = blind_spot_run(Selector::Gate { scoring: Scoring::Lcb { kappa }, tau }, steps);
    let floor = (1.0 - p) * steps as f64 * 0.95;
    assert!(edge as f64 >= floor, "EDGE stored {edge} policy transitions, floor {floor}");
}

#[test]
fn jsrl_schedules() {
    assert_eq!(jsrl_horizon(0.0, 500), 500);
    assert_eq!(jsrl_horizon(1.0, 500), 0);
    assert_eq!(jsrl_horizon(0.5, 500), 250);
    assert_eq!(jsrl_curriculum_select(249, 250, &[1.0], &[-1.0]), vec![1.0]);
    assert_eq!(jsrl_curriculum_select(250, 250, &[1.0], &[-1.0]), vec![-1.0]);

    assert!(!jsrl_tt_is_expert(0, 0.0, 100_000));
    assert!(jsrl_tt_is_expert(99_999, 1.0, 100_000));
    assert!(jsrl_tt_is_expert(9_999, 0.1, 100_000));
    assert!(!jsrl_tt_is_expert(10_000, 0.1, 100_000));
    assert_eq!(jsrl_tt_select(10_000, 0.1, 100_000, &[1.0], &[-1.0]), vec![-1.0]);
}

#[test]
fn residual_examples() {
    assert_eq!(residual_select(&[0.5], &[0.8], 1.0), vec![1.0]);
    assert_eq!(residual_select(&[0.37, -0.2], &[0.0, 0.0], 1.0), vec![0.37, -0.2]);
    assert_eq!(residual_select(&[1.0], &[1.0], 1.0), vec![1.0]);
    assert_eq!(residual_select(&[0.2], &[0.5], 0.2), vec![0.30000000000000004]);
}

#[test]
fn thompson_draws() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let sure = two_arm(1.0, vec![2.0, 2.0], vec![1.0, 1.0]);
    for _ in 0..1000 {
        assert!(literal_thompson_select(&[0.0], &[0.0], &[1.0], &sure, &mut rng).1);
    }
    let even = two_arm(1.0, vec![0.0, 2.0], vec![2.0, 0.0]);
    let n = 10_000;
    let hits: usize = (0..n)
        .map(|_| literal_thompson_select(&[0.0], &[0.0], &[1.0], &even, &mut rng).1 as usize)
        .sum();
    let rate = hits as f64 / n as f64;
    assert!((rate - 0.5).abs() <= 0.02, "expert rate {rate}");
}

#[test]
fn thompson_ensemble_size_is_configurable() {
    let b2 = MethodSpec::new(MethodId::LiteralThompson).behavior(EnvId::FourTank, 50_000);
    let b10 = MethodSpec::new(MethodId::LiteralThompsonK10).behavior(EnvId::FourTank, 50_000);
    assert_eq!((b2.n_critics, b10.n_critics), (2, 10));
    assert_eq!(b2.selector, Selector::Thompson);
}

#[test]
fn no_pessimism_ignores_configured_kappa() {
    let spec = MethodSpec { gate: Some(GateConfig { kappa: 7.0, tau: 0.3 }), ..MethodSpec::new(MethodId::NoPessimism) };
    let Selector::Gate { scoring, tau } = spec.behavior(EnvId::FourTank, 1000).selector else {
        panic!("no_pessimism must keep the stochastic gate");
    };
    assert_eq!(tau, 0.3);
    let qs = [1.0, 4.0, -2.0];
    assert_eq!(scoring.score(&qs), Scoring::Lcb { kappa: 0.0 }.score(&qs));
}

#[test]
fn random_expert_is_uniform_over_the_box() {
    let expert = ExpertController::Random(RandomExpert { action_dim: 2, seed: 99 });
    let mut z = expert.initial_state(&[0.0]);
    let bins = 10;
    let mut counts = vec![vec![0usize; bins]; 2];
    let n = 10_000;
    for _ in 0..n {
        let (a, z2) = expert.act(&[0.0], &z, 1.0);
        for (d, x) in a.iter().enumerate() {
            assert!((-1.0..=1.0).contains(x));
            counts[d][(((x + 1.0) / 2.0 * bins as f64) as usize).min(bins - 1)] += 1;
        }
        z = z2;
    }
    let expect = n as f64 / bins as f64;
    for c in &counts {
        let chi2: f64 = c.iter().map(|&k| (k as f64 - expect).powi(2) / expect).sum();
        // chi-square, 9 degrees of freedom, upper 0.1% point.
        assert!(chi2 < 27.877, "chi2 {chi2}");
    }
    // Stateful and reproducible: the same counter gives the same action.
    let z0 = expert.initial_state(&[0.0]);
    assert_eq!(expert.act(&[0.0], &z0, 1.0), expert.act(&[5.0], &z0, 1.0));
}

#[test]
fn store_policy_action_breaks_the_buffer() {
    let breaker = MethodSpec::new(MethodId::StorePolicyAction).behavior(EnvId::FourTank, 1000);
    let honest = MethodSpec::new(MethodId::Edge).behavior(EnvId::FourTank, 1000);
    // Expert wins by a mile: p sits at the clamped ceiling.
    let q = Frozen(|a: &[f64]| if a[0] > 0.9 { vec![1e6, 1e6] } else { vec![0.0, 0.0] });
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut counters = Counters::default();
    for t in 0..1000 {
        let policy = [rng.random_range(-1.0..0.9)];
        let expert = [rng.random_range(0.95..1.0)];
        let ctx = StepContext {
            state: &[0.0],
            policy_action: &policy,
            expert_action: &expert,
            t_episode: t,
            handoff: 0,
            global_step: t,
            total_steps: 1000,
        };
        let sel = breaker.selector.select(&ctx, &q, &mut rng, &mut counters);
        assert_eq!(sel.arm, Arm::Expert);
        assert_ne!(breaker.stored_action(&policy, &sel.action), sel.action);
        assert_eq!(honest.stored_action(&policy, &sel.action), sel.action);
    }
}

#[test]
fn exactly_one_mechanism_per_step() {
    let q = two_arm(0.5, vec![1.0, 1.5], vec![0.8, 1.0]);
    for id in MethodId::BASE.iter().chain(&MethodId::VARIANTS) {
        let b = MethodSpec::new(*id).behavior(EnvId::FourTank, 1000);
        let mut counters = Counters::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for t in 0..200 {
            let ctx = StepContext {
                state: &[0.0],
                policy_action: &[0.1],
                expert_action: &[0.5],
                t_episode: t % 50,
                handoff: 25,
                global_step: t,
                total_steps: 200,
            };
            b.selector.select(&ctx, &q, &mut rng, &mut counters);
            assert_eq!(counters.total(), t as u64 + 1, "{id:?}");
        }
        assert_eq!(counters.mechanisms_used(), 1, "{id:?}: {counters:?}");
    }
}

#[test]
fn coverage_bound_holds_on_simulated_gate() {
    let tau = 0.6;
    let window = 1000;
    let mut log = GateLog::new(window, 50);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut all_ok = 0;
    for step in 0..50_000 {
        // The gap drifts upward over training, as when the critic learns
        // to prefer the expert.
        let delta = rng.random_range(-1.0..0.5) + step as f64 / 50_000.0;
        let p = gate_probability(delta, tau);
        let b = rng.random::<f64>() < p;
        log.record(step, p, b, delta);
    }
    for w in &log.windows {
        let c = coverage_check(w, tau, 0.01);
        assert!(c.p_max_consistent);
        // Multiplicative form of the same bound.
        let n = w.steps as f64;
        assert!(w.policy_picks as f64 >= (1.0 - w.p_max) * n * (1.0 - 4.0 / n.sqrt()));
        all_ok += c.ok as usize;
    }
    assert_eq!(log.windows.len(), 50);
    // Each window fails with chance at most 1%; allow a couple.
    assert!(all_ok >= 48, "{all_ok}/50 windows inside the bound");
}
