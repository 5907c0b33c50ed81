use edgebench::envs::{self, make, EnvId, Internal, TaskConstants};
use edgebench::seeding::{rng, Stream};
use proptest::prelude::*;
use rand::Rng;

const ALL: [EnvId; 4] = [EnvId::FourTank, EnvId::Plane3DCircle, EnvId::GlassFurnace, EnvId::Integrator];

fn physical_ok(internal: &Internal) -> bool {
    match internal {
        Internal::FourTank { levels, .. } => levels.iter().all(|h| h.is_finite() && *h >= 0.0),
        Internal::Plane(p) => [p.x, p.y, p.altitude, p.airspeed, p.heading, p.bank, p.climb_rate]
            .iter()
            .all(|v| v.is_finite()),
        Internal::GlassFurnace { temps, .. } => temps.iter().all(|t| t.is_finite() && *t > 0.0),
        Internal::Integrator { x } => x.is_finite(),
    }
}

#[test]
fn rewards_bounded_under_random_actions() {
    let c = TaskConstants::builtin();
    for id in ALL {
        let env = make(id, &c);
        let spec = env.spec().clone();
        let mut r = rng(99, Stream::Actor, id as u64);
        let mut episode = 0;
        let mut state = env.reset(episode);
        let mut ret = 0.0;
        for _ in 0..100_000 {
            // Out-of-box actions are clipped, so sample a wider box.
            let a: Vec<f64> = (0..spec.action_dim).map(|_| r.random_range(-1.5..1.5)).collect();
            let rew = env.step_in_place(&mut state, &a).unwrap();
            assert!((0.0..=spec.reward_ceiling_per_step).contains(&rew), "{id}: reward {rew}");
            assert!(physical_ok(&state.internal), "{id}: {:?}", state.internal);
            ret += rew;
            if state.done {
                assert!(ret <= spec.j_ref);
                if state.terminated {
                    assert!(spec.terminating);
                } else {
                    assert_eq!(state.step_index, spec.horizon);
                }
                episode += 1;
                state = env.reset(episode);
                ret = 0.0;
            }
        }
    }
}

#[test]
fn reset_by_name() {
    let a = envs::reset("fourtank", 7).unwrap();
    assert_eq!(a, envs::reset("fourtank", 7).unwrap());
    assert_eq!(a.step_index, 0);
    assert!(!a.done);
    assert!(envs::reset("cheetahrun", 7).is_err());
}

#[test]
fn wrong_action_dimension_errors() {
    let env = make(EnvId::FourTank, &TaskConstants::builtin());
    let mut s = env.reset(0);
    assert!(env.step_in_place(&mut s, &[0.0]).is_err());
    assert!(env.step_in_place(&mut s, &[f64::NAN, 0.0]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn identical_inputs_replay_bit_exact(
        seed in any::<u64>(),
        env_ix in 0usize..4,
        actions in prop::collection::vec(-1.2f64..1.2, 4..40),
    ) {
        let env = make(ALL[env_ix], &TaskConstants::builtin());
        let d = env.spec().action_dim;
        let run = || {
            let mut s = env.reset(seed);
            let mut out = Vec::new();
            for chunk in actions.chunks(1) {
                if s.done { break; }
                let a = vec![chunk[0]; d];
                out.push(env.step_in_place(&mut s, &a).unwrap().to_bits());
            }
            (out, s)
        };
        let (r1, s1) = run();
        let (r2, s2) = run();
        prop_assert_eq!(r1, r2);
        prop_assert_eq!(s1, s2);
    }
}
