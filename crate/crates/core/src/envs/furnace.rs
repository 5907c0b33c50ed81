use rand::Rng;

use super::ode::rk4;
use super::{begin_step, finish_step, tracking_factor, EnvId, EnvSpec, EnvState, FurnaceParams, Internal, Simulator};
use crate::seeding::{self, Stream};
use crate::Result;

pub const ZONES: usize = 4;

/// Four heating zones in a row. Each zone loses heat to ambient and
/// exchanges heat with its neighbours; heaters map `-1..1` onto `0..1` power.
/// Setpoints switch once, at `setpoint_change_step`.
///
/// Observation: `[T1..T4, r1..r4]` in K with the active setpoints.
#[derive(Debug, Clone)]
pub struct GlassFurnace {
    params: FurnaceParams,
    spec: EnvSpec,
}

impl GlassFurnace {
    pub fn new(params: FurnaceParams) -> Self {
        let spec = EnvSpec::new(EnvId::GlassFurnace, ZONES, 2 * ZONES, params.horizon, false);
        Self { params, spec }
    }

    pub fn params(&self) -> &FurnaceParams {
        &self.params
    }

    pub fn derivatives(&self, t: &[f64; ZONES], power: &[f64; ZONES]) -> [f64; ZONES] {
        let p = &self.params;
        std::array::from_fn(|i| {
            let mut d = -p.loss_rate * (t[i] - p.ambient) + p.heat_rate * power[i];
            if i > 0 {
                d += p.coupling_rate * (t[i - 1] - t[i]);
            }
            if i + 1 < ZONES {
                d += p.coupling_rate * (t[i + 1] - t[i]);
            }
            d
        })
    }

    pub fn advance(&self, temps: [f64; ZONES], action: &[f64]) -> [f64; ZONES] {
        let power: [f64; ZONES] = std::array::from_fn(|i| (action[i].clamp(-1.0, 1.0) + 1.0) / 2.0);
        rk4(temps, self.params.dt, self.params.substeps, |t| self.derivatives(t, &power), |_| {})
    }

    pub fn active_setpoints(&self, setpoints: &[[f64; ZONES]; 2], step_index: usize) -> [f64; ZONES] {
        if step_index < self.params.setpoint_change_step {
            setpoints[0]
        } else {
            setpoints[1]
        }
    }

    pub fn reward(&self, temps: &[f64; ZONES], sp: &[f64; ZONES]) -> f64 {
        let s = self.params.tracking_scale;
        temps.iter().zip(sp).map(|(t, r)| tracking_factor(t - r, s)).sum::<f64>() / ZONES as f64
    }

    pub fn state_with(&self, temps: [f64; ZONES], setpoints: [[f64; ZONES]; 2]) -> EnvState {
        EnvState {
            observation: observe(&temps, &setpoints[0]),
            internal: Internal::GlassFurnace { temps, setpoints },
            step_index: 0,
            done: false,
            terminated: false,
        }
    }
}

fn observe(temps: &[f64; ZONES], sp: &[f64; ZONES]) -> Vec<f64> {
    temps.iter().chain(sp).copied().collect()
}

impl Simulator for GlassFurnace {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn dt(&self) -> f64 {
        self.params.dt
    }

    fn reset(&self, seed: u64) -> EnvState {
        let p = &self.params;
        let mut rng = seeding::rng(seed, Stream::EnvEpisode, 0);
        let [lo, hi] = p.setpoint_range;
        let setpoints: [[f64; ZONES]; 2] =
            std::array::from_fn(|_| std::array::from_fn(|_| rng.random_range(lo..=hi)));
        let [olo, ohi] = p.initial_offset_range;
        let temps = std::array::from_fn(|i| setpoints[0][i] - rng.random_range(olo..=ohi));
        self.state_with(temps, setpoints)
    }

    fn step_in_place(&self, state: &mut EnvState, action: &[f64]) -> Result<f64> {
        let a = begin_step(&self.spec, state, action)?;
        let step = state.step_index;
        let Internal::GlassFurnace { temps, setpoints } = &mut state.internal else {
            unreachable!("GlassFurnace stepped with a foreign state")
        };
        *temps = self.advance(*temps, &a);
        let r = self.reward(temps, &self.active_setpoints(setpoints, step));
        // The observation shows the setpoint that the next step is scored on.
        state.observation = observe(temps, &self.active_setpoints(setpoints, step + 1));
        finish_step(&self.spec, state);
        Ok(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::TaskConstants;

    fn env() -> GlassFurnace {
        GlassFurnace::new(TaskConstants::builtin().glassfurnace)
    }

    #[test]
    fn heaters_off_cools_towards_ambient() {
        let e = env();
        let mut s = e.reset(5);
        for _ in 0..2000 {
            e.step_in_place(&mut s, &[-1.0; 4]).unwrap();
        }
        let Internal::GlassFurnace { temps, .. } = &s.internal else { panic!() };
        for t in temps {
            assert!(*t > 300.0 && *t < 400.0, "{t}");
        }
    }

    #[test]
    fn full_power_reaches_setpoint_band() {
        // Steady state at full power is well above the setpoint range.
        let p = TaskConstants::builtin().glassfurnace;
        let ss = p.ambient + p.heat_rate / p.loss_rate;
        assert!(ss > p.setpoint_range[1] + 100.0);
    }

    #[test]
    fn setpoint_switches_once() {
        let e = env();
        let s = e.reset(9);
        let Internal::GlassFurnace { setpoints, .. } = s.internal else { panic!() };
        assert_eq!(e.active_setpoints(&setpoints, 2879), setpoints[0]);
        assert_eq!(e.active_setpoints(&setpoints, 2880), setpoints[1]);
        assert_eq!(s.observation[4..], setpoints[0]);
    }
}
