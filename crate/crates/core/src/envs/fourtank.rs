use rand::Rng;

use super::ode::rk4;
use super::{begin_step, finish_step, tracking_factor, EnvId, EnvSpec, EnvState, FourTankParams, Internal, Simulator};
use crate::seeding::{self, Stream};
use crate::Result;

/// Quadruple-tank process. Two pumps feed four tanks through crossover
/// valves; the lower tanks 1 and 2 are tracked.
///
/// Observation: `[h1, h2, h3, h4, r1, r2]` in cm. Action: pump voltages,
/// `-1..1` mapped onto `0..max_voltage`.
#[derive(Debug, Clone)]
pub struct FourTank {
    params: FourTankParams,
    spec: EnvSpec,
}

impl FourTank {
    pub fn new(params: FourTankParams) -> Self {
        let spec = EnvSpec::new(EnvId::FourTank, 2, 6, params.horizon, false);
        Self { params, spec }
    }

    pub fn params(&self) -> &FourTankParams {
        &self.params
    }

    pub fn voltage(&self, action: f64) -> f64 {
        (action.clamp(-1.0, 1.0) + 1.0) / 2.0 * self.params.max_voltage
    }

    pub fn action_for_voltage(&self, v: f64) -> f64 {
        2.0 * v / self.params.max_voltage - 1.0
    }

    /// Level derivatives in cm/s for pump voltages `v`.
    pub fn derivatives(&self, h: &[f64; 4], v: [f64; 2]) -> [f64; 4] {
        let p = &self.params;
        let q: [f64; 4] =
            std::array::from_fn(|i| p.orifice_area[i] * (2.0 * p.gravity * h[i].max(0.0)).sqrt());
        let [g1, g2] = p.valve_split;
        let [k1, k2] = p.pump_gain;
        [
            (-q[0] + q[2] + g1 * k1 * v[0]) / p.tank_area[0],
            (-q[1] + q[3] + g2 * k2 * v[1]) / p.tank_area[1],
            (-q[2] + (1.0 - g2) * k2 * v[1]) / p.tank_area[2],
            (-q[3] + (1.0 - g1) * k1 * v[0]) / p.tank_area[3],
        ]
    }

    /// Integrate one env step from `levels` under `action`.
    pub fn advance(&self, levels: [f64; 4], action: [f64; 2]) -> [f64; 4] {
        let v = [self.voltage(action[0]), self.voltage(action[1])];
        let max = self.params.max_level;
        rk4(
            levels,
            self.params.dt,
            self.params.substeps,
            |h| self.derivatives(h, v),
            |h| {
                for x in h.iter_mut() {
                    *x = x.clamp(0.0, max);
                }
            },
        )
    }

    /// Steady state holding tanks 1 and 2 at `setpoints`: returns all four
    /// levels and the pump action. Solves the linear flow balance in the
    /// pump voltages.
    pub fn equilibrium(&self, setpoints: [f64; 2]) -> ([f64; 4], [f64; 2]) {
        let p = &self.params;
        let [g1, g2] = p.valve_split;
        let [k1, k2] = p.pump_gain;
        let out = |i: usize, h: f64| p.orifice_area[i] * (2.0 * p.gravity * h).sqrt();
        let b = [out(0, setpoints[0]), out(1, setpoints[1])];
        // [g1 k1, (1-g2) k2; (1-g1) k1, g2 k2] v = b
        let (a11, a12, a21, a22) = (g1 * k1, (1.0 - g2) * k2, (1.0 - g1) * k1, g2 * k2);
        let det = a11 * a22 - a12 * a21;
        let v1 = (b[0] * a22 - a12 * b[1]) / det;
        let v2 = (a11 * b[1] - a21 * b[0]) / det;
        let head = |flow: f64, i: usize| (flow / p.orifice_area[i]).powi(2) / (2.0 * p.gravity);
        let h3 = head((1.0 - g2) * k2 * v2, 2);
        let h4 = head((1.0 - g1) * k1 * v1, 3);
        (
            [setpoints[0], setpoints[1], h3, h4],
            [self.action_for_voltage(v1), self.action_for_voltage(v2)],
        )
    }

    /// Total water volume in cm^3.
    pub fn volume(&self, levels: &[f64; 4]) -> f64 {
        levels.iter().zip(&self.params.tank_area).map(|(h, a)| h * a).sum()
    }

    pub fn reward(&self, levels: &[f64; 4], setpoints: &[f64; 2]) -> f64 {
        let s = self.params.tracking_scale;
        0.5 * (tracking_factor(levels[0] - setpoints[0], s) + tracking_factor(levels[1] - setpoints[1], s))
    }

    /// A fresh state with explicit levels and setpoints.
    pub fn state_with(&self, levels: [f64; 4], setpoints: [f64; 2]) -> EnvState {
        EnvState {
            observation: observe(&levels, &setpoints),
            internal: Internal::FourTank { levels, setpoints },
            step_index: 0,
            done: false,
            terminated: false,
        }
    }
}

fn observe(levels: &[f64; 4], setpoints: &[f64; 2]) -> Vec<f64> {
    vec![levels[0], levels[1], levels[2], levels[3], setpoints[0], setpoints[1]]
}

impl Simulator for FourTank {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn dt(&self) -> f64 {
        self.params.dt
    }

    fn reset(&self, seed: u64) -> EnvState {
        let mut rng = seeding::rng(seed, Stream::EnvEpisode, 0);
        let p = &self.params;
        let setpoints: [f64; 2] = std::array::from_fn(|i| {
            p.nominal_setpoint[i] + p.setpoint_half_range[i] * rng.random_range(-1.0..=1.0)
        });
        let (levels, _) = self.equilibrium(p.nominal_setpoint);
        self.state_with(levels, setpoints)
    }

    fn step_in_place(&self, state: &mut EnvState, action: &[f64]) -> Result<f64> {
        let a = begin_step(&self.spec, state, action)?;
        let Internal::FourTank { levels, setpoints } = &mut state.internal else {
            unreachable!("FourTank stepped with a foreign state")
        };
        *levels = self.advance(*levels, [a[0], a[1]]);
        let r = self.reward(levels, setpoints);
        state.observation = observe(levels, setpoints);
        finish_step(&self.spec, state);
        Ok(r)
    }
}
