//! Loop layouts, operating points and the relay-tuning driver for the
//! benchmark tasks.

use serde::{Deserialize, Serialize};

use super::pid::{LoopMode, LoopOutput, PidExpert, PidGains, PidLoop, SetpointSource};
use super::relay::{relay_experiment, RelayResult, RelaySettings, SisoPlant, TuningRule};
use super::{ExpertController, GainFile};
use crate::envs::{
    self, EnvId, EnvState, FourTank, GlassFurnace, Plane3DCircle, PlaneState, Simulator, TaskConstants,
    TuningParams,
};
use crate::{Error, Result};

/// Per-loop relay measurement at one operating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopTuning {
    pub name: String,
    pub relay: RelayResult,
    pub gains: PidGains,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    /// Task-specific coordinates (setpoints, radius or zone level).
    pub value: Vec<f64>,
    pub loops: Vec<LoopTuning>,
}

/// Everything about how a gains file was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningProvenance {
    pub constants_version: u32,
    pub rule: TuningRule,
    pub relay: Vec<RelaySettings>,
    /// Loop indices in the order they were tuned.
    pub tuning_order: Vec<usize>,
    pub operating_points: Vec<OperatingPoint>,
    /// Index of the operating point whose gains were retained.
    pub selected: usize,
}

/// Index of the operating point closest to the middle of the sweep; the
/// lower one wins a tie.
pub fn middle_index(n: usize) -> usize {
    n.saturating_sub(1) / 2
}

fn sweep(lo: f64, hi: f64, k: usize, n: usize) -> f64 {
    if n <= 1 {
        (lo + hi) / 2.0
    } else {
        lo + (hi - lo) * k as f64 / (n - 1) as f64
    }
}

fn action_loop(name: &str, measure: usize, setpoint: SetpointSource, action: usize) -> PidLoop {
    PidLoop {
        name: name.into(),
        measure,
        setpoint,
        output: LoopOutput::Action(action),
        direction: 1.0,
        bias: 0.0,
        output_limits: (-1.0, 1.0),
        wrap: false,
        gains: PidGains::ZERO,
    }
}

/// A task's loop template at one operating point, with the state to start
/// the relay from.
struct Setup {
    value: Vec<f64>,
    expert: PidExpert,
    state: EnvState,
}

fn fourtank_setup(env: &FourTank, k: usize, n: usize) -> Setup {
    let p = env.params();
    let sp: [f64; 2] = std::array::from_fn(|i| {
        sweep(
            p.nominal_setpoint[i] - p.setpoint_half_range[i],
            p.nominal_setpoint[i] + p.setpoint_half_range[i],
            k,
            n,
        )
    });
    let (levels, action) = env.equilibrium(sp);
    // Tank 1 is driven mostly by pump 2 in the non-minimum-phase split,
    // and tank 2 by pump 1.
    let mut h1 = action_loop("h1", 0, SetpointSource::Obs(4), 1);
    h1.bias = action[1];
    let mut h2 = action_loop("h2", 1, SetpointSource::Obs(5), 0);
    h2.bias = action[0];
    Setup {
        value: sp.to_vec(),
        expert: PidExpert {
            action_dim: 2,
            loops: vec![h1, h2],
        },
        state: env.state_with(levels, sp),
    }
}

/// Aileron command for a steady coordinated turn on a circle of `radius`.
pub fn circle_bank_action(p: &envs::PlaneParams, radius: f64) -> f64 {
    let v = p.reference_airspeed;
    ((v * v / (p.gravity * radius)).atan() / p.bank_max).clamp(-1.0, 1.0)
}

fn plane_setup(env: &Plane3DCircle, k: usize, n: usize) -> Setup {
    let p = env.params();
    let radius = sweep(p.radius_range[0], p.radius_range[1], k, n);
    let bank_action = circle_bank_action(p, radius);
    let airspeed = action_loop("airspeed", 2, SetpointSource::Const(0.0), 0);
    let altitude = action_loop("altitude", 0, SetpointSource::Const(0.0), 1);
    let radial = PidLoop {
        name: "radial".into(),
        measure: 3,
        setpoint: SetpointSource::Const(0.0),
        output: LoopOutput::Internal,
        // Turning inwards (positive heading error) shrinks the radius.
        direction: -1.0,
        bias: 0.0,
        output_limits: (-0.8, 0.8),
        wrap: false,
        gains: PidGains::ZERO,
    };
    let mut heading = action_loop("heading", 4, SetpointSource::Loop(2), 2);
    heading.wrap = true;
    heading.bias = bank_action;
    let plane = PlaneState {
        x: radius,
        y: 0.0,
        altitude: p.target_altitude,
        airspeed: p.reference_airspeed,
        heading: std::f64::consts::FRAC_PI_2,
        bank: bank_action * p.bank_max,
        climb_rate: 0.0,
        radius,
        target_altitude: p.target_altitude,
    };
    Setup {
        value: vec![radius],
        expert: PidExpert {
            action_dim: 3,
            loops: vec![airspeed, altitude, radial, heading],
        },
        state: env.state_with(plane),
    }
}

fn furnace_setup(env: &GlassFurnace, k: usize, n: usize) -> Setup {
    let p = env.params();
    let level = sweep(p.setpoint_range[0], p.setpoint_range[1], k, n);
    let power = p.loss_rate * (level - p.ambient) / p.heat_rate;
    let loops = (0..4)
        .map(|i| {
            let mut l = action_loop(&format!("zone{}", i + 1), i, SetpointSource::Obs(4 + i), i);
            l.bias = 2.0 * power - 1.0;
            l
        })
        .collect();
    Setup {
        value: vec![level],
        expert: PidExpert { action_dim: 4, loops },
        state: env.state_with([level; 4], [[level; 4]; 2]),
    }
}

fn tuning_order(id: EnvId) -> Vec<usize> {
    match id {
        EnvId::FourTank => vec![0, 1],
        // Inside-out: heading before the radial loop that sets its target.
        EnvId::Plane3DCircle => vec![0, 1, 3, 2],
        EnvId::GlassFurnace => vec![0, 1, 2, 3],
        EnvId::Integrator => vec![0],
    }
}

fn tuning_params(id: EnvId, c: &TaskConstants) -> Result<&TuningParams> {
    match id {
        EnvId::FourTank => Ok(&c.fourtank.tuning),
        EnvId::Plane3DCircle => Ok(&c.plane3dcircle.tuning),
        EnvId::GlassFurnace => Ok(&c.glassfurnace.tuning),
        EnvId::Integrator => Err(Error::invalid("the integrator task has no tuned expert")),
    }
}

fn setup(id: EnvId, c: &TaskConstants, k: usize, n: usize) -> Setup {
    match id {
        EnvId::FourTank => fourtank_setup(&FourTank::new(c.fourtank.clone()), k, n),
        EnvId::Plane3DCircle => plane_setup(&Plane3DCircle::new(c.plane3dcircle.clone()), k, n),
        EnvId::GlassFurnace => furnace_setup(&GlassFurnace::new(c.glassfurnace.clone()), k, n),
        EnvId::Integrator => unreachable!("rejected by tuning_params"),
    }
}

/// A simulator seen through one PID loop. Tuned loops run closed, untuned
/// loops hold their bias, and the relay drives the loop under test.
pub struct EnvLoopPlant<'a> {
    env: &'a dyn Simulator,
    expert: &'a PidExpert,
    state: EnvState,
    z: Vec<f64>,
    target: usize,
    tuned: Vec<bool>,
}

impl<'a> EnvLoopPlant<'a> {
    pub fn new(env: &'a dyn Simulator, expert: &'a PidExpert, state: EnvState, target: usize, tuned: Vec<bool>) -> Self {
        let z = expert.initial_state(&state.observation);
        Self {
            env,
            expert,
            state,
            z,
            target,
            tuned,
        }
    }

    fn mode(&self, offset: f64) -> impl Fn(usize) -> LoopMode + '_ {
        move |k| {
            if k == self.target {
                LoopMode::Forced(offset)
            } else if self.tuned[k] {
                LoopMode::Pid
            } else {
                LoopMode::Hold
            }
        }
    }
}

impl SisoPlant for EnvLoopPlant<'_> {
    fn dt(&self) -> f64 {
        self.env.dt()
    }

    fn error(&self) -> f64 {
        let ev = self.expert.evaluate(&self.state.observation, &self.z, self.env.dt(), &self.mode(0.0));
        ev.errors[self.target]
    }

    fn apply(&mut self, offset: f64) -> Result<()> {
        let ev = self.expert.evaluate(&self.state.observation, &self.z, self.env.dt(), &self.mode(offset));
        self.z = ev.z;
        self.env.step_in_place(&mut self.state, &ev.action)?;
        if self.state.terminated {
            return Err(Error::Tuning(format!(
                "episode terminated during relay on loop `{}`",
                self.expert.loops[self.target].name
            )));
        }
        if self.state.done {
            // The probe may outlast the task horizon.
            self.state.done = false;
            self.state.step_index = 0;
        }
        Ok(())
    }
}

fn relay_settings(t: &TuningParams, order_pos: usize) -> Result<RelaySettings> {
    let amp = t.relay_amplitude.get(order_pos).copied();
    let hys = t.relay_hysteresis.get(order_pos).copied();
    match (amp, hys) {
        (Some(a), Some(h)) => Ok(RelaySettings::new(a, h, t.probe_steps, t.noise_floor)),
        _ => Err(Error::invalid(format!("relay settings missing for tuning step {order_pos}"))),
    }
}

/// Tune every loop at one operating point, sequentially in `order`.
fn tune_point(
    env: &dyn Simulator,
    setup: Setup,
    order: &[usize],
    t: &TuningParams,
    rule: &TuningRule,
) -> Result<(PidExpert, OperatingPoint)> {
    let mut expert = setup.expert;
    let mut tuned = vec![false; expert.loops.len()];
    let mut records = Vec::new();
    for (pos, &l) in order.iter().enumerate() {
        let settings = relay_settings(t, pos)?;
        let result = {
            let mut plant = EnvLoopPlant::new(env, &expert, setup.state.clone(), l, tuned.clone());
            relay_experiment(&mut plant, &settings).map_err(|e| {
                Error::Tuning(format!("loop `{}` at {:?}: {e}", expert.loops[l].name, setup.value))
            })?
        };
        let gains = rule.gains(result.ku, result.tu);
        expert.loops[l].gains = gains;
        tuned[l] = true;
        log::debug!("{} {:?}: {:?}", expert.loops[l].name, setup.value, result);
        records.push(LoopTuning {
            name: expert.loops[l].name.clone(),
            relay: result,
            gains,
        });
    }
    Ok((
        expert,
        OperatingPoint {
            value: setup.value,
            loops: records,
        },
    ))
}

/// Roll out the expert from `env.reset(seed)` and return the episode return.
pub fn rollout(env: &dyn Simulator, expert: &ExpertController, seed: u64) -> Result<f64> {
    let mut state = env.reset(seed);
    let mut z = expert.initial_state(&state.observation);
    let mut ret = 0.0;
    while !state.done {
        let (a, z2) = expert.act(&state.observation, &z, env.dt());
        z = z2;
        ret += env.step_in_place(&mut state, &a)?;
    }
    Ok(ret)
}

/// Mean and sample standard deviation of expert returns over seeds `0..n`.
pub fn expert_return(env: &dyn Simulator, expert: &ExpertController, n: usize) -> Result<(f64, f64)> {
    let rets = (0..n as u64).map(|s| rollout(env, expert, s)).collect::<Result<Vec<_>>>()?;
    let mean = rets.iter().sum::<f64>() / n as f64;
    let var = rets.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n.max(2) - 1) as f64;
    Ok((mean, var.sqrt()))
}

/// Relay-tune the task's PID loops over the operating-point sweep, keep the
/// middle point's gains and measure the expert's mean return.
pub fn relay_autotune(id: EnvId, constants: &TaskConstants) -> Result<GainFile> {
    let t = tuning_params(id, constants)?;
    let rule = TuningRule {
        kp_factor: t.kp_factor,
        ti_factor: t.ti_factor,
        td_factor: t.td_factor,
    };
    let env = envs::make(id, constants);
    let order = tuning_order(id);
    let n = t.operating_points.max(1);
    let mut points = Vec::with_capacity(n);
    let mut experts = Vec::with_capacity(n);
    for k in 0..n {
        let (expert, record) = tune_point(env.as_ref(), setup(id, constants, k, n), &order, t, &rule)?;
        experts.push(expert);
        points.push(record);
    }
    let selected = middle_index(n);
    let controller = ExpertController::Pid(experts.swap_remove(selected));
    let (j_exp, j_exp_std) = expert_return(env.as_ref(), &controller, t.eval_seeds)?;
    let relay = (0..order.len()).map(|pos| relay_settings(t, pos)).collect::<Result<_>>()?;
    Ok(GainFile {
        task: id,
        controller,
        j_exp,
        j_exp_std,
        j_exp_seeds: t.eval_seeds,
        provenance: TuningProvenance {
            constants_version: constants.version,
            rule,
            relay,
            tuning_order: order,
            operating_points: points,
            selected,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn middle_of_eight_is_three() {
        assert_eq!(middle_index(8), 3);
        assert_eq!(middle_index(7), 3);
        assert_eq!(middle_index(1), 0);
    }

    #[test]
    fn operating_points_are_equilibria() {
        let c = TaskConstants::builtin();
        for id in EnvId::BENCHMARK {
            let env = envs::make(id, &c);
            let s = setup(id, &c, 3, 8);
            let expert = ExpertController::Pid(s.expert);
            let (a, _) = expert.act(&s.state.observation, &expert.initial_state(&s.state.observation), env.dt());
            let (next, _) = env.step(&s.state, &a).unwrap();
            let drift: f64 = next
                .observation
                .iter()
                .zip(&s.state.observation)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            assert!(drift < 1e-3, "{id}: bias drifts the operating point by {drift}");
        }
    }
}
