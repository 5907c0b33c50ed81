use serde::{Deserialize, Serialize};

use crate::envs::wrap_angle;

/// Where a loop reads its setpoint from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetpointSource {
    /// An observation component.
    Obs(usize),
    Const(f64),
    /// The output of an earlier loop (cascade).
    Loop(usize),
}

/// Where a loop's output goes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoopOutput {
    Action(usize),
    /// Feeds another loop's setpoint only.
    Internal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Derivative filter time constant, s.
    pub tf: f64,
}

impl PidGains {
    pub const ZERO: PidGains = PidGains {
        kp: 0.0,
        ki: 0.0,
        kd: 0.0,
        tf: 0.0,
    };
}

/// One SISO loop with its wiring into the observation and action vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PidLoop {
    pub name: String,
    pub measure: usize,
    pub setpoint: SetpointSource,
    pub output: LoopOutput,
    /// +1 if raising the output raises the measurement, else -1.
    pub direction: f64,
    /// Feed-forward output at the tuning operating point.
    pub bias: f64,
    pub output_limits: (f64, f64),
    /// Wrap the error into (-pi, pi].
    pub wrap: bool,
    pub gains: PidGains,
}

impl PidLoop {
    /// Error in the loop's control direction.
    pub fn error(&self, obs: &[f64], outputs: &[f64]) -> f64 {
        let sp = match self.setpoint {
            SetpointSource::Obs(i) => obs[i],
            SetpointSource::Const(c) => c,
            SetpointSource::Loop(j) => outputs[j],
        };
        let raw = sp - obs[self.measure];
        let e = if self.wrap { wrap_angle(raw) } else { raw };
        self.direction * e
    }
}

/// Loops evaluated in order; a cascade outer loop precedes its inner loop.
/// Internal state is `[integral, filtered error]` per loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PidExpert {
    pub action_dim: usize,
    pub loops: Vec<PidLoop>,
}

/// How a loop is driven during one call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum LoopMode {
    Pid,
    /// Output held at its bias.
    Hold,
    /// Output `bias + offset`, integrator untouched.
    Forced(f64),
}

impl PidExpert {
    pub const STATE_PER_LOOP: usize = 2;

    pub fn state_dim(&self) -> usize {
        Self::STATE_PER_LOOP * self.loops.len()
    }

    /// Zero integrators, derivative filters primed on the first error so the
    /// first derivative term is zero.
    pub fn initial_state(&self, obs: &[f64]) -> Vec<f64> {
        let outputs = self.biases();
        let mut z = vec![0.0; self.state_dim()];
        for (k, l) in self.loops.iter().enumerate() {
            z[2 * k + 1] = l.error(obs, &outputs);
        }
        z
    }

    fn biases(&self) -> Vec<f64> {
        self.loops.iter().map(|l| l.bias).collect()
    }

    pub fn act(&self, obs: &[f64], z: &[f64], dt: f64) -> (Vec<f64>, Vec<f64>) {
        let ev = self.evaluate(obs, z, dt, &|_| LoopMode::Pid);
        (ev.action, ev.z)
    }

    pub(crate) fn evaluate(
        &self,
        obs: &[f64],
        z: &[f64],
        dt: f64,
        mode: &dyn Fn(usize) -> LoopMode,
    ) -> Evaluation {
        let mut z_next = z.to_vec();
        let mut outputs = self.biases();
        let mut errors = vec![0.0; self.loops.len()];
        let mut action = vec![0.0; self.action_dim];
        for (k, l) in self.loops.iter().enumerate() {
            let e = l.error(obs, &outputs);
            errors[k] = e;
            let (lo, hi) = l.output_limits;
            let u = match mode(k) {
                LoopMode::Hold => l.bias,
                LoopMode::Forced(offset) => (l.bias + offset).clamp(lo, hi),
                LoopMode::Pid => {
                    let g = &l.gains;
                    let (integral, ef) = (z[2 * k], z[2 * k + 1]);
                    let d = (e - ef) / (g.tf + dt);
                    z_next[2 * k + 1] = (g.tf * ef + dt * e) / (g.tf + dt);
                    let trial = integral + e * dt;
                    let unsat = l.bias + g.kp * e + g.ki * trial + g.kd * d;
                    // Conditional integration: freeze while pushing further
                    // into saturation.
                    let winding = (unsat > hi && e > 0.0) || (unsat < lo && e < 0.0);
                    let integral = if winding { integral } else { trial };
                    z_next[2 * k] = integral;
                    (l.bias + g.kp * e + g.ki * integral + g.kd * d).clamp(lo, hi)
                }
            };
            outputs[k] = u;
            if let LoopOutput::Action(i) = l.output {
                action[i] = u.clamp(-1.0, 1.0);
            }
        }
        Evaluation {
            action,
            z: z_next,
            errors,
        }
    }
}

pub(crate) struct Evaluation {
    pub action: Vec<f64>,
    pub z: Vec<f64>,
    pub errors: Vec<f64>,
}
