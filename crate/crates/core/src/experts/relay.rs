use std::collections::VecDeque;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A single loop seen from the relay: apply an output offset for one
/// sample, then read the loop error.
pub trait SisoPlant {
    fn dt(&self) -> f64;
    /// Current loop error, positive when the output should rise.
    fn error(&self) -> f64;
    fn apply(&mut self, offset: f64) -> Result<()>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelaySettings {
    pub amplitude: f64,
    pub hysteresis: f64,
    pub probe_steps: usize,
    pub noise_floor: f64,
    /// Switchings ignored as transient.
    pub discard: usize,
    /// Consecutive half-periods that must agree.
    pub window: usize,
    /// Relative agreement, `(max - min) / mean`.
    pub tolerance: f64,
}

impl RelaySettings {
    pub fn new(amplitude: f64, hysteresis: f64, probe_steps: usize, noise_floor: f64) -> Self {
        Self {
            amplitude,
            hysteresis,
            probe_steps,
            noise_floor,
            discard: 5,
            window: 4,
            tolerance: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelayResult {
    pub ku: f64,
    pub tu: f64,
    /// First-harmonic amplitude of the error over the measured window.
    pub amplitude: f64,
    /// Half peak-to-peak of the error over the same window.
    pub peak_amplitude: f64,
    pub switches: usize,
}

/// Relay feedback with hysteresis until a sustained oscillation is seen.
///
/// Switching instants are interpolated between samples. `K_u = 4d/(pi a)`
/// with `a` the fundamental amplitude of the error over the first window of
/// agreeing half-periods; `T_u` is twice their mean.
pub fn relay_experiment(plant: &mut dyn SisoPlant, s: &RelaySettings) -> Result<RelayResult> {
    let dt = plant.dt();
    let eps = s.hysteresis;
    let mut e = plant.error();
    let mut state = if e >= 0.0 { 1.0 } else { -1.0 };
    let mut errors = vec![e];
    let mut switches: Vec<f64> = Vec::new();
    let mut recent: VecDeque<f64> = VecDeque::new();

    for step in 0..s.probe_steps {
        plant.apply(state * s.amplitude)?;
        let prev = e;
        e = plant.error();
        if !e.is_finite() {
            return Err(Error::Tuning(format!("non-finite loop error at step {step}")));
        }
        errors.push(e);
        let flip = if state > 0.0 && e < -eps {
            Some(-eps)
        } else if state < 0.0 && e > eps {
            Some(eps)
        } else {
            None
        };
        let Some(threshold) = flip else { continue };
        state = -state;
        let frac = ((threshold - prev) / (e - prev)).clamp(0.0, 1.0);
        switches.push(step as f64 + frac);
        if switches.len() <= s.discard + 1 {
            continue;
        }
        let n = switches.len();
        recent.push_back(switches[n - 1] - switches[n - 2]);
        if recent.len() > s.window {
            recent.pop_front();
        }
        if recent.len() < s.window {
            continue;
        }
        let mean = recent.iter().sum::<f64>() / s.window as f64;
        if !sustained(recent.make_contiguous(), s.tolerance) {
            continue;
        }
        let start = switches[n - 1 - s.window];
        let end = switches[n - 1];
        return measure(&errors, start, end, mean * dt, n, s, dt);
    }
    let hp: Vec<f64> = switches.windows(2).rev().take(16).map(|w| w[1] - w[0]).collect();
    log::debug!("half periods {hp:?}");
    Err(Error::Tuning(format!(
        "no sustained oscillation within {} steps ({} switchings)",
        s.probe_steps,
        switches.len()
    )))
}

/// Half-periods of the same polarity agree within `tol` of the window mean.
/// A symmetric cycle has all half-periods equal; on a nonlinear plant the
/// rising and falling halves may differ but still repeat.
fn sustained(half_periods: &[f64], tol: f64) -> bool {
    let mean = half_periods.iter().sum::<f64>() / half_periods.len() as f64;
    (0..2).all(|parity| {
        let same = half_periods.iter().skip(parity).step_by(2);
        let lo = same.clone().copied().fold(f64::INFINITY, f64::min);
        let hi = same.copied().fold(f64::NEG_INFINITY, f64::max);
        (hi - lo) / mean <= tol
    })
}

fn measure(
    errors: &[f64],
    start: f64,
    end: f64,
    half_period: f64,
    switches: usize,
    s: &RelaySettings,
    dt: f64,
) -> Result<RelayResult> {
    let tu = 2.0 * half_period;
    // errors[k] is the error after k samples; the window spans whole
    // periods, so sample from the first index past `start`.
    let i0 = start.ceil() as usize;
    let i1 = (end.ceil() as usize).min(errors.len() - 1);
    let seg = &errors[i0..i1];
    let span = (end - start) * dt;
    let periods = (span / tu).round().max(1.0);
    let w = 2.0 * PI * periods / (seg.len() as f64);
    let mean = seg.iter().sum::<f64>() / seg.len() as f64;
    let (mut c, mut sn) = (0.0, 0.0);
    for (k, y) in seg.iter().enumerate() {
        let th = w * k as f64;
        c += (y - mean) * th.cos();
        sn += (y - mean) * th.sin();
    }
    let amplitude = 2.0 / seg.len() as f64 * c.hypot(sn);
    let lo = seg.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = seg.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let peak_amplitude = (hi - lo) / 2.0;
    if amplitude < s.noise_floor {
        return Err(Error::Tuning(format!(
            "oscillation amplitude {amplitude:.3e} below noise floor {:.3e}",
            s.noise_floor
        )));
    }
    Ok(RelayResult {
        ku: 4.0 * s.amplitude / (PI * amplitude),
        tu,
        amplitude,
        peak_amplitude,
        switches,
    })
}

/// Maps `(K_u, T_u)` to PID gains. Derivative filter is `T_d / 10`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuningRule {
    pub kp_factor: f64,
    pub ti_factor: f64,
    pub td_factor: f64,
}

impl Default for TuningRule {
    fn default() -> Self {
        Self {
            kp_factor: 0.45,
            ti_factor: 0.83,
            td_factor: 0.125,
        }
    }
}

impl TuningRule {
    pub fn gains(&self, ku: f64, tu: f64) -> super::PidGains {
        let kp = self.kp_factor * ku;
        let ti = self.ti_factor * tu;
        let td = self.td_factor * tu;
        super::PidGains {
            kp,
            ki: if ti > 0.0 { kp / ti } else { 0.0 },
            kd: kp * td,
            tf: td / 10.0,
        }
    }
}

/// Linear plant with input delay, used to check the relay against
/// closed-form ultimate points. `pole = None` gives a pure integrator
/// `k e^{-Ls}/s`, otherwise `k e^{-Ls}/(s/pole + 1)`.
#[derive(Debug, Clone)]
pub struct DelayPlant {
    pub gain: f64,
    pub pole: Option<f64>,
    dt: f64,
    y: f64,
    setpoint: f64,
    buffer: VecDeque<f64>,
}

impl DelayPlant {
    pub fn new(gain: f64, pole: Option<f64>, delay: f64, dt: f64, setpoint: f64) -> Self {
        let n = (delay / dt).round() as usize;
        Self {
            gain,
            pole,
            dt,
            y: 0.0,
            setpoint,
            buffer: std::iter::repeat_n(0.0, n).collect(),
        }
    }
}

impl SisoPlant for DelayPlant {
    fn dt(&self) -> f64 {
        self.dt
    }

    fn error(&self) -> f64 {
        self.setpoint - self.y
    }

    fn apply(&mut self, offset: f64) -> Result<()> {
        self.buffer.push_back(offset);
        let u = self.buffer.pop_front().unwrap_or(offset);
        // Exact zero-order-hold discretisation.
        self.y = match self.pole {
            None => self.y + self.gain * u * self.dt,
            Some(p) => {
                let phi = (-p * self.dt).exp();
                phi * self.y + (1.0 - phi) * self.gain * u
            }
        };
        Ok(())
    }
}
