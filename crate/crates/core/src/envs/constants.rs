//! Versioned physical constants for every task, deserialized from the
//! structured-text constants file (`data/tasks.toml` is compiled in as the
//! default).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const BUILTIN: &str = include_str!("../../data/tasks.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskConstants {
    pub version: u32,
    pub fourtank: FourTankParams,
    pub plane3dcircle: PlaneParams,
    pub glassfurnace: FurnaceParams,
}

/// Relay-tuning settings shared by the PID tasks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningParams {
    pub operating_points: usize,
    /// Per loop, in tuning order.
    pub relay_amplitude: Vec<f64>,
    pub relay_hysteresis: Vec<f64>,
    pub probe_steps: usize,
    pub noise_floor: f64,
    pub kp_factor: f64,
    pub ti_factor: f64,
    pub td_factor: f64,
    pub eval_seeds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourTankParams {
    pub tank_area: [f64; 4],
    pub orifice_area: [f64; 4],
    pub pump_gain: [f64; 2],
    pub valve_split: [f64; 2],
    pub gravity: f64,
    pub max_voltage: f64,
    pub max_level: f64,
    pub dt: f64,
    pub substeps: usize,
    pub horizon: usize,
    pub nominal_setpoint: [f64; 2],
    pub setpoint_half_range: [f64; 2],
    pub tracking_scale: f64,
    pub tuning: TuningParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneParams {
    pub dt: f64,
    pub substeps: usize,
    pub horizon: usize,
    pub gravity: f64,
    pub airspeed_range: [f64; 2],
    pub airspeed_tau: f64,
    pub reference_airspeed: f64,
    pub climb_rate_max: f64,
    pub climb_tau: f64,
    pub bank_max: f64,
    pub bank_tau: f64,
    pub radius_range: [f64; 2],
    pub target_altitude: f64,
    pub initial_altitude_noise: f64,
    pub initial_radial_noise: f64,
    pub initial_heading_noise: f64,
    pub altitude_scale: f64,
    pub radial_scale: f64,
    pub tuning: TuningParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FurnaceParams {
    pub dt: f64,
    pub substeps: usize,
    pub horizon: usize,
    pub ambient: f64,
    pub loss_rate: f64,
    pub coupling_rate: f64,
    pub heat_rate: f64,
    pub setpoint_range: [f64; 2],
    pub setpoint_change_step: usize,
    pub initial_offset_range: [f64; 2],
    pub tracking_scale: f64,
    pub tuning: TuningParams,
}

impl TaskConstants {
    pub fn builtin() -> Self {
        toml::from_str(BUILTIN).expect("compiled-in constants file parses")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(toml::from_str(&text)?)
    }
}

impl Default for TaskConstants {
    fn default() -> Self {
        Self::builtin()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_parses_and_roundtrips() {
        let c = TaskConstants::builtin();
        assert_eq!(c.version, 1);
        assert_eq!(c.fourtank.horizon, 500);
        // Non-minimum-phase configuration.
        assert!(c.fourtank.valve_split[0] + c.fourtank.valve_split[1] < 1.0);
        let text = toml::to_string(&c).unwrap();
        let back: TaskConstants = toml::from_str(&text).unwrap();
        assert_eq!(back, c);
    }
}
