use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ode::rk4;
use super::{begin_step, finish_step, tracking_factor, EnvId, EnvSpec, EnvState, Internal, PlaneParams, Simulator};
use crate::seeding::{self, Stream};
use crate::Result;

/// Point-mass aircraft state, SI units. The target circle is centred on the
/// origin and flown counter-clockwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneState {
    pub x: f64,
    pub y: f64,
    pub altitude: f64,
    pub airspeed: f64,
    /// Heading, rad, measured from the +x axis.
    pub heading: f64,
    pub bank: f64,
    pub climb_rate: f64,
    pub radius: f64,
    pub target_altitude: f64,
}

impl PlaneState {
    fn to_array(self) -> [f64; 7] {
        [self.x, self.y, self.altitude, self.airspeed, self.heading, self.bank, self.climb_rate]
    }

    fn with_array(self, a: [f64; 7]) -> Self {
        Self {
            x: a[0],
            y: a[1],
            altitude: a[2],
            airspeed: a[3],
            heading: a[4],
            bank: a[5],
            climb_rate: a[6],
            ..self
        }
    }

    pub fn altitude_error(&self) -> f64 {
        self.altitude - self.target_altitude
    }

    /// Distance from the circle, positive outside.
    pub fn radial_error(&self) -> f64 {
        self.x.hypot(self.y) - self.radius
    }

    /// Heading relative to the counter-clockwise tangent, wrapped to (-pi, pi].
    pub fn heading_error(&self) -> f64 {
        let tangent = self.y.atan2(self.x) + FRAC_PI_2;
        wrap_angle(self.heading - tangent)
    }
}

pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(TAU) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

/// Kinematic aircraft asked to hold altitude on a circle of seeded radius.
///
/// Action: `[throttle, stick, aileron]`. Observation:
/// `[altitude error, climb rate, airspeed - reference, radial error,
/// heading error, bank, radius]`.
#[derive(Debug, Clone)]
pub struct Plane3DCircle {
    params: PlaneParams,
    spec: EnvSpec,
}

impl Plane3DCircle {
    pub fn new(params: PlaneParams) -> Self {
        let spec = EnvSpec::new(EnvId::Plane3DCircle, 3, 7, params.horizon, true);
        Self { params, spec }
    }

    pub fn params(&self) -> &PlaneParams {
        &self.params
    }

    fn derivatives(&self, s: &[f64; 7], a: &[f64]) -> [f64; 7] {
        let p = &self.params;
        let [_, _, _, v, psi, phi, climb] = *s;
        let [lo, hi] = p.airspeed_range;
        let v_cmd = lo + (a[0] + 1.0) / 2.0 * (hi - lo);
        let v_eff = v.max(1.0);
        [
            v * psi.cos(),
            v * psi.sin(),
            climb,
            (v_cmd - v) / p.airspeed_tau,
            p.gravity * phi.tan() / v_eff,
            (a[2] * p.bank_max - phi) / p.bank_tau,
            (a[1] * p.climb_rate_max - climb) / p.climb_tau,
        ]
    }

    pub fn reward(&self, s: &PlaneState) -> f64 {
        let fa = tracking_factor(s.altitude_error(), self.params.altitude_scale);
        let fr = tracking_factor(s.radial_error(), self.params.radial_scale);
        fa.powi(10) * fr.powi(10)
    }

    pub fn observe(&self, s: &PlaneState) -> Vec<f64> {
        vec![
            s.altitude_error(),
            s.climb_rate,
            s.airspeed - self.params.reference_airspeed,
            s.radial_error(),
            s.heading_error(),
            s.bank,
            s.radius,
        ]
    }

    pub fn state_with(&self, plane: PlaneState) -> EnvState {
        EnvState {
            observation: self.observe(&plane),
            internal: Internal::Plane(plane),
            step_index: 0,
            done: false,
            terminated: false,
        }
    }
}

impl Simulator for Plane3DCircle {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn dt(&self) -> f64 {
        self.params.dt
    }

    fn reset(&self, seed: u64) -> EnvState {
        let p = &self.params;
        let mut rng = seeding::rng(seed, Stream::EnvEpisode, 0);
        let mut sym = |w: f64| w * rng.random_range(-1.0..=1.0);
        let radius_u = sym(1.0);
        let radius = p.radius_range[0] + (radius_u + 1.0) / 2.0 * (p.radius_range[1] - p.radius_range[0]);
        let theta = PI * sym(1.0);
        let r = radius + sym(p.initial_radial_noise);
        let altitude = p.target_altitude + sym(p.initial_altitude_noise);
        let heading = theta + FRAC_PI_2 + sym(p.initial_heading_noise);
        self.state_with(PlaneState {
            x: r * theta.cos(),
            y: r * theta.sin(),
            altitude,
            airspeed: p.reference_airspeed,
            heading,
            bank: 0.0,
            climb_rate: 0.0,
            radius,
            target_altitude: p.target_altitude,
        })
    }

    fn step_in_place(&self, state: &mut EnvState, action: &[f64]) -> Result<f64> {
        let a = begin_step(&self.spec, state, action)?;
        let Internal::Plane(plane) = &mut state.internal else {
            unreachable!("Plane3DCircle stepped with a foreign state")
        };
        let next = rk4(
            plane.to_array(),
            self.params.dt,
            self.params.substeps,
            |s| self.derivatives(s, &a),
            |s| s[4] = wrap_angle(s[4]),
        );
        *plane = plane.with_array(next);
        let crashed = plane.altitude <= 0.0;
        let r = if crashed { 0.0 } else { self.reward(plane) };
        state.observation = self.observe(plane);
        finish_step(&self.spec, state);
        if crashed {
            state.done = true;
            state.terminated = true;
        }
        Ok(r)
    }
}
