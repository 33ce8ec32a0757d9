//! Rigid-body rate dynamics and the pendulum analog.
//!
//! The quadrotor model tracks body rates only. Per physics substep:
//!
//! ```text
//! m     <- m + min(1, dt/tau) (y - m)              first-order motor lag
//! torque = max_torque .* (mixing^T m) - drag .* w  (w in rad/s)
//! w     <- w + dt I^-1 (torque - w x I w)           semi-implicit Euler
//! ```
//!
//! Commands pass through a delay queue of whole control steps before they
//! reach the motors. Gyro noise only touches the observation, never the
//! integrated state.

use alloc::collections::VecDeque;
use alloc::format;

use crate::error::{config_err, Error, Result};
use crate::rng::{standard_normal, LabRng};
use crate::types::{AngularRates, MotorCommand};

const DEG: f64 = core::f64::consts::PI / 180.0;

/// Quad-X mixing, rows are motors (rear-right, front-right, rear-left,
/// front-left), columns are roll, pitch, yaw.
pub const QUAD_X_MIXING: [[f64; 3]; 4] = [
    [-1.0, -1.0, 1.0],
    [-1.0, 1.0, -1.0],
    [1.0, -1.0, -1.0],
    [1.0, 1.0, 1.0],
];

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct DynamicsParams {
    /// Diagonal body inertia, kg m^2.
    pub inertia: [f64; 3],
    /// Seconds.
    pub motor_time_constant: f64,
    /// N m per unit of mixed motor output, per axis.
    pub max_motor_torque: [f64; 3],
    pub mixing: [[f64; 3]; 4],
    /// Rotational damping, N m per rad/s.
    pub drag_coeff: [f64; 3],
    /// deg/s.
    pub gyro_noise_std: f64,
    pub actuation_delay_steps: u32,
    /// Seconds.
    pub physics_dt: f64,
}

impl Default for DynamicsParams {
    fn default() -> Self {
        Self::nominal()
    }
}

impl DynamicsParams {
    /// 5-inch racing quad analog.
    pub fn nominal() -> Self {
        Self {
            inertia: [0.005, 0.005, 0.009],
            motor_time_constant: 0.02,
            max_motor_torque: [0.5, 0.5, 0.2],
            mixing: QUAD_X_MIXING,
            drag_coeff: [0.02, 0.02, 0.02],
            gyro_noise_std: 0.0,
            actuation_delay_steps: 1,
            physics_dt: 0.001,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.inertia.iter().any(|&i| !(i > 0.0 && i.is_finite())) {
            return Err(config_err("dynamics.inertia components must be > 0"));
        }
        if !(self.motor_time_constant > 0.0 && self.motor_time_constant.is_finite()) {
            return Err(config_err("dynamics.motor_time_constant must be > 0"));
        }
        if !(self.physics_dt > 0.0 && self.physics_dt <= 0.01) {
            return Err(config_err("dynamics.physics_dt must lie in (0, 0.01]"));
        }
        if self.max_motor_torque.iter().any(|&t| !(t >= 0.0 && t.is_finite())) {
            return Err(config_err("dynamics.max_motor_torque must be finite and >= 0"));
        }
        if self.drag_coeff.iter().any(|&d| !(d >= 0.0 && d.is_finite())) {
            return Err(config_err("dynamics.drag_coeff must be finite and >= 0"));
        }
        if !(self.gyro_noise_std >= 0.0 && self.gyro_noise_std.is_finite()) {
            return Err(config_err("dynamics.gyro_noise_std must be finite and >= 0"));
        }
        for axis in 0..3 {
            let col: f64 = self.mixing.iter().map(|row| row[axis]).sum();
            if libm::fabs(col) > 1e-12 || self.mixing.iter().any(|row| !row[axis].is_finite()) {
                return Err(config_err(format!(
                    "dynamics.mixing column {axis} must be finite and sum to 0 (got {col})"
                )));
            }
        }
        Ok(())
    }

    /// Body torques (N m) produced by motor outputs `m` at rest.
    pub fn motor_torque(&self, m: &[f64; 4]) -> [f64; 3] {
        core::array::from_fn(|a| {
            self.max_motor_torque[a] * (0..4).map(|i| self.mixing[i][a] * m[i]).sum::<f64>()
        })
    }
}

/// Field-wise perturbation producing a second dynamics profile.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct Perturbation {
    pub inertia_scale: [f64; 3],
    pub motor_time_constant_scale: f64,
    pub max_motor_torque_scale: [f64; 3],
    pub drag_scale: [f64; 3],
    /// Replaces the gyro noise level when set. Written as `"keep"` in
    /// config files when unset.
    #[cfg_attr(feature = "serde", serde(with = "keep_or_value"))]
    pub gyro_noise_std: Option<f64>,
    pub extra_delay_steps: i32,
}

impl Default for Perturbation {
    fn default() -> Self {
        Self {
            inertia_scale: [1.10; 3],
            motor_time_constant_scale: 1.25,
            max_motor_torque_scale: [1.0; 3],
            drag_scale: [1.0; 3],
            gyro_noise_std: Some(2.0),
            extra_delay_steps: 1,
        }
    }
}

#[cfg(feature = "serde")]
mod keep_or_value {
    use alloc::string::String;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Value(f64),
        Word(String),
    }

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(x) => Repr::Value(*x),
            None => Repr::Word("keep".into()),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Value(x) => Ok(Some(x)),
            Repr::Word(w) if w == "keep" => Ok(None),
            Repr::Word(w) => Err(serde::de::Error::custom(alloc::format!(
                "expected a noise level or \"keep\", got \"{w}\""
            ))),
        }
    }
}

impl Perturbation {
    pub fn identity() -> Self {
        Self {
            inertia_scale: [1.0; 3],
            motor_time_constant_scale: 1.0,
            max_motor_torque_scale: [1.0; 3],
            drag_scale: [1.0; 3],
            gyro_noise_std: None,
            extra_delay_steps: 0,
        }
    }
}

pub fn perturbed_profile(nominal: &DynamicsParams, p: &Perturbation) -> Result<DynamicsParams> {
    let mut out = nominal.clone();
    for a in 0..3 {
        out.inertia[a] *= p.inertia_scale[a];
        out.max_motor_torque[a] *= p.max_motor_torque_scale[a];
        out.drag_coeff[a] *= p.drag_scale[a];
    }
    out.motor_time_constant *= p.motor_time_constant_scale;
    if let Some(std) = p.gyro_noise_std {
        out.gyro_noise_std = std;
    }
    let delay = nominal.actuation_delay_steps as i64 + p.extra_delay_steps as i64;
    if delay < 0 {
        return Err(config_err("perturbation makes actuation_delay_steps negative"));
    }
    out.actuation_delay_steps = delay as u32;
    out.validate()?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsState {
    /// True body rates, deg/s.
    pub phi: AngularRates,
    /// Lagged motor outputs in `[0, 1]`.
    pub motor_speeds: [f64; 4],
    /// Commands waiting to reach the motors, oldest first.
    pub pending: VecDeque<MotorCommand>,
}

impl DynamicsState {
    /// At rest with motors spun to `idle` and the delay queue primed with it.
    pub fn at_rest(params: &DynamicsParams, idle: MotorCommand) -> Self {
        let mut pending = VecDeque::with_capacity(params.actuation_delay_steps as usize + 1);
        pending.extend(core::iter::repeat(idle).take(params.actuation_delay_steps as usize));
        Self { phi: AngularRates::ZERO, motor_speeds: idle.0, pending }
    }

    /// Advances one control period made of `substeps` physics steps.
    pub fn advance(&mut self, action: MotorCommand, params: &DynamicsParams, substeps: usize) -> Result<()> {
        self.pending.push_back(action);
        let drive = if self.pending.len() > params.actuation_delay_steps as usize {
            self.pending.pop_front().unwrap_or(action)
        } else {
            // Queue shorter than the delay (state built for another
            // profile); hold the oldest command.
            *self.pending.front().unwrap_or(&action)
        };
        let alpha = (params.physics_dt / params.motor_time_constant).min(1.0);
        let inertia = params.inertia;
        let mut w = self.phi.to_array().map(|v| v * DEG);
        for _ in 0..substeps {
            for (m, y) in self.motor_speeds.iter_mut().zip(drive.0.iter()) {
                *m = (*m + alpha * (y - *m)).clamp(0.0, 1.0);
            }
            let applied = params.motor_torque(&self.motor_speeds);
            let iw = [inertia[0] * w[0], inertia[1] * w[1], inertia[2] * w[2]];
            let gyro = [
                w[1] * iw[2] - w[2] * iw[1],
                w[2] * iw[0] - w[0] * iw[2],
                w[0] * iw[1] - w[1] * iw[0],
            ];
            for a in 0..3 {
                let torque = applied[a] - params.drag_coeff[a] * w[a] - gyro[a];
                w[a] += params.physics_dt * torque / inertia[a];
            }
        }
        let phi = AngularRates::from_array(w.map(|v| v / DEG));
        if !phi.is_finite() {
            return Err(Error::NonFinite(format!("body rates diverged: {phi:?}")));
        }
        self.phi = phi;
        Ok(())
    }
}

/// Pure form of [`DynamicsState::advance`].
pub fn step(
    state: &DynamicsState,
    action: MotorCommand,
    params: &DynamicsParams,
    substeps: usize,
) -> Result<DynamicsState> {
    let mut next = state.clone();
    next.advance(action, params, substeps)?;
    Ok(next)
}

/// Gyro reading of the true rates.
pub fn observe(true_rates: AngularRates, params: &DynamicsParams, rng: &mut LabRng) -> AngularRates {
    if params.gyro_noise_std == 0.0 {
        return true_rates;
    }
    let s = params.gyro_noise_std;
    let noise = AngularRates::new(
        s * standard_normal(rng),
        s * standard_normal(rng),
        s * standard_normal(rng),
    );
    true_rates + noise
}

/// Frictionless pendulum, angle measured from hanging straight down.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct PendulumParams {
    pub gravity: f64,
    pub length: f64,
    pub mass: f64,
    pub max_torque: f64,
    /// Angular speed clip, rad/s.
    pub max_speed: f64,
    pub dt: f64,
}

impl Default for PendulumParams {
    fn default() -> Self {
        Self { gravity: 10.0, length: 1.0, mass: 1.0, max_torque: 12.0, max_speed: 8.0, dt: 0.05 }
    }
}

impl PendulumParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.gravity, self.length, self.mass, self.max_torque, self.max_speed, self.dt];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(config_err("pendulum parameters must all be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PendulumState {
    /// Radians in `(-pi, pi]`; 0 is hanging down, `pi` is upright.
    pub angle: f64,
    pub velocity: f64,
}

impl PendulumState {
    pub fn energy(&self, p: &PendulumParams) -> f64 {
        0.5 * p.mass * p.length * p.length * self.velocity * self.velocity
            + p.mass * p.gravity * p.length * (1.0 - libm::cos(self.angle))
    }

    /// Absolute angular distance from the upright position, in `[0, pi]`.
    pub fn angle_from_upright(&self) -> f64 {
        core::f64::consts::PI - libm::fabs(self.angle)
    }
}

pub fn wrap_angle(a: f64) -> f64 {
    use core::f64::consts::PI;
    let mut w = libm::fmod(a + PI, 2.0 * PI);
    if w <= 0.0 {
        w += 2.0 * PI;
    }
    w - PI
}

/// Semi-implicit Euler step. Torque is clamped to the limit; the speed clip
/// is not applied here (the environment applies it).
pub fn pendulum_step(state: PendulumState, torque: f64, p: &PendulumParams) -> PendulumState {
    let u = torque.clamp(-p.max_torque, p.max_torque);
    let accel = -(p.gravity / p.length) * libm::sin(state.angle) + u / (p.mass * p.length * p.length);
    let velocity = state.velocity + p.dt * accel;
    let angle = wrap_angle(state.angle + p.dt * velocity);
    PendulumState { angle, velocity }
}
