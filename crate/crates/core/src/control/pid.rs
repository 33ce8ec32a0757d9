//! Per-axis parallel PID with motor mixing.

use crate::dynamics::QUAD_X_MIXING;
use crate::types::{AngularRates, MotorCommand};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct AxisGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct PidGains {
    pub roll: AxisGains,
    pub pitch: AxisGains,
    pub yaw: AxisGains,
}

impl PidGains {
    pub fn axes(&self) -> [AxisGains; 3] {
        [self.roll, self.pitch, self.yaw]
    }

    pub fn from_axes(a: [AxisGains; 3]) -> Self {
        Self { roll: a[0], pitch: a[1], yaw: a[2] }
    }

    pub fn is_valid(&self) -> bool {
        self.axes()
            .iter()
            .all(|g| [g.kp, g.ki, g.kd].iter().all(|v| *v >= 0.0 && v.is_finite()))
    }
}

/// Integrator and derivative memory of one PID loop.
#[derive(Debug, Clone, PartialEq)]
pub struct Pid {
    pub gains: PidGains,
    pub mixing: [[f64; 3]; 4],
    /// Motor output at zero demand.
    pub hover: f64,
    /// Bound on each axis' integral contribution, in motor units.
    pub integral_limit: f64,
    integral: [f64; 3],
    prev_error: Option<[f64; 3]>,
}

impl Pid {
    pub fn new(gains: PidGains, hover: f64) -> Self {
        Self { gains, mixing: QUAD_X_MIXING, hover, integral_limit: 0.3, integral: [0.0; 3], prev_error: None }
    }

    pub fn with_mixing(mut self, mixing: [[f64; 3]; 4]) -> Self {
        self.mixing = mixing;
        self
    }

    pub fn reset(&mut self) {
        self.integral = [0.0; 3];
        self.prev_error = None;
    }

    /// Axis demands `u = Kp e + Ki int(e) + Kd de/dt`.
    pub fn demand(&mut self, e: AngularRates, dt: f64) -> [f64; 3] {
        let e = e.to_array();
        let axes = self.gains.axes();
        let mut u = [0.0; 3];
        for a in 0..3 {
            let g = axes[a];
            if g.ki > 0.0 {
                let bound = self.integral_limit / g.ki;
                self.integral[a] = (self.integral[a] + e[a] * dt).clamp(-bound, bound);
            }
            let de = match self.prev_error {
                Some(p) => (e[a] - p[a]) / dt,
                None => 0.0,
            };
            u[a] = g.kp * e[a] + g.ki * self.integral[a] + g.kd * de;
        }
        self.prev_error = Some(e);
        u
    }

    /// Motor command `clamp(hover + mixing u, 0, 1)`.
    pub fn control(&mut self, e: AngularRates, dt: f64) -> MotorCommand {
        let u = self.demand(e, dt);
        mix(&self.mixing, self.hover, &u)
    }
}

pub fn mix(mixing: &[[f64; 3]; 4], hover: f64, u: &[f64; 3]) -> MotorCommand {
    MotorCommand(core::array::from_fn(|i| {
        (hover + (0..3).map(|a| mixing[i][a] * u[a]).sum::<f64>()).clamp(0.0, 1.0)
    }))
}

/// Stateless single-step form: returns the command and the updated integral.
pub fn pid_control(
    gains: &PidGains,
    e: AngularRates,
    integral: [f64; 3],
    prev_error: Option<AngularRates>,
    dt: f64,
    hover: f64,
) -> (MotorCommand, [f64; 3]) {
    let mut pid = Pid::new(gains.clone(), hover);
    pid.integral = integral;
    pid.prev_error = prev_error.map(|p| p.to_array());
    let cmd = pid.control(e, dt);
    (cmd, pid.integral)
}
