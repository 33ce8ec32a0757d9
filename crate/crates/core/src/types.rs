//! Shared domain types and the trajectory log model.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::ops::{Add, Sub};

use crate::error::{Error, Result};

/// Body angular rates in deg/s.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AngularRates {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl AngularRates {
    pub const ZERO: Self = Self::new(0.0, 0.0, 0.0);

    pub const fn new(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self { roll, pitch, yaw }
    }

    pub const fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub const fn to_array(self) -> [f64; 3] {
        [self.roll, self.pitch, self.yaw]
    }

    pub fn get(&self, axis: usize) -> f64 {
        self.to_array()[axis]
    }

    pub fn is_finite(&self) -> bool {
        self.roll.is_finite() && self.pitch.is_finite() && self.yaw.is_finite()
    }

    pub fn norm1(&self) -> f64 {
        libm::fabs(self.roll) + libm::fabs(self.pitch) + libm::fabs(self.yaw)
    }

    pub fn norm2(&self) -> f64 {
        libm::sqrt(self.roll * self.roll + self.pitch * self.pitch + self.yaw * self.yaw)
    }

    pub fn max_abs(&self) -> f64 {
        libm::fabs(self.roll)
            .max(libm::fabs(self.pitch))
            .max(libm::fabs(self.yaw))
    }

    pub fn scale(self, k: f64) -> Self {
        Self::new(self.roll * k, self.pitch * k, self.yaw * k)
    }
}

impl Add for AngularRates {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.roll + o.roll, self.pitch + o.pitch, self.yaw + o.yaw)
    }
}

impl Sub for AngularRates {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.roll - o.roll, self.pitch - o.pitch, self.yaw - o.yaw)
    }
}

/// Four normalized motor actuation values.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct MotorCommand(pub [f64; 4]);

impl MotorCommand {
    pub const fn splat(v: f64) -> Self {
        Self([v; 4])
    }

    /// Clamps every element into `[0, 1]`. Returns the clamped command and
    /// whether any element changed. NaN maps to 0.
    pub fn clamped(self) -> (Self, bool) {
        let mut out = self.0;
        let mut changed = false;
        for v in out.iter_mut() {
            let c = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
            if c.to_bits() != v.to_bits() {
                changed = true;
            }
            *v = c;
        }
        (Self(out), changed)
    }

    pub fn mean(&self) -> f64 {
        self.0.iter().sum::<f64>() / 4.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// Observation fed to attitude controllers.
///
/// Flattened layout: `[e, phi, dphi, y_prev]`, 13 numbers.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StateVector {
    /// Tracking error, set-point minus measured rate.
    pub e: AngularRates,
    pub phi: AngularRates,
    /// Per-step rate difference (not divided by dt).
    pub dphi: AngularRates,
    pub y_prev: MotorCommand,
}

impl StateVector {
    pub const LEN: usize = 13;

    pub fn flatten(&self) -> [f64; Self::LEN] {
        let mut out = [0.0; Self::LEN];
        out[0..3].copy_from_slice(&self.e.to_array());
        out[3..6].copy_from_slice(&self.phi.to_array());
        out[6..9].copy_from_slice(&self.dphi.to_array());
        out[9..13].copy_from_slice(&self.y_prev.0);
        out
    }

    pub fn unflatten(v: &[f64; Self::LEN]) -> Self {
        Self {
            e: AngularRates::new(v[0], v[1], v[2]),
            phi: AngularRates::new(v[3], v[4], v[5]),
            dphi: AngularRates::new(v[6], v[7], v[8]),
            y_prev: MotorCommand([v[9], v[10], v[11], v[12]]),
        }
    }
}

/// One control step of a logged episode.
///
/// `setpoint` is the target handed to the controller when it chose
/// `action`; `measured`, `true_rates` and `motors` are the state after the
/// action was applied for one control period.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub step: u64,
    pub setpoint: AngularRates,
    /// Gyro reading (true rate plus sensor noise).
    pub measured: AngularRates,
    pub true_rates: AngularRates,
    /// Command after clamping, i.e. what entered the actuator queue.
    pub action: MotorCommand,
    pub motors: [f64; 4],
    pub rewards: Vec<f64>,
    pub reward: f64,
    pub terminated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Seconds per control step.
    pub dt: f64,
    pub reward_labels: Vec<String>,
    pub rows: Vec<TrajectoryRow>,
}

impl Trajectory {
    pub fn new(dt: f64, reward_labels: Vec<String>) -> Self {
        Self { dt, reward_labels, rows: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Appends a row, assigning the next contiguous step index.
    pub fn push(&mut self, mut row: TrajectoryRow) {
        row.step = self.rows.len() as u64;
        self.rows.push(row);
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Data(format!("dt must be positive and finite, got {}", self.dt)));
        }
        for (i, row) in self.rows.iter().enumerate() {
            if row.step != i as u64 {
                return Err(Error::Data(format!(
                    "step indices not contiguous: row {} has step {}",
                    i, row.step
                )));
            }
            if row.rewards.len() != self.reward_labels.len() {
                return Err(Error::Data(format!(
                    "row {} has {} reward components, expected {}",
                    i,
                    row.rewards.len(),
                    self.reward_labels.len()
                )));
            }
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.dt * self.rows.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_state_flattens_to_zeros() {
        assert_eq!(StateVector::default().flatten(), [0.0; 13]);
    }

    #[test]
    fn flatten_ordering() {
        let s = StateVector {
            e: AngularRates::new(1.0, 2.0, 3.0),
            phi: AngularRates::new(4.0, 5.0, 6.0),
            dphi: AngularRates::new(7.0, 8.0, 9.0),
            y_prev: MotorCommand([0.1, 0.2, 0.3, 0.4]),
        };
        assert_eq!(
            s.flatten(),
            [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 0.1, 0.2, 0.3, 0.4]
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn unflatten_inverts_flatten(v in prop::array::uniform13(-1e4f64..1e4)) {
            let s = StateVector::unflatten(&v);
            prop_assert_eq!(s.flatten(), v);
            prop_assert_eq!(StateVector::unflatten(&s.flatten()), s);
        }
    }

    #[test]
    fn clamping_reports_changes() {
        let (c, changed) = MotorCommand([0.5, 1.2, -0.1, 1.0]).clamped();
        assert!(changed);
        assert_eq!(c.0, [0.5, 1.0, 0.0, 1.0]);
        let (_, changed) = MotorCommand([0.0, 0.3, 1.0, 0.9]).clamped();
        assert!(!changed);
    }

    #[test]
    fn validate_rejects_gaps() {
        let row = TrajectoryRow {
            step: 0,
            setpoint: AngularRates::ZERO,
            measured: AngularRates::ZERO,
            true_rates: AngularRates::ZERO,
            action: MotorCommand::default(),
            motors: [0.0; 4],
            rewards: Vec::new(),
            reward: 0.0,
            terminated: false,
        };
        let mut t = Trajectory::new(0.001, Vec::new());
        t.rows.push(row.clone());
        t.rows.push(TrajectoryRow { step: 2, ..row });
        assert!(matches!(t.validate(), Err(Error::Data(_))));
    }
}
