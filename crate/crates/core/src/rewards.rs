//! Penalties, normalization and reward composition.
//!
//! Each objective is first expressed as a non-negative penalty, mapped into
//! `[0, 1]` by [`positive_clip`], and then composed. The geometric mean acts
//! as a smooth logical AND: a single component near zero pulls the composed
//! reward to the `epsilon` floor no matter how good the others are. The
//! weighted sum is provided for comparison, as is the legacy additive reward
//! used by Neuroflight.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{config_err, Result};
use crate::types::{AngularRates, MotorCommand};

/// Labels of the components returned by [`real_reward`].
pub const QUAD_LABELS: &[&str] = &["r_s", "r_u", "r_c"];
/// Labels of the components returned by [`neuroflight_reward`].
pub const NEUROFLIGHT_LABELS: &[&str] = &["r_a", "r_b", "r_e", "r_o", "r_n"];

/// How reward components are collapsed into the training scalar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Composition {
    #[default]
    Multiplicative,
    Additive,
    Neuroflight,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardVector {
    pub components: Vec<f64>,
    pub labels: &'static [&'static str],
}

impl RewardVector {
    pub fn new(components: Vec<f64>, labels: &'static [&'static str]) -> Self {
        debug_assert_eq!(components.len(), labels.len());
        Self { components, labels }
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct RewardConfig {
    /// Error (deg/s) at which the tracking component reaches zero.
    pub beta: f64,
    /// Target per-motor actuation.
    pub mu: f64,
    pub epsilon: f64,
    /// Additive composition weights, one per component.
    pub weights: Vec<f64>,
    /// Error-norm band (deg/s) for the Neuroflight in-band term.
    pub neuroflight_band: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            beta: 300.0,
            mu: 0.34,
            epsilon: 1e-6,
            weights: vec![1.0; 3],
            neuroflight_band: 20.0,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(config_err("reward.beta must be > 0"));
        }
        if !(self.mu > 0.0 && self.mu < 1.0) {
            return Err(config_err("reward.mu must lie in (0, 1)"));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 0.01) {
            return Err(config_err("reward.epsilon must lie in (0, 0.01]"));
        }
        if self.weights.iter().any(|w| !w.is_finite()) {
            return Err(config_err("reward.weights must be finite"));
        }
        if !(self.neuroflight_band > 0.0) {
            return Err(config_err("reward.neuroflight_band must be > 0"));
        }
        Ok(())
    }
}

/// 4-norm of the per-axis tracking error.
pub fn penalty_error(phi: AngularRates, setpoint: AngularRates) -> f64 {
    let d = phi - setpoint;
    let s: f64 = d.to_array().iter().map(|x| {
        let x2 = x * x;
        x2 * x2
    }).sum();
    libm::sqrt(libm::sqrt(s))
}

pub fn penalty_smooth(y: &MotorCommand, y_prev: &MotorCommand) -> [f64; 4] {
    core::array::from_fn(|i| libm::fabs(y.0[i] - y_prev.0[i]))
}

pub fn penalty_thrust(y: &MotorCommand, mu: f64) -> [f64; 4] {
    core::array::from_fn(|i| libm::fabs(y.0[i] - mu))
}

/// Reflects a penalty into a reward: `min(1, max(0, 1 - p))`.
pub fn positive_clip(p: f64) -> f64 {
    (1.0 - p).clamp(0.0, 1.0)
}

/// `(prod_k min(1, r_k + eps))^(1/K)`, evaluated in log space.
pub fn geometric_mean(components: &[f64], epsilon: f64) -> f64 {
    debug_assert!(!components.is_empty());
    let k = components.len() as f64;
    let log_sum: f64 = components
        .iter()
        .map(|&r| libm::log((r + epsilon).min(1.0)))
        .sum();
    libm::exp(log_sum / k)
}

pub fn additive_compose(components: &[f64], weights: &[f64]) -> Result<f64> {
    if components.len() != weights.len() {
        return Err(config_err(alloc::format!(
            "additive composition needs {} weights, got {}",
            components.len(),
            weights.len()
        )));
    }
    Ok(components.iter().zip(weights).map(|(r, w)| r * w).sum())
}

/// Normalized tracking, thrust and smoothness components `[r_s, r_u, r_c]`.
///
/// The thrust and smoothness components are geometric means over the four
/// motors of the clipped per-motor penalties.
pub fn quad_components(
    phi: AngularRates,
    setpoint: AngularRates,
    y: &MotorCommand,
    y_prev: &MotorCommand,
    cfg: &RewardConfig,
) -> RewardVector {
    let r_s = positive_clip(penalty_error(phi, setpoint) / cfg.beta);
    let r_u = geometric_mean(&penalty_thrust(y, cfg.mu).map(positive_clip), cfg.epsilon);
    let r_c = geometric_mean(&penalty_smooth(y, y_prev).map(positive_clip), cfg.epsilon);
    RewardVector::new(vec![r_s, r_u, r_c], QUAD_LABELS)
}

/// Geometric-mean composed reward and its components.
pub fn real_reward(
    phi: AngularRates,
    setpoint: AngularRates,
    y: &MotorCommand,
    y_prev: &MotorCommand,
    cfg: &RewardConfig,
) -> (f64, RewardVector) {
    let r = quad_components(phi, setpoint, y, y_prev, cfg);
    (geometric_mean(&r.components, cfg.epsilon), r)
}

/// Legacy additive reward `r_a + r_b + r_e + r_o + r_n`.
///
/// `y` may be the raw (pre-clamp) command so the over-saturation term can
/// fire. `prev_error` is the tracking error of the previous step; error
/// magnitudes use the Euclidean norm.
pub fn neuroflight_reward(
    phi: AngularRates,
    setpoint: AngularRates,
    prev_error: AngularRates,
    y: &MotorCommand,
    y_prev: &MotorCommand,
    band: f64,
) -> (f64, RewardVector) {
    let e = setpoint - phi;
    let max_dy = penalty_smooth(y, y_prev).iter().fold(0.0f64, |a, &b| a.max(b));
    let r_a = -100.0 * max_dy;
    let r_b = if e.norm2() < band { 1000.0 * (1.0 - y.mean()) } else { 0.0 };
    let r_e = prev_error.norm2() - e.norm2();
    let r_o = -1e9 * y.0.iter().map(|v| (v - 1.0).max(0.0)).sum::<f64>();
    let idle_motors = y.0.iter().filter(|&&v| v == 0.0).count() as f64;
    let r_n = if setpoint.norm2() > 0.0 { -1e9 * idle_motors } else { 0.0 };
    let parts = vec![r_a, r_b, r_e, r_o, r_n];
    let total = r_a + r_b + r_e + r_o + r_n;
    (total, RewardVector::new(parts, NEUROFLIGHT_LABELS))
}
