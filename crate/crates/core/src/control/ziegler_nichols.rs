//! Ziegler-Nichols tuning by proportional gain sweep.
//!
//! For each axis the plant is flown under P-only control against a small
//! rate step. The gain is raised geometrically until the error settles into
//! a sustained oscillation, then bisected against the last decaying gain.
//! The boundary gain `K_u` and its period `T_u` give the classic PID row:
//! `Kp = 0.6 K_u`, `Ki = 1.2 K_u / T_u`, `Kd = 0.075 K_u T_u`.

use alloc::format;
use alloc::vec::Vec;

use crate::control::pid::{mix, AxisGains, PidGains};
use crate::dynamics::{DynamicsParams, DynamicsState};
use crate::error::{Error, Result};
use crate::types::{AngularRates, MotorCommand};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ZnOptions {
    /// deg/s.
    pub step_amplitude: f64,
    /// Seconds simulated per trial gain.
    pub duration: f64,
    pub kp_min: f64,
    pub kp_max: f64,
    pub sweep_factor: f64,
    pub refine_iterations: u32,
    /// Late/early amplitude ratio regarded as non-decaying.
    pub flatness: f64,
    /// Upward zero crossings required in the analysis window.
    pub min_cycles: usize,
    pub control_rate: f64,
    pub hover: f64,
}

impl Default for ZnOptions {
    fn default() -> Self {
        Self {
            step_amplitude: 20.0,
            duration: 2.0,
            kp_min: 1e-6,
            kp_max: 10.0,
            sweep_factor: 1.25,
            refine_iterations: 24,
            flatness: 0.98,
            min_cycles: 6,
            control_rate: 1000.0,
            hover: 0.34,
        }
    }
}

/// Ultimate gain and period found for one axis.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct UltimatePoint {
    pub gain: f64,
    /// Seconds.
    pub period: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZnResult {
    pub gains: PidGains,
    pub ultimate: [UltimatePoint; 3],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Oscillation {
    /// Seconds.
    pub period: f64,
    /// Peak deviation in the later half of the window over the earlier half.
    pub amplitude_ratio: f64,
    pub amplitude: f64,
    pub cycles: usize,
}

/// Analyses the second half of `signal` for periodic behavior around its
/// mean. Returns `None` when fewer than two upward crossings exist.
pub fn detect_oscillation(signal: &[f64], dt: f64) -> Option<Oscillation> {
    let window = &signal[signal.len() / 2..];
    if window.len() < 8 {
        return None;
    }
    let mean = window.iter().sum::<f64>() / window.len() as f64;
    let mut crossings: Vec<f64> = Vec::new();
    for i in 1..window.len() {
        let (a, b) = (window[i - 1] - mean, window[i] - mean);
        if a < 0.0 && b >= 0.0 {
            let frac = a / (a - b);
            crossings.push((i as f64 - 1.0 + frac) * dt);
        }
    }
    if crossings.len() < 2 {
        return None;
    }
    let period = (crossings[crossings.len() - 1] - crossings[0]) / (crossings.len() - 1) as f64;
    let half = window.len() / 2;
    let peak = |s: &[f64]| s.iter().fold(0.0f64, |m, v| m.max(libm::fabs(v - mean)));
    let early = peak(&window[..half]);
    let late = peak(&window[half..]);
    let amplitude_ratio = if early > 0.0 { late / early } else { 0.0 };
    Some(Oscillation { period, amplitude_ratio, amplitude: late, cycles: crossings.len() })
}

/// Error trace of one axis under P control with gain `kp`.
pub fn p_control_trace(params: &DynamicsParams, axis: usize, kp: f64, opts: &ZnOptions) -> Result<Vec<f64>> {
    let substeps = libm::round(1.0 / (opts.control_rate * params.physics_dt)).max(1.0) as usize;
    let dt = 1.0 / opts.control_rate;
    let steps = libm::round(opts.duration / dt) as usize;
    let hover = MotorCommand::splat(opts.hover);
    let mut plant = DynamicsState::at_rest(params, hover);
    let mut target = [0.0; 3];
    target[axis] = opts.step_amplitude;
    let target = AngularRates::from_array(target);
    let mut trace = Vec::with_capacity(steps);
    for _ in 0..steps {
        let e = target - plant.phi;
        let mut u = [0.0; 3];
        u[axis] = kp * e.get(axis);
        plant.advance(mix(&params.mixing, opts.hover, &u), params, substeps)?;
        trace.push(target.get(axis) - plant.phi.get(axis));
    }
    Ok(trace)
}

fn sustained(osc: &Option<Oscillation>, opts: &ZnOptions) -> bool {
    match osc {
        Some(o) => {
            o.cycles >= opts.min_cycles
                && o.amplitude_ratio >= opts.flatness
                && o.amplitude > 1e-6 * opts.step_amplitude
        }
        None => false,
    }
}

/// Finds the ultimate gain and period of one axis.
pub fn ultimate_point(params: &DynamicsParams, axis: usize, opts: &ZnOptions) -> Result<UltimatePoint> {
    let dt = 1.0 / opts.control_rate;
    let probe = |kp: f64| -> Result<Option<Oscillation>> {
        let trace = p_control_trace(params, axis, kp, opts)?;
        Ok(detect_oscillation(&trace, dt))
    };
    let mut lo = 0.0;
    let mut kp = opts.kp_min;
    let mut found = None;
    while kp <= opts.kp_max {
        let osc = probe(kp)?;
        if sustained(&osc, opts) {
            found = Some(kp);
            break;
        }
        lo = kp;
        kp *= opts.sweep_factor;
    }
    let mut hi = found.ok_or_else(|| {
        Error::Tuning(format!(
            "axis {axis}: no sustained oscillation for Kp in [{}, {}]",
            opts.kp_min, opts.kp_max
        ))
    })?;
    for _ in 0..opts.refine_iterations {
        let mid = 0.5 * (lo + hi);
        if sustained(&probe(mid)?, opts) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let osc = probe(hi)?.ok_or_else(|| Error::Tuning(format!("axis {axis}: oscillation vanished at Kp {hi}")))?;
    Ok(UltimatePoint { gain: hi, period: osc.period })
}

pub fn classic_pid(point: UltimatePoint) -> AxisGains {
    AxisGains {
        kp: 0.6 * point.gain,
        ki: 1.2 * point.gain / point.period,
        kd: 0.075 * point.gain * point.period,
    }
}

/// Tunes all three axes of the given profile. Gyro noise plays no part; the
/// sweep flies the true rates.
pub fn ziegler_nichols_tune(params: &DynamicsParams, opts: &ZnOptions) -> Result<ZnResult> {
    params.validate()?;
    let mut ultimate = [UltimatePoint { gain: 0.0, period: 0.0 }; 3];
    for (axis, slot) in ultimate.iter_mut().enumerate() {
        *slot = ultimate_point(params, axis, opts)?;
    }
    let gains = PidGains::from_axes(ultimate.map(classic_pid));
    Ok(ZnResult { gains, ultimate })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detects_sinusoid_period() {
        let dt = 0.001;
        for &period in &[0.02, 0.0333, 0.1] {
            let s: Vec<f64> = (0..4000)
                .map(|i| 3.0 + libm::sin(2.0 * core::f64::consts::PI * i as f64 * dt / period + 0.3))
                .collect();
            let o = detect_oscillation(&s, dt).unwrap();
            assert!((o.period - period).abs() / period < 0.02, "{} vs {period}", o.period);
            assert!((o.amplitude_ratio - 1.0).abs() < 0.01);
        }
    }

    #[test]
    fn decaying_signal_is_not_sustained() {
        let dt = 0.001;
        let s: Vec<f64> = (0..4000)
            .map(|i| {
                let t = i as f64 * dt;
                libm::exp(-2.0 * t) * libm::sin(2.0 * core::f64::consts::PI * 30.0 * t)
            })
            .collect();
        let o = detect_oscillation(&s, dt);
        assert!(!sustained(&o, &ZnOptions::default()));
    }

    #[test]
    fn tuning_is_deterministic_and_positive() {
        let p = DynamicsParams::nominal();
        let a = ziegler_nichols_tune(&p, &ZnOptions::default()).unwrap();
        let b = ziegler_nichols_tune(&p, &ZnOptions::default()).unwrap();
        assert_eq!(a, b);
        assert!(a.gains.is_valid());
        for u in a.ultimate {
            assert!(u.gain > 0.0 && u.period > 0.0);
        }
    }

    #[test]
    fn unreachable_oscillation_fails() {
        let p = DynamicsParams::nominal();
        let opts = ZnOptions { kp_max: 1e-5, ..ZnOptions::default() };
        assert!(matches!(ziegler_nichols_tune(&p, &opts), Err(Error::Tuning(_))));
    }
}
