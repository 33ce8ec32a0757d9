//! Reality-gap curves between a "real" log and a simulator profile.
//!
//! The actuation playback gap restarts the simulator from logged states and
//! feeds it the logged commands open loop. The set-point playback gap closes
//! the simulated loop with the same controller on the logged goals. Both
//! report the per-step 1-norm of the true-rate difference.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::control::Controller;
use crate::dynamics::{DynamicsParams, DynamicsState};
use crate::envs::{EnvConfig, GoalSource, QuadEnv};
use crate::error::{Error, Result};
use crate::eval::episode::run_episode;
use crate::eval::sum::KahanSum;
use crate::rng::rng_from;
use crate::types::{MotorCommand, Trajectory};

/// Mean and spread of a gap at each time offset.
#[derive(Debug, Clone, PartialEq)]
pub struct GapCurve {
    pub dt: f64,
    /// deg/s (1-norm over axes).
    pub mean: Vec<f64>,
    /// Sample deviation across curves; zero with a single curve.
    pub std: Vec<f64>,
    pub curves: usize,
}

impl GapCurve {
    /// Aggregates equal-length curves.
    pub fn from_curves(dt: f64, curves: &[Vec<f64>]) -> Result<Self> {
        let len = curves.first().map(|c| c.len()).ok_or_else(|| Error::Data("no gap curves to aggregate".into()))?;
        if curves.iter().any(|c| c.len() != len) {
            return Err(Error::Data("gap curves differ in length".into()));
        }
        let n = curves.len() as f64;
        let mut mean = vec![0.0; len];
        let mut std = vec![0.0; len];
        for t in 0..len {
            let mut s = KahanSum::default();
            curves.iter().for_each(|c| s.add(c[t]));
            let m = s.total() / n;
            let mut v = KahanSum::default();
            curves.iter().for_each(|c| v.add((c[t] - m) * (c[t] - m)));
            mean[t] = m;
            std[t] = if curves.len() > 1 { libm::sqrt(v.total() / (n - 1.0)) } else { 0.0 };
        }
        Ok(Self { dt, mean, std, curves: curves.len() })
    }

    /// Time-average of the mean curve.
    pub fn overall_mean(&self) -> f64 {
        let mut s = KahanSum::default();
        self.mean.iter().for_each(|v| s.add(*v));
        s.total() / self.mean.len().max(1) as f64
    }

    /// Time-average of the deviation curve.
    pub fn overall_std(&self) -> f64 {
        self.std.iter().sum::<f64>() / self.std.len().max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ApgOptions {
    pub segment_steps: usize,
    pub segments: usize,
    pub seed: u64,
}

impl Default for ApgOptions {
    fn default() -> Self {
        Self { segment_steps: 500, segments: 160, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApgResult {
    pub curve: GapCurve,
    pub used: usize,
    /// Draws that landed on a trajectory too short for a segment.
    pub skipped: usize,
}

fn substeps_for(dt: f64, params: &DynamicsParams) -> Result<usize> {
    let ratio = dt / params.physics_dt;
    let n = libm::round(ratio);
    if n < 1.0 || libm::fabs(ratio - n) > 1e-6 {
        return Err(Error::Config(format!(
            "trajectory dt {dt} is not a whole number of physics steps ({})",
            params.physics_dt
        )));
    }
    Ok(n as usize)
}

/// Open-loop replay of rows `start..start + len`, starting from the state
/// logged after row `start - 1`. Requires `start >= sim delay`.
pub fn replay_segment(traj: &Trajectory, start: usize, len: usize, sim: &DynamicsParams) -> Result<Vec<f64>> {
    let delay = sim.actuation_delay_steps as usize;
    if start == 0 || start < delay || start + len > traj.len() {
        return Err(Error::Usage(format!(
            "segment {start}..{} does not fit a {}-row trajectory with delay {delay}",
            start + len,
            traj.len()
        )));
    }
    let substeps = substeps_for(traj.dt, sim)?;
    let prev = &traj.rows[start - 1];
    let pending: VecDeque<MotorCommand> = traj.rows[start - delay..start].iter().map(|r| r.action).collect();
    let mut state = DynamicsState { phi: prev.true_rates, motor_speeds: prev.motors, pending };
    let mut gaps = Vec::with_capacity(len);
    for row in &traj.rows[start..start + len] {
        state.advance(row.action, sim, substeps)?;
        gaps.push((row.true_rates - state.phi).norm1());
    }
    Ok(gaps)
}

pub fn actuation_playback_gap(real: &[Trajectory], sim: &DynamicsParams, opts: &ApgOptions) -> Result<ApgResult> {
    use rand::Rng;
    sim.validate()?;
    if real.is_empty() || opts.segment_steps == 0 || opts.segments == 0 {
        return Err(Error::Usage("APG needs trajectories, a segment length and a segment count".into()));
    }
    let dt = real[0].dt;
    if real.iter().any(|t| t.dt != dt) {
        return Err(Error::Data("trajectories disagree on dt".into()));
    }
    let first = (sim.actuation_delay_steps as usize).max(1);
    let mut rng = rng_from(opts.seed, &[0x0041_5047]);
    let mut curves = Vec::new();
    let mut skipped = 0;
    for _ in 0..opts.segments {
        let t = &real[rng.random_range(0..real.len())];
        if t.len() < first + opts.segment_steps {
            skipped += 1;
            continue;
        }
        let start = rng.random_range(first..=t.len() - opts.segment_steps);
        curves.push(replay_segment(t, start, opts.segment_steps, sim)?);
    }
    if curves.is_empty() {
        return Err(Error::Data(format!(
            "every segment was skipped: no trajectory holds {} steps",
            first + opts.segment_steps
        )));
    }
    Ok(ApgResult { curve: GapCurve::from_curves(dt, &curves)?, used: curves.len(), skipped })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpgResult {
    pub curve: GapCurve,
    /// Closed-loop simulated flights, one per real trajectory.
    pub sim: Vec<Trajectory>,
}

/// Replays each trajectory's goals through `sim_cfg` under `controller`.
/// `seeds[i]` seeds the simulated sensor noise of flight `i`. Curves are
/// truncated to the shortest flight.
pub fn setpoint_playback_gap(
    real: &[Trajectory],
    controller: &mut dyn Controller,
    sim_cfg: &EnvConfig,
    seeds: &[u64],
) -> Result<SpgResult> {
    if real.is_empty() || seeds.len() != real.len() {
        return Err(Error::Usage("SPG needs one seed per real trajectory".into()));
    }
    let mut curves = Vec::new();
    let mut sims = Vec::new();
    for (t, &seed) in real.iter().zip(seeds) {
        if t.is_empty() {
            return Err(Error::Data("set-point playback of an empty trajectory".into()));
        }
        let mut cfg = sim_cfg.clone();
        cfg.episode_length = t.len() as f64 * t.dt;
        cfg.control_rate = 1.0 / t.dt;
        let mut env = QuadEnv::new(cfg)?;
        let goals = t.rows.iter().map(|r| r.setpoint).collect();
        let sim = run_episode(&mut env, controller, seed, Some(GoalSource::Replay(goals)))?;
        curves.push(
            t.rows
                .iter()
                .zip(&sim.rows)
                .map(|(a, b)| (a.true_rates - b.true_rates).norm1())
                .collect::<Vec<f64>>(),
        );
        sims.push(sim);
    }
    let len = curves.iter().map(|c| c.len()).min().unwrap_or(0);
    curves.iter_mut().for_each(|c| c.truncate(len));
    Ok(SpgResult { curve: GapCurve::from_curves(real[0].dt, &curves)?, sim: sims })
}
