//! Tracking, actuation and the per-controller summary report.

use alloc::format;
use alloc::vec::Vec;

use crate::control::Controller;
use crate::envs::{EnvConfig, QuadEnv};
use crate::error::{Error, Result};
use crate::eval::episode::run_episode;
use crate::eval::spectrum::{mean_spectrum, MIN_SPECTRUM_LEN};
use crate::eval::sum::KahanSum;
use crate::types::Trajectory;

/// Per-axis mean `|setpoint - true rate|` and their mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mae {
    pub per_axis: [f64; 3],
    pub overall: f64,
}

fn axis_sums<'a>(trajs: impl IntoIterator<Item = &'a Trajectory>) -> ([KahanSum; 3], usize) {
    let mut sums = [KahanSum::default(); 3];
    let mut n = 0;
    for t in trajs {
        for r in &t.rows {
            let e = (r.setpoint - r.true_rates).to_array();
            for a in 0..3 {
                sums[a].add(libm::fabs(e[a]));
            }
            n += 1;
        }
    }
    (sums, n)
}

pub fn tracking_mae(traj: &Trajectory) -> Result<Mae> {
    pooled_mae(core::slice::from_ref(traj))
}

/// MAE over every row of every trajectory.
pub fn pooled_mae(trajs: &[Trajectory]) -> Result<Mae> {
    let (sums, n) = axis_sums(trajs);
    if n == 0 {
        return Err(Error::Data("MAE of an empty trajectory".into()));
    }
    let per_axis = sums.map(|s| s.total() / n as f64);
    Ok(Mae { per_axis, overall: (per_axis[0] + per_axis[1] + per_axis[2]) / 3.0 })
}

/// Mean over consecutive rows of the motor-mean `|y_t - y_{t-1}|`.
pub fn mean_abs_dy(traj: &Trajectory) -> f64 {
    let mut s = KahanSum::default();
    for w in traj.rows.windows(2) {
        let d: f64 = (0..4).map(|i| libm::fabs(w[1].action.0[i] - w[0].action.0[i])).sum();
        s.add(d / 4.0);
    }
    if traj.len() < 2 {
        0.0
    } else {
        s.total() / (traj.len() - 1) as f64
    }
}

pub fn mean_action(traj: &Trajectory) -> f64 {
    let mut s = KahanSum::default();
    traj.rows.iter().for_each(|r| s.add(r.action.mean()));
    s.total() / traj.len().max(1) as f64
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalReport {
    /// deg/s, pooled over all steps of all episodes.
    pub per_axis_mae: [f64; 3],
    /// Mean of the three axis MAEs.
    pub overall_mae: f64,
    /// Mean over episodes of each episode's overall MAE.
    pub episode_mean_mae: f64,
    pub mean_abs_dy: f64,
    pub mean_y: f64,
    /// Hz; zero when no episode was long enough for a spectrum.
    pub peak_freq: f64,
    pub peak_magnitude: f64,
    pub early_terminations: usize,
    /// Mean per-step composed reward.
    pub reward_mean: f64,
    pub episodes: usize,
    pub steps: usize,
}

impl EvalReport {
    pub fn from_trajectories(trajs: &[Trajectory]) -> Result<Self> {
        if trajs.is_empty() {
            return Err(Error::Data("no trajectories to evaluate".into()));
        }
        let mae = pooled_mae(trajs)?;
        let per_episode = trajs.iter().map(tracking_mae).collect::<Result<Vec<_>>>()?;
        let k = trajs.len() as f64;
        let steps: usize = trajs.iter().map(|t| t.len()).sum();
        let mut dy = KahanSum::default();
        let mut y = KahanSum::default();
        let mut reward = KahanSum::default();
        let mut n_dy = 0usize;
        for t in trajs {
            dy.add(mean_abs_dy(t) * t.len().saturating_sub(1) as f64);
            n_dy += t.len().saturating_sub(1);
            t.rows.iter().for_each(|r| {
                y.add(r.action.mean());
                reward.add(r.reward);
            });
        }
        let long: Vec<Trajectory> = trajs.iter().filter(|t| t.len() >= MIN_SPECTRUM_LEN).cloned().collect();
        let (peak_freq, peak_magnitude) = if long.is_empty() {
            (0.0, 0.0)
        } else {
            let s = mean_spectrum(&long)?;
            (s.peak_freq, s.peak_magnitude)
        };
        let report = Self {
            per_axis_mae: mae.per_axis,
            overall_mae: mae.overall,
            episode_mean_mae: per_episode.iter().map(|m| m.overall).sum::<f64>() / k,
            mean_abs_dy: if n_dy == 0 { 0.0 } else { dy.total() / n_dy as f64 },
            mean_y: y.total() / steps as f64,
            peak_freq,
            peak_magnitude,
            early_terminations: trajs.iter().filter(|t| t.rows.last().is_some_and(|r| r.terminated)).count(),
            reward_mean: reward.total() / steps as f64,
            episodes: trajs.len(),
            steps,
        };
        if !report.is_finite() {
            return Err(Error::NonFinite(format!("evaluation produced non-finite values: {report:?}")));
        }
        Ok(report)
    }

    pub fn is_finite(&self) -> bool {
        self.per_axis_mae.iter().all(|v| v.is_finite())
            && [
                self.overall_mae,
                self.episode_mean_mae,
                self.mean_abs_dy,
                self.mean_y,
                self.peak_freq,
                self.peak_magnitude,
                self.reward_mean,
            ]
            .iter()
            .all(|v| v.is_finite())
    }
}

/// Flies `controller` for one episode per seed.
pub fn evaluate(cfg: &EnvConfig, controller: &mut dyn Controller, seeds: &[u64]) -> Result<(EvalReport, Vec<Trajectory>)> {
    let mut env = QuadEnv::new(cfg.clone())?;
    let trajs = seeds
        .iter()
        .map(|&s| run_episode(&mut env, controller, s, None))
        .collect::<Result<Vec<_>>>()?;
    Ok((EvalReport::from_trajectories(&trajs)?, trajs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{AngularRates, MotorCommand, TrajectoryRow};
    use alloc::vec;

    fn row(sp: AngularRates, phi: AngularRates) -> TrajectoryRow {
        TrajectoryRow {
            step: 0,
            setpoint: sp,
            measured: phi,
            true_rates: phi,
            action: MotorCommand::splat(0.34),
            motors: [0.34; 4],
            rewards: vec![],
            reward: 0.5,
            terminated: false,
        }
    }

    #[test]
    fn perfect_tracking_is_zero() {
        let mut t = Trajectory::new(0.001, vec![]);
        for i in 0..10 {
            let r = AngularRates::new(i as f64, -2.0, 3.0);
            t.push(row(r, r));
        }
        let m = tracking_mae(&t).unwrap();
        assert_eq!(m.per_axis, [0.0; 3]);
        assert_eq!(m.overall, 0.0);
    }

    #[test]
    fn roll_offset() {
        let mut t = Trajectory::new(0.001, vec![]);
        for i in 0..20 {
            let phi = AngularRates::new(i as f64, 1.0, 2.0);
            t.push(row(phi + AngularRates::new(5.0, 0.0, 0.0), phi));
        }
        let m = tracking_mae(&t).unwrap();
        assert_eq!(m.per_axis, [5.0, 0.0, 0.0]);
        assert!((m.overall - 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn empty_is_error() {
        assert!(tracking_mae(&Trajectory::new(0.001, vec![])).is_err());
    }

    #[test]
    fn dy_of_alternating_signal() {
        let mut t = Trajectory::new(0.001, vec![]);
        for i in 0..5 {
            let mut r = row(AngularRates::ZERO, AngularRates::ZERO);
            r.action = MotorCommand::splat(if i % 2 == 0 { 0.2 } else { 0.3 });
            t.push(r);
        }
        assert!((mean_abs_dy(&t) - 0.1).abs() < 1e-15);
        assert!((mean_action(&t) - 0.24).abs() < 1e-15);
    }
}
