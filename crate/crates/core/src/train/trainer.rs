//! The training driver: collect, estimate advantages, update, repeat.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::envs::Environment;
use crate::error::{config_err, Result};
use crate::rng::{rng_from, LabRng};
use crate::train::adam::Adam;
use crate::train::ppo::{ppo_update, ActorCritic, LossCoefs, PpoConfig, UpdateDiagnostics};
use crate::train::rollout::{EpisodeStats, Rollouts};

const INIT_STREAM: u64 = 0x494E_4954;
const SHUFFLE_STREAM: u64 = 0x5348_5546;
const ROLLOUT_STREAM: u64 = 0x524F_4C4C;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum LrSchedule {
    #[default]
    Constant,
    /// Decays linearly to zero at `total_timesteps`.
    Linear,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct TrainConfig {
    pub total_timesteps: u64,
    pub checkpoint_interval: u64,
    pub n_envs: usize,
    pub horizon: usize,
    pub minibatch_size: usize,
    pub epochs: usize,
    pub clip_ratio: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub learning_rate: f64,
    pub lr_schedule: LrSchedule,
    pub value_coef: f64,
    pub entropy_coef: f64,
    /// Applied to the actor and critic gradients separately.
    pub max_grad_norm: f64,
    pub init_log_std: f64,
    pub hidden: Vec<usize>,
    pub normalize_advantages: bool,
    pub seeds: Vec<u64>,
    /// Completed episodes averaged for the curve's return and length.
    pub curve_window: usize,
    /// Stop once the windowed mean return reaches this value.
    pub reward_threshold: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            total_timesteps: 300_000,
            checkpoint_interval: 50_000,
            n_envs: 8,
            horizon: 512,
            minibatch_size: 256,
            epochs: 10,
            clip_ratio: 0.2,
            gamma: 0.99,
            lambda: 0.95,
            learning_rate: 3e-4,
            lr_schedule: LrSchedule::Constant,
            value_coef: 0.5,
            entropy_coef: 0.0,
            max_grad_norm: 0.5,
            init_log_std: -0.5,
            hidden: vec![64, 64],
            normalize_advantages: true,
            seeds: vec![0, 1, 2],
            curve_window: 10,
            reward_threshold: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.clip_ratio > 0.0 && self.clip_ratio < 1.0) {
            return Err(config_err(format!("clip_ratio must lie in (0, 1), got {}", self.clip_ratio)));
        }
        for (name, v) in [("gamma", self.gamma), ("lambda", self.lambda)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(config_err(format!("{name} must lie in (0, 1], got {v}")));
            }
        }
        if self.total_timesteps == 0 {
            return Err(config_err("total_timesteps must be positive"));
        }
        if self.checkpoint_interval == 0 || self.checkpoint_interval > self.total_timesteps {
            return Err(config_err(format!(
                "checkpoint_interval must lie in [1, total_timesteps = {}], got {}",
                self.total_timesteps, self.checkpoint_interval
            )));
        }
        if self.n_envs == 0 || self.horizon == 0 || self.minibatch_size == 0 || self.epochs == 0 {
            return Err(config_err("n_envs, horizon, minibatch_size and epochs must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(config_err("learning_rate must be positive"));
        }
        if self.value_coef < 0.0 || self.entropy_coef < 0.0 || !(self.max_grad_norm > 0.0) {
            return Err(config_err("loss coefficients must be non-negative and max_grad_norm positive"));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(config_err("hidden layer sizes must be positive"));
        }
        if self.curve_window == 0 {
            return Err(config_err("curve_window must be positive"));
        }
        Ok(())
    }

    pub fn ppo(&self) -> PpoConfig {
        PpoConfig {
            coefs: LossCoefs {
                clip_ratio: self.clip_ratio,
                value_coef: self.value_coef,
                entropy_coef: self.entropy_coef,
            },
            epochs: self.epochs,
            minibatch_size: self.minibatch_size,
            max_grad_norm: self.max_grad_norm,
        }
    }

    /// Checkpoint steps in increasing order, all at most `total_timesteps`.
    pub fn checkpoint_steps(&self) -> Vec<u64> {
        (1..=self.total_timesteps / self.checkpoint_interval).map(|k| k * self.checkpoint_interval).collect()
    }
}

/// One line of the training curve.
///
/// `mean_return` and `episode_length` average the last `curve_window`
/// completed episodes and are NaN before the first one ends. The remaining
/// per-step quantities cover every transition of the latest update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveRecord {
    pub timestep: u64,
    pub mean_return: f64,
    pub episode_length: f64,
    pub mean_step_reward: f64,
    pub mae: f64,
    pub mean_abs_dy: f64,
    pub mean_y: f64,
    pub episodes: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpdateReport {
    pub curve: CurveRecord,
    pub diagnostics: UpdateDiagnostics,
    /// Checkpoint steps reached by this update.
    pub checkpoints: Vec<u64>,
    pub finished_episodes: Vec<EpisodeStats>,
}

pub struct Trainer<E> {
    cfg: TrainConfig,
    agent: ActorCritic,
    adam: Adam,
    rollouts: Rollouts<E>,
    rng: LabRng,
    timesteps: u64,
    episodes: u64,
    pending_checkpoints: VecDeque<u64>,
    recent: VecDeque<(f64, usize)>,
    threshold_hit: bool,
}

impl<E: Environment> Trainer<E> {
    /// A fresh randomly initialized agent; `envs.len()` must equal
    /// `cfg.n_envs`.
    pub fn new(cfg: TrainConfig, envs: Vec<E>, seed: u64) -> Result<Self> {
        cfg.validate()?;
        if envs.len() != cfg.n_envs {
            return Err(config_err(format!("expected {} environments, got {}", cfg.n_envs, envs.len())));
        }
        let spec = envs[0].spec();
        let agent = ActorCritic::new(
            spec.obs_dim,
            spec.act_dim,
            &cfg.hidden,
            cfg.init_log_std,
            &mut rng_from(seed, &[INIT_STREAM]),
        );
        let rollouts = Rollouts::new(envs, crate::rng::derive_seed(seed, &[ROLLOUT_STREAM]))?;
        Ok(Self {
            adam: Adam::new(&agent.segment_lens()),
            pending_checkpoints: cfg.checkpoint_steps().into(),
            rng: rng_from(seed, &[SHUFFLE_STREAM]),
            cfg,
            agent,
            rollouts,
            timesteps: 0,
            episodes: 0,
            recent: VecDeque::new(),
            threshold_hit: false,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn agent(&self) -> &ActorCritic {
        &self.agent
    }

    pub fn timesteps(&self) -> u64 {
        self.timesteps
    }

    pub fn stopped_by_threshold(&self) -> bool {
        self.threshold_hit
    }

    pub fn is_finished(&self) -> bool {
        self.timesteps >= self.cfg.total_timesteps || self.threshold_hit
    }

    fn learning_rate(&self) -> f64 {
        match self.cfg.lr_schedule {
            LrSchedule::Constant => self.cfg.learning_rate,
            LrSchedule::Linear => {
                let frac = self.timesteps as f64 / self.cfg.total_timesteps as f64;
                self.cfg.learning_rate * (1.0 - frac).max(0.0)
            }
        }
    }

    /// One collection and PPO update. The last collection is shortened so
    /// that at most `n_envs - 1` steps overshoot the budget.
    pub fn update(&mut self) -> Result<UpdateReport> {
        let n_envs = self.cfg.n_envs as u64;
        let remaining = self.cfg.total_timesteps.saturating_sub(self.timesteps);
        let horizon = (self.cfg.horizon as u64).min(remaining.div_ceil(n_envs)).max(1) as usize;
        let mut collected = self.rollouts.collect(&self.agent, horizon, false)?;
        collected
            .batch
            .compute_advantages(self.cfg.gamma, self.cfg.lambda, self.cfg.normalize_advantages);
        let lr = self.learning_rate();
        let diagnostics = ppo_update(&mut self.agent, &collected.batch, &self.cfg.ppo(), &mut self.adam, lr, &mut self.rng)?;
        self.timesteps += collected.batch.len() as u64;

        for ep in &collected.episodes {
            self.recent.push_back((ep.ret, ep.length));
            if self.recent.len() > self.cfg.curve_window {
                self.recent.pop_front();
            }
        }
        self.episodes += collected.episodes.len() as u64;
        let (mean_return, episode_length) = if self.recent.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            let k = self.recent.len() as f64;
            (
                self.recent.iter().map(|r| r.0).sum::<f64>() / k,
                self.recent.iter().map(|r| r.1 as f64).sum::<f64>() / k,
            )
        };
        if let Some(th) = self.cfg.reward_threshold {
            if mean_return >= th {
                self.threshold_hit = true;
            }
        }
        let mut checkpoints = Vec::new();
        while self.pending_checkpoints.front().is_some_and(|&c| c <= self.timesteps) {
            checkpoints.push(self.pending_checkpoints.pop_front().unwrap());
        }
        let t = &collected.totals;
        Ok(UpdateReport {
            curve: CurveRecord {
                timestep: self.timesteps,
                mean_return,
                episode_length,
                mean_step_reward: t.mean_reward(),
                mae: t.mean_abs_error(),
                mean_abs_dy: t.mean_abs_dy(),
                mean_y: t.mean_action(),
                episodes: self.episodes,
            },
            diagnostics,
            checkpoints,
            finished_episodes: collected.episodes,
        })
    }

    /// Trains to the budget (or threshold), handing each report and the
    /// updated agent to `on_update`.
    pub fn run<F>(&mut self, mut on_update: F) -> Result<()>
    where
        F: FnMut(&ActorCritic, &UpdateReport) -> Result<()>,
    {
        while !self.is_finished() {
            let report = self.update()?;
            on_update(&self.agent, &report)?;
        }
        Ok(())
    }

    pub fn into_agent(self) -> ActorCritic {
        self.agent
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{PendulumEnv, PendulumEnvConfig};

    fn tiny() -> TrainConfig {
        TrainConfig {
            total_timesteps: 2_000,
            checkpoint_interval: 1_000,
            n_envs: 2,
            horizon: 100,
            minibatch_size: 50,
            epochs: 2,
            hidden: vec![16, 16],
            ..TrainConfig::default()
        }
    }

    fn envs(n: usize) -> Vec<PendulumEnv> {
        (0..n).map(|_| PendulumEnv::new(PendulumEnvConfig::default()).unwrap()).collect()
    }

    #[test]
    fn tiny_run_hits_each_checkpoint_once() {
        let mut tr = Trainer::new(tiny(), envs(2), 3).unwrap();
        let mut ckpts = Vec::new();
        tr.run(|_, r| {
            ckpts.extend_from_slice(&r.checkpoints);
            Ok(())
        })
        .unwrap();
        assert_eq!(ckpts, vec![1_000, 2_000]);
        assert_eq!(tr.timesteps(), 2_000);
    }

    #[test]
    fn budget_is_not_overshot_by_more_than_one_step_per_env() {
        let cfg = TrainConfig { total_timesteps: 1_001, checkpoint_interval: 1_001, ..tiny() };
        let mut tr = Trainer::new(cfg, envs(2), 3).unwrap();
        tr.run(|_, _| Ok(())).unwrap();
        assert!((1_001..1_003).contains(&tr.timesteps()));
    }

    #[test]
    fn invalid_configs_rejected() {
        for cfg in [
            TrainConfig { clip_ratio: 1.0, ..tiny() },
            TrainConfig { gamma: 0.0, ..tiny() },
            TrainConfig { lambda: 1.5, ..tiny() },
            TrainConfig { checkpoint_interval: 5_000, ..tiny() },
        ] {
            assert!(cfg.validate().is_err());
        }
    }

    #[test]
    fn same_seed_same_curve() {
        let curve = |seed| {
            let mut tr = Trainer::new(tiny(), envs(2), seed).unwrap();
            let mut c = Vec::new();
            tr.run(|_, r| {
                c.push(r.curve);
                Ok(())
            })
            .unwrap();
            format!("{c:?}")
        };
        assert_eq!(curve(4), curve(4));
        assert_ne!(curve(4), curve(5));
    }
}
