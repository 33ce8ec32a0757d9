//! Episodic environments.
//!
//! [`QuadEnv`] binds the rate dynamics, a goal generator and the configured
//! reward composition. [`PendulumEnv`] is the small three-objective task used
//! for the additive-versus-multiplicative study. Both implement
//! [`Environment`], the flat-vector interface the trainer consumes; actions
//! are in `[0, 1]^act_dim` and observations are pre-scaled.
//!
//! Row semantics of a quadrotor step `k`: the controller sees the goal
//! `sp_k` and chooses `y_k`; the plant advances one control period; the
//! reward compares the new gyro reading with `sp_k`; the next observation
//! uses the goal `sp_{k+1}`.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::dynamics::{observe, DynamicsParams, DynamicsState, PendulumParams, PendulumState, pendulum_step};
use crate::error::{config_err, Error, Result};
use crate::rewards::{
    additive_compose, geometric_mean, neuroflight_reward, positive_clip, quad_components, Composition,
    RewardConfig, RewardVector, NEUROFLIGHT_LABELS, QUAD_LABELS,
};
use crate::rng::{rng_from, uniform, LabRng};
use crate::setpoint::{GoalSignal, SetpointConfig};
use crate::types::{AngularRates, MotorCommand, StateVector, TrajectoryRow};

const NOISE_STREAM: u64 = 0x4E4F_4953;
const INIT_STREAM: u64 = 0x494E_4954;

/// Static description of an environment's interface.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub obs_dim: usize,
    pub act_dim: usize,
    pub max_steps: usize,
    pub reward_labels: &'static [&'static str],
}

/// Per-step diagnostics used for training curves.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepMetrics {
    /// Mean absolute tracking error over axes (deg/s for the quadrotor,
    /// degrees from upright for the pendulum).
    pub abs_error: f64,
    /// Mean absolute action change over actuators.
    pub abs_dy: f64,
    /// Mean action over actuators.
    pub mean_action: f64,
    pub components: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    /// The episode ended on a failure condition rather than the time limit.
    pub terminated_early: bool,
    pub metrics: StepMetrics,
}

/// Reset/step interface consumed by the trainer.
pub trait Environment: Send {
    fn spec(&self) -> EnvSpec;
    fn reset(&mut self, seed: u64) -> Vec<f64>;
    fn step(&mut self, action: &[f64]) -> Result<Transition>;
}

impl<E: Environment + ?Sized> Environment for Box<E> {
    fn spec(&self) -> EnvSpec {
        (**self).spec()
    }
    fn reset(&mut self, seed: u64) -> Vec<f64> {
        (**self).reset(seed)
    }
    fn step(&mut self, action: &[f64]) -> Result<Transition> {
        (**self).step(action)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct EnvConfig {
    #[cfg_attr(feature = "serde", serde(skip))]
    pub dynamics: DynamicsParams,
    pub setpoint: SetpointConfig,
    pub reward: RewardConfig,
    pub composition: Composition,
    /// Seconds.
    pub episode_length: f64,
    /// deg/s on any single axis.
    pub early_termination_threshold: f64,
    /// Hz.
    pub control_rate: f64,
    pub idle: MotorCommand,
    /// deg/s mapped to 1.0 in the policy observation.
    pub observation_rate_scale: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            dynamics: DynamicsParams::nominal(),
            setpoint: SetpointConfig::default(),
            reward: RewardConfig::default(),
            composition: Composition::Multiplicative,
            episode_length: 10.0,
            early_termination_threshold: 600.0,
            control_rate: 1000.0,
            idle: MotorCommand::default(),
            observation_rate_scale: 400.0,
        }
    }
}

impl EnvConfig {
    /// Physics substeps per control step; errors when the control period is
    /// not a whole number of physics steps.
    pub fn substeps(&self) -> Result<usize> {
        if !(self.control_rate > 0.0 && self.control_rate.is_finite()) {
            return Err(config_err("env.control_rate must be > 0"));
        }
        let ratio = 1.0 / (self.control_rate * self.dynamics.physics_dt);
        let n = libm::round(ratio);
        if n < 1.0 || libm::fabs(ratio - n) > 1e-6 {
            return Err(config_err(format!(
                "env.control_rate {} Hz does not divide the physics rate {} Hz",
                self.control_rate,
                1.0 / self.dynamics.physics_dt
            )));
        }
        Ok(n as usize)
    }

    pub fn control_dt(&self) -> f64 {
        1.0 / self.control_rate
    }

    pub fn max_steps(&self) -> usize {
        libm::round(self.episode_length * self.control_rate) as usize
    }

    pub fn reward_labels(&self) -> &'static [&'static str] {
        match self.composition {
            Composition::Neuroflight => NEUROFLIGHT_LABELS,
            _ => QUAD_LABELS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.dynamics.validate()?;
        self.setpoint.validate()?;
        self.reward.validate()?;
        self.substeps()?;
        if !(self.early_termination_threshold > 0.0) {
            return Err(config_err("env.early_termination_threshold must be > 0"));
        }
        if !(self.episode_length > 0.0) || self.max_steps() == 0 {
            return Err(config_err("env.episode_length must cover at least one control step"));
        }
        if !(self.observation_rate_scale > 0.0) {
            return Err(config_err("env.observation_rate_scale must be > 0"));
        }
        if self.idle.clamped().1 {
            return Err(config_err("env.idle must lie in [0, 1]^4"));
        }
        if self.composition == Composition::Additive && self.reward.weights.len() != QUAD_LABELS.len() {
            return Err(config_err("reward.weights needs one weight per component (3)"));
        }
        Ok(())
    }
}

/// Where the goal comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum GoalSource {
    Generated(GoalSignal),
    /// Replays a logged goal sequence; holds the last value past the end.
    Replay(Vec<AngularRates>),
}

impl GoalSource {
    fn at(&self, step: usize, dt: f64) -> AngularRates {
        match self {
            GoalSource::Generated(g) => g.at(step as f64 * dt),
            GoalSource::Replay(v) => v.get(step).or(v.last()).copied().unwrap_or(AngularRates::ZERO),
        }
    }
}

/// Extra per-step information.
#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    pub setpoint: AngularRates,
    pub true_rates: AngularRates,
    pub observed: AngularRates,
    pub raw_action: MotorCommand,
    pub action: MotorCommand,
    pub clamped: bool,
    pub motors: [f64; 4],
    pub terminated_early: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadStep {
    pub state: StateVector,
    pub reward: f64,
    pub components: RewardVector,
    pub done: bool,
    pub info: StepInfo,
}

impl QuadStep {
    pub fn row(&self) -> TrajectoryRow {
        TrajectoryRow {
            step: 0,
            setpoint: self.info.setpoint,
            measured: self.info.observed,
            true_rates: self.info.true_rates,
            action: self.info.action,
            motors: self.info.motors,
            rewards: self.components.components.clone(),
            reward: self.reward,
            terminated: self.info.terminated_early,
        }
    }
}

/// Quadrotor attitude-rate environment.
#[derive(Debug, Clone)]
pub struct QuadEnv {
    cfg: EnvConfig,
    substeps: usize,
    max_steps: usize,
    goal: GoalSource,
    plant: DynamicsState,
    noise: LabRng,
    step_index: usize,
    observed: AngularRates,
    y_prev: MotorCommand,
    prev_error: AngularRates,
    last_state: StateVector,
    started: bool,
    done: bool,
    clamp_count: u64,
}

impl QuadEnv {
    pub fn new(cfg: EnvConfig) -> Result<Self> {
        cfg.validate()?;
        let substeps = cfg.substeps()?;
        let max_steps = cfg.max_steps();
        let plant = DynamicsState::at_rest(&cfg.dynamics, cfg.idle);
        let goal = GoalSource::Generated(GoalSignal::new(&cfg.setpoint, 0));
        let idle = cfg.idle;
        Ok(Self {
            cfg,
            substeps,
            max_steps,
            goal,
            plant,
            noise: rng_from(0, &[NOISE_STREAM]),
            step_index: 0,
            observed: AngularRates::ZERO,
            y_prev: idle,
            prev_error: AngularRates::ZERO,
            last_state: StateVector::default(),
            started: false,
            done: false,
            clamp_count: 0,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn reset(&mut self, seed: u64) -> StateVector {
        let goal = GoalSource::Generated(GoalSignal::new(&self.cfg.setpoint, seed));
        self.reset_with_goal(seed, goal)
    }

    /// Resets with an explicit goal source (used for set-point playback).
    pub fn reset_with_goal(&mut self, seed: u64, goal: GoalSource) -> StateVector {
        self.goal = goal;
        self.plant = DynamicsState::at_rest(&self.cfg.dynamics, self.cfg.idle);
        self.noise = rng_from(seed, &[NOISE_STREAM]);
        self.step_index = 0;
        self.observed = AngularRates::ZERO;
        self.y_prev = self.cfg.idle;
        self.done = false;
        self.started = true;
        let sp = self.goal.at(0, self.cfg.control_dt());
        self.prev_error = sp;
        self.last_state = StateVector { e: sp, phi: AngularRates::ZERO, dphi: AngularRates::ZERO, y_prev: self.cfg.idle };
        self.last_state
    }

    pub fn state(&self) -> &StateVector {
        &self.last_state
    }

    pub fn plant(&self) -> &DynamicsState {
        &self.plant
    }

    pub fn step_index(&self) -> usize {
        self.step_index
    }

    pub fn clamp_count(&self) -> u64 {
        self.clamp_count
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Policy input: rates divided by the observation scale, motors as is.
    pub fn scaled(&self, s: &StateVector) -> [f64; StateVector::LEN] {
        let mut v = s.flatten();
        let k = 1.0 / self.cfg.observation_rate_scale;
        for x in v[..9].iter_mut() {
            *x *= k;
        }
        v
    }

    pub fn step_command(&mut self, raw: MotorCommand) -> Result<QuadStep> {
        if !self.started {
            return Err(Error::Usage("step called before reset".into()));
        }
        if self.done {
            return Err(Error::Usage("step called after the episode finished; reset first".into()));
        }
        let (action, clamped) = raw.clamped();
        if clamped {
            self.clamp_count += 1;
            log::warn!("action {:?} clamped to [0, 1] at step {}", raw.0, self.step_index);
        }
        let dt = self.cfg.control_dt();
        let setpoint = self.goal.at(self.step_index, dt);
        self.plant.advance(action, &self.cfg.dynamics, self.substeps)?;
        let true_rates = self.plant.phi;
        let observed = observe(true_rates, &self.cfg.dynamics, &mut self.noise);
        if !observed.is_finite() {
            return Err(Error::NonFinite(format!("observation at step {} is not finite", self.step_index)));
        }

        let error = setpoint - observed;
        let (reward, components) = match self.cfg.composition {
            Composition::Neuroflight => neuroflight_reward(
                observed,
                setpoint,
                self.prev_error,
                &raw,
                &self.y_prev,
                self.cfg.reward.neuroflight_band,
            ),
            Composition::Multiplicative => {
                let r = quad_components(observed, setpoint, &action, &self.y_prev, &self.cfg.reward);
                (geometric_mean(&r.components, self.cfg.reward.epsilon), r)
            }
            Composition::Additive => {
                let r = quad_components(observed, setpoint, &action, &self.y_prev, &self.cfg.reward);
                (additive_compose(&r.components, &self.cfg.reward.weights)?, r)
            }
        };
        if !reward.is_finite() {
            return Err(Error::NonFinite(format!("reward at step {} is not finite", self.step_index)));
        }

        self.step_index += 1;
        let next_setpoint = self.goal.at(self.step_index, dt);
        let state = StateVector {
            e: next_setpoint - observed,
            phi: observed,
            dphi: observed - self.observed,
            y_prev: action,
        };
        let terminated_early = state.e.max_abs() > self.cfg.early_termination_threshold;
        self.done = terminated_early || self.step_index >= self.max_steps;
        self.observed = observed;
        self.y_prev = action;
        self.prev_error = error;
        self.last_state = state;
        Ok(QuadStep {
            state,
            reward,
            components,
            done: self.done,
            info: StepInfo {
                setpoint,
                true_rates,
                observed,
                raw_action: raw,
                action,
                clamped,
                motors: self.plant.motor_speeds,
                terminated_early,
            },
        })
    }
}

impl Environment for QuadEnv {
    fn spec(&self) -> EnvSpec {
        EnvSpec {
            obs_dim: StateVector::LEN,
            act_dim: 4,
            max_steps: self.max_steps,
            reward_labels: self.cfg.reward_labels(),
        }
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let s = QuadEnv::reset(self, seed);
        self.scaled(&s).to_vec()
    }

    fn step(&mut self, action: &[f64]) -> Result<Transition> {
        if action.len() != 4 {
            return Err(Error::Usage(format!("quadrotor action needs 4 values, got {}", action.len())));
        }
        let y_prev = self.y_prev;
        let out = self.step_command(MotorCommand([action[0], action[1], action[2], action[3]]))?;
        let y = out.info.action;
        let abs_dy = (0..4).map(|i| libm::fabs(y.0[i] - y_prev.0[i])).sum::<f64>() / 4.0;
        let abs_error = (out.info.setpoint - out.info.observed).norm1() / 3.0;
        Ok(Transition {
            obs: self.scaled(&out.state).to_vec(),
            reward: out.reward,
            done: out.done,
            terminated_early: out.info.terminated_early,
            metrics: StepMetrics { abs_error, abs_dy, mean_action: y.mean(), components: out.components.components },
        })
    }
}

pub const PENDULUM_LABELS: &[&str] = &["stand", "velocity", "torque"];

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct PendulumEnvConfig {
    pub params: PendulumParams,
    pub horizon: usize,
    pub composition: Composition,
    pub epsilon: f64,
    pub weights: Vec<f64>,
}

impl Default for PendulumEnvConfig {
    fn default() -> Self {
        Self {
            params: PendulumParams::default(),
            horizon: 200,
            composition: Composition::Multiplicative,
            epsilon: 1e-6,
            weights: vec![1.0; 3],
        }
    }
}

impl PendulumEnvConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.horizon == 0 {
            return Err(config_err("pendulum.horizon must be >= 1"));
        }
        if self.composition == Composition::Neuroflight {
            return Err(config_err("pendulum composition must be additive or multiplicative"));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 0.01) {
            return Err(config_err("pendulum.epsilon must lie in (0, 0.01]"));
        }
        if self.weights.len() != 3 || self.weights.iter().any(|w| !w.is_finite()) {
            return Err(config_err("pendulum.weights needs 3 finite weights"));
        }
        Ok(())
    }
}

/// `[stand, velocity, torque]` for a post-step state and applied torque.
pub fn pendulum_components(state: &PendulumState, torque: f64, p: &PendulumParams) -> [f64; 3] {
    [
        positive_clip(state.angle_from_upright() / core::f64::consts::PI),
        positive_clip(libm::fabs(state.velocity) / p.max_speed),
        positive_clip(libm::fabs(torque) / p.max_torque),
    ]
}

/// Composes pendulum components under either rule.
pub fn pendulum_reward(components: &[f64; 3], composition: Composition, epsilon: f64, weights: &[f64]) -> Result<f64> {
    match composition {
        Composition::Multiplicative => Ok(geometric_mean(components, epsilon)),
        Composition::Additive => additive_compose(components, weights),
        Composition::Neuroflight => Err(config_err("pendulum has no Neuroflight reward")),
    }
}

#[derive(Debug, Clone)]
pub struct PendulumEnv {
    cfg: PendulumEnvConfig,
    state: PendulumState,
    step_index: usize,
    y_prev: f64,
    started: bool,
    done: bool,
}

impl PendulumEnv {
    pub fn new(cfg: PendulumEnvConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg, state: PendulumState::default(), step_index: 0, y_prev: 0.5, started: false, done: false })
    }

    pub fn config(&self) -> &PendulumEnvConfig {
        &self.cfg
    }

    pub fn state(&self) -> PendulumState {
        self.state
    }

    /// Resets to a given state instead of a random one.
    pub fn reset_to(&mut self, state: PendulumState) -> Vec<f64> {
        self.state = state;
        self.step_index = 0;
        self.y_prev = 0.5;
        self.done = false;
        self.started = true;
        self.observation()
    }

    fn observation(&self) -> Vec<f64> {
        vec![
            libm::cos(self.state.angle),
            libm::sin(self.state.angle),
            self.state.velocity / self.cfg.params.max_speed,
        ]
    }

    /// Steps and also returns the raw components for logging.
    pub fn step_detailed(&mut self, y: f64) -> Result<(Transition, [f64; 3])> {
        if !self.started || self.done {
            return Err(Error::Usage(String::from("pendulum stepped without an active episode")));
        }
        let y = if y.is_nan() { 0.5 } else { y.clamp(0.0, 1.0) };
        let p = &self.cfg.params;
        let torque = p.max_torque * (2.0 * y - 1.0);
        let mut next = pendulum_step(self.state, torque, p);
        next.velocity = next.velocity.clamp(-p.max_speed, p.max_speed);
        self.state = next;
        let comps = pendulum_components(&next, torque, p);
        let reward = pendulum_reward(&comps, self.cfg.composition, self.cfg.epsilon, &self.cfg.weights)?;
        self.step_index += 1;
        self.done = self.step_index >= self.cfg.horizon;
        let abs_dy = libm::fabs(y - self.y_prev);
        self.y_prev = y;
        let t = Transition {
            obs: self.observation(),
            reward,
            done: self.done,
            terminated_early: false,
            metrics: StepMetrics {
                abs_error: next.angle_from_upright().to_degrees(),
                abs_dy,
                mean_action: y,
                components: comps.to_vec(),
            },
        };
        Ok((t, comps))
    }
}

impl Environment for PendulumEnv {
    fn spec(&self) -> EnvSpec {
        EnvSpec { obs_dim: 3, act_dim: 1, max_steps: self.cfg.horizon, reward_labels: PENDULUM_LABELS }
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = rng_from(seed, &[INIT_STREAM]);
        let angle = (2.0 * uniform(&mut rng) - 1.0) * core::f64::consts::PI;
        let velocity = 2.0 * uniform(&mut rng) - 1.0;
        self.reset_to(PendulumState { angle, velocity })
    }

    fn step(&mut self, action: &[f64]) -> Result<Transition> {
        if action.len() != 1 {
            return Err(Error::Usage(format!("pendulum action needs 1 value, got {}", action.len())));
        }
        Ok(self.step_detailed(action[0])?.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn calm_cfg() -> EnvConfig {
        EnvConfig { episode_length: 0.5, ..EnvConfig::default() }
    }

    #[test]
    fn reset_is_deterministic() {
        let mut a = QuadEnv::new(calm_cfg()).unwrap();
        let mut b = QuadEnv::new(calm_cfg()).unwrap();
        assert_eq!(a.reset(5), b.reset(5));
        for _ in 0..100 {
            let sa = a.step_command(MotorCommand::splat(0.34)).unwrap();
            let sb = b.step_command(MotorCommand::splat(0.34)).unwrap();
            assert_eq!(sa, sb);
        }
    }

    #[test]
    fn reset_observation() {
        let mut env = QuadEnv::new(calm_cfg()).unwrap();
        let s = env.reset(9);
        let goal = GoalSignal::new(&env.config().setpoint, 9).at(0.0);
        assert_eq!(s.e, goal);
        assert_eq!(s.phi, AngularRates::ZERO);
        assert_eq!(s.dphi, AngularRates::ZERO);
        assert_eq!(s.y_prev, MotorCommand::default());
    }

    #[test]
    fn step_after_done_is_usage_error() {
        let mut env = QuadEnv::new(EnvConfig { episode_length: 0.003, ..EnvConfig::default() }).unwrap();
        env.reset(1);
        let mut n = 0;
        loop {
            n += 1;
            if env.step_command(MotorCommand::splat(0.34)).unwrap().done {
                break;
            }
        }
        assert_eq!(n, 3);
        assert!(matches!(env.step_command(MotorCommand::splat(0.34)), Err(Error::Usage(_))));
    }

    #[test]
    fn clamping_is_counted() {
        let mut env = QuadEnv::new(calm_cfg()).unwrap();
        env.reset(1);
        let s = env.step_command(MotorCommand([1.5, 0.2, 0.2, -0.1])).unwrap();
        assert!(s.info.clamped);
        assert_eq!(s.info.action.0, [1.0, 0.2, 0.2, 0.0]);
        assert_eq!(env.clamp_count(), 1);
    }

    #[test]
    fn mismatched_control_rate_rejected() {
        let cfg = EnvConfig { control_rate: 730.0, ..EnvConfig::default() };
        assert!(matches!(QuadEnv::new(cfg), Err(Error::Config(_))));
        let cfg = EnvConfig { control_rate: 500.0, ..EnvConfig::default() };
        assert_eq!(cfg.substeps().unwrap(), 2);
    }

    #[test]
    fn pendulum_reward_contrast() {
        let p = PendulumParams::default();
        let up = PendulumState { angle: core::f64::consts::PI, velocity: 0.0 };
        assert_eq!(pendulum_components(&up, 0.0, &p), [1.0, 1.0, 1.0]);
        let down = PendulumState::default();
        let c = pendulum_components(&down, 0.0, &p);
        assert_eq!(c, [0.0, 1.0, 1.0]);
        let mult = pendulum_reward(&c, Composition::Multiplicative, 1e-6, &[1.0; 3]).unwrap();
        assert!((mult - 0.01).abs() < 1e-12);
        let add = pendulum_reward(&c, Composition::Additive, 1e-6, &[1.0; 3]).unwrap();
        assert_eq!(add, 2.0);
    }

    #[test]
    fn pendulum_fixed_horizon() {
        let mut env = PendulumEnv::new(PendulumEnvConfig { horizon: 10, ..Default::default() }).unwrap();
        env.reset(3);
        for i in 0..10 {
            let t = env.step(&[0.5]).unwrap();
            assert_eq!(t.done, i == 9);
            assert!(!t.terminated_early);
        }
        assert!(env.step(&[0.5]).is_err());
    }
}
