//! Experiment configuration files.
//!
//! A config is a TOML document with the sections below. Every section and
//! every field is optional and falls back to the defaults; unknown keys are
//! rejected.
//!
//! ```toml
//! name = "quad-multiplicative"
//! task = "quad"                # quad | pendulum
//!
//! [dynamics]
//! profile = "nominal"          # training profile: nominal | perturbed
//! [dynamics.nominal]           # inertia, motor_time_constant, ...
//! [dynamics.perturbation]      # scales applied to nominal to get "perturbed"
//!
//! [setpoint]                   # training goal generator
//! [reward]
//! [env]                        # composition, episode_length, ...
//! [train]                      # PPO settings and seed list
//! [eval]                       # validation flights
//! [gap]                        # reality-gap study
//! [pendulum]                   # pendulum environment (task = "pendulum")
//! [tune]                       # Ziegler-Nichols search
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use ratelab_core::control::{PidGains, UltimatePoint, ZnOptions};
use ratelab_core::dynamics::{perturbed_profile, DynamicsParams, Perturbation};
use ratelab_core::envs::{EnvConfig, PendulumEnvConfig};
use ratelab_core::rewards::{Composition, RewardConfig};
use ratelab_core::setpoint::{SetpointConfig, SignalKind};
use ratelab_core::train::TrainConfig;
use ratelab_core::MotorCommand;

use crate::error::{LabError, LabResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    #[default]
    Quad,
    Pendulum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    #[default]
    Nominal,
    Perturbed,
}

impl Profile {
    pub fn name(self) -> &'static str {
        match self {
            Self::Nominal => "nominal",
            Self::Perturbed => "perturbed",
        }
    }
}

impl std::str::FromStr for Profile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "nominal" => Ok(Self::Nominal),
            "perturbed" => Ok(Self::Perturbed),
            _ => Err(format!("unknown profile `{s}` (expected nominal or perturbed)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicsSection {
    pub profile: Profile,
    pub nominal: DynamicsParams,
    pub perturbation: Perturbation,
}

/// Scalar environment settings; the goal generator and reward live in their
/// own sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvSection {
    pub composition: Composition,
    pub episode_length: f64,
    pub early_termination_threshold: f64,
    pub control_rate: f64,
    pub idle: MotorCommand,
    pub observation_rate_scale: f64,
}

impl Default for EnvSection {
    fn default() -> Self {
        let e = EnvConfig::default();
        Self {
            composition: e.composition,
            episode_length: e.episode_length,
            early_termination_threshold: e.early_termination_threshold,
            control_rate: e.control_rate,
            idle: e.idle,
            observation_rate_scale: e.observation_rate_scale,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub episodes: usize,
    pub seed_base: u64,
    pub signal: SignalKind,
    pub max_rate: f64,
    /// Seconds.
    pub episode_length: f64,
    pub profile: Profile,
}

impl Default for EvalSection {
    fn default() -> Self {
        let v = SetpointConfig::validation();
        Self {
            episodes: 10,
            seed_base: 1000,
            signal: SignalKind::Perlin,
            max_rate: v.max_rate,
            episode_length: v.episode_length,
            profile: Profile::Nominal,
        }
    }
}

impl EvalSection {
    pub fn seeds(&self) -> Vec<u64> {
        (0..self.episodes as u64).map(|i| self.seed_base + i).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GapSection {
    /// Profile standing in for real flight.
    pub real: Profile,
    pub sim: Profile,
    pub segments: usize,
    /// Seconds.
    pub segment_length: f64,
    /// Logged "real" flights the segments are drawn from.
    pub flights: usize,
    pub flight_seed_base: u64,
    /// Segment sampling seed.
    pub seed: u64,
}

impl Default for GapSection {
    fn default() -> Self {
        Self {
            real: Profile::Perturbed,
            sim: Profile::Nominal,
            segments: 160,
            segment_length: 0.5,
            flights: 10,
            flight_seed_base: 2000,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub task: Task,
    /// Root for run directories; the command line and `RATELAB_OUT` take
    /// precedence.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub dynamics: DynamicsSection,
    pub setpoint: SetpointConfig,
    pub reward: RewardConfig,
    pub env: EnvSection,
    pub train: TrainConfig,
    pub eval: EvalSection,
    pub gap: GapSection,
    pub pendulum: PendulumEnvConfig,
    pub tune: ZnOptions,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            task: Task::Quad,
            output_dir: None,
            dynamics: DynamicsSection::default(),
            setpoint: SetpointConfig::default(),
            reward: RewardConfig::default(),
            env: EnvSection::default(),
            train: TrainConfig::default(),
            eval: EvalSection::default(),
            gap: GapSection::default(),
            pendulum: PendulumEnvConfig::default(),
            tune: ZnOptions::default(),
        }
    }
}

pub const PRESETS: &[&str] = &["quad-multiplicative", "quad-neuroflight-reward", "pendulum-study"];

pub fn preset(name: &str) -> Option<ExperimentConfig> {
    let mut c = ExperimentConfig { name: name.into(), ..ExperimentConfig::default() };
    match name {
        "quad-multiplicative" => {}
        "quad-neuroflight-reward" => c.env.composition = Composition::Neuroflight,
        "pendulum-study" => {
            c.task = Task::Pendulum;
            c.train.total_timesteps = 100_000;
            c.train.gamma = 0.9;
            c.train.learning_rate = 1e-3;
            c.train.seeds = (0..5).collect();
            c.eval.episodes = 20;
            c.eval.seed_base = 10_000;
        }
        _ => return None,
    }
    Some(c)
}

fn config_error(e: ratelab_core::Error) -> LabError {
    LabError::Config(e.to_string())
}

impl ExperimentConfig {
    pub fn profile(&self, p: Profile) -> LabResult<DynamicsParams> {
        match p {
            Profile::Nominal => Ok(self.dynamics.nominal.clone()),
            Profile::Perturbed => perturbed_profile(&self.dynamics.nominal, &self.dynamics.perturbation).map_err(config_error),
        }
    }

    fn env_with(&self, dynamics: DynamicsParams, setpoint: SetpointConfig, episode_length: f64) -> EnvConfig {
        EnvConfig {
            dynamics,
            setpoint: SetpointConfig { episode_length, ..setpoint },
            reward: self.reward.clone(),
            composition: self.env.composition,
            episode_length,
            early_termination_threshold: self.env.early_termination_threshold,
            control_rate: self.env.control_rate,
            idle: self.env.idle,
            observation_rate_scale: self.env.observation_rate_scale,
        }
    }

    /// Training environment on the configured training profile.
    pub fn train_env(&self) -> LabResult<EnvConfig> {
        Ok(self.env_with(self.profile(self.dynamics.profile)?, self.setpoint.clone(), self.env.episode_length))
    }

    /// Validation flights: the gentler goal generator on `profile`.
    pub fn eval_env(&self, profile: Profile) -> LabResult<EnvConfig> {
        let sp = SetpointConfig {
            max_rate: self.eval.max_rate,
            kind: self.eval.signal,
            step_mixture: 0.0,
            ..self.setpoint.clone()
        };
        Ok(self.env_with(self.profile(profile)?, sp, self.eval.episode_length))
    }

    /// Pendulum environment trained under `self.pendulum.composition`.
    pub fn pendulum_env(&self) -> PendulumEnvConfig {
        self.pendulum.clone()
    }

    pub fn validate(&self) -> LabResult<()> {
        self.train.validate().map_err(config_error)?;
        if self.train.seeds.is_empty() {
            return Err(LabError::Config("train.seeds must list at least one seed".into()));
        }
        match self.task {
            Task::Quad => {
                for p in [Profile::Nominal, Profile::Perturbed] {
                    self.eval_env(p)?.validate().map_err(config_error)?;
                }
                self.train_env()?.validate().map_err(config_error)?;
                if self.train.hidden.is_empty() {
                    return Err(LabError::Config("train.hidden must name at least one layer".into()));
                }
            }
            Task::Pendulum => self.pendulum.validate().map_err(config_error)?,
        }
        if self.eval.episodes == 0 {
            return Err(LabError::Config("eval.episodes must be at least 1".into()));
        }
        if self.gap.segments == 0 || self.gap.flights == 0 || !(self.gap.segment_length > 0.0) {
            return Err(LabError::Config("gap.segments, gap.flights and gap.segment_length must be positive".into()));
        }
        Ok(())
    }

    /// Parses and validates a config document. `origin` names the source in
    /// diagnostics.
    pub fn parse(text: &str, origin: &Path) -> LabResult<Self> {
        Self::parse_with_overrides(text, origin, &[])
    }

    /// Applies `key.path=value` overrides on top of `text`. The document is
    /// checked on its own first so that its errors point at file lines.
    pub fn parse_with_overrides(text: &str, origin: &Path, overrides: &[String]) -> LabResult<Self> {
        let parse_err = |msg: String| LabError::Parse { path: origin.to_path_buf(), msg };
        let base: Self = toml::from_str(text).map_err(|e| parse_err(e.to_string()))?;
        let cfg = if overrides.is_empty() {
            base
        } else {
            let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| parse_err(e.to_string()))?;
            for o in overrides {
                apply_override(&mut table, o)?;
            }
            toml::Value::Table(table)
                .try_into()
                .map_err(|e: toml::de::Error| LabError::Config(format!("after overrides {overrides:?}: {}", e.message())))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> LabResult<Self> {
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(LabError::MissingConfig(path.into())),
            Err(e) => return Err(LabError::io(path, e)),
        };
        Self::parse_with_overrides(&text, path, overrides)
    }

    /// Loads `source` as a file, or as a preset name when no such file
    /// exists.
    pub fn load_or_preset(source: &str, overrides: &[String]) -> LabResult<Self> {
        let path = Path::new(source);
        if !path.exists() {
            if let Some(p) = preset(source) {
                let text = p.to_toml()?;
                return Self::parse_with_overrides(&text, path, overrides);
            }
        }
        Self::load(path, overrides)
    }

    pub fn to_toml(&self) -> LabResult<String> {
        toml::to_string_pretty(self).map_err(|e| LabError::Config(format!("cannot serialize config: {e}")))
    }

    pub fn save(&self, path: &Path) -> LabResult<()> {
        std::fs::write(path, self.to_toml()?).map_err(|e| LabError::io(path, e))
    }
}

/// Sets `a.b.c = value` in `table`. The value is read as a TOML literal and
/// falls back to a bare string.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> LabResult<()> {
    let bad = |why: &str| LabError::Usage(format!("override `{spec}`: {why}"));
    let (key, raw) = spec.split_once('=').ok_or_else(|| bad("expected key.path=value"))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(bad("empty key segment"));
    }
    let raw = raw.trim();
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    };
    let (last, path) = parts.split_last().expect("nonempty");
    let mut node = table;
    for p in path {
        let entry = node.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry.as_table_mut().ok_or_else(|| bad(&format!("`{p}` is not a section")))?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}

/// PID gains file, as written by `tune-pid`.
///
/// ```toml
/// hover = 0.34
/// [pid.roll]
/// kp = 0.01
/// ki = 0.1
/// kd = 0.0002
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsFile {
    #[serde(default = "default_hover")]
    pub hover: f64,
    pub pid: PidGains,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ultimate: Vec<UltimatePoint>,
}

fn default_hover() -> f64 {
    ZnOptions::default().hover
}

impl GainsFile {
    pub fn load(path: &Path) -> LabResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
        let g: Self = toml::from_str(&text).map_err(|e| LabError::Parse { path: path.into(), msg: e.to_string() })?;
        if !g.pid.is_valid() || !(0.0..=1.0).contains(&g.hover) {
            return Err(LabError::Parse { path: path.into(), msg: "gains must be finite and >= 0, hover in [0, 1]".into() });
        }
        Ok(g)
    }

    pub fn save(&self, path: &Path) -> LabResult<()> {
        let text = toml::to_string_pretty(self).map_err(|e| LabError::Config(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| LabError::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = ExperimentConfig::default();
        let text = c.to_toml().unwrap();
        assert_eq!(ExperimentConfig::parse(&text, Path::new("x")).unwrap(), c);
    }

    #[test]
    fn presets_validate() {
        for p in PRESETS {
            let c = preset(p).unwrap();
            c.validate().unwrap();
            let text = c.to_toml().unwrap();
            assert_eq!(ExperimentConfig::parse(&text, Path::new(p)).unwrap(), c);
        }
    }

    #[test]
    fn kept_noise_survives() {
        let mut c = ExperimentConfig::default();
        c.dynamics.perturbation.gyro_noise_std = None;
        let text = c.to_toml().unwrap();
        assert!(text.contains("\"keep\""));
        assert_eq!(ExperimentConfig::parse(&text, Path::new("x")).unwrap(), c);
    }
}
