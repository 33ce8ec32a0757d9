//! Goal-signal generation.
//!
//! [`perlin_1d`] is classic gradient noise on a 1-D lattice: every integer
//! lattice point gets a pseudo-random slope in `[-1, 1]`, and between two
//! points the two linear ramps are blended with the quintic fade
//! `6t^5 - 15t^4 + 10t^3`. Octave `k` runs at `2^k` times the base frequency
//! with amplitude `2^-k`; the weighted sum is normalized into `[-1, 1]`.
//!
//! The training goal on each axis is `P(t, 4) * P(t, 1)^2 * max_rate`, with
//! independent seeds per axis and per factor. The squared slow factor keeps
//! the goal near zero most of the time with occasional aggressive bursts.

use crate::error::{config_err, Result};
use crate::rng::{derive_seed, mix64, rng_from, uniform};
use crate::types::AngularRates;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum SignalKind {
    #[default]
    Perlin,
    Step,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SetpointConfig {
    /// deg/s amplitude per axis.
    pub max_rate: f64,
    pub octaves_primary: u32,
    /// Hz of the coarsest lattice.
    pub base_frequency: f64,
    /// Seconds.
    pub episode_length: f64,
    /// Salt mixed into every episode seed.
    pub seed: u64,
    pub kind: SignalKind,
    /// Probability that a Perlin-configured episode uses a step goal instead.
    pub step_mixture: f64,
    /// Step generator plateau start, seconds.
    pub step_start: f64,
    /// Step generator plateau end, seconds.
    pub step_stop: f64,
}

impl Default for SetpointConfig {
    fn default() -> Self {
        Self {
            max_rate: 400.0,
            octaves_primary: 4,
            base_frequency: 0.25,
            episode_length: 10.0,
            seed: 0,
            kind: SignalKind::Perlin,
            step_mixture: 0.0,
            step_start: 1.0,
            step_stop: 4.0,
        }
    }
}

impl SetpointConfig {
    /// Gentler variant used for validation flights.
    pub fn validation() -> Self {
        Self { max_rate: 200.0, episode_length: 30.0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.max_rate > 0.0 && self.max_rate.is_finite()) {
            return Err(config_err("setpoint.max_rate must be > 0"));
        }
        if self.octaves_primary < 1 || self.octaves_primary > 30 {
            return Err(config_err("setpoint.octaves_primary must lie in [1, 30]"));
        }
        if !(self.base_frequency > 0.0 && self.base_frequency.is_finite()) {
            return Err(config_err("setpoint.base_frequency must be > 0"));
        }
        if !(self.episode_length > 0.0) {
            return Err(config_err("setpoint.episode_length must be > 0"));
        }
        if !(0.0..=1.0).contains(&self.step_mixture) {
            return Err(config_err("setpoint.step_mixture must lie in [0, 1]"));
        }
        if !(self.step_start >= 0.0 && self.step_stop > self.step_start) {
            return Err(config_err("setpoint.step_start must be >= 0 and before step_stop"));
        }
        Ok(())
    }

    /// Upper bound on `|d goal / dt|` in deg/s^2 for the Perlin goal.
    pub fn rate_bound(&self) -> f64 {
        // |d(2n)/dx| <= 2 (1 + max fade') = 2 * 2.875 per lattice unit.
        let per_octave = 5.75 * self.base_frequency;
        let fast = per_octave * octave_derivative_gain(self.octaves_primary);
        let slow = per_octave * octave_derivative_gain(1);
        self.max_rate * (fast + 2.0 * slow)
    }
}

fn octave_derivative_gain(octaves: u32) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 0..octaves {
        let amp = libm::ldexp(1.0, -(k as i32));
        num += amp * libm::ldexp(1.0, k as i32);
        den += amp;
    }
    num / den
}

fn fade(t: f64) -> f64 {
    t * t * t * (t * (t * 6.0 - 15.0) + 10.0)
}

fn lattice_gradient(seed: u64, octave: u32, cell: i64) -> f64 {
    let h = mix64(seed ^ mix64((octave as u64) << 48 ^ cell as u64));
    // 53 random mantissa bits mapped onto [-1, 1].
    (h >> 11) as f64 * (2.0 / (1u64 << 53) as f64) - 1.0
}

fn gradient_noise(x: f64, seed: u64, octave: u32) -> f64 {
    let cell = libm::floor(x);
    let f = x - cell;
    let i = cell as i64;
    let g0 = lattice_gradient(seed, octave, i);
    let g1 = lattice_gradient(seed, octave, i + 1);
    let s = fade(f);
    let a = g0 * f;
    let b = g1 * (f - 1.0);
    // Single-octave values lie in [-0.5, 0.5]; scale to [-1, 1].
    2.0 * (a + s * (b - a))
}

/// Octave-summed gradient noise in `[-1, 1]`.
pub fn perlin_1d(t: f64, octaves: u32, base_frequency: f64, seed: u64) -> f64 {
    let mut sum = 0.0;
    let mut norm = 0.0;
    for k in 0..octaves {
        let amp = libm::ldexp(1.0, -(k as i32));
        let freq = base_frequency * libm::ldexp(1.0, k as i32);
        sum += amp * gradient_noise(t * freq, seed, k);
        norm += amp;
    }
    (sum / norm).clamp(-1.0, 1.0)
}

/// Seed for one Perlin factor of one axis of an episode.
pub fn factor_seed(episode_seed: u64, axis: usize, factor: usize) -> u64 {
    derive_seed(episode_seed, &[axis as u64, factor as u64])
}

/// Per-episode goal generator.
#[derive(Debug, Clone, PartialEq)]
pub struct GoalSignal {
    cfg: SetpointConfig,
    kind: SignalKind,
    seeds: [[u64; 2]; 3],
    plateau: AngularRates,
}

impl GoalSignal {
    pub fn new(cfg: &SetpointConfig, episode_seed: u64) -> Self {
        let base = derive_seed(cfg.seed, &[episode_seed]);
        let seeds = core::array::from_fn(|axis| [factor_seed(base, axis, 0), factor_seed(base, axis, 1)]);
        let mut rng = rng_from(base, &[0x5354_4550]);
        let mut kind = cfg.kind;
        if kind == SignalKind::Perlin && cfg.step_mixture > 0.0 && uniform(&mut rng) < cfg.step_mixture {
            kind = SignalKind::Step;
        }
        let plateau = AngularRates::new(
            (2.0 * uniform(&mut rng) - 1.0) * cfg.max_rate,
            (2.0 * uniform(&mut rng) - 1.0) * cfg.max_rate,
            (2.0 * uniform(&mut rng) - 1.0) * cfg.max_rate,
        );
        Self { cfg: cfg.clone(), kind, seeds, plateau }
    }

    pub fn kind(&self) -> SignalKind {
        self.kind
    }

    pub fn plateau(&self) -> AngularRates {
        self.plateau
    }

    pub fn at(&self, t: f64) -> AngularRates {
        match self.kind {
            SignalKind::Perlin => AngularRates::new(self.perlin_axis(t, 0), self.perlin_axis(t, 1), self.perlin_axis(t, 2)),
            SignalKind::Step => step_signal(t, &self.cfg, self.plateau),
        }
    }

    fn perlin_axis(&self, t: f64, axis: usize) -> f64 {
        let [fast_seed, slow_seed] = self.seeds[axis];
        let fast = perlin_1d(t, self.cfg.octaves_primary, self.cfg.base_frequency, fast_seed);
        let slow = perlin_1d(t, 1, self.cfg.base_frequency, slow_seed);
        fast * slow * slow * self.cfg.max_rate
    }
}

/// Goal on one axis at time `t` for the given episode.
pub fn goal_signal(t: f64, axis: usize, cfg: &SetpointConfig, episode_seed: u64) -> f64 {
    let cfg = SetpointConfig { kind: SignalKind::Perlin, step_mixture: 0.0, ..cfg.clone() };
    GoalSignal::new(&cfg, episode_seed).at(t).get(axis)
}

/// Zero, then `plateau` on `[step_start, step_stop)`, then zero again.
pub fn step_signal(t: f64, cfg: &SetpointConfig, plateau: AngularRates) -> AngularRates {
    if t >= cfg.step_start && t < cfg.step_stop {
        plateau
    } else {
        AngularRates::ZERO
    }
}
