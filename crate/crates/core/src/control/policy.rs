//! Gaussian MLP policy with a tanh squash into `[0, 1]`.
//!
//! The network produces a pre-squash mean `m(s)`. Deterministic actions are
//! `0.5 (tanh(m) + 1)`. Stochastic actions sample `u ~ N(m, diag(exp(log_std))^2)`
//! and squash `u` the same way. Log-probabilities are those of `u`; the
//! squash Jacobian cancels in PPO's probability ratio.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::control::mlp::{Mlp, Workspace};
use crate::error::{Error, Result};
use crate::rng::{standard_normal, LabRng};

pub const QUAD_OBS_DIM: usize = 13;
pub const QUAD_HIDDEN: usize = 64;
pub const QUAD_ACT_DIM: usize = 4;

const LOG_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyNet {
    pub mlp: Mlp,
    pub log_std: Vec<f64>,
}

/// One sampled (or deterministic) action.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicySample {
    /// Squashed action in `[0, 1]`.
    pub action: Vec<f64>,
    /// Pre-squash value that was sampled.
    pub pre_squash: Vec<f64>,
    pub log_prob: f64,
}

pub fn squash(u: f64) -> f64 {
    0.5 * (libm::tanh(u) + 1.0)
}

/// Log-density of `u` under a diagonal Gaussian.
pub fn gaussian_log_prob(u: &[f64], mean: &[f64], log_std: &[f64]) -> f64 {
    u.iter()
        .zip(mean)
        .zip(log_std)
        .map(|((u, m), ls)| {
            let z = (u - m) * libm::exp(-ls);
            -0.5 * z * z - ls - 0.5 * LOG_2PI
        })
        .sum()
}

pub fn gaussian_entropy(log_std: &[f64]) -> f64 {
    log_std.iter().map(|ls| ls + 0.5 * (1.0 + LOG_2PI)).sum()
}

impl PolicyNet {
    /// Fixed quadrotor architecture 13 -> 64 -> 64 -> 4.
    pub fn quad_random(rng: &mut LabRng, init_log_std: f64) -> Self {
        Self::random(&[QUAD_OBS_DIM, QUAD_HIDDEN, QUAD_HIDDEN, QUAD_ACT_DIM], rng, init_log_std)
    }

    pub fn random(sizes: &[usize], rng: &mut LabRng, init_log_std: f64) -> Self {
        let mlp = Mlp::random(sizes, 0.01, rng);
        let act = mlp.output_dim();
        Self { mlp, log_std: vec![init_log_std; act] }
    }

    pub fn zeros(sizes: &[usize]) -> Self {
        let mlp = Mlp::zeros(sizes);
        let act = mlp.output_dim();
        Self { mlp, log_std: vec![0.0; act] }
    }

    pub fn obs_dim(&self) -> usize {
        self.mlp.input_dim()
    }

    pub fn act_dim(&self) -> usize {
        self.mlp.output_dim()
    }

    /// Total parameters including the log-std vector.
    pub fn param_count(&self) -> usize {
        self.mlp.param_count() + self.log_std.len()
    }

    pub fn is_finite(&self) -> bool {
        self.mlp.is_finite() && self.log_std.iter().all(|v| v.is_finite())
    }

    pub fn workspace(&self) -> Workspace {
        Workspace::new(&self.mlp)
    }

    /// Deterministic action written into `out`; allocation free.
    pub fn act_deterministic(&self, obs: &[f64], ws: &mut Workspace, out: &mut [f64]) -> Result<()> {
        if obs.len() != self.obs_dim() {
            return Err(Error::Usage(format!("policy expects {} inputs, got {}", self.obs_dim(), obs.len())));
        }
        if obs.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("policy input is not finite".into()));
        }
        let mean = self.mlp.forward(obs, ws);
        for (o, m) in out.iter_mut().zip(mean) {
            *o = squash(*m);
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("policy output is not finite (check weights)".into()));
        }
        Ok(())
    }

    /// Deterministic or stochastic action.
    pub fn forward(
        &self,
        obs: &[f64],
        deterministic: bool,
        ws: &mut Workspace,
        rng: &mut LabRng,
    ) -> Result<PolicySample> {
        if obs.len() != self.obs_dim() {
            return Err(Error::Usage(format!("policy expects {} inputs, got {}", self.obs_dim(), obs.len())));
        }
        let mean = self.mlp.forward(obs, ws);
        let pre_squash: Vec<f64> = if deterministic {
            mean.to_vec()
        } else {
            mean.iter()
                .zip(&self.log_std)
                .map(|(m, ls)| m + libm::exp(*ls) * standard_normal(rng))
                .collect()
        };
        let log_prob = gaussian_log_prob(&pre_squash, ws.output(), &self.log_std);
        let action: Vec<f64> = pre_squash.iter().map(|&u| squash(u)).collect();
        if !log_prob.is_finite() || action.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("policy produced a non-finite action".into()));
        }
        Ok(PolicySample { action, pre_squash, log_prob })
    }
}
