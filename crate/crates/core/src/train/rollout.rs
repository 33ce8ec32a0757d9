//! Experience collection across independent environment instances.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::control::mlp::Workspace;
use crate::envs::Environment;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from, LabRng};
use crate::train::gae::{gae, normalize};
use crate::train::ppo::ActorCritic;

const EPISODE_STREAM: u64 = 0x4550_4953;
const ACTION_STREAM: u64 = 0x4143_5449;

/// Flat transition storage. Transition `t` of environment `e` sits at row
/// `e * horizon + t`, so each environment's segment is contiguous.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Batch {
    pub obs_dim: usize,
    pub act_dim: usize,
    pub n_envs: usize,
    pub horizon: usize,
    pub obs: Vec<f64>,
    pub actions: Vec<f64>,
    pub pre_squash: Vec<f64>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    /// Value of the state following each environment's last transition.
    pub last_values: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl Batch {
    pub fn with_dims(obs_dim: usize, act_dim: usize) -> Self {
        Self { obs_dim, act_dim, ..Default::default() }
    }

    fn allocate(obs_dim: usize, act_dim: usize, n_envs: usize, horizon: usize) -> Self {
        let n = n_envs * horizon;
        Self {
            obs_dim,
            act_dim,
            n_envs,
            horizon,
            obs: vec![0.0; n * obs_dim],
            actions: vec![0.0; n * act_dim],
            pre_squash: vec![0.0; n * act_dim],
            log_probs: vec![0.0; n],
            rewards: vec![0.0; n],
            values: vec![0.0; n],
            dones: vec![false; n],
            last_values: vec![0.0; n_envs],
            advantages: Vec::new(),
            returns: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    /// Fills advantages and returns per environment segment. Advantages are
    /// then normalized over the whole batch when `normalize_adv` is set.
    pub fn compute_advantages(&mut self, gamma: f64, lambda: f64, normalize_adv: bool) {
        self.advantages.clear();
        self.returns.clear();
        for e in 0..self.n_envs {
            let r = e * self.horizon..(e + 1) * self.horizon;
            let (a, ret) = gae(
                &self.rewards[r.clone()],
                &self.values[r.clone()],
                &self.dones[r],
                self.last_values[e],
                gamma,
                lambda,
            );
            self.advantages.extend(a);
            self.returns.extend(ret);
        }
        if normalize_adv {
            normalize(&mut self.advantages);
        }
    }
}

/// Summary of one finished episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeStats {
    pub env: usize,
    pub episode: u64,
    pub ret: f64,
    pub length: usize,
    pub mean_abs_error: f64,
    pub mean_abs_dy: f64,
    pub mean_action: f64,
    pub terminated_early: bool,
    /// Episode mean of each reward component.
    pub component_means: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
struct Accumulator {
    ret: f64,
    length: usize,
    abs_error: f64,
    abs_dy: f64,
    action: f64,
    components: Vec<f64>,
}

impl Accumulator {
    fn finish(&mut self, env: usize, episode: u64, terminated_early: bool) -> EpisodeStats {
        let n = self.length.max(1) as f64;
        let s = EpisodeStats {
            env,
            episode,
            ret: self.ret,
            length: self.length,
            mean_abs_error: self.abs_error / n,
            mean_abs_dy: self.abs_dy / n,
            mean_action: self.action / n,
            terminated_early,
            component_means: self.components.iter().map(|c| c / n).collect(),
        };
        *self = Self::default();
        s
    }
}

/// Per-step sums over one collection, including unfinished episodes.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepTotals {
    pub steps: usize,
    pub reward: f64,
    pub abs_error: f64,
    pub abs_dy: f64,
    pub action: f64,
}

impl StepTotals {
    pub fn mean_reward(&self) -> f64 {
        self.reward / self.steps.max(1) as f64
    }
    pub fn mean_abs_error(&self) -> f64 {
        self.abs_error / self.steps.max(1) as f64
    }
    pub fn mean_abs_dy(&self) -> f64 {
        self.abs_dy / self.steps.max(1) as f64
    }
    pub fn mean_action(&self) -> f64 {
        self.action / self.steps.max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Collected {
    pub batch: Batch,
    pub episodes: Vec<EpisodeStats>,
    pub totals: StepTotals,
}

/// Environments with their current observations and seed streams. Episode
/// `k` of environment `e` is reset with a seed derived from `(seed, e, k)`
/// and each environment samples actions from its own generator, so the
/// collected data do not depend on the order environments are stepped in.
pub struct Rollouts<E> {
    envs: Vec<E>,
    obs: Vec<Vec<f64>>,
    rngs: Vec<LabRng>,
    episode: Vec<u64>,
    acc: Vec<Accumulator>,
    seed: u64,
}

impl<E: Environment> Rollouts<E> {
    pub fn new(mut envs: Vec<E>, seed: u64) -> Result<Self> {
        if envs.is_empty() {
            return Err(Error::Config("at least one environment is required".into()));
        }
        let spec = envs[0].spec();
        if envs.iter().any(|e| {
            let s = e.spec();
            s.obs_dim != spec.obs_dim || s.act_dim != spec.act_dim
        }) {
            return Err(Error::Config("environments disagree on dimensions".into()));
        }
        let obs = envs
            .iter_mut()
            .enumerate()
            .map(|(i, e)| e.reset(derive_seed(seed, &[EPISODE_STREAM, i as u64, 0])))
            .collect();
        let n = envs.len();
        Ok(Self {
            obs,
            rngs: (0..n).map(|i| rng_from(seed, &[ACTION_STREAM, i as u64])).collect(),
            episode: vec![0; n],
            acc: vec![Accumulator::default(); n],
            envs,
            seed,
        })
    }

    pub fn n_envs(&self) -> usize {
        self.envs.len()
    }

    pub fn envs(&self) -> &[E] {
        &self.envs
    }

    /// Steps every environment `horizon` times under the agent's policy.
    pub fn collect(&mut self, agent: &ActorCritic, horizon: usize, deterministic: bool) -> Result<Collected> {
        let (od, ad) = (agent.policy.obs_dim(), agent.policy.act_dim());
        let n_envs = self.envs.len();
        let mut batch = Batch::allocate(od, ad, n_envs, horizon);
        let mut pws = agent.policy.workspace();
        let mut vws = Workspace::new(&agent.value);
        let mut episodes = Vec::new();
        let mut totals = StepTotals::default();
        for t in 0..horizon {
            for e in 0..n_envs {
                let row = e * horizon + t;
                let obs = &self.obs[e];
                if obs.len() != od {
                    return Err(Error::Usage(format!("env {e}: observation has {} values, expected {od}", obs.len())));
                }
                let sample = agent.policy.forward(obs, deterministic, &mut pws, &mut self.rngs[e])?;
                let value = agent.value.forward(obs, &mut vws)[0];
                batch.obs[row * od..(row + 1) * od].copy_from_slice(obs);
                batch.actions[row * ad..(row + 1) * ad].copy_from_slice(&sample.action);
                batch.pre_squash[row * ad..(row + 1) * ad].copy_from_slice(&sample.pre_squash);
                batch.log_probs[row] = sample.log_prob;
                batch.values[row] = value;

                let tr = self.envs[e]
                    .step(&sample.action)
                    .map_err(|err| Error::NonFinite(format!("env {e}, step {t}: {err}")))?;
                if !tr.reward.is_finite() || tr.obs.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite(format!("env {e}, step {t}: non-finite reward or observation")));
                }
                batch.rewards[row] = tr.reward;
                batch.dones[row] = tr.done;

                let acc = &mut self.acc[e];
                acc.ret += tr.reward;
                acc.length += 1;
                acc.abs_error += tr.metrics.abs_error;
                acc.abs_dy += tr.metrics.abs_dy;
                acc.action += tr.metrics.mean_action;
                if acc.components.len() < tr.metrics.components.len() {
                    acc.components.resize(tr.metrics.components.len(), 0.0);
                }
                for (s, c) in acc.components.iter_mut().zip(&tr.metrics.components) {
                    *s += c;
                }
                totals.steps += 1;
                totals.reward += tr.reward;
                totals.abs_error += tr.metrics.abs_error;
                totals.abs_dy += tr.metrics.abs_dy;
                totals.action += tr.metrics.mean_action;

                if tr.done {
                    episodes.push(acc.finish(e, self.episode[e], tr.terminated_early));
                    self.episode[e] += 1;
                    let s = derive_seed(self.seed, &[EPISODE_STREAM, e as u64, self.episode[e]]);
                    self.obs[e] = self.envs[e].reset(s);
                } else {
                    self.obs[e] = tr.obs;
                }
            }
        }
        for e in 0..n_envs {
            batch.last_values[e] = agent.value.forward(&self.obs[e], &mut vws)[0];
        }
        Ok(Collected { batch, episodes, totals })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{PendulumEnv, PendulumEnvConfig};

    fn agent() -> ActorCritic {
        ActorCritic::new(3, 1, &[8, 8], -0.5, &mut rng_from(5, &[]))
    }

    fn pendulums(n: usize) -> Vec<PendulumEnv> {
        (0..n).map(|_| PendulumEnv::new(PendulumEnvConfig::default()).unwrap()).collect()
    }

    #[test]
    fn single_transition() {
        let mut r = Rollouts::new(pendulums(1), 1).unwrap();
        let c = r.collect(&agent(), 1, false).unwrap();
        assert_eq!(c.batch.len(), 1);
        assert_eq!(c.totals.steps, 1);
    }

    #[test]
    fn deterministic_collection_repeats() {
        let a = agent();
        let run = || Rollouts::new(pendulums(3), 7).unwrap().collect(&a, 250, true).unwrap();
        let (x, y) = (run(), run());
        assert_eq!(x, y);
        assert_eq!(x.episodes.len(), 3);
        assert!(x.episodes.iter().all(|e| e.length == 200));
    }

    #[test]
    fn episode_seeds_are_independent_of_env_count() {
        let a = agent();
        let one = Rollouts::new(pendulums(1), 7).unwrap().collect(&a, 40, false).unwrap();
        let two = Rollouts::new(pendulums(2), 7).unwrap().collect(&a, 40, false).unwrap();
        assert_eq!(one.batch.rewards[..], two.batch.rewards[..40]);
    }
}
