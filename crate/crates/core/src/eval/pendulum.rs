//! Scoring pendulum policies under both composition rules.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::control::PolicyNet;
use crate::envs::{pendulum_reward, Environment, PendulumEnv, PendulumEnvConfig};
use crate::error::{Error, Result};
use crate::eval::sum::KahanSum;
use crate::rewards::Composition;

/// Test metrics in report order.
pub const PENDULUM_METRICS: &[&str] = &["additive", "multiplicative"];

#[derive(Debug, Clone, PartialEq)]
pub struct PendulumScore {
    /// Mean episode return under each of [`PENDULUM_METRICS`].
    pub returns: [f64; 2],
    /// Mean of each component over all steps.
    pub component_means: [f64; 3],
    /// Per-episode return under the training composition's metric.
    pub episode_returns: Vec<f64>,
}

/// Flies the deterministic policy for one episode per seed and scores every
/// step under both rules, independent of the composition used in training.
pub fn evaluate_pendulum(cfg: &PendulumEnvConfig, net: &PolicyNet, seeds: &[u64]) -> Result<PendulumScore> {
    if seeds.is_empty() {
        return Err(Error::Usage("pendulum evaluation needs at least one seed".into()));
    }
    let mut env = PendulumEnv::new(cfg.clone())?;
    let mut ws = net.workspace();
    let mut action = [0.0];
    let mut totals = [KahanSum::default(), KahanSum::default()];
    let mut comp_sums = [KahanSum::default(), KahanSum::default(), KahanSum::default()];
    let mut steps = 0usize;
    let mut episode_returns = vec![];
    for &seed in seeds {
        let mut obs = env.reset(seed);
        let mut ret = KahanSum::default();
        loop {
            net.act_deterministic(&obs, &mut ws, &mut action)?;
            let (t, comps) = env.step_detailed(action[0])?;
            let add = pendulum_reward(&comps, Composition::Additive, cfg.epsilon, &cfg.weights)?;
            let mul = pendulum_reward(&comps, Composition::Multiplicative, cfg.epsilon, &cfg.weights)?;
            if !(add.is_finite() && mul.is_finite()) {
                return Err(Error::NonFinite(format!("pendulum reward at seed {seed}, step {steps}")));
            }
            totals[0].add(add);
            totals[1].add(mul);
            ret.add(t.reward);
            for (s, c) in comp_sums.iter_mut().zip(comps) {
                s.add(c);
            }
            steps += 1;
            if t.done {
                break;
            }
            obs = t.obs;
        }
        episode_returns.push(ret.total());
    }
    let n = seeds.len() as f64;
    Ok(PendulumScore {
        returns: [totals[0].total() / n, totals[1].total() / n],
        component_means: comp_sums.map(|s| s.total() / steps as f64),
        episode_returns,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;

    #[test]
    fn scores_are_bounded_by_horizon() {
        let cfg = PendulumEnvConfig { horizon: 50, ..PendulumEnvConfig::default() };
        let net = PolicyNet::random(&[3, 16, 1], &mut rng_from(2, &[]), 0.0);
        let s = evaluate_pendulum(&cfg, &net, &[1, 2, 3]).unwrap();
        assert!(s.returns[0] > 0.0 && s.returns[0] <= 150.0);
        assert!(s.returns[1] > 0.0 && s.returns[1] <= 50.0);
        assert!(s.component_means.iter().all(|c| (0.0..=1.0).contains(c)));
        assert_eq!(s.episode_returns.len(), 3);
    }

    #[test]
    fn training_metric_matches_matching_column() {
        let net = PolicyNet::random(&[3, 16, 1], &mut rng_from(4, &[]), 0.0);
        let cfg = PendulumEnvConfig { horizon: 30, composition: Composition::Additive, ..PendulumEnvConfig::default() };
        let s = evaluate_pendulum(&cfg, &net, &[5, 6]).unwrap();
        let mean = s.episode_returns.iter().sum::<f64>() / 2.0;
        assert!((mean - s.returns[0]).abs() < 1e-9);
    }
}
