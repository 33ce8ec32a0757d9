//! Clipped-surrogate PPO loss, its closed-form gradient and the update loop.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::control::mlp::{BackpropScratch, Mlp, Workspace};
use crate::control::policy::{gaussian_entropy, gaussian_log_prob, PolicyNet};
use crate::error::{Error, Result};
use crate::rng::LabRng;
use crate::train::adam::Adam;
use crate::train::rollout::Batch;

/// Policy plus a separate value network of the same hidden shape.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorCritic {
    pub policy: PolicyNet,
    pub value: Mlp,
}

impl ActorCritic {
    pub fn new(obs_dim: usize, act_dim: usize, hidden: &[usize], init_log_std: f64, rng: &mut LabRng) -> Self {
        let mut sizes = vec![obs_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(act_dim);
        let policy = PolicyNet::random(&sizes, rng, init_log_std);
        *sizes.last_mut().unwrap() = 1;
        let value = Mlp::random(&sizes, 1.0, rng);
        Self { policy, value }
    }

    pub fn segment_lens(&self) -> [usize; 3] {
        [self.policy.mlp.param_count(), self.policy.log_std.len(), self.value.param_count()]
    }

    pub fn zero_grad(&self) -> AgentGrad {
        let [a, b, c] = self.segment_lens();
        AgentGrad { policy: vec![0.0; a], log_std: vec![0.0; b], value: vec![0.0; c] }
    }

    pub fn is_finite(&self) -> bool {
        self.policy.is_finite() && self.value.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentGrad {
    pub policy: Vec<f64>,
    pub log_std: Vec<f64>,
    pub value: Vec<f64>,
}

impl AgentGrad {
    pub fn clear(&mut self) {
        for v in [&mut self.policy, &mut self.log_std, &mut self.value] {
            v.iter_mut().for_each(|g| *g = 0.0);
        }
    }

    pub fn is_finite(&self) -> bool {
        [&self.policy, &self.log_std, &self.value].iter().all(|v| v.iter().all(|g| g.is_finite()))
    }

    fn actor_norm(&self) -> f64 {
        libm::sqrt(self.policy.iter().chain(&self.log_std).map(|g| g * g).sum())
    }

    fn critic_norm(&self) -> f64 {
        libm::sqrt(self.value.iter().map(|g| g * g).sum())
    }

    /// Clips the actor (policy and log-std) and critic norms separately.
    /// Returns the pre-clip norms.
    pub fn clip_norms(&mut self, max_norm: f64) -> (f64, f64) {
        let (a, c) = (self.actor_norm(), self.critic_norm());
        if a > max_norm {
            let k = max_norm / a;
            self.policy.iter_mut().chain(self.log_std.iter_mut()).for_each(|g| *g *= k);
        }
        if c > max_norm {
            let k = max_norm / c;
            self.value.iter_mut().for_each(|g| *g *= k);
        }
        (a, c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossCoefs {
    pub clip_ratio: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossStats {
    pub total: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
}

/// Reusable buffers for loss evaluation.
pub struct LossScratch {
    pws: Workspace,
    vws: Workspace,
    bp: BackpropScratch,
    d_mean: Vec<f64>,
}

impl LossScratch {
    pub fn new(agent: &ActorCritic) -> Self {
        Self {
            pws: Workspace::new(&agent.policy.mlp),
            vws: Workspace::new(&agent.value),
            bp: BackpropScratch::default(),
            d_mean: vec![0.0; agent.policy.act_dim()],
        }
    }
}

/// Minimized loss `-clipped surrogate + c_v MSE - c_e H`, averaged over
/// `idx`. When `grad` is given the gradient is accumulated into it.
pub fn loss_and_grad(
    agent: &ActorCritic,
    batch: &Batch,
    idx: &[usize],
    coefs: &LossCoefs,
    mut grad: Option<&mut AgentGrad>,
    scratch: &mut LossScratch,
) -> LossStats {
    let n = idx.len() as f64;
    let (od, ad) = (batch.obs_dim, batch.act_dim);
    let log_std = &agent.policy.log_std;
    let inv_var: Vec<f64> = log_std.iter().map(|ls| libm::exp(-2.0 * ls)).collect();
    let mut st = LossStats::default();
    for &i in idx {
        let obs = &batch.obs[i * od..(i + 1) * od];
        let u = &batch.pre_squash[i * ad..(i + 1) * ad];
        let adv = batch.advantages[i];
        let mean = agent.policy.mlp.forward(obs, &mut scratch.pws);
        let logp = gaussian_log_prob(u, mean, log_std);
        let ratio = libm::exp(logp - batch.log_probs[i]);
        let clipped = ratio.clamp(1.0 - coefs.clip_ratio, 1.0 + coefs.clip_ratio);
        let unclipped_active = ratio * adv <= clipped * adv;
        st.policy_loss -= (ratio * adv).min(clipped * adv) / n;
        st.approx_kl += (batch.log_probs[i] - logp) / n;
        if libm::fabs(ratio - 1.0) > coefs.clip_ratio {
            st.clip_fraction += 1.0 / n;
        }
        let v = agent.value.forward(obs, &mut scratch.vws)[0];
        let diff = v - batch.returns[i];
        st.value_loss += diff * diff / n;

        if let Some(g) = grad.as_deref_mut() {
            let d_logp = if unclipped_active { -adv * ratio / n } else { 0.0 };
            if d_logp != 0.0 {
                let mean = scratch.pws.output();
                for j in 0..ad {
                    let r = u[j] - mean[j];
                    scratch.d_mean[j] = d_logp * r * inv_var[j];
                    g.log_std[j] += d_logp * (r * r * inv_var[j] - 1.0);
                }
                agent.policy.mlp.backward(&scratch.pws, &scratch.d_mean, &mut g.policy, &mut scratch.bp);
            }
            let dv = [2.0 * coefs.value_coef * diff / n];
            agent.value.backward(&scratch.vws, &dv, &mut g.value, &mut scratch.bp);
        }
    }
    st.entropy = gaussian_entropy(log_std);
    if let Some(g) = grad {
        for gl in g.log_std.iter_mut() {
            *gl -= coefs.entropy_coef;
        }
    }
    st.total = st.policy_loss + coefs.value_coef * st.value_loss - coefs.entropy_coef * st.entropy;
    st
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PpoConfig {
    pub coefs: LossCoefs,
    pub epochs: usize,
    pub minibatch_size: usize,
    pub max_grad_norm: f64,
}

/// Averages over all minibatch steps of one update.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UpdateDiagnostics {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    /// Of the value predictions made during collection.
    pub explained_variance: f64,
    pub actor_grad_norm: f64,
    pub critic_grad_norm: f64,
    pub minibatches: usize,
}

/// `1 - Var(R - V) / Var(R)`; zero when the returns are constant.
pub fn explained_variance(values: &[f64], returns: &[f64]) -> f64 {
    let n = returns.len() as f64;
    if n == 0.0 {
        return 0.0;
    }
    let var = |xs: &mut dyn Iterator<Item = f64>| {
        let v: Vec<f64> = xs.collect();
        let m = v.iter().sum::<f64>() / n;
        v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n
    };
    let vr = var(&mut returns.iter().copied());
    if vr == 0.0 {
        return 0.0;
    }
    1.0 - var(&mut returns.iter().zip(values).map(|(r, v)| r - v)) / vr
}

fn shuffle(idx: &mut [usize], rng: &mut LabRng) {
    use rand::Rng;
    for i in (1..idx.len()).rev() {
        let j = rng.random_range(0..=i);
        idx.swap(i, j);
    }
}

/// Epochs of shuffled minibatch Adam steps. A non-finite gradient aborts
/// the update before any parameter of that step is touched.
pub fn ppo_update(
    agent: &mut ActorCritic,
    batch: &Batch,
    cfg: &PpoConfig,
    adam: &mut Adam,
    lr: f64,
    rng: &mut LabRng,
) -> Result<UpdateDiagnostics> {
    let n = batch.len();
    if n == 0 {
        return Err(Error::Usage("empty rollout batch".into()));
    }
    let mut diag = UpdateDiagnostics {
        explained_variance: explained_variance(&batch.values, &batch.returns),
        ..Default::default()
    };
    let mut scratch = LossScratch::new(agent);
    let mut grad = agent.zero_grad();
    let mut idx: Vec<usize> = (0..n).collect();
    let mb = cfg.minibatch_size.clamp(1, n);
    for epoch in 0..cfg.epochs {
        shuffle(&mut idx, rng);
        for (k, chunk) in idx.chunks(mb).enumerate() {
            grad.clear();
            let st = loss_and_grad(agent, batch, chunk, &cfg.coefs, Some(&mut grad), &mut scratch);
            if !grad.is_finite() || !st.total.is_finite() {
                return Err(Error::NonFinite(format!("PPO gradient at epoch {epoch}, minibatch {k}")));
            }
            let (an, cn) = grad.clip_norms(cfg.max_grad_norm);
            let ActorCritic { policy, value } = agent;
            adam.step(
                &mut [policy.mlp.params_mut(), &mut policy.log_std[..], value.params_mut()],
                &[&grad.policy, &grad.log_std, &grad.value],
                lr,
            );
            diag.policy_loss += st.policy_loss;
            diag.value_loss += st.value_loss;
            diag.entropy += st.entropy;
            diag.approx_kl += st.approx_kl;
            diag.clip_fraction += st.clip_fraction;
            diag.actor_grad_norm += an;
            diag.critic_grad_norm += cn;
            diag.minibatches += 1;
        }
    }
    let m = diag.minibatches.max(1) as f64;
    for v in [
        &mut diag.policy_loss,
        &mut diag.value_loss,
        &mut diag.entropy,
        &mut diag.approx_kl,
        &mut diag.clip_fraction,
        &mut diag.actor_grad_norm,
        &mut diag.critic_grad_norm,
    ] {
        *v /= m;
    }
    if !agent.is_finite() {
        return Err(Error::NonFinite("parameters became non-finite after update".into()));
    }
    Ok(diag)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{rng_from, standard_normal};

    fn random_batch(agent: &ActorCritic, n: usize, seed: u64) -> Batch {
        let mut rng = rng_from(seed, &[]);
        let (od, ad) = (agent.policy.obs_dim(), agent.policy.act_dim());
        let mut b = Batch::with_dims(od, ad);
        for _ in 0..n {
            let obs: Vec<f64> = (0..od).map(|_| standard_normal(&mut rng)).collect();
            let u: Vec<f64> = (0..ad).map(|_| standard_normal(&mut rng) * 0.5).collect();
            b.obs.extend_from_slice(&obs);
            b.pre_squash.extend_from_slice(&u);
            b.actions.extend(u.iter().map(|&x| crate::control::policy::squash(x)));
            b.log_probs.push(-3.0 + 0.5 * standard_normal(&mut rng));
            b.rewards.push(standard_normal(&mut rng));
            b.values.push(standard_normal(&mut rng));
            b.dones.push(false);
            b.advantages.push(standard_normal(&mut rng));
            b.returns.push(standard_normal(&mut rng));
        }
        b
    }

    fn small_agent(seed: u64) -> ActorCritic {
        let mut rng = rng_from(seed, &[1]);
        let mut a = ActorCritic::new(13, 4, &[8, 8], -0.5, &mut rng);
        for p in a.policy.mlp.params_mut() {
            *p *= 20.0;
        }
        a
    }

    #[test]
    fn zero_advantage_leaves_actor_gradient_zero() {
        let agent = small_agent(3);
        let mut batch = random_batch(&agent, 16, 4);
        batch.advantages.iter_mut().for_each(|a| *a = 0.0);
        let coefs = LossCoefs { clip_ratio: 0.2, value_coef: 0.5, entropy_coef: 0.0 };
        let mut g = agent.zero_grad();
        let idx: Vec<usize> = (0..16).collect();
        loss_and_grad(&agent, &batch, &idx, &coefs, Some(&mut g), &mut LossScratch::new(&agent));
        assert!(g.policy.iter().chain(&g.log_std).all(|x| *x == 0.0));
        assert!(g.value.iter().any(|x| *x != 0.0));
    }

    #[test]
    fn entropy_gradient_is_isolated() {
        let agent = small_agent(3);
        let mut batch = random_batch(&agent, 8, 4);
        batch.advantages.iter_mut().for_each(|a| *a = 0.0);
        let coefs = LossCoefs { clip_ratio: 0.2, value_coef: 0.0, entropy_coef: 0.01 };
        let mut g = agent.zero_grad();
        let idx: Vec<usize> = (0..8).collect();
        loss_and_grad(&agent, &batch, &idx, &coefs, Some(&mut g), &mut LossScratch::new(&agent));
        assert!(g.log_std.iter().all(|x| *x == -0.01));
        assert!(g.policy.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn update_is_bit_reproducible() {
        let run = || {
            let mut agent = small_agent(9);
            let batch = random_batch(&agent, 64, 10);
            let cfg = PpoConfig {
                coefs: LossCoefs { clip_ratio: 0.2, value_coef: 0.5, entropy_coef: 0.0 },
                epochs: 3,
                minibatch_size: 16,
                max_grad_norm: 0.5,
            };
            let mut adam = Adam::new(&agent.segment_lens());
            let mut rng = rng_from(11, &[]);
            let d = ppo_update(&mut agent, &batch, &cfg, &mut adam, 3e-4, &mut rng).unwrap();
            (agent, d)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn explained_variance_bounds() {
        let r = [1.0, 2.0, 3.0];
        assert_eq!(explained_variance(&r, &r), 1.0);
        assert_eq!(explained_variance(&[0.0; 3], &r), 0.0);
    }
}
