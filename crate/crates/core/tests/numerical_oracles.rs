use proptest::prelude::*;
use ratelab_core::control::{Mlp, Workspace};
use ratelab_core::rng::{rng_from, standard_normal};
use ratelab_core::train::{gae, loss_and_grad, ActorCritic, Batch, LossCoefs, LossScratch};

/// Direct double sum `A_t = sum_k (gamma lambda)^k delta_{t+k}` truncated at
/// the first done.
fn brute_force_gae(r: &[f64], v: &[f64], d: &[bool], last: f64, gamma: f64, lambda: f64) -> Vec<f64> {
    let n = r.len();
    let next_v = |t: usize| if t + 1 < n { v[t + 1] } else { last };
    let delta: Vec<f64> = (0..n)
        .map(|t| r[t] + gamma * next_v(t) * if d[t] { 0.0 } else { 1.0 } - v[t])
        .collect();
    (0..n)
        .map(|t| {
            let mut acc = 0.0;
            let mut w = 1.0;
            for k in t..n {
                acc += w * delta[k];
                if d[k] {
                    break;
                }
                w *= gamma * lambda;
            }
            acc
        })
        .collect()
}

fn gae_inputs() -> impl Strategy<Value = (Vec<(f64, f64, bool)>, f64, f64, f64)> {
    (
        prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64, prop::bool::weighted(0.1)), 1..=64),
        -10.0..10.0f64,
        0.01..=1.0f64,
        0.0..=1.0f64,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn gae_matches_brute_force((rows, last, gamma, lambda) in gae_inputs()) {
        let r: Vec<f64> = rows.iter().map(|x| x.0).collect();
        let v: Vec<f64> = rows.iter().map(|x| x.1).collect();
        let d: Vec<bool> = rows.iter().map(|x| x.2).collect();
        let (adv, ret) = gae(&r, &v, &d, last, gamma, lambda);
        let oracle = brute_force_gae(&r, &v, &d, last, gamma, lambda);
        for t in 0..r.len() {
            prop_assert!((adv[t] - oracle[t]).abs() <= 1e-10, "t={} {} vs {}", t, adv[t], oracle[t]);
            prop_assert!((ret[t] - (oracle[t] + v[t])).abs() <= 1e-10);
        }
    }
}

#[test]
fn gae_random_fifty_step_batch() {
    let mut rng = rng_from(50, &[]);
    let r: Vec<f64> = (0..50).map(|_| standard_normal(&mut rng)).collect();
    let v: Vec<f64> = (0..50).map(|_| standard_normal(&mut rng)).collect();
    let d: Vec<bool> = (0..50).map(|i| i % 17 == 16).collect();
    let (adv, _) = gae(&r, &v, &d, 0.3, 0.99, 0.95);
    let oracle = brute_force_gae(&r, &v, &d, 0.3, 0.99, 0.95);
    for (a, b) in adv.iter().zip(&oracle) {
        assert!((a - b).abs() <= 1e-10);
    }
}

fn naive_mlp(net: &Mlp, x: &[f64]) -> Vec<f64> {
    let sizes = net.sizes().to_vec();
    let p = net.params();
    let mut off = 0;
    let mut a = x.to_vec();
    for l in 0..sizes.len() - 1 {
        let (n_in, n_out) = (sizes[l], sizes[l + 1]);
        let w: Vec<Vec<f64>> = (0..n_out).map(|o| p[off + o * n_in..off + (o + 1) * n_in].to_vec()).collect();
        off += n_in * n_out;
        let b = &p[off..off + n_out];
        off += n_out;
        let z: Vec<f64> = (0..n_out).map(|o| b[o] + (0..n_in).map(|i| w[o][i] * a[i]).sum::<f64>()).collect();
        a = if l + 2 < sizes.len() { z.iter().map(|v| v.tanh()).collect() } else { z };
    }
    a
}

#[test]
fn mlp_forward_matches_matrix_reimplementation() {
    for k in 0..100u64 {
        let mut rng = rng_from(k, &[7]);
        let net = Mlp::random(&[13, 64, 64, 4], 1.0, &mut rng);
        let x: Vec<f64> = (0..13).map(|_| standard_normal(&mut rng)).collect();
        let mut ws = Workspace::new(&net);
        let fast = net.forward(&x, &mut ws).to_vec();
        let slow = naive_mlp(&net, &x);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() <= 1e-10, "net {k}: {a} vs {b}");
        }
    }
}

fn fd_batch(agent: &ActorCritic, n: usize) -> Batch {
    let mut rng = rng_from(99, &[]);
    let mut b = Batch::with_dims(13, 4);
    let mut ws = agent.policy.workspace();
    for _ in 0..n {
        let obs: Vec<f64> = (0..13).map(|_| standard_normal(&mut rng)).collect();
        let mean = agent.policy.mlp.forward(&obs, &mut ws).to_vec();
        // Old log-probs near the current ones keep ratios inside the clip
        // band, away from the surrogate's kinks.
        let u: Vec<f64> = mean.iter().map(|m| m + 0.3 * standard_normal(&mut rng)).collect();
        let lp = ratelab_core::control::policy::gaussian_log_prob(&u, &mean, &agent.policy.log_std);
        b.obs.extend_from_slice(&obs);
        b.pre_squash.extend_from_slice(&u);
        b.actions.extend(u.iter().map(|x| ratelab_core::control::policy::squash(*x)));
        b.log_probs.push(lp + 0.05 * standard_normal(&mut rng));
        b.rewards.push(0.0);
        b.values.push(0.0);
        b.dones.push(false);
        b.advantages.push(standard_normal(&mut rng));
        b.returns.push(standard_normal(&mut rng));
    }
    b
}

#[test]
fn ppo_loss_gradient_matches_central_differences() {
    let mut agent = ActorCritic::new(13, 4, &[64, 64], -0.7, &mut rng_from(1, &[]));
    for p in agent.policy.mlp.params_mut() {
        *p *= 30.0;
    }
    let batch = fd_batch(&agent, 24);
    let idx: Vec<usize> = (0..24).collect();
    let coefs = LossCoefs { clip_ratio: 0.2, value_coef: 0.5, entropy_coef: 0.01 };
    let mut scratch = LossScratch::new(&agent);
    let mut grad = agent.zero_grad();
    loss_and_grad(&agent, &batch, &idx, &coefs, Some(&mut grad), &mut scratch);

    let h = 1e-6;
    let loss_at = |a: &ActorCritic| loss_and_grad(a, &batch, &idx, &coefs, None, &mut LossScratch::new(a)).total;
    let blocks: [(&str, usize); 3] = [
        ("policy", agent.policy.mlp.param_count()),
        ("log_std", agent.policy.log_std.len()),
        ("value", agent.value.param_count()),
    ];
    for (block, n) in blocks {
        let mut num = Vec::with_capacity(n);
        for i in 0..n {
            let mut plus = agent.clone();
            let mut minus = agent.clone();
            let (p, m) = match block {
                "policy" => (&mut plus.policy.mlp.params_mut()[i], &mut minus.policy.mlp.params_mut()[i]),
                "log_std" => (&mut plus.policy.log_std[i], &mut minus.policy.log_std[i]),
                _ => (&mut plus.value.params_mut()[i], &mut minus.value.params_mut()[i]),
            };
            *p += h;
            *m -= h;
            num.push((loss_at(&plus) - loss_at(&minus)) / (2.0 * h));
        }
        let ana: &[f64] = match block {
            "policy" => &grad.policy,
            "log_std" => &grad.log_std,
            _ => &grad.value,
        };
        let diff: f64 = ana.iter().zip(&num).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let scale: f64 = num.iter().map(|b| b * b).sum::<f64>().sqrt().max(1e-12);
        assert!(scale > 1e-8, "{block}: gradient vanished");
        assert!(diff / scale < 1e-4, "{block}: relative error {}", diff / scale);
    }
}
