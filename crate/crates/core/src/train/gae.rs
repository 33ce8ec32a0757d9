//! Generalized advantage estimation.

use alloc::vec;
use alloc::vec::Vec;

/// Advantages and returns for one environment's contiguous rollout.
///
/// `dones[t]` marks that the episode ended with transition `t`; the value of
/// the following state is then not bootstrapped and the recursion is cut.
/// `last_value` is the value estimate of the state after the final step.
pub fn gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    last_value: f64,
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    debug_assert!(values.len() == n && dones.len() == n);
    let mut adv = vec![0.0; n];
    let mut next_adv = 0.0;
    let mut next_value = last_value;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * live - values[t];
        next_adv = delta + gamma * lambda * live * next_adv;
        adv[t] = next_adv;
        next_value = values[t];
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, returns)
}

/// Shifts and scales to zero mean and unit (population) deviation.
pub fn normalize(xs: &mut [f64]) {
    if xs.is_empty() {
        return;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let std = libm::sqrt(var) + 1e-8;
    for x in xs.iter_mut() {
        *x = (*x - mean) / std;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_zero_is_td_residual() {
        let r = [1.0, 0.5, -0.2, 2.0];
        let v = [0.3, 0.1, 0.7, -0.4];
        let d = [false, true, false, false];
        let (a, _) = gae(&r, &v, &d, 0.9, 0.97, 0.0);
        let expect = [
            1.0 + 0.97 * 0.1 - 0.3,
            0.5 - 0.1,
            -0.2 + 0.97 * -0.4 - 0.7,
            2.0 + 0.97 * 0.9 + 0.4,
        ];
        for (x, y) in a.iter().zip(expect) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn undiscounted_reward_to_go() {
        let r = [1.0, 2.0, 3.0, 4.0];
        let (a, ret) = gae(&r, &[0.0; 4], &[false; 4], 0.0, 1.0, 1.0);
        assert_eq!(a, vec![10.0, 9.0, 7.0, 4.0]);
        assert_eq!(ret, a);
    }

    #[test]
    fn normalize_moments() {
        let mut x = [1.0, 2.0, 3.0, 10.0];
        normalize(&mut x);
        let m = x.iter().sum::<f64>() / 4.0;
        let s = x.iter().map(|v| v * v).sum::<f64>() / 4.0;
        assert!(m.abs() < 1e-12 && (s - 1.0).abs() < 1e-6);
    }
}
