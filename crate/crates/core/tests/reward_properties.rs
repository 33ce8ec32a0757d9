use proptest::prelude::*;
use ratelab_core::rewards::{
    additive_compose, geometric_mean, neuroflight_reward, positive_clip, real_reward, RewardConfig,
};
use ratelab_core::{AngularRates, MotorCommand};

fn unit3() -> impl Strategy<Value = [f64; 3]> {
    [0.0..=1.0f64, 0.0..=1.0f64, 0.0..=1.0f64]
}

fn motors() -> impl Strategy<Value = MotorCommand> {
    [0.0..=1.0f64, 0.0..=1.0f64, 0.0..=1.0f64, 0.0..=1.0f64].prop_map(MotorCommand)
}

fn rates(bound: f64) -> impl Strategy<Value = AngularRates> {
    [-bound..=bound, -bound..=bound, -bound..=bound].prop_map(AngularRates::from_array)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn geometric_mean_is_permutation_invariant(r in unit3()) {
        let eps = 1e-6;
        let g = geometric_mean(&r, eps);
        for p in [[0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
            let q = [r[p[0]], r[p[1]], r[p[2]]];
            prop_assert!((geometric_mean(&q, eps) - g).abs() <= 1e-15);
        }
    }

    #[test]
    fn geometric_mean_is_monotone(r in unit3(), k in 0usize..3, bump in 0.0..=1.0f64) {
        let mut s = r;
        s[k] = (s[k] + bump).min(1.0);
        prop_assert!(geometric_mean(&s, 1e-6) >= geometric_mean(&r, 1e-6) - 1e-15);
    }

    #[test]
    fn geometric_mean_matches_product_root(r in unit3()) {
        let eps = 1e-6;
        let prod: f64 = r.iter().map(|x| (x + eps).min(1.0)).product();
        prop_assert!((geometric_mean(&r, eps) - prod.cbrt()).abs() <= 1e-12);
    }

    #[test]
    fn zero_component_dominates(r in unit3(), k in 0usize..3, small in 0.0..=1e-6f64) {
        let eps = 1e-6;
        let mut s = r;
        s[k] = small;
        prop_assert!(geometric_mean(&s, eps) <= (2.0 * eps).cbrt() + 1e-15);
    }

    #[test]
    fn clip_stays_in_unit_interval(p in -1e6..1e6f64) {
        let v = positive_clip(p);
        prop_assert!((0.0..=1.0).contains(&v));
    }

    #[test]
    fn real_reward_in_half_open_unit(phi in rates(2000.0), sp in rates(2000.0), y in motors(), yp in motors()) {
        let (r, v) = real_reward(phi, sp, &y, &yp, &RewardConfig::default());
        prop_assert!(r > 0.0 && r <= 1.0, "{}", r);
        prop_assert!(v.components.iter().all(|c| (0.0..=1.0).contains(c)));
    }
}

#[test]
fn additive_tolerates_an_ignored_component() {
    // Two perfect components and one at zero still reach 2/3 of the maximum;
    // with skewed weights the zero component is invisible.
    assert!((additive_compose(&[0.0, 1.0, 1.0], &[1.0; 3]).unwrap() - 2.0).abs() < 1e-15);
    let near_max = additive_compose(&[0.0, 1.0, 1.0], &[1e-9, 1.0, 1.0]).unwrap();
    let max = additive_compose(&[1.0, 1.0, 1.0], &[1e-9, 1.0, 1.0]).unwrap();
    assert!(max - near_max <= 1e-8);
    assert!(geometric_mean(&[0.0, 1.0, 1.0], 1e-6) < 0.011);
}

/// Independent term-by-term evaluation of the legacy reward.
fn legacy_oracle(phi: [f64; 3], sp: [f64; 3], prev_e: [f64; 3], y: [f64; 4], yp: [f64; 4]) -> f64 {
    let e: Vec<f64> = (0..3).map(|i| sp[i] - phi[i]).collect();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut max_dy: f64 = 0.0;
    for i in 0..4 {
        max_dy = max_dy.max((y[i] - yp[i]).abs());
    }
    let mean_y = (y[0] + y[1] + y[2] + y[3]) / 4.0;
    let a = -100.0 * max_dy;
    let b = if norm(&e) < 20.0 { 1000.0 * (1.0 - mean_y) } else { 0.0 };
    let c = norm(&prev_e) - norm(&e);
    let mut over = 0.0;
    let mut zeros = 0.0;
    for v in y {
        if v > 1.0 {
            over += v - 1.0;
        }
        if v == 0.0 {
            zeros += 1.0;
        }
    }
    let d = -1e9 * over;
    let n = if norm(&sp) > 0.0 { -1e9 * zeros } else { 0.0 };
    a + b + c + d + n
}

#[test]
fn legacy_reward_fixture_table() {
    // (phi, setpoint, previous error, y, y_prev, expected)
    let hand: [([f64; 3], [f64; 3], [f64; 3], [f64; 4], [f64; 4], f64); 6] = [
        ([0.0; 3], [10.0, 0.0, 0.0], [11.0, 0.0, 0.0], [0.5; 4], [0.5; 4], 501.0),
        ([0.0; 3], [0.0; 3], [0.0; 3], [0.0; 4], [0.0; 4], 1000.0),
        ([0.0; 3], [30.0, 0.0, 0.0], [30.0, 0.0, 0.0], [0.5; 4], [0.4; 4], -10.0),
        ([0.0; 3], [5.0, 0.0, 0.0], [5.0, 0.0, 0.0], [1.5, 0.5, 0.5, 0.5], [0.5; 4], -100.0 + 1000.0 * (1.0 - 0.75) - 5e8),
        ([0.0; 3], [5.0, 0.0, 0.0], [5.0, 0.0, 0.0], [0.0, 0.5, 0.5, 0.5], [0.0, 0.5, 0.5, 0.5], 1000.0 * (1.0 - 0.375) - 1e9),
        ([3.0, 4.0, 0.0], [0.0; 3], [0.0, 0.0, 0.0], [0.2; 4], [0.2; 4], 800.0 - 5.0),
    ];
    let mut cases: Vec<_> = hand.to_vec();
    let mut s = 0x2545_f491u64;
    let mut next = || {
        s ^= s << 13;
        s ^= s >> 7;
        s ^= s << 17;
        (s >> 11) as f64 / (1u64 << 53) as f64
    };
    while cases.len() < 20 {
        let phi = [next() * 60.0 - 30.0, next() * 60.0 - 30.0, next() * 60.0 - 30.0];
        let sp = [next() * 60.0 - 30.0, next() * 60.0 - 30.0, 0.0];
        let pe = [next() * 40.0 - 20.0, next() * 40.0 - 20.0, next() * 40.0 - 20.0];
        let y = [next() * 1.2, next(), if next() < 0.3 { 0.0 } else { next() }, next()];
        let yp = [next(), next(), next(), next()];
        cases.push((phi, sp, pe, y, yp, legacy_oracle(phi, sp, pe, y, yp)));
    }
    for (i, (phi, sp, pe, y, yp, expected)) in cases.into_iter().enumerate() {
        assert!((legacy_oracle(phi, sp, pe, y, yp) - expected).abs() <= 1e-9 * expected.abs().max(1.0));
        let (r, v) = neuroflight_reward(
            AngularRates::from_array(phi),
            AngularRates::from_array(sp),
            AngularRates::from_array(pe),
            &MotorCommand(y),
            &MotorCommand(yp),
            20.0,
        );
        assert!((r - expected).abs() <= 1e-9 * expected.abs().max(1.0), "case {i}: {r} vs {expected}");
        assert!((v.components.iter().sum::<f64>() - r).abs() <= 1e-6);
    }
}
