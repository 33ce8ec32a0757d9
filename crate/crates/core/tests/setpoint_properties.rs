use ratelab_core::setpoint::{GoalSignal, SetpointConfig};

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma) * (x - ma)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb) * (y - mb)).sum();
    cov / (va * vb).sqrt()
}

#[test]
fn step_to_step_change_is_bounded() {
    let cfg = SetpointConfig::default();
    let bound = cfg.rate_bound();
    let dt = 1e-3;
    let mut worst: f64 = 0.0;
    for ep in 0..10u64 {
        let g = GoalSignal::new(&cfg, ep);
        let mut prev = g.at(0.0);
        for k in 1..10_000 {
            let cur = g.at(k as f64 * dt);
            for a in 0..3 {
                worst = worst.max((cur.get(a) - prev.get(a)).abs() / dt);
            }
            prev = cur;
        }
    }
    assert!(worst <= bound, "{worst} > {bound}");
    assert!(worst > 0.0);
}

#[test]
fn axes_are_decorrelated() {
    let cfg = SetpointConfig { episode_length: 4000.0, ..SetpointConfig::default() };
    let g = GoalSignal::new(&cfg, 11);
    let n = 80_000;
    let mut axes = [Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n)];
    for k in 0..n {
        let v = g.at(k as f64 * 0.05);
        for a in 0..3 {
            axes[a].push(v.get(a));
        }
    }
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        let r = pearson(&axes[i], &axes[j]);
        assert!(r.abs() < 0.1, "axes {i},{j}: r = {r}");
    }
}

#[test]
fn episode_distribution_is_centered_and_mostly_gentle() {
    let cfg = SetpointConfig::default();
    let mut all = Vec::new();
    for ep in 0..100u64 {
        let g = GoalSignal::new(&cfg, ep);
        for k in 0..1000 {
            let v = g.at(k as f64 * 0.01);
            all.extend_from_slice(&v.to_array());
        }
    }
    let mean = all.iter().sum::<f64>() / all.len() as f64;
    let mut mags: Vec<f64> = all.iter().map(|v| v.abs()).collect();
    mags.sort_by(f64::total_cmp);
    let median = mags[mags.len() / 2];
    assert!(mean.abs() < 0.05 * cfg.max_rate, "mean {mean}");
    assert!(median < 0.25 * cfg.max_rate, "median {median}");
}
