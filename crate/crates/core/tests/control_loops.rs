use proptest::prelude::*;
use ratelab_core::control::{ziegler_nichols_tune, Controller, PidController, PidGains, PolicyController, PolicyNet, ZnOptions};
use ratelab_core::dynamics::{perturbed_profile, DynamicsParams, Perturbation};
use ratelab_core::envs::{EnvConfig, GoalSource, QuadEnv};
use ratelab_core::eval::run_episode;
use ratelab_core::rng::rng_from;
use ratelab_core::{AngularRates, Trajectory};

fn step_flight(controller: &mut dyn Controller, target: AngularRates, seconds: f64) -> Trajectory {
    let cfg = EnvConfig { episode_length: seconds, early_termination_threshold: 1e6, ..EnvConfig::default() };
    let mut env = QuadEnv::new(cfg).unwrap();
    run_episode(&mut env, controller, 0, Some(GoalSource::Replay(vec![target]))).unwrap()
}

fn nominal_gains() -> PidGains {
    ziegler_nichols_tune(&DynamicsParams::nominal(), &ZnOptions::default()).unwrap().gains
}

#[test]
fn tuned_pid_settles_on_each_axis() {
    let gains = nominal_gains();
    for axis in 0..3 {
        let mut t = [0.0; 3];
        t[axis] = 100.0;
        let target = AngularRates::from_array(t);
        let mut pid = PidController::new(gains.clone(), 0.34, 1e-3);
        let traj = step_flight(&mut pid, target, 5.0);
        let tail = &traj.rows[traj.len() - 500..];
        let mean = tail.iter().map(|r| r.true_rates.get(axis)).sum::<f64>() / tail.len() as f64;
        assert!((mean - 100.0).abs() < 2.0, "axis {axis}: settles at {mean}");
        let peak = traj.rows.iter().map(|r| r.true_rates.max_abs()).fold(0.0, f64::max);
        assert!(peak < 300.0, "axis {axis}: peak {peak}");
        assert!(traj.rows.iter().all(|r| r.true_rates.is_finite()));
    }
}

#[test]
fn perturbed_profile_tunes_differently() {
    let nominal = nominal_gains();
    let p = perturbed_profile(&DynamicsParams::nominal(), &Perturbation::default()).unwrap();
    let perturbed = ziegler_nichols_tune(&p, &ZnOptions::default()).unwrap().gains;
    assert_ne!(nominal, perturbed);
}

#[test]
fn zero_gain_pid_hovers() {
    let mut pid = PidController::new(PidGains::default(), 0.34, 1e-3);
    let traj = step_flight(&mut pid, AngularRates::new(50.0, -30.0, 10.0), 0.3);
    assert!(traj.rows.iter().all(|r| r.action.0 == [0.34; 4]));
}

#[test]
fn policy_and_pid_share_the_controller_interface() {
    let net = PolicyNet::quad_random(&mut rng_from(1, &[]), -0.5);
    let mut controllers: Vec<Box<dyn Controller>> = vec![
        Box::new(PidController::new(nominal_gains(), 0.34, 1e-3)),
        Box::new(PolicyController::new(net, 400.0)),
    ];
    for c in controllers.iter_mut() {
        let a = step_flight(c.as_mut(), AngularRates::new(20.0, 0.0, 0.0), 0.3);
        let b = step_flight(c.as_mut(), AngularRates::new(20.0, 0.0, 0.0), 0.3);
        assert_eq!(a, b);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn deterministic_policy_output_is_strictly_inside(seed in any::<u64>(), obs in prop::collection::vec(-5.0..5.0f64, 13)) {
        let net = PolicyNet::quad_random(&mut rng_from(seed, &[]), 0.0);
        let mut ws = net.workspace();
        let mut out = [0.0; 4];
        net.act_deterministic(&obs, &mut ws, &mut out).unwrap();
        prop_assert!(out.iter().all(|v| *v > 0.0 && *v < 1.0));
    }
}
