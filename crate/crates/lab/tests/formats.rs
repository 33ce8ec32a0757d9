use std::path::Path;

use proptest::prelude::*;

use ratelab::config::{preset, ExperimentConfig, GainsFile, PRESETS};
use ratelab::core::control::PolicyNet;
use ratelab::core::rng::rng_from;
use ratelab::core::types::{Trajectory, TrajectoryRow};
use ratelab::core::{AngularRates, MotorCommand};
use ratelab::table::Table;
use ratelab::{exit, traj_io, weights, LabError};

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![-1e6..1e6f64, Just(0.0), Just(-0.0), Just(f64::MIN_POSITIVE), Just(1e-300)]
}

fn row(labels: usize) -> impl Strategy<Value = TrajectoryRow> {
    (
        prop::array::uniform9(finite()),
        prop::array::uniform8(finite()),
        prop::collection::vec(finite(), labels),
        finite(),
        any::<bool>(),
    )
        .prop_map(|(r, m, rewards, reward, terminated)| TrajectoryRow {
            step: 0,
            setpoint: AngularRates::new(r[0], r[1], r[2]),
            measured: AngularRates::new(r[3], r[4], r[5]),
            true_rates: AngularRates::new(r[6], r[7], r[8]),
            action: MotorCommand([m[0], m[1], m[2], m[3]]),
            motors: [m[4], m[5], m[6], m[7]],
            rewards,
            reward,
            terminated,
        })
}

fn trajectory() -> impl Strategy<Value = Trajectory> {
    (0usize..4, prop_oneof![Just(1e-3), Just(2.5e-3), Just(0.01)]).prop_flat_map(|(k, dt)| {
        prop::collection::vec(row(k), 0..40).prop_map(move |rows| {
            let mut t = Trajectory::new(dt, (0..k).map(|i| format!("c{i}")).collect());
            rows.into_iter().for_each(|r| t.push(r));
            t
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trajectory_text_round_trip(t in trajectory()) {
        let text = traj_io::to_text(&t).unwrap();
        let back = traj_io::parse(&text).unwrap();
        prop_assert_eq!(&back, &t);
        prop_assert_eq!(traj_io::to_text(&back).unwrap(), text);
    }

    #[test]
    fn weights_round_trip_is_exact_after_quantization(
        hidden in prop::collection::vec(1usize..24, 1..4),
        seed in any::<u64>(),
        log_std in -3.0..1.0f64,
    ) {
        let mut sizes = vec![13];
        sizes.extend(&hidden);
        sizes.push(4);
        let net = PolicyNet::random(&sizes, &mut rng_from(seed, &[]), log_std);
        let bytes = weights::encode(&net);
        prop_assert_eq!(bytes.len(), weights::encoded_len(&sizes));
        let back = weights::decode(&bytes).unwrap();
        prop_assert_eq!(&back, &weights::quantize(&net));
        prop_assert_eq!(weights::encode(&back), bytes);
    }

    #[test]
    fn table_round_trip(rows in prop::collection::vec(prop::collection::vec(any::<f64>(), 3), 0..20)) {
        let mut t = Table::new("curve", &["a", "b", "c"]);
        rows.iter().for_each(|r| t.push(r.clone()));
        let back = Table::parse(&t.to_text()).unwrap();
        prop_assert_eq!(back.rows.len(), rows.len());
        for (x, y) in back.rows.iter().flatten().zip(rows.iter().flatten()) {
            prop_assert!(x.to_bits() == y.to_bits() || (x.is_nan() && y.is_nan()));
        }
    }
}

#[test]
fn truncated_weights_are_rejected() {
    let net = PolicyNet::quad_random(&mut rng_from(3, &[]), -0.5);
    let bytes = weights::encode(&net);
    for cut in [0, 3, 8, 20, bytes.len() - 1] {
        assert!(weights::decode(&bytes[..cut]).is_err(), "accepted {cut} bytes");
    }
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(weights::decode(&bad), Err(weights::WeightsError::BadMagic)));
}

#[test]
fn every_preset_round_trips() {
    for name in PRESETS {
        let c = preset(name).unwrap();
        assert_eq!(ExperimentConfig::parse(&c.to_toml().unwrap(), Path::new(name)).unwrap(), c, "{name}");
    }
}

#[test]
fn unknown_key_points_at_its_line() {
    let text = "name = \"x\"\n\n[train]\ntotal_timesteps = 5000\ntotal_timestep = 4000\n";
    let err = ExperimentConfig::parse(text, Path::new("x.toml")).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("x.toml") && msg.contains("line 5") && msg.contains("total_timestep"), "{msg}");
    assert_eq!(err.exit_code(), exit::USAGE);
}

#[test]
fn invalid_values_are_config_errors() {
    let err = ExperimentConfig::parse("[train]\nclip_ratio = 1.5\n", Path::new("c.toml")).unwrap_err();
    assert_eq!(err.exit_code(), exit::USAGE, "{err}");
    assert!(err.to_string().contains("clip_ratio"), "{err}");
}

#[test]
fn missing_config_is_distinct() {
    let err = ExperimentConfig::load(Path::new("/nonexistent/ratelab.toml"), &[]).unwrap_err();
    assert!(matches!(err, LabError::MissingConfig(_)));
    assert_eq!(err.exit_code(), exit::USAGE);
    assert!(err.to_string().contains("not found"));
}

#[test]
fn overrides_apply_and_are_validated() {
    let base = preset("quad-multiplicative").unwrap().to_toml().unwrap();
    let overrides = ["train.total_timesteps=2000".to_string(), "train.checkpoint_interval=1000".to_string()];
    let c = ExperimentConfig::parse_with_overrides(&base, Path::new("q"), &overrides).unwrap();
    assert_eq!((c.train.total_timesteps, c.train.checkpoint_interval), (2000, 1000));

    let typo = ["train.totl_timesteps=2000".to_string()];
    assert!(ExperimentConfig::parse_with_overrides(&base, Path::new("q"), &typo).is_err());
    let too_big = ["train.total_timesteps=2000".to_string()];
    assert!(ExperimentConfig::parse_with_overrides(&base, Path::new("q"), &too_big).is_err());
}

#[test]
fn gains_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("gains.toml");
    let g = GainsFile { hover: 0.34, pid: Default::default(), ultimate: vec![] };
    g.save(&p).unwrap();
    assert_eq!(GainsFile::load(&p).unwrap(), g);
    std::fs::write(&p, "hover = 0.34\n[pid.roll]\nkp = 1.0\nki = 0.0\nkd = 0.0\nkx = 2\n").unwrap();
    assert!(GainsFile::load(&p).is_err());
}
