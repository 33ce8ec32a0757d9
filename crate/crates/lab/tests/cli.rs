use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ratelab::config::ExperimentConfig;
use ratelab::report::ReportFile;
use ratelab::table::Table;
use ratelab::traj_io;

fn ratelab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ratelab"))
        .current_dir(dir)
        .env_remove("RATELAB_OUT")
        .args(args)
        .output()
        .expect("ratelab runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = ratelab(dir, args);
    assert_eq!(out.status.code(), Some(0), "{args:?}\n{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn tuned(dir: &Path) -> PathBuf {
    ok(dir, &["tune-pid", "--output", "gains.toml"]);
    dir.join("gains.toml")
}

#[test]
fn help_and_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let help = ok(dir.path(), &["--help"]);
    for cmd in ["train", "tune-pid", "eval", "gap", "compare", "plot", "signal", "study", "check", "presets"] {
        assert!(help.contains(cmd), "{cmd} missing from help");
    }
    assert!(ok(dir.path(), &["train", "--help"]).contains("--override"));
    assert_eq!(ratelab(dir.path(), &["fly"]).status.code(), Some(1));
    assert_eq!(ratelab(dir.path(), &["eval"]).status.code(), Some(1));
    assert_eq!(ratelab(dir.path(), &["check", "--criteria", "9"]).status.code(), Some(1));
}

#[test]
fn presets_are_listed_and_printed() {
    let dir = tempfile::tempdir().unwrap();
    let list = ok(dir.path(), &["presets"]);
    assert_eq!(list.lines().collect::<Vec<_>>(), ["quad-multiplicative", "quad-neuroflight-reward", "pendulum-study"]);
    let text = ok(dir.path(), &["presets", "pendulum-study"]);
    let cfg = ExperimentConfig::parse(&text, Path::new("p")).unwrap();
    assert_eq!(cfg.name, "pendulum-study");
}

#[test]
fn config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let missing = ratelab(dir.path(), &["train", "--config", "nope.toml"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(stderr(&missing).contains("config file not found: nope.toml"), "{}", stderr(&missing));

    std::fs::write(dir.path().join("bad.toml"), "name = \"bad\"\n[train]\nepochs = 3\nepoch = 3\n").unwrap();
    let bad = ratelab(dir.path(), &["train", "--config", "bad.toml"]);
    assert_eq!(bad.status.code(), Some(1));
    let msg = stderr(&bad);
    assert!(msg.contains("bad.toml") && msg.contains("line 4") && msg.contains("epoch"), "{msg}");
}

#[test]
fn train_fans_out_and_snapshots_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(
        dir.path(),
        &[
            "--out",
            "runs",
            "--jobs",
            "2",
            "train",
            "--config",
            "pendulum-study",
            "--seeds",
            "3",
            "-o",
            "train.total_timesteps=2000",
            "-o",
            "train.checkpoint_interval=1000",
        ],
    );
    assert!(out.contains("step"), "{out}");
    for seed in 0..3 {
        let run = dir.path().join(format!("runs/pendulum-study/seed_{seed}"));
        let snap = ExperimentConfig::load(&run.join("config.toml"), &[]).unwrap();
        assert_eq!((snap.train.total_timesteps, snap.train.seeds.clone()), (2000, vec![seed]));
        for f in ["ckpt_1000", "ckpt_2000", "final", "curve"] {
            assert!(run.join(f).exists(), "{seed}: {f}");
        }
        let curve = Table::load(&run.join("curve")).unwrap();
        assert!(!curve.rows.is_empty());
    }
}

#[test]
fn eval_is_deterministic_and_honours_the_signal() {
    let dir = tempfile::tempdir().unwrap();
    let gains = tuned(dir.path());
    let g = gains.to_str().unwrap();
    let common = ["eval", "--gains", g, "--episodes", "2", "-o", "eval.episode_length=3"];
    let run = |d: &str, extra: &[&str]| {
        let mut args = common.to_vec();
        args.extend(["--dir", d]);
        args.extend(extra);
        ok(dir.path(), &args);
        ReportFile::load(&dir.path().join(d)).unwrap()
    };
    let a = run("a", &["--profile", "nominal"]);
    let b = run("b", &["--profile", "nominal"]);
    assert_eq!(a, b);
    assert!(a.report.overall_mae.is_finite());
    assert_eq!(std::fs::read(dir.path().join("a/episode_1000.traj")).unwrap(), std::fs::read(dir.path().join("b/episode_1000.traj")).unwrap());

    let s = run("s", &["--signal", "step"]);
    assert_eq!(s.signal, ratelab::core::setpoint::SignalKind::Step);
    let t = traj_io::load(&dir.path().join("s/episode_1000.traj")).unwrap();
    let tail: Vec<_> = t.rows[t.len() / 2..t.len() / 2 + 20].iter().map(|r| r.setpoint).collect();
    assert!(tail.windows(2).all(|w| w[0] == w[1]), "no plateau in the step signal");
    assert!(tail[0].roll != 0.0 || tail[0].pitch != 0.0 || tail[0].yaw != 0.0);

    let cmp = ok(dir.path(), &["compare", "a", "b", "--output", "cmp.toml"]);
    let text = std::fs::read_to_string(dir.path().join("cmp.toml")).unwrap();
    let doc: toml::Table = text.parse().unwrap();
    let rows = doc["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2, "{cmp}");
    for r in rows {
        let deltas = r["deltas"].as_array().unwrap();
        assert!(deltas.iter().all(|d| d.as_float() == Some(0.0)), "{text}");
    }
}

#[test]
fn compare_policy_and_pid_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let gains = tuned(dir.path());
    let weights_path = dir.path().join("policy.w");
    let net = ratelab::core::control::PolicyNet::quad_random(&mut ratelab::core::rng::rng_from(1, &[]), -0.5);
    ratelab::weights::save(&weights_path, &net).unwrap();
    let short = ["--episodes", "1", "-o", "eval.episode_length=2"];
    let mut a = vec!["eval", "--gains", gains.to_str().unwrap(), "--dir", "pid", "--label", "PID"];
    a.extend(short);
    ok(dir.path(), &a);
    let mut b = vec!["eval", "--weights", weights_path.to_str().unwrap(), "--dir", "pol", "--label", "policy"];
    b.extend(short);
    ok(dir.path(), &b);
    let table = ok(dir.path(), &["compare", "pid", "pol/report.toml"]);
    assert!(table.contains("PID") && table.contains("policy"), "{table}");

    ok(dir.path(), &["plot", "pid/episode_1000.traj", "--dir", "plots"]);
    let spec = Table::load(&dir.path().join("plots/episode_1000.spectrum.dat")).unwrap();
    assert_eq!(spec.columns, ["freq_hz", "magnitude"]);
    assert!(!spec.rows.is_empty());
    assert!(dir.path().join("plots/episode_1000.gp").exists());
}

#[test]
fn shape_mismatch_is_reported_verbatim() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("wide.w");
    let net = ratelab::core::control::PolicyNet::random(&[9, 8, 4], &mut ratelab::core::rng::rng_from(1, &[]), -0.5);
    ratelab::weights::save(&p, &net).unwrap();
    let out = ratelab(dir.path(), &["eval", "--weights", p.to_str().unwrap(), "--episodes", "1", "--dir", "e"]);
    assert_ne!(out.status.code(), Some(0));
    assert!(stderr(&out).contains("policy expects 9 inputs, got 13"), "{}", stderr(&out));
}

#[test]
fn identical_profiles_give_zero_gaps() {
    let dir = tempfile::tempdir().unwrap();
    let gains = tuned(dir.path());
    let out = ok(
        dir.path(),
        &[
            "gap",
            "--gains",
            gains.to_str().unwrap(),
            "--real",
            "perturbed",
            "--sim",
            "perturbed",
            "--segments",
            "160",
            "--length",
            "0.5",
            "--flights",
            "2",
            "-o",
            "eval.episode_length=5",
            "--dir",
            "g",
        ],
    );
    assert!(out.contains("consistency        E[SPG] ="), "{out}");
    assert!(out.contains("160 used"), "{out}");
    for kind in ["apg", "spg"] {
        let t = Table::load(&dir.path().join(format!("g/{kind}.dat"))).unwrap();
        assert!(t.column("mean").unwrap().iter().all(|v| *v == 0.0), "{kind}");
    }
    let apg = Table::load(&dir.path().join("g/apg.dat")).unwrap();
    assert_eq!(apg.rows.len(), 500);
}

#[test]
fn signal_dump() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["signal", "--signal", "perlin", "--seed", "4", "--length", "2", "--output", "s.traj"]);
    let t = traj_io::load(&dir.path().join("s.traj")).unwrap();
    assert_eq!(t.len(), 2000);
    assert!(t.rows.iter().any(|r| r.setpoint.roll != 0.0));
}

#[test]
fn assert_mode_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &["check", "--assert"]);
    assert_eq!(out.matches("PASS").count(), 3, "{out}");
}
