//! Training runs, evaluation flights and the two studies.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use ratelab_core::control::{Controller, PidController, PolicyController, PolicyNet};
use ratelab_core::envs::{EnvConfig, Environment, PendulumEnv, QuadEnv};
use ratelab_core::eval::{
    actuation_playback_gap, evaluate, evaluate_pendulum, setpoint_playback_gap, ApgOptions, ApgResult, EvalReport,
    PendulumScore, SpgResult, PENDULUM_METRICS,
};
use ratelab_core::rewards::Composition;
use ratelab_core::train::{CurveRecord, SeedFinal, Trainer, VarianceReport};
use ratelab_core::Trajectory;

use crate::config::{ExperimentConfig, GainsFile, Profile, Task};
use crate::error::{LabError, LabResult};
use crate::table::{curve_row, Table, CURVE_COLUMNS};
use crate::weights;

/// `<root>/<name>/seed_<seed>/` holding `config.toml`, `curve`,
/// `ckpt_<step>` and `final`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunDir(PathBuf);

impl RunDir {
    /// Creates the directory, clearing artifacts of an earlier run.
    pub fn create(root: &Path, name: &str, seed: u64) -> LabResult<Self> {
        let dir = root.join(name).join(format!("seed_{seed}"));
        std::fs::create_dir_all(&dir).map_err(|e| LabError::io(&dir, e))?;
        let run = Self(dir);
        for step in run.checkpoints()? {
            let p = run.checkpoint(step);
            std::fs::remove_file(&p).map_err(|e| LabError::io(&p, e))?;
        }
        for p in [run.curve(), run.final_weights()] {
            if p.exists() {
                std::fs::remove_file(&p).map_err(|e| LabError::io(&p, e))?;
            }
        }
        Ok(run)
    }

    pub fn open(path: &Path) -> Self {
        Self(path.into())
    }

    pub fn path(&self) -> &Path {
        &self.0
    }

    pub fn config(&self) -> PathBuf {
        self.0.join("config.toml")
    }

    pub fn curve(&self) -> PathBuf {
        self.0.join("curve")
    }

    pub fn checkpoint(&self, step: u64) -> PathBuf {
        self.0.join(format!("ckpt_{step}"))
    }

    pub fn final_weights(&self) -> PathBuf {
        self.0.join("final")
    }

    /// Checkpoint steps present on disk, ascending.
    pub fn checkpoints(&self) -> LabResult<Vec<u64>> {
        let entries = std::fs::read_dir(&self.0).map_err(|e| LabError::io(&self.0, e))?;
        let mut steps = vec![];
        for e in entries {
            let e = e.map_err(|e| LabError::io(&self.0, e))?;
            if let Some(step) = e.file_name().to_str().and_then(|n| n.strip_prefix("ckpt_")).and_then(|s| s.parse().ok()) {
                steps.push(step);
            }
        }
        steps.sort_unstable();
        Ok(steps)
    }
}

#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub net: PolicyNet,
    pub curve: Vec<CurveRecord>,
    pub dir: Option<RunDir>,
}

pub type Progress<'a> = &'a (dyn Fn(u64, &CurveRecord) + Sync);

pub fn no_progress(_: u64, _: &CurveRecord) {}

fn quad_envs(cfg: &EnvConfig, n: usize) -> LabResult<Vec<QuadEnv>> {
    Ok((0..n).map(|_| QuadEnv::new(cfg.clone())).collect::<Result<Vec<_>, _>>()?)
}

fn pendulum_envs(cfg: &ExperimentConfig) -> LabResult<Vec<PendulumEnv>> {
    Ok((0..cfg.train.n_envs)
        .map(|_| PendulumEnv::new(cfg.pendulum_env()))
        .collect::<Result<Vec<_>, _>>()?)
}

/// The freshly initialized policy a run with `seed` starts from.
pub fn untrained_policy(cfg: &ExperimentConfig, seed: u64) -> LabResult<PolicyNet> {
    Ok(match cfg.task {
        Task::Quad => Trainer::new(cfg.train.clone(), quad_envs(&cfg.train_env()?, cfg.train.n_envs)?, seed)?.agent().policy.clone(),
        Task::Pendulum => Trainer::new(cfg.train.clone(), pendulum_envs(cfg)?, seed)?.agent().policy.clone(),
    })
}

/// Trains one seed; writes a run directory under `root` when given.
pub fn train_seed(cfg: &ExperimentConfig, seed: u64, root: Option<&Path>, progress: Progress) -> LabResult<SeedRun> {
    let dir = match root {
        Some(r) => {
            let d = RunDir::create(r, &cfg.name, seed)?;
            let mut snap = cfg.clone();
            snap.train.seeds = vec![seed];
            snap.save(&d.config())?;
            Some(d)
        }
        None => None,
    };
    match cfg.task {
        Task::Quad => drive(cfg, quad_envs(&cfg.train_env()?, cfg.train.n_envs)?, seed, dir, progress),
        Task::Pendulum => drive(cfg, pendulum_envs(cfg)?, seed, dir, progress),
    }
}

fn drive<E: Environment>(
    cfg: &ExperimentConfig,
    envs: Vec<E>,
    seed: u64,
    dir: Option<RunDir>,
    progress: Progress,
) -> LabResult<SeedRun> {
    let mut trainer = Trainer::new(cfg.train.clone(), envs, seed)?;
    let mut curve_file = match &dir {
        Some(d) => {
            let p = d.curve();
            let mut f = std::io::BufWriter::new(std::fs::File::create(&p).map_err(|e| LabError::io(&p, e))?);
            f.write_all(Table::new("curve", &CURVE_COLUMNS).header().as_bytes()).map_err(|e| LabError::io(&p, e))?;
            Some((p, f))
        }
        None => None,
    };
    let mut curve = vec![];
    while !trainer.is_finished() {
        let report = trainer.update().map_err(|source| LabError::Training {
            seed,
            dir: dir.as_ref().map(|d| d.path().into()),
            source,
        })?;
        if let Some((p, f)) = &mut curve_file {
            f.write_all(Table::row_text(&curve_row(&report.curve)).as_bytes())
                .and_then(|_| f.flush())
                .map_err(|e| LabError::io(&*p, e))?;
        }
        if let Some(d) = &dir {
            for &step in &report.checkpoints {
                weights::save(&d.checkpoint(step), &trainer.agent().policy)?;
            }
        }
        progress(seed, &report.curve);
        curve.push(report.curve);
    }
    let net = trainer.into_agent().policy;
    if let Some(d) = &dir {
        weights::save(&d.final_weights(), &net)?;
    }
    Ok(SeedRun { seed, net, curve, dir })
}

/// Trains `seeds` on at most `jobs` threads. Results come back in seed
/// order and do not depend on `jobs`.
pub fn train_seeds(
    cfg: &ExperimentConfig,
    seeds: &[u64],
    root: Option<&Path>,
    jobs: usize,
    progress: Progress,
) -> LabResult<Vec<SeedRun>> {
    let jobs = jobs.clamp(1, seeds.len().max(1));
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<LabResult<SeedRun>>>> = Mutex::new((0..seeds.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..jobs {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= seeds.len() {
                    break;
                }
                let r = train_seed(cfg, seeds[i], root, progress);
                slots.lock().expect("result lock")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("result lock")
        .into_iter()
        .map(|r| r.expect("every seed is trained"))
        .collect()
}

/// Anything that can fly the quadrotor.
#[derive(Debug, Clone)]
pub enum ControllerSpec {
    Policy(PolicyNet),
    /// Samples from the policy's Gaussian head, as during training.
    Sampled(PolicyNet, u64),
    Pid(GainsFile),
}

impl ControllerSpec {
    pub fn build(&self, env: &EnvConfig) -> Box<dyn Controller> {
        match self {
            Self::Policy(net) => Box::new(PolicyController::new(net.clone(), env.observation_rate_scale)),
            Self::Sampled(net, seed) => Box::new(PolicyController::stochastic(net.clone(), env.observation_rate_scale, *seed)),
            Self::Pid(g) => Box::new(PidController::new(g.pid.clone(), g.hover, env.control_dt())),
        }
    }
}

/// Validation flights of `ctrl` on `profile`, one per seed.
pub fn evaluate_quad(
    cfg: &ExperimentConfig,
    ctrl: &ControllerSpec,
    profile: Profile,
    seeds: &[u64],
) -> LabResult<(EvalReport, Vec<Trajectory>)> {
    let env = cfg.eval_env(profile)?;
    let mut c = ctrl.build(&env);
    Ok(evaluate(&env, c.as_mut(), seeds)?)
}

#[derive(Debug, Clone)]
pub struct GapStudy {
    pub real_profile: Profile,
    pub sim_profile: Profile,
    /// Flights on the real profile.
    pub real: EvalReport,
    pub real_flights: Vec<Trajectory>,
    pub apg: ApgResult,
    pub spg: SpgResult,
}

/// Control steps after which the short-horizon gap is read.
pub const APG_PROBE_STEPS: usize = 3;

impl GapStudy {
    /// Mean APG after [`APG_PROBE_STEPS`] steps of playback.
    pub fn apg_probe(&self) -> f64 {
        self.apg.curve.mean.get(APG_PROBE_STEPS - 1).copied().unwrap_or(f64::NAN)
    }

    pub fn spg_bound(&self) -> f64 {
        self.real.overall_mae + self.apg.curve.overall_mean() + 3.0 * self.spg.curve.overall_std()
    }

    pub fn spg_within_bound(&self) -> bool {
        self.spg.curve.overall_mean() <= self.spg_bound()
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let (apg, spg) = (&self.apg.curve, &self.spg.curve);
        let _ = writeln!(s, "real profile       {}", self.real_profile.name());
        let _ = writeln!(s, "sim profile        {}", self.sim_profile.name());
        let _ = writeln!(s, "flights            {}", self.real_flights.len());
        let _ = writeln!(
            s,
            "APG segments       {} used, {} skipped, {} steps ({:.3} s)",
            self.apg.used,
            self.apg.skipped,
            apg.mean.len(),
            apg.mean.len() as f64 * apg.dt
        );
        let _ = writeln!(s, "E[MAE]             {:.6} deg/s", self.real.overall_mae);
        let _ = writeln!(s, "E[APG]             {:.6} deg/s (sigma {:.6})", apg.overall_mean(), apg.overall_std());
        let _ = writeln!(s, "APG at {} steps     {:.6} deg/s", APG_PROBE_STEPS, self.apg_probe());
        let _ = writeln!(s, "E[SPG]             {:.6} deg/s (sigma {:.6})", spg.overall_mean(), spg.overall_std());
        let _ = writeln!(
            s,
            "consistency        E[SPG] = {:.6} vs E[MAE] + E[APG] = {:.6}; bound with 3 sigma {:.6}: {}",
            spg.overall_mean(),
            self.real.overall_mae + apg.overall_mean(),
            self.spg_bound(),
            if self.spg_within_bound() { "within" } else { "exceeded" }
        );
        s
    }
}

/// Flies `ctrl` on the real profile, then measures both gaps against the
/// sim profile.
pub fn gap_study(cfg: &ExperimentConfig, ctrl: &ControllerSpec) -> LabResult<GapStudy> {
    let g = &cfg.gap;
    let seeds: Vec<u64> = (0..g.flights as u64).map(|i| g.flight_seed_base + i).collect();
    let (real, flights) = evaluate_quad(cfg, ctrl, g.real, &seeds)?;
    let sim_env = cfg.eval_env(g.sim)?;
    let opts = ApgOptions {
        segment_steps: (g.segment_length * cfg.env.control_rate).round() as usize,
        segments: g.segments,
        seed: g.seed,
    };
    let apg = actuation_playback_gap(&flights, &sim_env.dynamics, &opts)?;
    let mut c = ctrl.build(&sim_env);
    let spg = setpoint_playback_gap(&flights, c.as_mut(), &sim_env, &seeds)?;
    Ok(GapStudy { real_profile: g.real, sim_profile: g.sim, real, real_flights: flights, apg, spg })
}

pub fn composition_name(c: Composition) -> &'static str {
    match c {
        Composition::Multiplicative => "multiplicative",
        Composition::Additive => "additive",
        Composition::Neuroflight => "neuroflight",
    }
}

#[derive(Debug, Clone)]
pub struct PendulumStudy {
    /// Additive-trained, then multiplicative-trained.
    pub reports: Vec<VarianceReport>,
    /// Scores of the untrained policy of the first seed.
    pub untrained: PendulumScore,
}

impl PendulumStudy {
    pub fn report(&self, c: Composition) -> Option<&VarianceReport> {
        self.reports.iter().find(|r| r.train_composition == composition_name(c))
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<16} {:>24} {:>24}", "trained \\ test", PENDULUM_METRICS[0], PENDULUM_METRICS[1]);
        for r in &self.reports {
            let cells: Vec<String> = r.per_metric.iter().map(|m| format!("{:.3} +- {:.3}", m.mean, m.std)).collect();
            let _ = writeln!(s, "{:<16} {:>24} {:>24}", r.train_composition, cells[0], cells[1]);
        }
        let u = &self.untrained;
        let _ = writeln!(s, "{:<16} {:>24.3} {:>24.3}", "untrained", u.returns[0], u.returns[1]);
        let _ = writeln!(s);
        let _ = writeln!(s, "{:<16} {:>6} {:>10} {:>10} {:>10}", "trained", "seed", "stand", "velocity", "torque");
        for r in &self.reports {
            for f in &r.finals {
                let c = &f.component_means;
                let _ = writeln!(s, "{:<16} {:>6} {:>10.4} {:>10.4} {:>10.4}", r.train_composition, f.seed, c[0], c[1], c[2]);
            }
        }
        s
    }
}

/// Trains every seed under additive and multiplicative composition and
/// scores the final policies under both test metrics.
pub fn pendulum_study(
    cfg: &ExperimentConfig,
    seeds: &[u64],
    root: Option<&Path>,
    jobs: usize,
    progress: Progress,
) -> LabResult<PendulumStudy> {
    if cfg.task != Task::Pendulum {
        return Err(LabError::Config("the pendulum study needs task = \"pendulum\"".into()));
    }
    let eval_seeds = cfg.eval.seeds();
    let mut reports = vec![];
    for comp in [Composition::Additive, Composition::Multiplicative] {
        let mut c = cfg.clone();
        c.pendulum.composition = comp;
        c.name = format!("{}-{}", cfg.name, composition_name(comp));
        let runs = train_seeds(&c, seeds, root, jobs, progress)?;
        let finals = runs
            .iter()
            .map(|r| {
                let score = evaluate_pendulum(&c.pendulum, &r.net, &eval_seeds)?;
                Ok(SeedFinal { seed: r.seed, scores: score.returns.to_vec(), component_means: score.component_means.to_vec() })
            })
            .collect::<LabResult<Vec<_>>>()?;
        reports.push(VarianceReport::new(composition_name(comp), PENDULUM_METRICS, finals)?);
    }
    let first = *seeds.first().ok_or_else(|| LabError::Usage("no seeds".into()))?;
    let untrained = evaluate_pendulum(&cfg.pendulum, &untrained_policy(cfg, first)?, &eval_seeds)?;
    Ok(PendulumStudy { reports, untrained })
}
