//! Command line front end.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use ratelab_core::control::ziegler_nichols_tune;
use ratelab_core::eval::compare_report;
use ratelab_core::setpoint::{GoalSignal, SignalKind};
use ratelab_core::train::CurveRecord;
use ratelab_core::types::{Trajectory, TrajectoryRow};
use ratelab_core::{AngularRates, MotorCommand};

use crate::checks::{Outcome, Study};
use crate::config::{preset, ExperimentConfig, GainsFile, Profile, Task, PRESETS};
use crate::error::{exit, LabError, LabResult};
use crate::experiment::{evaluate_quad, gap_study, pendulum_study, train_seeds, ControllerSpec};
use crate::report::{comparison_toml, plot, ReportFile};
use crate::table::gap_table;
use crate::{traj_io, weights};

/// Attitude-rate control laboratory: train, tune, evaluate and analyse
/// quadrotor rate controllers.
#[derive(Debug, Parser)]
#[command(name = "ratelab", version)]
pub struct Cli {
    /// Root for run and report directories.
    #[arg(long, global = true, env = "RATELAB_OUT", value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads (default: available cores).
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train PPO policies, one run directory per seed.
    Train(TrainArgs),
    /// Ziegler-Nichols tuning of the rate PID on the nominal plant.
    TunePid(TuneArgs),
    /// Fly a policy or PID controller on seeded validation episodes.
    Eval(EvalArgs),
    /// Actuation and set-point playback gaps between two profiles.
    Gap(GapArgs),
    /// Side-by-side table of evaluation reports.
    Compare(CompareArgs),
    /// Gnuplot data files and script for a trajectory, curve, spectrum or gap file.
    Plot(PlotArgs),
    /// Write a set-point signal to a trajectory file.
    Signal(SignalArgs),
    /// Additive against multiplicative training on the pendulum.
    Study(StudyArgs),
    /// Run acceptance checks.
    Check(CheckArgs),
    /// List the built-in experiment configs, or print one.
    Presets {
        /// Print this preset as TOML.
        name: Option<String>,
    },
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Config file or preset name.
    #[arg(long, short, default_value = "quad-multiplicative", value_name = "FILE|PRESET")]
    pub config: String,
    /// Override a config key, e.g. `train.total_timesteps=2000`. Repeatable.
    #[arg(long = "override", short = 'o', value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Train seeds 0..N instead of the configured list.
    #[arg(long, value_name = "N", conflicts_with = "seed_list")]
    pub seeds: Option<u64>,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',', value_name = "S,S,...")]
    pub seed_list: Option<Vec<u64>>,
    /// Suppress per-update progress lines.
    #[arg(long, short)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Gains file to write.
    #[arg(long, default_value = "gains.toml", value_name = "FILE")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
#[group(id = "controller", required = true, multiple = false)]
pub struct ControllerArgs {
    /// Policy weights file.
    #[arg(long, value_name = "FILE", group = "controller")]
    pub weights: Option<PathBuf>,
    /// PID gains file.
    #[arg(long, value_name = "FILE", group = "controller")]
    pub gains: Option<PathBuf>,
}

impl ControllerArgs {
    fn load(&self) -> LabResult<(ControllerSpec, String)> {
        match (&self.weights, &self.gains) {
            (Some(w), _) => Ok((ControllerSpec::Policy(weights::load(w)?), stem(w))),
            (_, Some(g)) => Ok((ControllerSpec::Pid(GainsFile::load(g)?), stem(g))),
            _ => Err(LabError::Usage("give --weights or --gains".into())),
        }
    }
}

fn stem(p: &Path) -> String {
    p.file_stem().and_then(|s| s.to_str()).unwrap_or("controller").to_string()
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub controller: ControllerArgs,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long, value_name = "nominal|perturbed")]
    pub profile: Option<Profile>,
    #[arg(long, value_parser = parse_signal, value_name = "perlin|step")]
    pub signal: Option<SignalKind>,
    #[arg(long, value_name = "N")]
    pub episodes: Option<usize>,
    /// First episode seed.
    #[arg(long, value_name = "SEED")]
    pub seed_base: Option<u64>,
    /// Name shown in comparison tables.
    #[arg(long)]
    pub label: Option<String>,
    /// Output directory (default: <out>/eval-<label>-<profile>-<signal>).
    #[arg(long, value_name = "DIR")]
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GapArgs {
    #[command(flatten)]
    pub controller: ControllerArgs,
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Profile standing in for real flight.
    #[arg(long, value_name = "nominal|perturbed")]
    pub real: Option<Profile>,
    #[arg(long, value_name = "nominal|perturbed")]
    pub sim: Option<Profile>,
    #[arg(long, value_name = "N")]
    pub segments: Option<usize>,
    /// Segment length in seconds.
    #[arg(long, value_name = "SECONDS")]
    pub length: Option<f64>,
    /// Logged real flights to draw segments from.
    #[arg(long, value_name = "N")]
    pub flights: Option<usize>,
    /// Output directory (default: <out>/gap-<label>-<real>-<sim>).
    #[arg(long, value_name = "DIR")]
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Report files, or directories holding `report.toml`.
    #[arg(required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    /// Also write the comparison as TOML.
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    pub input: PathBuf,
    /// Directory for data files and the script (default: next to the input).
    #[arg(long, value_name = "DIR")]
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SignalArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long, value_parser = parse_signal, value_name = "perlin|step")]
    pub signal: Option<SignalKind>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Seconds.
    #[arg(long, value_name = "SECONDS")]
    pub length: Option<f64>,
    /// deg/s.
    #[arg(long, value_name = "DEG_PER_S")]
    pub max_rate: Option<f64>,
    #[arg(long, default_value = "signal.traj", value_name = "FILE")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long, value_name = "N", conflicts_with = "seed_list")]
    pub seeds: Option<u64>,
    #[arg(long, value_delimiter = ',', value_name = "S,S,...")]
    pub seed_list: Option<Vec<u64>>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// Exit with code 3 when a criterion fails.
    #[arg(long)]
    pub assert: bool,
    /// Criteria to run (default 1,2,3; 4 to 8 train policies).
    #[arg(long, value_delimiter = ',', value_name = "N,N,...")]
    pub criteria: Option<Vec<u8>>,
    /// Print per-check detail lines.
    #[arg(long, short)]
    pub verbose: bool,
}

fn parse_signal(s: &str) -> Result<SignalKind, String> {
    match s {
        "perlin" => Ok(SignalKind::Perlin),
        "step" => Ok(SignalKind::Step),
        _ => Err(format!("unknown signal `{s}` (perlin, step)")),
    }
}

fn signal_name(k: SignalKind) -> &'static str {
    match k {
        SignalKind::Perlin => "perlin",
        SignalKind::Step => "step",
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

struct Ctx {
    out: Option<PathBuf>,
    jobs: usize,
}

impl Ctx {
    fn root(&self, cfg: &ExperimentConfig) -> PathBuf {
        self.out.clone().or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("runs"))
    }
}

fn dispatch(cli: &Cli) -> LabResult<i32> {
    let jobs = cli.jobs.unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    if jobs == 0 {
        return Err(LabError::Usage("--jobs must be at least 1".into()));
    }
    let ctx = Ctx { out: cli.out.clone(), jobs };
    match &cli.command {
        Command::Train(a) => cmd_train(&ctx, a),
        Command::TunePid(a) => cmd_tune(a),
        Command::Eval(a) => cmd_eval(&ctx, a),
        Command::Gap(a) => cmd_gap(&ctx, a),
        Command::Compare(a) => cmd_compare(a),
        Command::Plot(a) => cmd_plot(a),
        Command::Signal(a) => cmd_signal(a),
        Command::Study(a) => cmd_study(&ctx, a),
        Command::Check(a) => cmd_check(&ctx, a),
        Command::Presets { name } => cmd_presets(name.as_deref()),
    }
    .map(|()| exit::OK)
}

fn load_config(a: &ConfigArgs) -> LabResult<ExperimentConfig> {
    ExperimentConfig::load_or_preset(&a.config, &a.overrides)
}

fn seed_selection(cfg: &ExperimentConfig, n: Option<u64>, list: &Option<Vec<u64>>) -> Vec<u64> {
    match (n, list) {
        (Some(n), _) => (0..n).collect(),
        (_, Some(l)) => l.clone(),
        _ => cfg.train.seeds.clone(),
    }
}

fn progress_line(seed: u64, c: &CurveRecord) {
    println!(
        "seed {seed:>3}  step {:>9}  return {:>10.3}  mae {:>8.3}  |dy| {:.3e}  y {:.3}",
        c.timestep, c.mean_return, c.mae, c.mean_abs_dy, c.mean_y
    );
}

fn cmd_train(ctx: &Ctx, a: &TrainArgs) -> LabResult<()> {
    let mut cfg = load_config(&a.config)?;
    cfg.train.seeds = seed_selection(&cfg, a.seeds, &a.seed_list);
    if cfg.train.seeds.is_empty() {
        return Err(LabError::Usage("no seeds to train".into()));
    }
    let root = ctx.root(&cfg);
    let quiet = |_: u64, _: &CurveRecord| {};
    let runs = train_seeds(
        &cfg,
        &cfg.train.seeds,
        Some(&root),
        ctx.jobs,
        if a.quiet { &quiet } else { &progress_line },
    )?;
    for r in &runs {
        let dir = r.dir.as_ref().map(|d| d.path().display().to_string()).unwrap_or_default();
        let last = r.curve.last();
        println!(
            "seed {} done: {} steps, final MAE {:.3} -> {dir}",
            r.seed,
            last.map_or(0, |c| c.timestep),
            last.map_or(f64::NAN, |c| c.mae)
        );
    }
    Ok(())
}

fn cmd_tune(a: &TuneArgs) -> LabResult<()> {
    let cfg = load_config(&a.config)?;
    let z = ziegler_nichols_tune(&cfg.dynamics.nominal, &cfg.tune)?;
    for (axis, u) in ["roll", "pitch", "yaw"].iter().zip(&z.ultimate) {
        println!("{axis:<5} ultimate gain {:.6}  period {:.4} s", u.gain, u.period);
    }
    let g = GainsFile { hover: cfg.tune.hover, pid: z.gains, ultimate: z.ultimate.to_vec() };
    g.save(&a.output)?;
    println!("wrote {}", a.output.display());
    Ok(())
}

fn cmd_eval(ctx: &Ctx, a: &EvalArgs) -> LabResult<()> {
    let mut cfg = load_config(&a.config)?;
    let (ctrl, default_label) = a.controller.load()?;
    let e = &mut cfg.eval;
    e.profile = a.profile.unwrap_or(e.profile);
    e.signal = a.signal.unwrap_or(e.signal);
    e.episodes = a.episodes.unwrap_or(e.episodes);
    e.seed_base = a.seed_base.unwrap_or(e.seed_base);
    cfg.validate()?;
    let label = a.label.clone().unwrap_or(default_label);
    let (profile, signal) = (cfg.eval.profile, cfg.eval.signal);
    let dir = a
        .dir
        .clone()
        .unwrap_or_else(|| ctx.root(&cfg).join(format!("eval-{label}-{}-{}", profile.name(), signal_name(signal))));
    std::fs::create_dir_all(&dir).map_err(|e| LabError::io(&dir, e))?;
    let seeds = cfg.eval.seeds();
    let (report, trajs) = evaluate_quad(&cfg, &ctrl, profile, &seeds)?;
    for (s, t) in seeds.iter().zip(&trajs) {
        traj_io::save(&dir.join(format!("episode_{s}.traj")), t)?;
    }
    cfg.save(&dir.join("config.toml"))?;
    let file = ReportFile { label: label.clone(), profile, signal, seeds, report };
    file.save(&dir.join("report.toml"))?;
    print_report(&file);
    println!("wrote {}", dir.display());
    Ok(())
}

fn print_report(f: &ReportFile) {
    let r = &f.report;
    println!("{} on {} profile, {} signal, {} episodes ({} steps)", f.label, f.profile.name(), signal_name(f.signal), r.episodes, r.steps);
    println!(
        "MAE roll {:.3}  pitch {:.3}  yaw {:.3}  overall {:.3} deg/s (episode mean {:.3})",
        r.per_axis_mae[0], r.per_axis_mae[1], r.per_axis_mae[2], r.overall_mae, r.episode_mean_mae
    );
    println!("mean |dy| {:.4e}  mean y {:.4}  reward {:.4}", r.mean_abs_dy, r.mean_y, r.reward_mean);
    println!("spectrum peak above 5 Hz: {:.4e} at {:.2} Hz", r.peak_magnitude, r.peak_freq);
    println!("early terminations {}", r.early_terminations);
}

fn cmd_gap(ctx: &Ctx, a: &GapArgs) -> LabResult<()> {
    let mut cfg = load_config(&a.config)?;
    let (ctrl, label) = a.controller.load()?;
    let g = &mut cfg.gap;
    g.real = a.real.unwrap_or(g.real);
    g.sim = a.sim.unwrap_or(g.sim);
    g.segments = a.segments.unwrap_or(g.segments);
    g.segment_length = a.length.unwrap_or(g.segment_length);
    g.flights = a.flights.unwrap_or(g.flights);
    cfg.validate()?;
    let dir = a
        .dir
        .clone()
        .unwrap_or_else(|| ctx.root(&cfg).join(format!("gap-{label}-{}-{}", cfg.gap.real.name(), cfg.gap.sim.name())));
    std::fs::create_dir_all(&dir).map_err(|e| LabError::io(&dir, e))?;
    let study = gap_study(&cfg, &ctrl)?;
    gap_table("apg", &study.apg.curve).save(&dir.join("apg.dat"))?;
    gap_table("spg", &study.spg.curve).save(&dir.join("spg.dat"))?;
    let summary = study.summary();
    std::fs::write(dir.join("summary.txt"), &summary).map_err(|e| LabError::io(dir.join("summary.txt"), e))?;
    cfg.save(&dir.join("config.toml"))?;
    print!("{summary}");
    println!("wrote {}", dir.display());
    Ok(())
}

fn cmd_compare(a: &CompareArgs) -> LabResult<()> {
    let files = a.inputs.iter().map(|p| ReportFile::load(p)).collect::<LabResult<Vec<_>>>()?;
    let labels: Vec<&str> = files.iter().map(|f| f.label.as_str()).collect();
    let reports: Vec<_> = files.iter().map(|f| f.report.clone()).collect();
    let c = compare_report(&reports, &labels)?;
    print!("{}", c.render());
    if let Some(out) = &a.output {
        std::fs::write(out, comparison_toml(&c)?).map_err(|e| LabError::io(out, e))?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

fn cmd_plot(a: &PlotArgs) -> LabResult<()> {
    let dir = a.dir.clone().unwrap_or_else(|| a.input.parent().map(Path::to_path_buf).unwrap_or_default());
    let out = plot(&a.input, &dir)?;
    for d in &out.data {
        println!("wrote {}", d.display());
    }
    println!("wrote {} (render with `gnuplot {}` inside {})", out.script.display(), stem(&out.script), dir.display());
    Ok(())
}

fn cmd_signal(a: &SignalArgs) -> LabResult<()> {
    let cfg = load_config(&a.config)?;
    let mut sp = cfg.setpoint.clone();
    sp.kind = a.signal.unwrap_or(sp.kind);
    sp.episode_length = a.length.unwrap_or(sp.episode_length);
    sp.max_rate = a.max_rate.unwrap_or(sp.max_rate);
    sp.validate()?;
    let signal = GoalSignal::new(&sp, a.seed);
    let dt = 1.0 / cfg.env.control_rate;
    let mut t = Trajectory::new(dt, vec![]);
    let steps = (sp.episode_length / dt).round() as usize;
    for k in 0..steps {
        t.push(TrajectoryRow {
            step: 0,
            setpoint: signal.at(k as f64 * dt),
            measured: AngularRates::ZERO,
            true_rates: AngularRates::ZERO,
            action: MotorCommand::splat(0.0),
            motors: [0.0; 4],
            rewards: vec![],
            reward: 0.0,
            terminated: false,
        });
    }
    traj_io::save(&a.output, &t)?;
    println!("wrote {} ({steps} steps, {} signal, seed {})", a.output.display(), signal_name(sp.kind), a.seed);
    Ok(())
}

fn cmd_study(ctx: &Ctx, a: &StudyArgs) -> LabResult<()> {
    let mut cfg = ExperimentConfig::load_or_preset(
        if a.config.config == "quad-multiplicative" { "pendulum-study" } else { &a.config.config },
        &a.config.overrides,
    )?;
    if cfg.task != Task::Pendulum {
        return Err(LabError::Config("the study command needs a pendulum config".into()));
    }
    cfg.train.seeds = seed_selection(&cfg, a.seeds, &a.seed_list);
    let root = ctx.root(&cfg);
    let report = |seed: u64, c: &CurveRecord| {
        if c.timestep >= cfg.train.total_timesteps {
            println!("seed {seed} trained: {} steps, mean return {:.3}", c.timestep, c.mean_return);
        }
    };
    let study = pendulum_study(&cfg, &cfg.train.seeds, Some(&root), ctx.jobs, &report)?;
    let text = study.render();
    let path = root.join(format!("{}-summary.txt", cfg.name));
    std::fs::write(&path, &text).map_err(|e| LabError::io(&path, e))?;
    print!("{text}");
    println!("wrote {}", path.display());
    Ok(())
}

fn print_outcome(o: &Outcome, verbose: bool) {
    println!("{}", o.headline());
    if verbose || !o.passed {
        for l in &o.lines {
            println!("    {l}");
        }
    }
}

fn cmd_check(ctx: &Ctx, a: &CheckArgs) -> LabResult<()> {
    let ids = a.criteria.clone().unwrap_or_else(|| vec![1, 2, 3]);
    if let Some(bad) = ids.iter().find(|i| !(1..=8).contains(*i)) {
        return Err(LabError::Usage(format!("no criterion {bad} (1 to 8)")));
    }
    let mut study = Study::new(ctx.jobs);
    study.root = ctx.out.clone();
    study.cli = std::env::current_exe().ok();
    let mut failed = vec![];
    for id in ids {
        let o = study.run(id);
        print_outcome(&o, a.verbose);
        if !o.passed {
            failed.push(id.to_string());
        }
    }
    if a.assert && !failed.is_empty() {
        return Err(LabError::CheckFailed(format!("criteria {}", failed.join(", "))));
    }
    Ok(())
}

fn cmd_presets(name: Option<&str>) -> LabResult<()> {
    match name {
        None => PRESETS.iter().for_each(|p| println!("{p}")),
        Some(n) => {
            let cfg = preset(n).ok_or_else(|| LabError::Usage(format!("unknown preset `{n}` (one of {})", PRESETS.join(", "))))?;
            print!("{}", cfg.to_toml()?);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }
}
