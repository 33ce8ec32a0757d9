//! Evaluation report files, comparisons and plot data.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use ratelab_core::eval::{control_spectrum, Comparison, EvalReport};
use ratelab_core::setpoint::SignalKind;

use crate::config::Profile;
use crate::error::{LabError, LabResult};
use crate::table::{spectrum_table, Table};
use crate::traj_io;

/// `report.toml` written next to evaluation trajectories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportFile {
    pub label: String,
    pub profile: Profile,
    pub signal: SignalKind,
    pub seeds: Vec<u64>,
    pub report: EvalReport,
}

impl ReportFile {
    pub fn to_toml(&self) -> LabResult<String> {
        toml::to_string_pretty(self).map_err(|e| LabError::Config(format!("cannot serialize report: {e}")))
    }

    pub fn parse(text: &str, origin: &Path) -> LabResult<Self> {
        toml::from_str(text).map_err(|e| LabError::Parse { path: origin.into(), msg: e.to_string() })
    }

    pub fn save(&self, path: &Path) -> LabResult<()> {
        std::fs::write(path, self.to_toml()?).map_err(|e| LabError::io(path, e))
    }

    /// Reads a report file, or `report.toml` inside a directory.
    pub fn load(path: &Path) -> LabResult<Self> {
        let p = if path.is_dir() { path.join("report.toml") } else { path.to_path_buf() };
        let text = std::fs::read_to_string(&p).map_err(|e| LabError::io(&p, e))?;
        Self::parse(&text, &p)
    }
}

#[derive(Serialize)]
struct ComparisonRow<'a> {
    label: &'a str,
    lowest_peak: bool,
    lowest_dy: bool,
    /// Against the first row: overall MAE, mean |dy|, mean y, peak magnitude, reward mean.
    deltas: [f64; 5],
    report: &'a EvalReport,
}

#[derive(Serialize)]
struct ComparisonFile<'a> {
    rows: Vec<ComparisonRow<'a>>,
}

/// Machine-readable form of a comparison.
pub fn comparison_toml(c: &Comparison) -> LabResult<String> {
    let rows = c
        .labels
        .iter()
        .zip(&c.reports)
        .enumerate()
        .map(|(i, (label, report))| ComparisonRow {
            label,
            lowest_peak: i == c.lowest_peak,
            lowest_dy: i == c.lowest_dy,
            deltas: c.deltas(i),
            report,
        })
        .collect();
    toml::to_string_pretty(&ComparisonFile { rows }).map_err(|e| LabError::Config(e.to_string()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotOutput {
    pub data: Vec<PathBuf>,
    pub script: PathBuf,
}

struct Series {
    title: &'static str,
    x: usize,
    y: usize,
}

fn project(t: &Table, columns: &[&str]) -> LabResult<Table> {
    let idx = columns
        .iter()
        .map(|c| t.columns.iter().position(|x| x == c))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| LabError::Usage(format!("{} table lacks one of {columns:?}", t.kind)))?;
    let mut out = Table::new(&t.kind, columns);
    t.rows.iter().for_each(|r| out.push(idx.iter().map(|&i| r[i]).collect()));
    Ok(out)
}

/// Writes gnuplot data files and a script rendering them to PNG.
///
/// Accepts trajectories (spectrum and tracking plots), spectrum tables,
/// training curves and gap curves.
pub fn plot(input: &Path, out_dir: &Path) -> LabResult<PlotOutput> {
    let text = std::fs::read_to_string(input).map_err(|e| LabError::io(input, e))?;
    let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("plot").to_string();
    std::fs::create_dir_all(out_dir).map_err(|e| LabError::io(out_dir, e))?;
    let mut sets: Vec<(String, Table, Vec<Series>, &str, &str, bool)> = vec![];
    if text.starts_with(traj_io::MAGIC) {
        let traj = traj_io::parse(&text).map_err(|source| LabError::Trajectory { path: input.into(), source })?;
        let spec = control_spectrum(&traj)?;
        let spec_t = project(&spectrum_table(&spec), &["freq_hz", "magnitude"])?;
        sets.push((format!("{stem}.spectrum"), spec_t, vec![Series { title: "mean motor spectrum", x: 1, y: 2 }], "Hz", "magnitude", true));
        let mut rates = Table::new("rates", &["time_s", "sp_roll", "true_roll", "sp_pitch", "true_pitch", "sp_yaw", "true_yaw"]);
        for r in &traj.rows {
            let (s, t) = (r.setpoint, r.true_rates);
            rates.push(vec![r.step as f64 * traj.dt, s.roll, t.roll, s.pitch, t.pitch, s.yaw, t.yaw]);
        }
        sets.push((
            format!("{stem}.rates"),
            rates,
            (0..6)
                .map(|i| Series {
                    title: ["roll goal", "roll", "pitch goal", "pitch", "yaw goal", "yaw"][i],
                    x: 1,
                    y: i + 2,
                })
                .collect(),
            "s",
            "deg/s",
            false,
        ));
    } else {
        let t = Table::parse(&text).map_err(|msg| LabError::Parse { path: input.into(), msg })?;
        match t.kind.as_str() {
            "spectrum" => {
                let p = project(&t, &["freq_hz", "magnitude"])?;
                sets.push((stem.clone(), p, vec![Series { title: "mean motor spectrum", x: 1, y: 2 }], "Hz", "magnitude", true));
            }
            "curve" => {
                let p = project(&t, &["timestep", "mean_return", "mae", "mean_abs_dy", "mean_y"])?;
                let series = ["mean return", "MAE", "mean |dy|", "mean y"]
                    .iter()
                    .enumerate()
                    .map(|(i, title)| Series { title, x: 1, y: i + 2 })
                    .collect();
                sets.push((stem.clone(), p, series, "timestep", "value", false));
            }
            "apg" | "spg" => {
                let p = project(&t, &["time_s", "mean", "std"])?;
                sets.push((stem.clone(), p, vec![Series { title: "mean gap", x: 1, y: 2 }], "s", "deg/s", false));
            }
            other => return Err(LabError::Usage(format!("cannot plot a `{other}` table"))),
        }
    }
    let mut script = String::from("set terminal pngcairo size 1000,600\nset grid\n");
    let mut data = vec![];
    for (name, table, series, xl, yl, logy) in sets {
        let dat = out_dir.join(format!("{name}.dat"));
        table.save(&dat)?;
        let png = format!("{name}.png");
        script += &format!("set output '{png}'\nset xlabel '{xl}'\nset ylabel '{yl}'\n");
        script += if logy { "set logscale y\n" } else { "unset logscale y\n" };
        let parts: Vec<String> = series
            .iter()
            .map(|s| format!("'{name}.dat' using {}:{} with lines title '{}'", s.x, s.y, s.title))
            .collect();
        script += &format!("plot {}\n", parts.join(", \\\n     "));
        data.push(dat);
    }
    let script_path = out_dir.join(format!("{stem}.gp"));
    std::fs::write(&script_path, script).map_err(|e| LabError::io(&script_path, e))?;
    Ok(PlotOutput { data, script: script_path })
}
