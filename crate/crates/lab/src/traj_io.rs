//! Line-oriented text format for trajectories.
//!
//! ```text
//! # ratelab trajectory 1
//! # dt 0.001
//! step time sp_roll sp_pitch sp_yaw gyro_roll gyro_pitch gyro_yaw true_roll true_pitch true_yaw y1 y2 y3 y4 m1 m2 m3 m4 r:<label>... reward terminated
//! 0 0.0 ...
//! ```
//!
//! Cells are separated by tabs on write and by any whitespace on read.
//! Numbers use the shortest decimal text that parses back to the same
//! `f64`, so a write/read cycle is exact. Reward-component columns carry an
//! `r:` prefix and may be absent. `time` is optional on read and, when
//! present, must equal `step * dt`.

use std::fmt::Write as _;
use std::path::Path;

use ratelab_core::{AngularRates, MotorCommand, Trajectory, TrajectoryRow};

use crate::error::{LabError, LabResult};

pub const MAGIC: &str = "# ratelab trajectory 1";
const REWARD_PREFIX: &str = "r:";

const RATE_COLUMNS: [&str; 9] = [
    "sp_roll", "sp_pitch", "sp_yaw", "gyro_roll", "gyro_pitch", "gyro_yaw", "true_roll", "true_pitch", "true_yaw",
];
const ACTION_COLUMNS: [&str; 4] = ["y1", "y2", "y3", "y4"];
const MOTOR_COLUMNS: [&str; 4] = ["m1", "m2", "m3", "m4"];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrajFormatError {
    #[error("line 1: expected `{MAGIC}`")]
    MissingMagic,
    #[error("line {line}: {msg}")]
    BadHeader { line: usize, msg: String },
    #[error("line {line}: dt must be a positive finite number, got `{text}`")]
    BadDt { line: usize, text: String },
    #[error("required column `{0}` is missing")]
    MissingColumn(String),
    #[error("line {line}: expected {expected} cells, found {found}")]
    CellCount { line: usize, expected: usize, found: usize },
    #[error("line {line}, column `{column}`: `{cell}` is not a number")]
    NotNumeric { line: usize, column: String, cell: String },
    #[error("line {line}: step {found} breaks the contiguous sequence (expected {expected})")]
    NonContiguous { line: usize, expected: u64, found: u64 },
    #[error("line {line}: time {found} does not match step * dt = {expected}; dt must be uniform")]
    NonUniformTime { line: usize, expected: f64, found: f64 },
}

fn push_f(out: &mut String, v: f64) {
    out.push('\t');
    let _ = write!(out, "{v:?}");
}

/// Serializes a trajectory. Reward labels must be non-empty and free of
/// whitespace.
pub fn to_text(t: &Trajectory) -> Result<String, TrajFormatError> {
    if t.reward_labels.iter().any(|l| l.is_empty() || l.chars().any(char::is_whitespace)) {
        return Err(TrajFormatError::BadHeader { line: 3, msg: "reward labels must be non-empty words".into() });
    }
    let mut out = String::with_capacity(64 + t.len() * 200);
    let _ = writeln!(out, "{MAGIC}\n# dt {:?}", t.dt);
    out.push_str("step\ttime");
    for c in RATE_COLUMNS.iter().chain(&ACTION_COLUMNS).chain(&MOTOR_COLUMNS) {
        out.push('\t');
        out.push_str(c);
    }
    for l in &t.reward_labels {
        let _ = write!(out, "\t{REWARD_PREFIX}{l}");
    }
    out.push_str("\treward\tterminated\n");
    for r in &t.rows {
        let _ = write!(out, "{}", r.step);
        push_f(&mut out, r.step as f64 * t.dt);
        for rates in [r.setpoint, r.measured, r.true_rates] {
            for v in rates.to_array() {
                push_f(&mut out, v);
            }
        }
        for v in r.action.0.iter().chain(&r.motors).chain(&r.rewards) {
            push_f(&mut out, *v);
        }
        push_f(&mut out, r.reward);
        out.push_str(if r.terminated { "\t1\n" } else { "\t0\n" });
    }
    Ok(out)
}

struct Layout {
    n: usize,
    step: usize,
    time: Option<usize>,
    rates: [usize; 9],
    action: [usize; 4],
    motors: [usize; 4],
    rewards: Vec<usize>,
    reward: usize,
    terminated: usize,
    names: Vec<String>,
}

fn layout(header: &str, line: usize) -> Result<(Layout, Vec<String>), TrajFormatError> {
    let names: Vec<String> = header.split_whitespace().map(String::from).collect();
    for (i, n) in names.iter().enumerate() {
        if names[..i].contains(n) {
            return Err(TrajFormatError::BadHeader { line, msg: format!("duplicate column `{n}`") });
        }
    }
    let find = |name: &str| names.iter().position(|n| n == name);
    let need = |name: &str| find(name).ok_or_else(|| TrajFormatError::MissingColumn(name.into()));
    let mut labels = Vec::new();
    let mut rewards = Vec::new();
    for (i, n) in names.iter().enumerate() {
        if let Some(label) = n.strip_prefix(REWARD_PREFIX) {
            if label.is_empty() {
                return Err(TrajFormatError::BadHeader { line, msg: "empty reward label".into() });
            }
            labels.push(label.to_string());
            rewards.push(i);
        } else if !(["step", "time", "reward", "terminated"].contains(&n.as_str())
            || RATE_COLUMNS.contains(&n.as_str())
            || ACTION_COLUMNS.contains(&n.as_str())
            || MOTOR_COLUMNS.contains(&n.as_str()))
        {
            return Err(TrajFormatError::BadHeader { line, msg: format!("unknown column `{n}`") });
        }
    }
    let mut rates = [0; 9];
    for (slot, name) in rates.iter_mut().zip(RATE_COLUMNS) {
        *slot = need(name)?;
    }
    let mut action = [0; 4];
    for (slot, name) in action.iter_mut().zip(ACTION_COLUMNS) {
        *slot = need(name)?;
    }
    let mut motors = [0; 4];
    for (slot, name) in motors.iter_mut().zip(MOTOR_COLUMNS) {
        *slot = need(name)?;
    }
    Ok((
        Layout {
            n: names.len(),
            step: need("step")?,
            time: find("time"),
            rates,
            action,
            motors,
            rewards,
            reward: need("reward")?,
            terminated: need("terminated")?,
            names,
        },
        labels,
    ))
}

fn number(cells: &[&str], idx: usize, lay: &Layout, line: usize) -> Result<f64, TrajFormatError> {
    cells[idx].parse::<f64>().map_err(|_| TrajFormatError::NotNumeric {
        line,
        column: lay.names[idx].clone(),
        cell: cells[idx].into(),
    })
}

pub fn parse(text: &str) -> Result<Trajectory, TrajFormatError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, l)) if l.trim_end() == MAGIC => {}
        _ => return Err(TrajFormatError::MissingMagic),
    }
    let (dt_line, dt_text) = lines.next().ok_or(TrajFormatError::BadHeader { line: 2, msg: "missing `# dt` line".into() })?;
    let dt_text = dt_text
        .strip_prefix("# dt")
        .ok_or(TrajFormatError::BadHeader { line: dt_line, msg: "expected `# dt <seconds>`".into() })?
        .trim();
    let dt = dt_text
        .parse::<f64>()
        .ok()
        .filter(|d| *d > 0.0 && d.is_finite())
        .ok_or_else(|| TrajFormatError::BadDt { line: dt_line, text: dt_text.into() })?;
    let (hl, header) = lines.next().ok_or(TrajFormatError::BadHeader { line: 3, msg: "missing column header".into() })?;
    let (lay, labels) = layout(header, hl)?;

    let mut traj = Trajectory::new(dt, labels);
    for (line, text) in lines {
        if text.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = text.split_whitespace().collect();
        if cells.len() != lay.n {
            return Err(TrajFormatError::CellCount { line, expected: lay.n, found: cells.len() });
        }
        let expected = traj.len() as u64;
        let step = cells[lay.step].parse::<u64>().map_err(|_| TrajFormatError::NotNumeric {
            line,
            column: "step".into(),
            cell: cells[lay.step].into(),
        })?;
        if step != expected {
            return Err(TrajFormatError::NonContiguous { line, expected, found: step });
        }
        if let Some(ti) = lay.time {
            let t = number(&cells, ti, &lay, line)?;
            let want = step as f64 * dt;
            if (t - want).abs() > 1e-9 * want.abs().max(1.0) {
                return Err(TrajFormatError::NonUniformTime { line, expected: want, found: t });
            }
        }
        let mut rates = [0.0; 9];
        for (v, &i) in rates.iter_mut().zip(&lay.rates) {
            *v = number(&cells, i, &lay, line)?;
        }
        let mut action = [0.0; 4];
        for (v, &i) in action.iter_mut().zip(&lay.action) {
            *v = number(&cells, i, &lay, line)?;
        }
        let mut motors = [0.0; 4];
        for (v, &i) in motors.iter_mut().zip(&lay.motors) {
            *v = number(&cells, i, &lay, line)?;
        }
        let rewards = lay.rewards.iter().map(|&i| number(&cells, i, &lay, line)).collect::<Result<Vec<_>, _>>()?;
        let terminated = match cells[lay.terminated] {
            "0" => false,
            "1" => true,
            other => {
                return Err(TrajFormatError::NotNumeric { line, column: "terminated".into(), cell: other.into() })
            }
        };
        traj.push(TrajectoryRow {
            step,
            setpoint: AngularRates::new(rates[0], rates[1], rates[2]),
            measured: AngularRates::new(rates[3], rates[4], rates[5]),
            true_rates: AngularRates::new(rates[6], rates[7], rates[8]),
            action: MotorCommand(action),
            motors,
            rewards,
            reward: number(&cells, lay.reward, &lay, line)?,
            terminated,
        });
    }
    Ok(traj)
}

pub fn save(path: &Path, t: &Trajectory) -> LabResult<()> {
    let text = to_text(t).map_err(|source| LabError::Trajectory { path: path.into(), source })?;
    std::fs::write(path, text).map_err(|e| LabError::io(path, e))
}

pub fn load(path: &Path) -> LabResult<Trajectory> {
    let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
    parse(&text).map_err(|source| LabError::Trajectory { path: path.into(), source })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(k: f64) -> TrajectoryRow {
        TrajectoryRow {
            step: 0,
            setpoint: AngularRates::new(k, -k, 0.1 * k),
            measured: AngularRates::new(0.3, 1e-300, -7.25),
            true_rates: AngularRates::new(0.1 + k, 2.0, f64::MIN_POSITIVE),
            action: MotorCommand([0.34, 0.5, 1.0 / 3.0, 0.0]),
            motors: [0.2, 0.2, 0.2, 0.2],
            rewards: vec![0.5, 0.25, 1e-6],
            reward: 0.123_456_789_012_345_67,
            terminated: k > 1.0,
        }
    }

    #[test]
    fn header_only_round_trip() {
        let t = Trajectory::new(0.001, vec![]);
        let text = to_text(&t).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert_eq!(parse(&text).unwrap(), t);
    }

    #[test]
    fn rows_round_trip_exactly() {
        let mut t = Trajectory::new(0.001, vec!["r_s".into(), "r_u".into(), "r_c".into()]);
        for k in [0.0, 0.7, 2.0] {
            t.push(row(k));
        }
        assert_eq!(parse(&to_text(&t).unwrap()).unwrap(), t);
    }

    #[test]
    fn column_order_is_free() {
        let mut t = Trajectory::new(0.002, vec!["a".into()]);
        let mut r = row(1.0);
        r.rewards = vec![0.5];
        t.push(r);
        let text = to_text(&t).unwrap();
        let lines: Vec<Vec<&str>> = text.lines().skip(2).map(|l| l.split('\t').collect()).collect();
        let mut swapped = String::from("# ratelab trajectory 1\n# dt 0.002\n");
        for cells in lines {
            let mut c = cells.clone();
            c.swap(2, 10);
            c.remove(1);
            swapped.push_str(&c.join(" "));
            swapped.push('\n');
        }
        assert_eq!(parse(&swapped).unwrap(), t);
    }
}
