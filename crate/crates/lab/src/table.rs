//! Numeric column tables: training curves, spectra and gap curves.
//!
//! ```text
//! # ratelab <kind> 1
//! # col_a col_b ...
//! 0.0    1.5
//! ```
//!
//! Header lines start with `#`, so gnuplot reads the files directly. Cells
//! are tab separated on write and use the shortest exact decimal form;
//! `NaN` marks a missing value.

use std::path::Path;

use ratelab_core::eval::{GapCurve, Spectrum};
use ratelab_core::train::CurveRecord;

use crate::error::{LabError, LabResult};

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub kind: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(kind: &str, columns: &[&str]) -> Self {
        Self { kind: kind.into(), columns: columns.iter().map(|c| (*c).into()).collect(), rows: vec![] }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn header(&self) -> String {
        format!("# ratelab {} 1\n# {}\n", self.kind, self.columns.join(" "))
    }

    pub fn row_text(row: &[f64]) -> String {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        cells.join("\t") + "\n"
    }

    pub fn to_text(&self) -> String {
        let mut s = self.header();
        for r in &self.rows {
            s.push_str(&Self::row_text(r));
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut lines = text.lines().enumerate();
        let kind = lines
            .next()
            .and_then(|(_, l)| l.strip_prefix("# ratelab "))
            .and_then(|l| l.strip_suffix(" 1"))
            .ok_or("line 1: expected `# ratelab <kind> 1`")?
            .to_string();
        let columns: Vec<String> = lines
            .next()
            .and_then(|(_, l)| l.strip_prefix('#'))
            .ok_or("line 2: expected the `#` column header")?
            .split_whitespace()
            .map(String::from)
            .collect();
        if columns.is_empty() {
            return Err("line 2: no columns".into());
        }
        let mut rows = vec![];
        for (i, line) in lines {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let row = line
                .split_whitespace()
                .map(|c| c.parse::<f64>().map_err(|_| format!("line {}: `{c}` is not a number", i + 1)))
                .collect::<Result<Vec<_>, _>>()?;
            if row.len() != columns.len() {
                return Err(format!("line {}: {} cells for {} columns", i + 1, row.len(), columns.len()));
            }
            rows.push(row);
        }
        Ok(Self { kind, columns, rows })
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn save(&self, path: &Path) -> LabResult<()> {
        std::fs::write(path, self.to_text()).map_err(|e| LabError::io(path, e))
    }

    pub fn load(path: &Path) -> LabResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
        Self::parse(&text).map_err(|msg| LabError::Parse { path: path.into(), msg })
    }
}

pub const CURVE_COLUMNS: [&str; 8] =
    ["timestep", "mean_return", "episode_length", "mean_step_reward", "mae", "mean_abs_dy", "mean_y", "episodes"];

/// Training curve: one row per PPO update. `mean_return` and
/// `episode_length` average the most recent finished episodes and are NaN
/// until one finishes; the other columns cover the update's own steps.
pub fn curve_table(records: &[CurveRecord]) -> Table {
    let mut t = Table::new("curve", &CURVE_COLUMNS);
    records.iter().for_each(|r| t.push(curve_row(r)));
    t
}

pub fn curve_row(r: &CurveRecord) -> Vec<f64> {
    vec![
        r.timestep as f64,
        r.mean_return,
        r.episode_length,
        r.mean_step_reward,
        r.mae,
        r.mean_abs_dy,
        r.mean_y,
        r.episodes as f64,
    ]
}

pub fn curve_records(t: &Table) -> Result<Vec<CurveRecord>, String> {
    if t.kind != "curve" || t.columns != CURVE_COLUMNS {
        return Err(format!("not a curve table (kind {}, columns {:?})", t.kind, t.columns));
    }
    Ok(t.rows
        .iter()
        .map(|r| CurveRecord {
            timestep: r[0] as u64,
            mean_return: r[1],
            episode_length: r[2],
            mean_step_reward: r[3],
            mae: r[4],
            mean_abs_dy: r[5],
            mean_y: r[6],
            episodes: r[7] as u64,
        })
        .collect())
}

/// Motor-mean magnitude followed by each motor's spectrum.
pub fn spectrum_table(s: &Spectrum) -> Table {
    let mut t = Table::new("spectrum", &["freq_hz", "magnitude", "m1", "m2", "m3", "m4"]);
    for (k, f) in s.freqs.iter().enumerate() {
        let mut row = vec![*f, s.mean[k]];
        row.extend(s.per_motor.iter().map(|m| m[k]));
        t.push(row);
    }
    t
}

/// Gap mean and deviation against time since the start of playback. Row
/// `k` holds the gap after `k + 1` control steps.
pub fn gap_table(kind: &str, c: &GapCurve) -> Table {
    let mut t = Table::new(kind, &["time_s", "mean", "std"]);
    for (k, (m, s)) in c.mean.iter().zip(&c.std).enumerate() {
        t.push(vec![(k + 1) as f64 * c.dt, *m, *s]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nan_and_extremes_survive() {
        let mut t = Table::new("curve", &CURVE_COLUMNS);
        t.push(vec![1.0, f64::NAN, f64::MIN_POSITIVE, -0.0, 1e300, 0.1 + 0.2, 5e-324, 3.0]);
        let back = Table::parse(&t.to_text()).unwrap();
        assert_eq!(back.columns, t.columns);
        for (a, b) in back.rows[0].iter().zip(&t.rows[0]) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn ragged_row_rejected() {
        let err = Table::parse("# ratelab gap 1\n# a b\n1 2\n3\n").unwrap_err();
        assert!(err.starts_with("line 4"), "{err}");
    }
}
