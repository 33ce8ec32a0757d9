//! Side-by-side controller comparison.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::error::{Error, Result};
use crate::eval::metrics::EvalReport;

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub labels: Vec<String>,
    pub reports: Vec<EvalReport>,
    /// Index of the lowest peak spectral magnitude above the floor.
    pub lowest_peak: usize,
    /// Index of the lowest mean |dy|.
    pub lowest_dy: usize,
}

fn argmin(xs: impl Iterator<Item = f64>) -> usize {
    xs.enumerate().fold((0, f64::INFINITY), |b, (i, x)| if x < b.1 { (i, x) } else { b }).0
}

impl Comparison {
    /// Differences of `row` against the first report, in table column order.
    pub fn deltas(&self, row: usize) -> [f64; 5] {
        let (a, b) = (&self.reports[0], &self.reports[row]);
        [
            b.overall_mae - a.overall_mae,
            b.mean_abs_dy - a.mean_abs_dy,
            b.mean_y - a.mean_y,
            b.peak_magnitude - a.peak_magnitude,
            b.reward_mean - a.reward_mean,
        ]
    }

    /// Whitespace-aligned text table.
    pub fn render(&self) -> String {
        let w = self.labels.iter().map(|l| l.len()).max().unwrap_or(0).max(10);
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<w$}  {:>8} {:>8} {:>8} {:>8} {:>10} {:>9} {:>10} {:>10} {:>5}",
            "controller", "mae_r", "mae_p", "mae_y", "mae", "mean|dy|", "mean_y", "peak_hz", "peak_mag", "early"
        );
        for (i, (l, r)) in self.labels.iter().zip(&self.reports).enumerate() {
            let mut flags = String::new();
            if i == self.lowest_peak {
                flags.push_str(" *peak");
            }
            if i == self.lowest_dy {
                flags.push_str(" *dy");
            }
            let _ = writeln!(
                s,
                "{:<w$}  {:>8.3} {:>8.3} {:>8.3} {:>8.3} {:>10.6} {:>9.4} {:>10.2} {:>10.6} {:>5}{}",
                l,
                r.per_axis_mae[0],
                r.per_axis_mae[1],
                r.per_axis_mae[2],
                r.overall_mae,
                r.mean_abs_dy,
                r.mean_y,
                r.peak_freq,
                r.peak_magnitude,
                r.early_terminations,
                flags
            );
        }
        s
    }
}

pub fn compare_report(reports: &[EvalReport], labels: &[&str]) -> Result<Comparison> {
    if reports.len() < 2 {
        return Err(Error::Usage(format!("comparison needs at least 2 reports, got {}", reports.len())));
    }
    if labels.len() != reports.len() {
        return Err(Error::Usage("one label per report required".into()));
    }
    Ok(Comparison {
        labels: labels.iter().map(|s| String::from(*s)).collect(),
        reports: reports.to_vec(),
        lowest_peak: argmin(reports.iter().map(|r| r.peak_magnitude)),
        lowest_dy: argmin(reports.iter().map(|r| r.mean_abs_dy)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rep(dy: f64, peak: f64) -> EvalReport {
        EvalReport {
            per_axis_mae: [1.0, 2.0, 3.0],
            overall_mae: 2.0,
            episode_mean_mae: 2.0,
            mean_abs_dy: dy,
            mean_y: 0.34,
            peak_freq: 40.0,
            peak_magnitude: peak,
            early_terminations: 0,
            reward_mean: 0.5,
            episodes: 1,
            steps: 1000,
        }
    }

    #[test]
    fn duplicate_has_zero_deltas() {
        let c = compare_report(&[rep(0.1, 0.2), rep(0.1, 0.2)], &["a", "b"]).unwrap();
        assert_eq!(c.deltas(1), [0.0; 5]);
    }

    #[test]
    fn flags_smoothest_and_renders_rows() {
        let c = compare_report(&[rep(0.1, 0.2), rep(0.01, 0.02), rep(0.2, 0.3)], &["pid", "mult", "neuroflight"]).unwrap();
        assert_eq!((c.lowest_peak, c.lowest_dy), (1, 1));
        let t = c.render();
        assert_eq!(t.lines().count(), 4);
        assert!(t.contains("neuroflight"));
    }

    #[test]
    fn single_report_rejected() {
        assert!(compare_report(&[rep(0.1, 0.1)], &["x"]).is_err());
    }
}
