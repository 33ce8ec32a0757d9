//! Cross-seed variance summaries.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Sample mean and standard deviation (n - 1 denominator).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Requires at least two values; the deviation is undefined otherwise.
    pub fn of(xs: &[f64]) -> Result<Self> {
        if xs.len() < 2 {
            return Err(Error::Usage(format!("deviation needs at least 2 values, got {}", xs.len())));
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        Ok(Self { mean, std: libm::sqrt(var) })
    }
}

/// Final scores of one seed under every test metric.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedFinal {
    pub seed: u64,
    pub scores: Vec<f64>,
    /// Episode mean of each reward component.
    pub component_means: Vec<f64>,
}

/// One training composition evaluated under several test metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceReport {
    pub train_composition: String,
    pub metric_labels: Vec<String>,
    pub finals: Vec<SeedFinal>,
    pub per_metric: Vec<MeanStd>,
}

pub const MIN_SEEDS: usize = 3;

impl VarianceReport {
    pub fn new(train_composition: &str, metric_labels: &[&str], finals: Vec<SeedFinal>) -> Result<Self> {
        if finals.len() < MIN_SEEDS {
            return Err(Error::Usage(format!(
                "a variance study needs at least {MIN_SEEDS} seeds, got {}",
                finals.len()
            )));
        }
        if finals.iter().any(|f| f.scores.len() != metric_labels.len()) {
            return Err(Error::Usage("every seed needs one score per test metric".into()));
        }
        let per_metric = (0..metric_labels.len())
            .map(|m| MeanStd::of(&finals.iter().map(|f| f.scores[m]).collect::<Vec<_>>()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            train_composition: train_composition.into(),
            metric_labels: metric_labels.iter().map(|s| (*s).into()).collect(),
            finals,
            per_metric,
        })
    }
}
