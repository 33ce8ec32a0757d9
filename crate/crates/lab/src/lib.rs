//! File formats, configuration and experiment plumbing around `ratelab-core`.

pub use ratelab_core as core;

pub mod checks;
pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod report;
pub mod table;
pub mod traj_io;
pub mod weights;

pub use error::{exit, LabError, LabResult};
