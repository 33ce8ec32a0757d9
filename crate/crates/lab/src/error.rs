use std::path::{Path, PathBuf};

use ratelab_core::Error as CoreError;

use crate::traj_io::TrajFormatError;
use crate::weights::WeightsError;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 1;
    pub const RUNTIME: i32 = 2;
    pub const CHECK_FAILED: i32 = 3;
}

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("{0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("config file not found: {}", .0.display())]
    MissingConfig(PathBuf),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Trajectory { path: PathBuf, source: TrajFormatError },
    #[error("{}: {source}", path.display())]
    Weights { path: PathBuf, source: WeightsError },
    #[error("{}: {msg}", path.display())]
    Parse { path: PathBuf, msg: String },
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("training seed {seed}{}: {source}", dir.as_ref().map(|d| format!(" ({})", d.display())).unwrap_or_default())]
    Training { seed: u64, dir: Option<PathBuf>, source: CoreError },
    #[error("acceptance check failed: {0}")]
    CheckFailed(String),
}

pub type LabResult<T> = Result<T, LabError>;

impl LabError {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        Self::Io { path: path.as_ref().to_path_buf(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) | Self::Config(_) | Self::MissingConfig(_) | Self::Parse { .. } => exit::USAGE,
            Self::Core(CoreError::Config(_) | CoreError::Usage(_)) => exit::USAGE,
            Self::CheckFailed(_) => exit::CHECK_FAILED,
            _ => exit::RUNTIME,
        }
    }
}
