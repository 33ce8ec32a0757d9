//! Tracking error, control spectra, reality-gap curves and comparisons.

pub mod compare;
pub mod episode;
pub mod fft;
pub mod gap;
pub mod metrics;
pub mod pendulum;
pub mod spectrum;
pub mod sum;

pub use compare::{compare_report, Comparison};
pub use episode::run_episode;
pub use gap::{actuation_playback_gap, replay_segment, setpoint_playback_gap, ApgOptions, ApgResult, GapCurve, SpgResult};
pub use metrics::{evaluate, mean_abs_dy, mean_action, pooled_mae, tracking_mae, EvalReport, Mae};
pub use pendulum::{evaluate_pendulum, PendulumScore, PENDULUM_METRICS};
pub use spectrum::{control_spectrum, mean_spectrum, Spectrum};
pub use sum::{ksum, KahanSum};
