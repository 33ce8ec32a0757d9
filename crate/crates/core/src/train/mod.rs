//! PPO training: rollouts, advantage estimation, the clipped-surrogate
//! update and the driver loop.

pub mod adam;
pub mod experiment;
pub mod gae;
pub mod ppo;
pub mod rollout;
pub mod trainer;

pub use adam::Adam;
pub use experiment::{MeanStd, SeedFinal, VarianceReport};
pub use gae::gae;
pub use ppo::{loss_and_grad, ppo_update, ActorCritic, AgentGrad, LossCoefs, LossScratch, LossStats, PpoConfig, UpdateDiagnostics};
pub use rollout::{Batch, Collected, EpisodeStats, Rollouts, StepTotals};
pub use trainer::{CurveRecord, LrSchedule, TrainConfig, Trainer, UpdateReport};
