//! Attitude-rate control laboratory core.
//!
//! Everything in this crate is pure computation over value types and runs
//! without `std` (an allocator is required). File formats, configuration,
//! run directories and the command line live in the `ratelab` crate.
//!
//! Module map:
//!
//! - [`types`]: angular rates, motor commands, the 13-wide state vector and
//!   the trajectory log model.
//! - [`rewards`]: penalties, normalization, geometric-mean and additive
//!   composition, and the legacy Neuroflight reward.
//! - [`dynamics`]: rigid-body rate dynamics for the quadrotor analog and a
//!   torque-limited pendulum.
//! - [`setpoint`]: seeded Perlin gradient noise and the goal generators.
//! - [`envs`]: episodic environments binding dynamics, goals and rewards.
//! - [`control`]: MLP policy, PID and Ziegler-Nichols tuning.
//! - [`train`]: rollouts, GAE, the PPO update and the training driver.
//! - [`eval`]: tracking error, control spectra and reality-gap metrics.
#![cfg_attr(not(feature = "std"), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod control;
pub mod dynamics;
pub mod envs;
pub mod error;
pub mod eval;
pub mod rewards;
pub mod rng;
pub mod setpoint;
pub mod train;
pub mod types;

pub use error::{Error, Result};
pub use types::{AngularRates, MotorCommand, StateVector, Trajectory, TrajectoryRow};
