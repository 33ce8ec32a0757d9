//! Closed-loop episodes logged as trajectories.

use alloc::string::String;
use alloc::vec::Vec;

use crate::control::Controller;
use crate::envs::{GoalSource, QuadEnv};
use crate::error::Result;
use crate::types::Trajectory;

/// Runs one episode to completion. `goal` overrides the generated signal.
pub fn run_episode(
    env: &mut QuadEnv,
    controller: &mut dyn Controller,
    seed: u64,
    goal: Option<GoalSource>,
) -> Result<Trajectory> {
    match goal {
        Some(g) => env.reset_with_goal(seed, g),
        None => env.reset(seed),
    };
    controller.reset();
    let labels: Vec<String> = env.config().reward_labels().iter().map(|s| String::from(*s)).collect();
    let mut traj = Trajectory::new(env.config().control_dt(), labels);
    while !env.is_done() {
        let state = *env.state();
        let cmd = controller.act(&state)?;
        let step = env.step_command(cmd)?;
        traj.push(step.row());
    }
    Ok(traj)
}
