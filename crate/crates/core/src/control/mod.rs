//! Controllers: the MLP policy, PID and Ziegler-Nichols tuning.

pub mod mlp;
pub mod pid;
pub mod policy;
pub mod ziegler_nichols;

pub use mlp::{BackpropScratch, Mlp, Workspace};
pub use pid::{pid_control, AxisGains, Pid, PidGains};
pub use policy::{PolicyNet, PolicySample};
pub use ziegler_nichols::{ziegler_nichols_tune, UltimatePoint, ZnOptions, ZnResult};

use crate::error::Result;
use crate::rng::{rng_from, LabRng};
use crate::types::{MotorCommand, StateVector};

/// A closed-loop attitude-rate controller.
pub trait Controller {
    /// Clears internal memory at the start of an episode.
    fn reset(&mut self);
    fn act(&mut self, state: &StateVector) -> Result<MotorCommand>;
}

pub struct PidController {
    pub pid: Pid,
    pub dt: f64,
}

impl PidController {
    pub fn new(gains: PidGains, hover: f64, dt: f64) -> Self {
        Self { pid: Pid::new(gains, hover), dt }
    }
}

impl Controller for PidController {
    fn reset(&mut self) {
        self.pid.reset();
    }

    fn act(&mut self, state: &StateVector) -> Result<MotorCommand> {
        Ok(self.pid.control(state.e, self.dt))
    }
}

/// Runs a policy on scaled observations. Deterministic unless built with
/// [`PolicyController::stochastic`].
pub struct PolicyController {
    net: PolicyNet,
    rate_scale: f64,
    ws: Workspace,
    sampler: Option<(u64, LabRng)>,
}

impl PolicyController {
    pub fn new(net: PolicyNet, rate_scale: f64) -> Self {
        let ws = net.workspace();
        Self { net, rate_scale, ws, sampler: None }
    }

    /// Samples actions from the Gaussian head; reseeded on every reset.
    pub fn stochastic(net: PolicyNet, rate_scale: f64, seed: u64) -> Self {
        let ws = net.workspace();
        Self { net, rate_scale, ws, sampler: Some((seed, rng_from(seed, &[]))) }
    }

    pub fn net(&self) -> &PolicyNet {
        &self.net
    }
}

impl Controller for PolicyController {
    fn reset(&mut self) {
        if let Some((seed, rng)) = &mut self.sampler {
            *rng = rng_from(*seed, &[]);
        }
    }

    fn act(&mut self, state: &StateVector) -> Result<MotorCommand> {
        let mut obs = state.flatten();
        let k = 1.0 / self.rate_scale;
        for x in obs[..9].iter_mut() {
            *x *= k;
        }
        let mut out = [0.0; 4];
        match &mut self.sampler {
            None => self.net.act_deterministic(&obs, &mut self.ws, &mut out)?,
            Some((_, rng)) => {
                let s = self.net.forward(&obs, false, &mut self.ws, rng)?;
                out.copy_from_slice(&s.action);
            }
        }
        Ok(MotorCommand(out))
    }
}
