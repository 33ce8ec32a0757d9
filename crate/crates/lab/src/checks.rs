//! Acceptance criteria as runnable checks.
//!
//! Criteria 1 to 3 are fast property suites against independent oracles and
//! back `ratelab check --assert`. Criteria 4 to 8 train policies and run the
//! comparative studies; [`Study`] caches the trained policies they share.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ratelab_core::control::policy::{gaussian_log_prob, squash};
use ratelab_core::control::{ziegler_nichols_tune, PidController, PolicyNet};
use ratelab_core::dynamics::{perturbed_profile, DynamicsParams, DynamicsState, Perturbation};
use ratelab_core::eval::fft::{fft_real, hann};
use ratelab_core::eval::{compare_report, evaluate, EvalReport, PENDULUM_METRICS};
use ratelab_core::rewards::{geometric_mean, neuroflight_reward, positive_clip, real_reward, Composition, RewardConfig};
use ratelab_core::rng::{rng_from, standard_normal, uniform, LabRng};
use ratelab_core::train::{gae, loss_and_grad, ActorCritic, Batch, LossCoefs, LossScratch};
use ratelab_core::{AngularRates, MotorCommand};

use crate::config::{preset, ExperimentConfig, GainsFile, Profile};
use crate::error::LabResult;
use crate::experiment::{evaluate_quad, gap_study, pendulum_study, train_seeds, untrained_policy, ControllerSpec, SeedRun};
use crate::report::ReportFile;
use crate::table::{curve_records, curve_row, curve_table, Table};
use crate::{traj_io, weights};

/// Result of one criterion.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub id: u8,
    pub title: &'static str,
    pub passed: bool,
    pub lines: Vec<String>,
    pub seconds: f64,
}

impl Outcome {
    pub fn headline(&self) -> String {
        format!(
            "criterion {} {:<30} {} ({:.1} s)",
            self.id,
            self.title,
            if self.passed { "PASS" } else { "FAIL" },
            self.seconds
        )
    }
}

pub const TITLES: [&str; 8] = [
    "reward algebra",
    "numerical oracles",
    "dynamics validation",
    "training reproduction",
    "comparative smoothness",
    "reality gap",
    "pendulum composition study",
    "plumbing",
];

#[derive(Default)]
struct Audit {
    lines: Vec<String>,
    ok: bool,
}

impl Audit {
    fn new() -> Self {
        Self { lines: vec![], ok: true }
    }

    fn check(&mut self, cond: bool, text: impl Into<String>) {
        self.lines.push(format!("{} {}", if cond { "ok  " } else { "FAIL" }, text.into()));
        self.ok &= cond;
    }

    fn note(&mut self, text: impl Into<String>) {
        self.lines.push(format!("     {}", text.into()));
    }

    fn finish(self, id: u8, start: Instant) -> Outcome {
        Outcome { id, title: TITLES[id as usize - 1], passed: self.ok, lines: self.lines, seconds: start.elapsed().as_secs_f64() }
    }
}

fn run(id: u8, body: impl FnOnce(&mut Audit) -> LabResult<()>) -> Outcome {
    let start = Instant::now();
    let mut a = Audit::new();
    if let Err(e) = body(&mut a) {
        a.check(false, format!("error: {e}"));
    }
    a.finish(id, start)
}

fn uniform_in(rng: &mut LabRng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * uniform(rng)
}

/// Product form of the geometric mean, without logarithms.
fn geometric_mean_oracle(r: &[f64], eps: f64) -> f64 {
    r.iter().map(|x| (x + eps).min(1.0)).product::<f64>().powf(1.0 / r.len() as f64)
}

/// Hand-computed legacy reward cases with a 20 deg/s band:
/// (rates, set-point, previous error, y, previous y, total).
#[allow(clippy::type_complexity)]
const LEGACY_CASES: [([f64; 3], [f64; 3], [f64; 3], [f64; 4], [f64; 4], f64); 20] = [
    ([0.0; 3], [10.0, 0.0, 0.0], [11.0, 0.0, 0.0], [0.5; 4], [0.5; 4], 501.0),
    ([0.0; 3], [0.0; 3], [0.0; 3], [0.0; 4], [0.0; 4], 1000.0),
    ([0.0; 3], [30.0, 0.0, 0.0], [30.0, 0.0, 0.0], [0.5; 4], [0.4; 4], -10.0),
    ([0.0; 3], [5.0, 0.0, 0.0], [5.0, 0.0, 0.0], [1.5, 0.5, 0.5, 0.5], [0.5; 4], 150.0 - 5e8),
    ([0.0; 3], [5.0, 0.0, 0.0], [5.0, 0.0, 0.0], [0.0, 0.5, 0.5, 0.5], [0.0, 0.5, 0.5, 0.5], 625.0 - 1e9),
    ([3.0, 4.0, 0.0], [0.0; 3], [0.0; 3], [0.2; 4], [0.2; 4], 795.0),
    ([12.0, 16.0, 0.0], [0.0; 3], [0.0; 3], [0.3; 4], [0.3; 4], -20.0),
    ([0.0; 3], [0.0; 3], [0.0; 3], [0.0; 4], [0.1, 0.0, 0.0, 0.0], 990.0),
    ([100.0, 0.0, 0.0], [100.0, 0.0, 0.0], [50.0, 0.0, 0.0], [0.0; 4], [0.0; 4], 1050.0 - 4e9),
    ([-6.0, -8.0, 0.0], [0.0; 3], [0.0, 6.0, 8.0], [0.25, 0.75, 0.25, 0.75], [0.25; 4], 450.0),
    ([0.0; 3], [0.0, 0.0, 50.0], [0.0, 0.0, 40.0], [2.0, 2.0, 1.0, 1.0], [1.0; 4], -110.0 - 2e9),
    ([0.0, 0.0, 1.0], [0.0, 0.0, 1.0], [3.0, 4.0, 12.0], [0.6; 4], [0.6; 4], 413.0),
    ([0.0; 3], [0.0, 20.0, 0.0], [0.0, 25.0, 0.0], [0.5; 4], [0.75, 0.5, 0.5, 0.5], -20.0),
    ([0.0; 3], [0.0, 19.0, 0.0], [0.0, 19.0, 0.0], [1.0; 4], [1.0; 4], 0.0),
    ([10.0; 3], [10.0; 3], [1.0, 2.0, 2.0], [0.1, 0.2, 0.3, 0.4], [0.1, 0.2, 0.3, 0.9], 703.0),
    ([-30.0, 0.0, 0.0], [-30.0, 0.0, 0.0], [0.0; 3], [0.0, 1.25, 0.5, 0.5], [0.0, 1.25, 0.5, 0.5], 437.5 - 1.25e9),
    ([0.0; 3], [200.0, 0.0, 0.0], [150.0, 0.0, 0.0], [0.34; 4], [0.34; 4], -50.0),
    ([0.0; 3], [0.0; 3], [0.0; 3], [0.34; 4], [0.34; 4], 660.0),
    ([7.0, 0.0, 0.0], [7.0, 0.0, 0.0], [0.0; 3], [0.5; 4], [0.0; 4], 450.0),
    ([0.0, 0.0, -10.0], [0.0, 0.0, -40.0], [0.0, 0.0, -30.0], [0.0; 4], [0.0; 4], -4e9),
];

/// Geometric-mean properties, the clipping map and the legacy reward table.
pub fn reward_algebra() -> Outcome {
    run(1, |a| {
        let start = Instant::now();
        let mut rng = rng_from(0xA1, &[]);
        let eps = 1e-6;
        let (mut perm, mut mono, mut dom, mut logspace) = (0.0f64, 0.0f64, true, 0.0f64);
        for _ in 0..5000 {
            let k = 1 + (uniform(&mut rng) * 8.0) as usize;
            let r: Vec<f64> = (0..k).map(|_| uniform(&mut rng)).collect();
            let g = geometric_mean(&r, eps);
            logspace = logspace.max((g - geometric_mean_oracle(&r, eps)).abs());
            let mut rev = r.clone();
            rev.reverse();
            rev.rotate_left(k / 2);
            perm = perm.max((geometric_mean(&rev, eps) - g).abs());
            let i = (uniform(&mut rng) * k as f64) as usize % k;
            let mut up = r.clone();
            up[i] = (up[i] + uniform(&mut rng)).min(1.0);
            mono = mono.max(g - geometric_mean(&up, eps));
            let mut zeroed = r.clone();
            zeroed[i] = 0.0;
            dom &= geometric_mean(&zeroed, eps) <= (2.0 * eps).powf(1.0 / k as f64);
        }
        a.check(perm <= 1e-12, format!("permutation invariance, max change {perm:.1e}"));
        a.check(mono <= 1e-15, format!("monotone in every component, max decrease {mono:.1e}"));
        a.check(dom, "a zero component caps g at (2 eps)^(1/K)");
        a.check(logspace <= 1e-12, format!("log-space evaluation matches the product form, max diff {logspace:.1e}"));

        let mut clip_ok = true;
        for _ in 0..5000 {
            let p = uniform_in(&mut rng, -1e3, 1e3) * uniform(&mut rng).powi(4);
            let c = positive_clip(p);
            clip_ok &= (0.0..=1.0).contains(&c) && c == if p >= 1.0 { 0.0 } else if p <= 0.0 { 1.0 } else { 1.0 - p };
        }
        for p in [f64::NEG_INFINITY, -1.0, 0.0, 0.25, 1.0, 2.0, f64::INFINITY] {
            clip_ok &= (0.0..=1.0).contains(&positive_clip(p));
        }
        a.check(clip_ok, "p+ stays in [0, 1] and equals min(1, max(0, 1 - p))");

        let mut worst = 0.0f64;
        for (i, (phi, sp, pe, y, yp, want)) in LEGACY_CASES.iter().enumerate() {
            let (got, parts) = neuroflight_reward(
                AngularRates::from_array(*phi),
                AngularRates::from_array(*sp),
                AngularRates::from_array(*pe),
                &MotorCommand(*y),
                &MotorCommand(*yp),
                20.0,
            );
            let rel = (got - want).abs() / want.abs().max(1.0);
            worst = worst.max(rel);
            if rel > 1e-9 {
                a.note(format!("legacy case {i}: got {got}, expected {want}"));
            }
            let sum: f64 = parts.components.iter().sum();
            if (sum - got).abs() > 1e-9 * got.abs().max(1.0) {
                a.note(format!("legacy case {i}: components sum to {sum}, total {got}"));
                worst = f64::INFINITY;
            }
        }
        a.check(worst <= 1e-9, format!("legacy reward matches 20 hand-computed cases, worst relative error {worst:.1e}"));

        let cfg = RewardConfig::default();
        let hover = MotorCommand::splat(cfg.mu);
        let (r_one, _) = real_reward(AngularRates::ZERO, AngularRates::ZERO, &hover, &hover, &cfg);
        let (r_half, parts) = real_reward(AngularRates::new(150.0, 0.0, 0.0), AngularRates::ZERO, &hover, &hover, &cfg);
        let want_half = (0.5f64 + cfg.epsilon).powf(1.0 / 3.0);
        a.check(
            r_one == 1.0 && (parts.components[0] - 0.5).abs() < 1e-15 && (r_half - want_half).abs() < 1e-12,
            format!("composed reward: perfect step gives 1, half tracking gives {r_half:.12} (expected {want_half:.12})"),
        );
        let secs = start.elapsed().as_secs_f64();
        a.check(secs < 10.0, format!("runtime {secs:.2} s < 10 s"));
        Ok(())
    })
}

fn brute_force_gae(r: &[f64], v: &[f64], d: &[bool], last: f64, gamma: f64, lambda: f64) -> Vec<f64> {
    let n = r.len();
    (0..n)
        .map(|t| {
            let mut acc = 0.0;
            for k in t..n {
                let next = if k + 1 < n { v[k + 1] } else { last };
                let delta = r[k] + if d[k] { 0.0 } else { gamma * next } - v[k];
                acc += (gamma * lambda).powi((k - t) as i32) * delta;
                if d[k] {
                    break;
                }
            }
            acc
        })
        .collect()
}

fn naive_dft(x: &[f64]) -> Vec<(f64, f64)> {
    let n = x.len();
    (0..n)
        .map(|k| {
            x.iter().enumerate().fold((0.0, 0.0), |(re, im), (j, v)| {
                let ang = -2.0 * PI * ((k * j) % n) as f64 / n as f64;
                (re + v * ang.cos(), im + v * ang.sin())
            })
        })
        .collect()
}

fn fd_agent_and_batch() -> (ActorCritic, Batch) {
    let mut agent = ActorCritic::new(13, 4, &[64, 64], -0.7, &mut rng_from(0xFD, &[]));
    // Larger output weights than at initialization give every block a
    // gradient well above finite-difference noise.
    for p in agent.policy.mlp.params_mut() {
        *p *= 30.0;
    }
    let mut rng = rng_from(0xFD, &[1]);
    let mut b = Batch::with_dims(13, 4);
    let mut ws = agent.policy.workspace();
    for _ in 0..24 {
        let obs: Vec<f64> = (0..13).map(|_| standard_normal(&mut rng)).collect();
        let mean = agent.policy.mlp.forward(&obs, &mut ws).to_vec();
        let u: Vec<f64> = mean.iter().map(|m| m + 0.3 * standard_normal(&mut rng)).collect();
        b.obs.extend_from_slice(&obs);
        b.pre_squash.extend_from_slice(&u);
        b.actions.extend(u.iter().map(|x| squash(*x)));
        b.log_probs.push(gaussian_log_prob(&u, &mean, &agent.policy.log_std) + 0.05 * standard_normal(&mut rng));
        b.rewards.push(0.0);
        b.values.push(0.0);
        b.dones.push(false);
        b.advantages.push(standard_normal(&mut rng));
        b.returns.push(standard_normal(&mut rng));
    }
    (agent, b)
}

/// GAE, PPO gradient, FFT and Parseval against brute-force oracles.
pub fn numerical_oracles() -> Outcome {
    run(2, |a| {
        let start = Instant::now();
        let mut rng = rng_from(0xB2, &[]);
        let mut worst = 0.0f64;
        for _ in 0..300 {
            let n = 1 + (uniform(&mut rng) * 64.0) as usize;
            let r: Vec<f64> = (0..n).map(|_| uniform_in(&mut rng, -10.0, 10.0)).collect();
            let v: Vec<f64> = (0..n).map(|_| uniform_in(&mut rng, -10.0, 10.0)).collect();
            let d: Vec<bool> = (0..n).map(|_| uniform(&mut rng) < 0.1).collect();
            let last = uniform_in(&mut rng, -10.0, 10.0);
            let gamma = uniform_in(&mut rng, 0.01, 1.0);
            let lambda = uniform(&mut rng);
            let (adv, ret) = gae(&r, &v, &d, last, gamma, lambda);
            for (t, want) in brute_force_gae(&r, &v, &d, last, gamma, lambda).iter().enumerate() {
                worst = worst.max((adv[t] - want).abs()).max((ret[t] - (want + v[t])).abs());
            }
        }
        a.check(worst <= 1e-10, format!("GAE vs O(T^2) double sum on 300 batches (T <= 64), max error {worst:.1e}"));

        let (agent, batch) = fd_agent_and_batch();
        let idx: Vec<usize> = (0..batch.rewards.len()).collect();
        let coefs = LossCoefs { clip_ratio: 0.2, value_coef: 0.5, entropy_coef: 0.01 };
        let mut grad = agent.zero_grad();
        loss_and_grad(&agent, &batch, &idx, &coefs, Some(&mut grad), &mut LossScratch::new(&agent));
        let loss_at = |x: &ActorCritic| loss_and_grad(x, &batch, &idx, &coefs, None, &mut LossScratch::new(x)).total;
        let h = 1e-6;
        for (block, analytic) in [("policy", &grad.policy), ("log_std", &grad.log_std), ("value", &grad.value)] {
            let mut num = Vec::with_capacity(analytic.len());
            for i in 0..analytic.len() {
                let mut plus = agent.clone();
                let mut minus = agent.clone();
                let (p, m) = match block {
                    "policy" => (&mut plus.policy.mlp.params_mut()[i], &mut minus.policy.mlp.params_mut()[i]),
                    "log_std" => (&mut plus.policy.log_std[i], &mut minus.policy.log_std[i]),
                    _ => (&mut plus.value.params_mut()[i], &mut minus.value.params_mut()[i]),
                };
                *p += h;
                *m -= h;
                num.push((loss_at(&plus) - loss_at(&minus)) / (2.0 * h));
            }
            let diff = analytic.iter().zip(&num).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
            let scale = num.iter().map(|y| y * y).sum::<f64>().sqrt();
            let rel = diff / scale.max(1e-300);
            a.check(
                scale > 1e-8 && rel < 1e-4,
                format!("PPO loss gradient, {block} block ({} params): relative error {rel:.1e}", analytic.len()),
            );
        }

        for n in [64usize, 256, 512] {
            let x: Vec<f64> = (0..n).map(|_| standard_normal(&mut rng)).collect();
            let fast = fft_real(&x)?;
            let slow = naive_dft(&x);
            let peak = slow.iter().map(|(re, im)| re.hypot(*im)).fold(0.0, f64::max);
            let err = fast.iter().zip(&slow).map(|(c, (re, im))| (c.re - re).hypot(c.im - im)).fold(0.0, f64::max);
            a.check(err / peak <= 1e-9, format!("FFT vs naive DFT, N = {n}: relative error {:.1e}", err / peak));

            let w = hann(n);
            let xw: Vec<f64> = x.iter().zip(&w).map(|(v, w)| v * w).collect();
            let time: f64 = xw.iter().map(|v| v * v).sum();
            let freq: f64 = fft_real(&xw)?.iter().map(|c| c.re * c.re + c.im * c.im).sum::<f64>() / n as f64;
            let rel = (time - freq).abs() / time;
            a.check(rel <= 1e-6, format!("Parseval on the Hann-windowed signal, N = {n}: relative error {rel:.1e}"));
        }
        let secs = start.elapsed().as_secs_f64();
        a.check(secs < 120.0, format!("runtime {secs:.1} s < 120 s"));
        Ok(())
    })
}

fn open_loop(p: &DynamicsParams, substeps: usize, steps: usize, cmd: impl Fn(usize) -> MotorCommand) -> LabResult<DynamicsState> {
    let mut s = DynamicsState::at_rest(p, MotorCommand::splat(0.34));
    for k in 0..steps {
        s.advance(cmd(k), p, substeps)?;
    }
    Ok(s)
}

/// Closed-form motion, step-size convergence and bit-exact reruns.
pub fn dynamics_validation() -> Outcome {
    run(3, |a| {
        let quiet = DynamicsParams {
            drag_coeff: [0.0; 3],
            gyro_noise_std: 0.0,
            actuation_delay_steps: 0,
            ..DynamicsParams::nominal()
        };
        // Roll differential applied from hover: motors 3 and 4 up, 1 and 2
        // down. With first-order motor lag the torque approaches
        // T = 4 d T_max, so w(t) = (T / I) (t - tau (1 - exp(-t / tau))).
        let d = 0.05;
        let cmd = MotorCommand([0.34 - d, 0.34 - d, 0.34 + d, 0.34 + d]);
        let s = open_loop(&quiet, 1, 1000, |_| cmd)?;
        let tau = quiet.motor_time_constant;
        let rad = 4.0 * d * quiet.max_motor_torque[0] / quiet.inertia[0] * (1.0 - tau * (1.0 - (-1.0 / tau).exp()));
        let want = rad.to_degrees();
        let rel = (s.phi.roll - want).abs() / want.abs();
        a.check(
            rel < 0.01 && s.phi.pitch.abs() < 1e-9 * want && s.phi.yaw.abs() < 1e-9 * want,
            format!("constant roll torque for 1 s: {:.3} deg/s vs closed form {want:.3} (relative error {rel:.1e})", s.phi.roll),
        );

        let excite = |k: usize| {
            let t = k as f64 * 1e-3;
            MotorCommand([
                0.34 + 0.05 * (7.0 * t).sin(),
                0.34 - 0.04 * (5.0 * t).cos(),
                0.34 + 0.03 * (3.0 * t).sin(),
                0.34 - 0.02 * (11.0 * t).sin(),
            ])
        };
        let fine = DynamicsParams { physics_dt: quiet.physics_dt / 2.0, ..quiet.clone() };
        let x = open_loop(&quiet, 1, 1000, excite)?.phi.to_array();
        let y = open_loop(&fine, 2, 1000, excite)?.phi.to_array();
        let norm = |v: [f64; 3]| v.iter().map(|c| c * c).sum::<f64>().sqrt();
        let rel = norm([x[0] - y[0], x[1] - y[1], x[2] - y[2]]) / norm(y);
        a.check(rel < 0.02, format!("halving the physics step moves the 1 s endpoint by {:.3}%", 100.0 * rel));

        let cfg = ExperimentConfig { eval: crate::config::EvalSection { episode_length: 2.0, ..Default::default() }, ..Default::default() };
        let gains = ziegler_nichols_tune(&cfg.dynamics.nominal, &cfg.tune)?.gains;
        let env = cfg.eval_env(Profile::Perturbed)?;
        let fly = || -> LabResult<Vec<String>> {
            let mut pid = PidController::new(gains.clone(), 0.34, env.control_dt());
            let (_, trajs) = evaluate(&env, &mut pid, &[5, 6])?;
            Ok(trajs.iter().map(|t| traj_io::to_text(t).unwrap_or_default()).collect())
        };
        let (first, second) = (fly()?, fly()?);
        let p = perturbed_profile(&quiet, &Perturbation::default())?;
        let o1 = open_loop(&p, 1, 2000, excite)?;
        let o2 = open_loop(&p, 1, 2000, excite)?;
        a.check(
            first == second && !first[0].is_empty() && o1 == o2,
            "reruns are bit-exact (open-loop plant and noisy closed-loop flights)",
        );
        Ok(())
    })
}

pub fn quick_suite() -> Vec<Outcome> {
    vec![reward_algebra(), numerical_oracles(), dynamics_validation()]
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_std(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)).sqrt()
}

/// Criteria 4 to 8, sharing trained policies.
pub struct Study {
    pub jobs: usize,
    /// Run directories are written here when set.
    pub root: Option<PathBuf>,
    pub seeds: Vec<u64>,
    pub quad: ExperimentConfig,
    pub neuroflight: ExperimentConfig,
    pub pendulum: ExperimentConfig,
    /// Executable used for the `check --assert` plumbing step.
    pub cli: Option<PathBuf>,
    mult: Option<Vec<SeedRun>>,
    nf: Option<Vec<SeedRun>>,
    validation: Option<Vec<EvalReport>>,
}

impl Study {
    pub fn new(jobs: usize) -> Self {
        Self {
            jobs,
            root: None,
            seeds: vec![0, 1, 2],
            quad: preset("quad-multiplicative").expect("preset"),
            neuroflight: preset("quad-neuroflight-reward").expect("preset"),
            pendulum: preset("pendulum-study").expect("preset"),
            cli: None,
            mult: None,
            nf: None,
            validation: None,
        }
    }

    fn trained(&mut self, neuroflight: bool) -> LabResult<Vec<SeedRun>> {
        let slot = if neuroflight { &self.nf } else { &self.mult };
        if let Some(r) = slot {
            return Ok(r.clone());
        }
        let cfg = if neuroflight { &self.neuroflight } else { &self.quad };
        let report = |seed: u64, c: &ratelab_core::train::CurveRecord| {
            if c.timestep >= cfg.train.total_timesteps {
                eprintln!("  trained {} seed {seed}: {} steps, curve MAE {:.2}, mean y {:.3}", cfg.name, c.timestep, c.mae, c.mean_y);
            }
        };
        let runs = train_seeds(cfg, &self.seeds, self.root.as_deref(), self.jobs, &report)?;
        if neuroflight {
            self.nf = Some(runs.clone());
        } else {
            self.mult = Some(runs.clone());
        }
        Ok(runs)
    }

    fn validation_reports(&mut self) -> LabResult<Vec<EvalReport>> {
        if let Some(v) = &self.validation {
            return Ok(v.clone());
        }
        let runs = self.trained(false)?;
        let seeds = self.quad.eval.seeds();
        let reports = runs
            .iter()
            .map(|r| Ok(evaluate_quad(&self.quad, &ControllerSpec::Policy(r.net.clone()), Profile::Nominal, &seeds)?.0))
            .collect::<LabResult<Vec<_>>>()?;
        self.validation = Some(reports.clone());
        Ok(reports)
    }

    pub fn run(&mut self, id: u8) -> Outcome {
        match id {
            1 => reward_algebra(),
            2 => numerical_oracles(),
            3 => dynamics_validation(),
            4 => self.training_reproduction(),
            5 => self.comparative_smoothness(),
            6 => self.reality_gap(),
            7 => self.pendulum_composition(),
            8 => self.plumbing(),
            _ => Outcome { id, title: "unknown", passed: false, lines: vec![format!("no criterion {id}")], seconds: 0.0 },
        }
    }

    /// Multiplicative-reward training on the nominal profile.
    pub fn training_reproduction(&mut self) -> Outcome {
        run(4, |a| {
            let reports = self.validation_reports()?;
            let limit = 0.1 * self.quad.eval.max_rate;
            let episodes = self.quad.eval.episodes;
            a.note(format!(
                "{} seeds x {} steps, validation: {} episodes x {} s of the Perlin signal at max_rate {}",
                self.seeds.len(),
                self.quad.train.total_timesteps,
                episodes,
                self.quad.eval.episode_length,
                self.quad.eval.max_rate
            ));
            for (seed, r) in self.seeds.iter().zip(&reports) {
                a.check(
                    r.overall_mae < limit
                        && (r.mean_y - 0.34).abs() <= 0.05
                        && r.early_terminations == 0
                        && r.episodes == episodes
                        && r.mean_abs_dy < 0.02,
                    format!(
                        "seed {seed}: MAE {:.3} (< {limit}), mean y {:.4} (0.34 +- 0.05), early terminations {}, mean |dy| {:.2e} (< 0.02)",
                        r.overall_mae, r.mean_y, r.early_terminations, r.mean_abs_dy
                    ),
                );
            }
            let maes: Vec<f64> = reports.iter().map(|r| r.overall_mae).collect();
            let (m, s) = (mean(&maes), sample_std(&maes));
            a.check(s < 0.5 * m, format!("cross-seed MAE {m:.3} +- {s:.3}; sigma below 50% of the mean"));
            Ok(())
        })
    }

    /// Smoothness of the multiplicative policy against the legacy reward
    /// and an untrained policy, on the perturbed profile.
    pub fn comparative_smoothness(&mut self) -> Outcome {
        run(5, |a| {
            let mult = self.trained(false)?;
            let nf = self.trained(true)?;
            let cfg = self.quad.clone();
            let seeds = cfg.eval.seeds();
            let profile = Profile::Perturbed;
            let eval = |c: ControllerSpec| -> LabResult<EvalReport> { Ok(evaluate_quad(&cfg, &c, profile, &seeds)?.0) };
            let mut rows: Vec<(String, Vec<EvalReport>)> = vec![];
            rows.push(("multiplicative".into(), mult.iter().map(|r| eval(ControllerSpec::Policy(r.net.clone()))).collect::<LabResult<_>>()?));
            rows.push(("neuroflight".into(), nf.iter().map(|r| eval(ControllerSpec::Policy(r.net.clone()))).collect::<LabResult<_>>()?));
            let untrained: Vec<PolicyNet> = self.seeds.iter().map(|&s| untrained_policy(&cfg, s)).collect::<LabResult<_>>()?;
            rows.push((
                "untrained".into(),
                untrained.iter().zip(&self.seeds).map(|(n, &s)| eval(ControllerSpec::Sampled(n.clone(), s))).collect::<LabResult<_>>()?,
            ));
            let gains = ziegler_nichols_tune(&cfg.dynamics.nominal, &cfg.tune)?.gains;
            let pid = eval(ControllerSpec::Pid(GainsFile { hover: cfg.tune.hover, pid: gains, ultimate: vec![] }))?;
            let det: Vec<EvalReport> = untrained.iter().map(|n| eval(ControllerSpec::Policy(n.clone()))).collect::<LabResult<_>>()?;

            let avg = |rs: &[EvalReport], f: fn(&EvalReport) -> f64| mean(&rs.iter().map(f).collect::<Vec<_>>());
            let dy = |r: &EvalReport| r.mean_abs_dy;
            let peak = |r: &EvalReport| r.peak_magnitude;
            let summary: Vec<EvalReport> = rows.iter().map(|(_, rs)| rs[0].clone()).chain([pid.clone()]).collect();
            let table = compare_report(&summary, &["multiplicative (seed 0)", "neuroflight (seed 0)", "untrained (seed 0)", "PID"])?;
            a.note(format!("{} profile, {} validation episodes per policy", profile.name(), seeds.len()));
            for line in table.render().lines() {
                a.note(line.to_string());
            }
            for (name, rs) in &rows {
                a.note(format!("{name:<15} seed-mean |dy| {:.4e}  peak {:.4e}", avg(rs, dy), avg(rs, peak)));
            }
            a.note(format!(
                "{:<15} seed-mean |dy| {:.4e}  peak {:.4e}  (untrained network flown deterministically, for reference)",
                "untrained-mean",
                avg(&det, dy),
                avg(&det, peak)
            ));
            let (m_dy, m_pk) = (avg(&rows[0].1, dy), avg(&rows[0].1, peak));
            for (name, rs) in &rows[1..] {
                a.check(
                    m_dy < avg(rs, dy) && m_pk < avg(rs, peak),
                    format!("multiplicative below {name} on mean |dy| and peak magnitude above 5 Hz"),
                );
            }
            Ok(())
        })
    }

    /// Actuation and set-point playback gaps of the trained policy.
    pub fn reality_gap(&mut self) -> Outcome {
        run(6, |a| {
            let net = self.trained(false)?[0].net.clone();
            let validation_mae = self.validation_reports()?[0].overall_mae;
            let ctrl = ControllerSpec::Policy(net);
            for p in [Profile::Nominal, Profile::Perturbed] {
                let mut cfg = self.quad.clone();
                cfg.gap.real = p;
                cfg.gap.sim = p;
                let g = gap_study(&cfg, &ctrl)?;
                let zero = g.apg.curve.mean.iter().chain(&g.spg.curve.mean).all(|v| *v == 0.0);
                a.check(zero, format!("identical {} profiles: APG and SPG are exactly zero at every offset", p.name()));
            }
            let g = gap_study(&self.quad, &ctrl)?;
            for line in g.summary().lines() {
                a.note(line.to_string());
            }
            let steps = (self.quad.gap.segment_length * self.quad.env.control_rate).round() as usize;
            a.check(
                g.apg.used + g.apg.skipped == 160 && g.apg.curve.mean.len() == steps,
                format!("{} segments of {} s ({} used)", g.apg.used + g.apg.skipped, self.quad.gap.segment_length, g.apg.used),
            );
            let probe = g.apg_probe();
            a.check(
                probe > 0.0 && probe < validation_mae,
                format!("APG after 3 control steps {probe:.4} deg/s is positive and below the validation MAE {validation_mae:.4}"),
            );
            a.check(
                g.spg_within_bound(),
                format!("E[SPG] {:.4} <= E[MAE] + E[APG] + 3 sigma = {:.4}", g.spg.curve.overall_mean(), g.spg_bound()),
            );
            Ok(())
        })
    }

    /// Additive against multiplicative training on the pendulum.
    pub fn pendulum_composition(&mut self) -> Outcome {
        run(7, |a| {
            let start = Instant::now();
            let cfg = &self.pendulum;
            let seeds = cfg.train.seeds.clone();
            let study = pendulum_study(cfg, &seeds, self.root.as_deref(), self.jobs, &crate::experiment::no_progress)?;
            for line in study.render().lines() {
                a.note(line.to_string());
            }
            let add = study.report(Composition::Additive).expect("additive row");
            let mul = study.report(Composition::Multiplicative).expect("multiplicative row");
            let m = PENDULUM_METRICS.iter().position(|x| *x == "multiplicative").expect("metric");
            a.check(
                mul.per_metric[m].std < add.per_metric[m].std,
                format!(
                    "sigma of the multiplicative-metric return: multiplicative-trained {:.3} < additive-trained {:.3}",
                    mul.per_metric[m].std, add.per_metric[m].std
                ),
            );
            let floor_ok = mul.finals.iter().all(|f| f.component_means.iter().all(|c| *c >= 0.1));
            a.check(floor_ok, "every multiplicative-trained seed keeps every component mean >= 0.1");
            let mut ignored = vec![];
            for f in &add.finals {
                for (k, c) in f.component_means.iter().enumerate() {
                    let best_mul = mul.finals.iter().map(|g| g.component_means[k]).fold(f64::INFINITY, f64::min);
                    if *c < best_mul {
                        ignored.push(format!("seed {} {} {:.3} < {:.3}", f.seed, ["stand", "velocity", "torque"][k], c, best_mul));
                    }
                }
            }
            a.check(
                !ignored.is_empty(),
                format!("an additive-trained seed drives a component below every multiplicative seed: {}", ignored.join("; ")),
            );
            let secs = start.elapsed().as_secs_f64();
            a.check(secs <= 1800.0, format!("runtime {secs:.0} s <= 30 min"));
            Ok(())
        })
    }

    /// Format round trips on real artifacts and the `--assert` entry point.
    pub fn plumbing(&mut self) -> Outcome {
        run(8, |a| {
            let net = self.trained(false)?[0].clone();
            let cfg = self.quad.clone();
            let (report, trajs) = evaluate_quad(&cfg, &ControllerSpec::Policy(net.net.clone()), Profile::Perturbed, &[77])?;

            let text = traj_io::to_text(&trajs[0]).map_err(|e| crate::LabError::Usage(e.to_string()))?;
            let back = traj_io::parse(&text).map_err(|e| crate::LabError::Usage(e.to_string()))?;
            a.check(back == trajs[0] && traj_io::to_text(&back).ok().as_deref() == Some(&text[..]), "trajectory text round trip");

            let bytes = weights::encode(&net.net);
            let decoded = weights::decode(&bytes).map_err(|e| crate::LabError::Usage(e.to_string()))?;
            a.check(
                decoded == weights::quantize(&net.net) && weights::encode(&decoded) == bytes,
                format!("weights round trip ({} bytes)", bytes.len()),
            );

            let curve = curve_table(&net.curve);
            let parsed = Table::parse(&curve.to_text()).map_err(crate::LabError::Usage)?;
            let same = curve_records(&parsed)
                .map_err(crate::LabError::Usage)?
                .iter()
                .zip(&net.curve)
                .all(|(x, y)| curve_row(x).iter().zip(curve_row(y)).all(|(p, q)| p.to_bits() == q.to_bits()));
            a.check(same && parsed.rows.len() == net.curve.len(), "training curve round trip");

            let mut cfg_ok = true;
            for name in crate::config::PRESETS {
                let c = preset(name).expect("preset");
                cfg_ok &= ExperimentConfig::parse(&c.to_toml()?, Path::new(name))? == c;
            }
            a.check(cfg_ok, "experiment config round trip for every preset");

            let rf = ReportFile { label: "policy".into(), profile: Profile::Perturbed, signal: cfg.eval.signal, seeds: vec![77], report };
            a.check(ReportFile::parse(&rf.to_toml()?, Path::new("report"))? == rf, "evaluation report round trip");

            let gains = ziegler_nichols_tune(&cfg.dynamics.nominal, &cfg.tune)?;
            let gf = GainsFile { hover: cfg.tune.hover, pid: gains.gains, ultimate: gains.ultimate.to_vec() };
            let gtext = toml::to_string_pretty(&gf).map_err(|e| crate::LabError::Usage(e.to_string()))?;
            let gback: GainsFile = toml::from_str(&gtext).map_err(|e| crate::LabError::Usage(e.to_string()))?;
            a.check(gback == gf, "PID gains file round trip");

            match &self.cli {
                Some(exe) => {
                    let out = std::process::Command::new(exe)
                        .args(["check", "--assert"])
                        .output()
                        .map_err(|e| crate::LabError::io(exe, e))?;
                    a.check(out.status.code() == Some(0), format!("`ratelab check --assert` exit code {:?}", out.status.code()));
                }
                None => a.check(false, "no executable given for the `check --assert` step"),
            }
            Ok(())
        })
    }
}
