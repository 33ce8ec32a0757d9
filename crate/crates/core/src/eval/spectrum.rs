//! Magnitude spectra of the motor commands.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::eval::fft::{fft_real, hann};
use crate::types::Trajectory;

pub const MIN_SPECTRUM_LEN: usize = 256;
/// Peaks at or below this frequency (Hz) are ignored.
pub const PEAK_FLOOR_HZ: f64 = 5.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// Hz, one per one-sided bin.
    pub freqs: Vec<f64>,
    pub per_motor: [Vec<f64>; 4],
    pub mean: Vec<f64>,
    pub peak_freq: f64,
    pub peak_magnitude: f64,
}

/// One-sided amplitude spectrum of a real signal sampled every `dt`
/// seconds: mean removed, Hann windowed, zero padded to `n_fft` and scaled
/// so a unit sinusoid on a bin reads about 1.
pub fn amplitude_spectrum(x: &[f64], n_fft: usize) -> Result<Vec<f64>> {
    if n_fft < x.len() || !n_fft.is_power_of_two() {
        return Err(Error::Usage(format!("n_fft {n_fft} must be a power of two >= {}", x.len())));
    }
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let w = hann(x.len());
    let gain: f64 = w.iter().sum();
    let mut buf = vec![0.0; n_fft];
    for i in 0..x.len() {
        buf[i] = (x[i] - mean) * w[i];
    }
    let spec = fft_real(&buf)?;
    Ok(spec[..=n_fft / 2]
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let one_sided = if k == 0 || k == n_fft / 2 { 1.0 } else { 2.0 };
            one_sided * c.norm() / gain
        })
        .collect())
}

pub fn frequencies(n_fft: usize, dt: f64) -> Vec<f64> {
    (0..=n_fft / 2).map(|k| k as f64 / (n_fft as f64 * dt)).collect()
}

/// Largest magnitude strictly above [`PEAK_FLOOR_HZ`].
pub fn peak_above_floor(freqs: &[f64], mags: &[f64]) -> (f64, f64) {
    freqs
        .iter()
        .zip(mags)
        .filter(|(f, _)| **f > PEAK_FLOOR_HZ)
        .fold((0.0, 0.0), |best, (f, m)| if *m > best.1 { (*f, *m) } else { best })
}

fn check(traj: &Trajectory) -> Result<()> {
    if !(traj.dt > 0.0 && traj.dt.is_finite()) {
        return Err(Error::Data(format!("spectrum needs a uniform positive dt, got {}", traj.dt)));
    }
    if traj.len() < MIN_SPECTRUM_LEN {
        return Err(Error::Data(format!(
            "spectrum needs at least {MIN_SPECTRUM_LEN} steps, trajectory has {}",
            traj.len()
        )));
    }
    Ok(())
}

/// Spectrum with an explicit transform length (for averaging episodes of
/// different lengths on one frequency grid).
pub fn control_spectrum_n(traj: &Trajectory, n_fft: usize) -> Result<Spectrum> {
    check(traj)?;
    let mut per_motor: [Vec<f64>; 4] = Default::default();
    for (m, slot) in per_motor.iter_mut().enumerate() {
        let x: Vec<f64> = traj.rows.iter().map(|r| r.action.0[m]).collect();
        *slot = amplitude_spectrum(&x, n_fft)?;
    }
    let freqs = frequencies(n_fft, traj.dt);
    let mean: Vec<f64> = (0..freqs.len()).map(|k| per_motor.iter().map(|s| s[k]).sum::<f64>() / 4.0).collect();
    let (peak_freq, peak_magnitude) = peak_above_floor(&freqs, &mean);
    Ok(Spectrum { freqs, per_motor, mean, peak_freq, peak_magnitude })
}

pub fn control_spectrum(traj: &Trajectory) -> Result<Spectrum> {
    control_spectrum_n(traj, traj.len().next_power_of_two())
}

/// Bin-wise mean of the motor-mean spectra of several episodes.
pub fn mean_spectrum(trajs: &[Trajectory]) -> Result<Spectrum> {
    let first = trajs.first().ok_or_else(|| Error::Data("no trajectories for spectrum".into()))?;
    if trajs.iter().any(|t| t.dt != first.dt) {
        return Err(Error::Data("trajectories disagree on dt".into()));
    }
    let n_fft = trajs.iter().map(|t| t.len()).max().unwrap_or(0).next_power_of_two();
    let specs = trajs.iter().map(|t| control_spectrum_n(t, n_fft)).collect::<Result<Vec<_>>>()?;
    let k = specs.len() as f64;
    let avg = |f: &dyn Fn(&Spectrum) -> &Vec<f64>| -> Vec<f64> {
        (0..specs[0].freqs.len()).map(|i| specs.iter().map(|s| f(s)[i]).sum::<f64>() / k).collect()
    };
    let per_motor = [avg(&|s| &s.per_motor[0]), avg(&|s| &s.per_motor[1]), avg(&|s| &s.per_motor[2]), avg(&|s| &s.per_motor[3])];
    let mean = avg(&|s| &s.mean);
    let freqs = specs[0].freqs.clone();
    let (peak_freq, peak_magnitude) = peak_above_floor(&freqs, &mean);
    Ok(Spectrum { freqs, per_motor, mean, peak_freq, peak_magnitude })
}
