//! Iterative radix-2 FFT.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

impl Complex {
    pub const fn new(re: f64, im: f64) -> Self {
        Self { re, im }
    }

    pub fn norm(self) -> f64 {
        libm::hypot(self.re, self.im)
    }

    pub fn norm_sqr(self) -> f64 {
        self.re * self.re + self.im * self.im
    }
}

/// In-place forward transform `X_k = sum_n x_n exp(-2 pi i k n / N)`.
/// `N` must be a power of two.
pub fn fft_in_place(x: &mut [Complex]) -> Result<()> {
    let n = x.len();
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::Usage(alloc::format!("FFT length {n} is not a power of two")));
    }
    let bits = n.trailing_zeros();
    if bits > 0 {
        for i in 0..n {
            let j = i.reverse_bits() >> (usize::BITS - bits);
            if j > i {
                x.swap(i, j);
            }
        }
    }
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let theta = -2.0 * PI / len as f64;
        for k in 0..half {
            let (s, c) = libm::sincos(theta * k as f64);
            let w = Complex::new(c, s);
            for start in (0..n).step_by(len) {
                let a = x[start + k];
                let b = x[start + k + half];
                let t = Complex::new(w.re * b.re - w.im * b.im, w.re * b.im + w.im * b.re);
                x[start + k] = Complex::new(a.re + t.re, a.im + t.im);
                x[start + k + half] = Complex::new(a.re - t.re, a.im - t.im);
            }
        }
        len *= 2;
    }
    Ok(())
}

/// Transform of a real signal.
pub fn fft_real(x: &[f64]) -> Result<Vec<Complex>> {
    let mut buf: Vec<Complex> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft_in_place(&mut buf)?;
    Ok(buf)
}

/// Symmetric-periodic Hann window of length `n`.
pub fn hann(n: usize) -> Vec<f64> {
    if n <= 1 {
        return alloc::vec![1.0; n];
    }
    (0..n).map(|i| 0.5 - 0.5 * libm::cos(2.0 * PI * i as f64 / (n - 1) as f64)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{rng_from, standard_normal};

    fn naive_dft(x: &[f64]) -> Vec<Complex> {
        let n = x.len();
        (0..n)
            .map(|k| {
                let mut re = 0.0;
                let mut im = 0.0;
                for (j, v) in x.iter().enumerate() {
                    let a = -2.0 * PI * ((k * j) % n) as f64 / n as f64;
                    re += v * libm::cos(a);
                    im += v * libm::sin(a);
                }
                Complex::new(re, im)
            })
            .collect()
    }

    #[test]
    fn matches_naive_dft() {
        for &n in &[64usize, 256, 512] {
            let mut rng = rng_from(n as u64, &[]);
            let x: Vec<f64> = (0..n).map(|_| standard_normal(&mut rng)).collect();
            let fast = fft_real(&x).unwrap();
            let slow = naive_dft(&x);
            let scale = slow.iter().map(|c| c.norm()).fold(0.0, f64::max);
            for (a, b) in fast.iter().zip(&slow) {
                let d = libm::hypot(a.re - b.re, a.im - b.im);
                assert!(d <= 1e-9 * scale, "n={n}: {d}");
            }
        }
    }

    #[test]
    fn parseval() {
        let mut rng = rng_from(3, &[]);
        let w = hann(512);
        let x: Vec<f64> = (0..512).map(|i| w[i] * standard_normal(&mut rng)).collect();
        let time: f64 = x.iter().map(|v| v * v).sum();
        let freq: f64 = fft_real(&x).unwrap().iter().map(|c| c.norm_sqr()).sum::<f64>() / 512.0;
        assert!(libm::fabs(time - freq) <= 1e-6 * time);
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert!(fft_real(&[0.0; 48]).is_err());
    }
}
