//! Seed derivation and the generator used throughout the crate.
//!
//! Every stochastic component draws from its own [`LabRng`] seeded through
//! [`derive_seed`], so results never depend on evaluation order across
//! environments or workers.

use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

pub type LabRng = rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministically combines a base seed with a path of stream indices.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix64(base), |acc, &p| mix64(acc ^ mix64(p)))
}

pub fn rng_from(base: u64, path: &[u64]) -> LabRng {
    LabRng::seed_from_u64(derive_seed(base, path))
}

pub fn standard_normal(rng: &mut LabRng) -> f64 {
    StandardNormal.sample(rng)
}

/// Uniform draw in `[0, 1)`.
pub fn uniform(rng: &mut LabRng) -> f64 {
    use rand::Rng;
    rng.random::<f64>()
}
