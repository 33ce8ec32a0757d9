//! Binary policy weights.
//!
//! Little-endian layout:
//!
//! | bytes | content |
//! |-------|---------|
//! | 4 | magic `RLWT` |
//! | 4 | format version (`u32`, currently 1) |
//! | 4 | number of layer sizes `k` (`u32`) |
//! | 4·k | layer sizes, input first (`u32`) |
//! | ... | per layer: weights row-major (`out x in`), then biases, as `f32` |
//! | 4·act | log standard deviations (`f32`) |
//!
//! The 13-64-64-4 policy has 5,320 parameters: 28 header bytes plus 21,280
//! bytes of weights. Values are stored in single precision, so a policy is
//! reproduced exactly when its parameters are representable as `f32`
//! (see [`quantize`]).

use std::path::Path;

use ratelab_core::control::{Mlp, PolicyNet};

use crate::error::{LabError, LabResult};

pub const MAGIC: [u8; 4] = *b"RLWT";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WeightsError {
    #[error("not a weights file (bad magic)")]
    BadMagic,
    #[error("unsupported weights format version {0} (this build reads version {VERSION})")]
    Version(u32),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("weights contain non-finite values")]
    NonFinite,
}

fn header_len(n_sizes: usize) -> usize {
    12 + 4 * n_sizes
}

pub fn encoded_len(sizes: &[usize]) -> usize {
    let params: usize = sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
    header_len(sizes.len()) + 4 * (params + sizes.last().copied().unwrap_or(0))
}

pub fn encode(net: &PolicyNet) -> Vec<u8> {
    let sizes = net.mlp.sizes();
    let mut out = Vec::with_capacity(encoded_len(sizes));
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(sizes.len() as u32).to_le_bytes());
    for &s in sizes {
        out.extend_from_slice(&(s as u32).to_le_bytes());
    }
    for v in net.mlp.params().iter().chain(&net.log_std) {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

fn read_u32(bytes: &[u8], at: usize) -> Option<u32> {
    bytes.get(at..at + 4).map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
}

pub fn decode(bytes: &[u8]) -> Result<PolicyNet, WeightsError> {
    if bytes.get(..4) != Some(&MAGIC[..]) {
        return Err(WeightsError::BadMagic);
    }
    let version = read_u32(bytes, 4).ok_or_else(|| WeightsError::Shape("file ends inside the header".into()))?;
    if version != VERSION {
        return Err(WeightsError::Version(version));
    }
    let k = read_u32(bytes, 8).ok_or_else(|| WeightsError::Shape("file ends inside the header".into()))? as usize;
    if !(2..=64).contains(&k) {
        return Err(WeightsError::Shape(format!("{k} layer sizes declared; need between 2 and 64")));
    }
    let sizes = (0..k)
        .map(|i| read_u32(bytes, 12 + 4 * i).map(|s| s as usize))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| WeightsError::Shape("file ends inside the layer-size list".into()))?;
    if sizes.iter().any(|&s| s == 0 || s > 1 << 16) {
        return Err(WeightsError::Shape(format!("layer sizes {sizes:?} out of range")));
    }
    let want = encoded_len(&sizes);
    if bytes.len() != want {
        return Err(WeightsError::Shape(format!(
            "layers {sizes:?} need {want} bytes, file holds {}",
            bytes.len()
        )));
    }
    let mut vals = bytes[header_len(k)..]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64);
    let n_params = Mlp::zeros(&sizes).param_count();
    let params: Vec<f64> = vals.by_ref().take(n_params).collect();
    let log_std: Vec<f64> = vals.collect();
    let mlp = Mlp::from_params(&sizes, params).ok_or_else(|| WeightsError::Shape("parameter count".into()))?;
    let net = PolicyNet { mlp, log_std };
    if !net.is_finite() {
        return Err(WeightsError::NonFinite);
    }
    Ok(net)
}

/// Rounds every parameter to single precision, i.e. what a save/load cycle
/// returns.
pub fn quantize(net: &PolicyNet) -> PolicyNet {
    let mut out = net.clone();
    for v in out.mlp.params_mut().iter_mut().chain(out.log_std.iter_mut()) {
        *v = *v as f32 as f64;
    }
    out
}

pub fn save(path: &Path, net: &PolicyNet) -> LabResult<()> {
    std::fs::write(path, encode(net)).map_err(|e| LabError::io(path, e))
}

pub fn load(path: &Path) -> LabResult<PolicyNet> {
    let bytes = std::fs::read(path).map_err(|e| LabError::io(path, e))?;
    decode(&bytes).map_err(|source| LabError::Weights { path: path.into(), source })
}
