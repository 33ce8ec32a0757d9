//! Fully connected tanh network with a linear output layer.
//!
//! Parameters live in one flat vector, layer by layer, each layer stored as
//! its row-major weight block (`out x in`) followed by its bias.

use alloc::vec;
use alloc::vec::Vec;

use crate::rng::{standard_normal, LabRng};

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Scratch buffers for [`Mlp::forward`]; one per inference thread.
#[derive(Debug, Clone)]
pub struct Workspace {
    /// Post-activation values per layer, input first.
    acts: Vec<Vec<f64>>,
}

impl Workspace {
    pub fn new(net: &Mlp) -> Self {
        Self { acts: net.sizes.iter().map(|&n| vec![0.0; n]).collect() }
    }

    pub fn output(&self) -> &[f64] {
        self.acts.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

fn layer_len(n_in: usize, n_out: usize) -> usize {
    n_in * n_out + n_out
}

impl Mlp {
    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs input and output sizes");
        let n = sizes.windows(2).map(|w| layer_len(w[0], w[1])).sum();
        Self { sizes: sizes.to_vec(), params: vec![0.0; n] }
    }

    /// Gaussian init scaled by `1/sqrt(fan_in)`; the last layer is further
    /// scaled by `output_gain`. Biases start at zero.
    pub fn random(sizes: &[usize], output_gain: f64, rng: &mut LabRng) -> Self {
        let mut net = Self::zeros(sizes);
        let n_layers = net.n_layers();
        let mut off = 0;
        for l in 0..n_layers {
            let (n_in, n_out) = (sizes[l], sizes[l + 1]);
            let gain = if l + 1 == n_layers { output_gain } else { 1.0 };
            let scale = gain / libm::sqrt(n_in as f64);
            for w in net.params[off..off + n_in * n_out].iter_mut() {
                *w = scale * standard_normal(rng);
            }
            off += layer_len(n_in, n_out);
        }
        net
    }

    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Option<Self> {
        let net = Self::zeros(sizes);
        (net.params.len() == params.len()).then(|| Self { sizes: sizes.to_vec(), params })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// Weight block and bias of layer `l`.
    pub fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let off: usize = self.sizes[..=l].windows(2).map(|w| layer_len(w[0], w[1])).sum();
        let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
        let w = &self.params[off..off + n_in * n_out];
        let b = &self.params[off + n_in * n_out..off + layer_len(n_in, n_out)];
        (w, b)
    }

    /// Forward pass; the output is left in `ws.output()`.
    pub fn forward<'w>(&self, x: &[f64], ws: &'w mut Workspace) -> &'w [f64] {
        debug_assert_eq!(x.len(), self.sizes[0]);
        ws.acts[0].copy_from_slice(x);
        let n_layers = self.n_layers();
        let mut off = 0;
        for l in 0..n_layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[off..off + n_in * n_out];
            let b = &self.params[off + n_in * n_out..off + layer_len(n_in, n_out)];
            let (head, tail) = ws.acts.split_at_mut(l + 1);
            let input = &head[l];
            let out = &mut tail[0];
            for (j, o) in out.iter_mut().enumerate() {
                let row = &w[j * n_in..(j + 1) * n_in];
                let mut acc = b[j];
                for (wi, xi) in row.iter().zip(input.iter()) {
                    acc += wi * xi;
                }
                *o = if l + 1 < n_layers { libm::tanh(acc) } else { acc };
            }
            off += layer_len(n_in, n_out);
        }
        ws.output()
    }

    /// Accumulates `d loss / d params` into `grad` given `d loss / d output`.
    /// `ws` must still hold the activations of the matching forward pass.
    pub fn backward(&self, ws: &Workspace, d_out: &[f64], grad: &mut [f64], scratch: &mut BackpropScratch) {
        debug_assert_eq!(grad.len(), self.params.len());
        let n_layers = self.n_layers();
        let mut offsets = [0usize; 8];
        debug_assert!(n_layers < offsets.len());
        for l in 0..n_layers {
            offsets[l + 1] = offsets[l] + layer_len(self.sizes[l], self.sizes[l + 1]);
        }
        scratch.delta.clear();
        scratch.delta.extend_from_slice(d_out);
        for l in (0..n_layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let off = offsets[l];
            let input = &ws.acts[l];
            // delta holds d loss / d pre-activation of layer l's output.
            {
                let (gw, gb) = grad[off..off + layer_len(n_in, n_out)].split_at_mut(n_in * n_out);
                for j in 0..n_out {
                    let d = scratch.delta[j];
                    gb[j] += d;
                    let row = &mut gw[j * n_in..(j + 1) * n_in];
                    for (g, xi) in row.iter_mut().zip(input.iter()) {
                        *g += d * xi;
                    }
                }
            }
            if l == 0 {
                break;
            }
            let w = &self.params[off..off + n_in * n_out];
            scratch.next.clear();
            scratch.next.resize(n_in, 0.0);
            for j in 0..n_out {
                let d = scratch.delta[j];
                let row = &w[j * n_in..(j + 1) * n_in];
                for (acc, wi) in scratch.next.iter_mut().zip(row.iter()) {
                    *acc += d * wi;
                }
            }
            // Through the tanh of layer l-1: d/dz tanh(z) = 1 - a^2.
            for (acc, a) in scratch.next.iter_mut().zip(input.iter()) {
                *acc *= 1.0 - a * a;
            }
            core::mem::swap(&mut scratch.delta, &mut scratch.next);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }
}

#[derive(Debug, Clone, Default)]
pub struct BackpropScratch {
    delta: Vec<f64>,
    next: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;

    fn naive_forward(net: &Mlp, x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        for l in 0..net.n_layers() {
            let (w, b) = net.layer(l);
            let n_in = net.sizes()[l];
            let mut z: Vec<f64> = (0..b.len())
                .map(|j| b[j] + (0..n_in).map(|i| w[j * n_in + i] * a[i]).sum::<f64>())
                .collect();
            if l + 1 < net.n_layers() {
                z.iter_mut().for_each(|v| *v = libm::tanh(*v));
            }
            a = z;
        }
        a
    }

    #[test]
    fn forward_matches_naive() {
        let mut rng = rng_from(1, &[]);
        let net = Mlp::random(&[5, 7, 6, 3], 1.0, &mut rng);
        let mut ws = Workspace::new(&net);
        let x = [0.3, -0.1, 0.9, -2.0, 0.05];
        let y = net.forward(&x, &mut ws).to_vec();
        let r = naive_forward(&net, &x);
        for (a, b) in y.iter().zip(&r) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = rng_from(2, &[]);
        let mut net = Mlp::random(&[4, 6, 5, 2], 1.0, &mut rng);
        let x = [0.2, -0.7, 0.4, 1.1];
        let c = [0.8, -1.3];
        // loss = c . output
        let mut ws = Workspace::new(&net);
        net.forward(&x, &mut ws);
        let mut grad = vec![0.0; net.param_count()];
        net.backward(&ws, &c, &mut grad, &mut BackpropScratch::default());
        let h = 1e-6;
        for i in 0..net.param_count() {
            let orig = net.params()[i];
            net.params_mut()[i] = orig + h;
            let lp: f64 = naive_forward(&net, &x).iter().zip(&c).map(|(a, b)| a * b).sum();
            net.params_mut()[i] = orig - h;
            let lm: f64 = naive_forward(&net, &x).iter().zip(&c).map(|(a, b)| a * b).sum();
            net.params_mut()[i] = orig;
            let fd = (lp - lm) / (2.0 * h);
            assert!((fd - grad[i]).abs() < 1e-7, "param {i}: {fd} vs {}", grad[i]);
        }
    }
}
