//! Flat-parameter MLPs with hand-written backprop, and Adam.
//!
//! Parameters live in one `f64` slice so they can be checkpointed, digested
//! and shipped between oracles as a unit. Layer `l` stores its weights
//! row-major as `[out][in]` followed by `out` biases. Hidden layers use tanh;
//! the output layer is linear.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::SimRng;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpShape {
    pub sizes: Vec<usize>,
}

/// Per-layer activations kept for the backward pass.
#[derive(Debug, Clone, Default)]
pub struct MlpTrace {
    acts: Vec<Vec<f64>>,
}

impl MlpShape {
    pub fn new(sizes: Vec<usize>) -> Self {
        assert!(
            sizes.len() >= 2 && sizes.iter().all(|&s| s > 0),
            "bad MLP sizes {sizes:?}"
        );
        Self { sizes }
    }

    pub fn inputs(&self) -> usize {
        self.sizes[0]
    }

    pub fn outputs(&self) -> usize {
        *self.sizes.last().expect("non-empty")
    }

    pub fn num_params(&self) -> usize {
        self.sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(&self, rng: &mut SimRng) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for w in self.sizes.windows(2) {
            let bound = (6.0 / (w[0] + w[1]) as f64).sqrt();
            out.extend((0..w[0] * w[1]).map(|_| rng.random_range(-bound..bound)));
            out.extend(std::iter::repeat(0.0).take(w[1]));
        }
        out
    }

    /// Zero the output layer so every output starts at exactly 0.
    pub fn zero_output_layer(&self, params: &mut [f64]) {
        let n = self.sizes.len();
        let last = self.sizes[n - 2] * self.sizes[n - 1] + self.sizes[n - 1];
        let len = params.len();
        params[len - last..].iter_mut().for_each(|p| *p = 0.0);
    }

    pub fn forward(&self, params: &[f64], x: &[f64]) -> Vec<f64> {
        let mut trace = MlpTrace::default();
        self.forward_traced(params, x, &mut trace)
    }

    pub fn forward_traced(&self, params: &[f64], x: &[f64], trace: &mut MlpTrace) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.inputs());
        trace.acts.clear();
        trace.acts.push(x.to_vec());
        let layers = self.sizes.len() - 1;
        let mut off = 0;
        for l in 0..layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &params[off..off + n_in * n_out];
            let b = &params[off + n_in * n_out..off + n_in * n_out + n_out];
            off += n_in * n_out + n_out;
            let input = trace.acts.last().expect("input pushed");
            let mut out: Vec<f64> = (0..n_out)
                .map(|o| b[o] + dot(&w[o * n_in..(o + 1) * n_in], input))
                .collect();
            if l + 1 < layers {
                out.iter_mut().for_each(|v| *v = v.tanh());
            }
            trace.acts.push(out);
        }
        trace.acts.last().expect("output").clone()
    }

    /// Accumulate `d loss / d params` into `grad` given `d loss / d output`.
    /// Returns `d loss / d input`.
    pub fn backward(
        &self,
        params: &[f64],
        trace: &MlpTrace,
        dout: &[f64],
        grad: &mut [f64],
    ) -> Vec<f64> {
        let layers = self.sizes.len() - 1;
        let mut offsets = Vec::with_capacity(layers);
        let mut off = 0;
        for l in 0..layers {
            offsets.push(off);
            off += self.sizes[l] * self.sizes[l + 1] + self.sizes[l + 1];
        }
        let mut delta = dout.to_vec();
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let off = offsets[l];
            if l + 1 < layers {
                // tanh' = 1 - y^2 on this layer's output.
                let y = &trace.acts[l + 1];
                delta.iter_mut().zip(y).for_each(|(d, y)| *d *= 1.0 - y * y);
            }
            let input = &trace.acts[l];
            let mut dinput = vec![0.0; n_in];
            for o in 0..n_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                let row = off + o * n_in;
                for i in 0..n_in {
                    grad[row + i] += d * input[i];
                    dinput[i] += d * params[row + i];
                }
                grad[off + n_in * n_out + o] += d;
            }
            delta = dinput;
        }
        delta
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            params[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + self.eps);
        }
    }
}

/// Scale `grad` down to at most `max_norm` in L2.
pub fn clip_norm(grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        grad.iter_mut().for_each(|g| *g *= s);
    }
    norm
}
