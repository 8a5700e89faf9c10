//! Mixing networks: combine per-agent chosen Q values into `Q_tot`.
//!
//! `Qmix` conditions its weights on the global state through hypernetworks
//! and takes absolute values, so `Q_tot` is monotone in every agent's Q.
//! `Linear` has free-signed weights and exists as a negative control.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config, Error};
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MixerKind {
    /// `Q_tot = Σ Q_m`, no parameters.
    Sum,
    Qmix,
    /// `Q_tot = Σ w_m Q_m + b` with unconstrained `w`.
    Linear,
}

impl fmt::Display for MixerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MixerKind::Sum => "sum",
            MixerKind::Qmix => "qmix",
            MixerKind::Linear => "linear",
        })
    }
}

impl FromStr for MixerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().as_str() {
            "sum" | "vdn" => Ok(MixerKind::Sum),
            "qmix" => Ok(MixerKind::Qmix),
            "linear" => Ok(MixerKind::Linear),
            other => Err(config(format!("unknown mixer {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mixer {
    pub kind: MixerKind,
    pub agents: usize,
    pub state_dim: usize,
    pub embed: usize,
}

fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

fn elu_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        x.exp()
    }
}

/// `y = W x + b` where `W` is `n_out × x.len()` row-major at `p[off..]`.
fn affine(p: &[f64], off: usize, n_out: usize, x: &[f64]) -> Vec<f64> {
    let n_in = x.len();
    let bias = off + n_out * n_in;
    (0..n_out)
        .map(|o| p[bias + o] + super::nn::dot(&p[off + o * n_in..off + (o + 1) * n_in], x))
        .collect()
}

/// Backward of [`affine`] with respect to its parameters.
fn affine_grad(grad: &mut [f64], off: usize, dy: &[f64], x: &[f64]) {
    let n_in = x.len();
    let bias = off + dy.len() * n_in;
    for (o, &d) in dy.iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        for (i, &xi) in x.iter().enumerate() {
            grad[off + o * n_in + i] += d * xi;
        }
        grad[bias + o] += d;
    }
}

struct QmixLayout {
    w1: usize,
    b1: usize,
    w2: usize,
    v1: usize,
    v2: usize,
    end: usize,
}

impl Mixer {
    pub fn new(kind: MixerKind, agents: usize, state_dim: usize, embed: usize) -> Self {
        Self {
            kind,
            agents,
            state_dim,
            embed,
        }
    }

    fn layout(&self) -> QmixLayout {
        let (s, e, n) = (self.state_dim, self.embed, self.agents);
        let w1 = 0;
        let b1 = w1 + n * e * s + n * e;
        let w2 = b1 + e * s + e;
        let v1 = w2 + e * s + e;
        let v2 = v1 + e * s + e;
        QmixLayout {
            w1,
            b1,
            w2,
            v1,
            v2,
            end: v2 + e + 1,
        }
    }

    pub fn num_params(&self) -> usize {
        match self.kind {
            MixerKind::Sum => 0,
            MixerKind::Linear => self.agents + 1,
            MixerKind::Qmix => self.layout().end,
        }
    }

    pub fn init(&self, rng: &mut SimRng) -> Vec<f64> {
        match self.kind {
            MixerKind::Sum => Vec::new(),
            MixerKind::Linear => {
                let mut p = vec![1.0; self.agents];
                p.push(0.0);
                p
            }
            MixerKind::Qmix => {
                let l = self.layout();
                let mut p = vec![0.0; l.end];
                let (s, e, n) = (self.state_dim, self.embed, self.agents);
                let mut fill = |off: usize, rows: usize, cols: usize| {
                    let bound = (6.0 / (rows + cols) as f64).sqrt();
                    for x in &mut p[off..off + rows * cols] {
                        *x = rng.random_range(-bound..bound);
                    }
                };
                fill(l.w1, n * e, s);
                fill(l.b1, e, s);
                fill(l.w2, e, s);
                fill(l.v1, e, s);
                fill(l.v2, 1, e);
                p
            }
        }
    }

    pub fn forward(&self, p: &[f64], qs: &[f64], state: &[f64]) -> f64 {
        debug_assert_eq!(qs.len(), self.agents);
        match self.kind {
            MixerKind::Sum => qs.iter().sum(),
            MixerKind::Linear => super::nn::dot(&p[..self.agents], qs) + p[self.agents],
            MixerKind::Qmix => self.qmix(p, qs, state, None),
        }
    }

    /// Accumulate parameter gradients of `dout · Q_tot` into `grad` and
    /// return `d Q_tot / d qs` scaled by `dout`.
    pub fn backward(
        &self,
        p: &[f64],
        qs: &[f64],
        state: &[f64],
        dout: f64,
        grad: &mut [f64],
    ) -> Vec<f64> {
        match self.kind {
            MixerKind::Sum => vec![dout; qs.len()],
            MixerKind::Linear => {
                for (g, q) in grad[..self.agents].iter_mut().zip(qs) {
                    *g += dout * q;
                }
                grad[self.agents] += dout;
                p[..self.agents].iter().map(|w| dout * w).collect()
            }
            MixerKind::Qmix => {
                let mut dqs = vec![0.0; qs.len()];
                self.qmix(p, qs, state, Some((dout, grad, &mut dqs)));
                dqs
            }
        }
    }

    fn qmix(
        &self,
        p: &[f64],
        qs: &[f64],
        s: &[f64],
        back: Option<(f64, &mut [f64], &mut Vec<f64>)>,
    ) -> f64 {
        debug_assert_eq!(s.len(), self.state_dim);
        let l = self.layout();
        let (e, n) = (self.embed, self.agents);
        let pre_w1 = affine(p, l.w1, n * e, s);
        let b1 = affine(p, l.b1, e, s);
        let pre_w2 = affine(p, l.w2, e, s);
        let pre_v = affine(p, l.v1, e, s);
        let hv: Vec<f64> = pre_v.iter().map(|x| x.max(0.0)).collect();
        let v = affine(p, l.v2, 1, &hv)[0];
        let z: Vec<f64> = (0..e)
            .map(|k| b1[k] + (0..n).map(|i| qs[i] * pre_w1[i * e + k].abs()).sum::<f64>())
            .collect();
        let hid: Vec<f64> = z.iter().map(|&x| elu(x)).collect();
        let q_tot = (0..e).map(|k| hid[k] * pre_w2[k].abs()).sum::<f64>() + v;

        if let Some((dout, grad, dqs)) = back {
            let d_pre_w2: Vec<f64> = (0..e).map(|k| dout * hid[k] * pre_w2[k].signum()).collect();
            affine_grad(grad, l.w2, &d_pre_w2, s);
            let dz: Vec<f64> = (0..e)
                .map(|k| dout * pre_w2[k].abs() * elu_grad(z[k]))
                .collect();
            affine_grad(grad, l.b1, &dz, s);
            let mut d_pre_w1 = vec![0.0; n * e];
            for i in 0..n {
                for k in 0..e {
                    let w = pre_w1[i * e + k];
                    d_pre_w1[i * e + k] = dz[k] * qs[i] * w.signum();
                    dqs[i] += dz[k] * w.abs();
                }
            }
            affine_grad(grad, l.w1, &d_pre_w1, s);
            affine_grad(grad, l.v2, &[dout], &hv);
            let d_pre_v: Vec<f64> = (0..e)
                .map(|k| {
                    if pre_v[k] > 0.0 {
                        dout * p[l.v2 + k]
                    } else {
                        0.0
                    }
                })
                .collect();
            affine_grad(grad, l.v1, &d_pre_v, s);
        }
        q_tot
    }
}
