//! Minimal dense layers with hand-written backward passes.
//!
//! Activations are stored as row-major `rows × dim` slices. Every backward
//! function takes an optional gradient accumulator with the same shape as
//! the layer; passing `None` computes input gradients only.

use crate::math::RngStream;

#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub in_dim: usize,
    pub out_dim: usize,
    /// `out_dim × in_dim`, row-major.
    pub w: Vec<f64>,
    /// Empty for bias-free layers.
    pub b: Vec<f64>,
}

impl Linear {
    /// Uniform fan-in initialization, `U(−1/√in, 1/√in)`.
    pub fn new(in_dim: usize, out_dim: usize, bias: bool, rng: &mut RngStream) -> Self {
        let bound = 1.0 / (in_dim as f64).sqrt();
        let w = (0..in_dim * out_dim)
            .map(|_| rng.uniform_range(-bound, bound))
            .collect();
        let b = if bias {
            (0..out_dim).map(|_| rng.uniform_range(-bound, bound)).collect()
        } else {
            Vec::new()
        };
        Self { in_dim, out_dim, w, b }
    }

    pub fn zeros(in_dim: usize, out_dim: usize, bias: bool) -> Self {
        Self {
            in_dim,
            out_dim,
            w: vec![0.0; in_dim * out_dim],
            b: if bias { vec![0.0; out_dim] } else { Vec::new() },
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.in_dim, self.out_dim, !self.b.is_empty())
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let rows = x.len() / self.in_dim;
        let mut y = Vec::with_capacity(rows * self.out_dim);
        for r in 0..rows {
            let xr = &x[r * self.in_dim..(r + 1) * self.in_dim];
            for o in 0..self.out_dim {
                let wr = &self.w[o * self.in_dim..(o + 1) * self.in_dim];
                let mut acc = if self.b.is_empty() { 0.0 } else { self.b[o] };
                for (a, b) in wr.iter().zip(xr) {
                    acc += a * b;
                }
                y.push(acc);
            }
        }
        y
    }

    /// `Wᵀ · dy` for each row of `dy`.
    pub fn apply_transpose(&self, dy: &[f64]) -> Vec<f64> {
        let rows = dy.len() / self.out_dim;
        let mut dx = vec![0.0; rows * self.in_dim];
        for r in 0..rows {
            let dyr = &dy[r * self.out_dim..(r + 1) * self.out_dim];
            let dxr = &mut dx[r * self.in_dim..(r + 1) * self.in_dim];
            for (o, &g) in dyr.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                let wr = &self.w[o * self.in_dim..(o + 1) * self.in_dim];
                for (d, w) in dxr.iter_mut().zip(wr) {
                    *d += g * w;
                }
            }
        }
        dx
    }

    /// Returns `dL/dx`; accumulates parameter gradients into `grad`.
    pub fn backward(&self, x: &[f64], dy: &[f64], grad: Option<&mut Linear>) -> Vec<f64> {
        let rows = x.len() / self.in_dim;
        let dx = self.apply_transpose(dy);
        if let Some(grad) = grad {
            for r in 0..rows {
                let xr = &x[r * self.in_dim..(r + 1) * self.in_dim];
                let dyr = &dy[r * self.out_dim..(r + 1) * self.out_dim];
                for (o, &g) in dyr.iter().enumerate() {
                    if g == 0.0 {
                        continue;
                    }
                    let gw = &mut grad.w[o * self.in_dim..(o + 1) * self.in_dim];
                    for (d, xv) in gw.iter_mut().zip(xr) {
                        *d += g * xv;
                    }
                    if !grad.b.is_empty() {
                        grad.b[o] += g;
                    }
                }
            }
        }
        dx
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm {
    pub gain: Vec<f64>,
    pub bias: Vec<f64>,
}

pub struct LayerNormCache {
    xhat: Vec<f64>,
    inv_std: Vec<f64>,
}

const LN_EPS: f64 = 1e-5;

impl LayerNorm {
    pub fn new(dim: usize) -> Self {
        Self {
            gain: vec![1.0; dim],
            bias: vec![0.0; dim],
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            gain: vec![0.0; self.gain.len()],
            bias: vec![0.0; self.bias.len()],
        }
    }

    pub fn forward(&self, x: &[f64]) -> (Vec<f64>, LayerNormCache) {
        let dim = self.gain.len();
        let rows = x.len() / dim;
        let mut y = vec![0.0; x.len()];
        let mut xhat = vec![0.0; x.len()];
        let mut inv_std = Vec::with_capacity(rows);
        for r in 0..rows {
            let xr = &x[r * dim..(r + 1) * dim];
            let mean = xr.iter().sum::<f64>() / dim as f64;
            let var = xr.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / dim as f64;
            let is = 1.0 / (var + LN_EPS).sqrt();
            inv_std.push(is);
            for c in 0..dim {
                let h = (xr[c] - mean) * is;
                xhat[r * dim + c] = h;
                y[r * dim + c] = h * self.gain[c] + self.bias[c];
            }
        }
        (y, LayerNormCache { xhat, inv_std })
    }

    pub fn backward(&self, cache: &LayerNormCache, dy: &[f64], grad: Option<&mut LayerNorm>) -> Vec<f64> {
        let dim = self.gain.len();
        let rows = dy.len() / dim;
        let mut dx = vec![0.0; dy.len()];
        let mut dxhat = vec![0.0; dim];
        for r in 0..rows {
            let xh = &cache.xhat[r * dim..(r + 1) * dim];
            let dyr = &dy[r * dim..(r + 1) * dim];
            for c in 0..dim {
                dxhat[c] = dyr[c] * self.gain[c];
            }
            let mean_d = dxhat.iter().sum::<f64>() / dim as f64;
            let mean_dx = dxhat.iter().zip(xh).map(|(a, b)| a * b).sum::<f64>() / dim as f64;
            let is = cache.inv_std[r];
            for c in 0..dim {
                dx[r * dim + c] = is * (dxhat[c] - mean_d - xh[c] * mean_dx);
            }
        }
        if let Some(grad) = grad {
            for r in 0..rows {
                for c in 0..dim {
                    let g = dy[r * dim + c];
                    grad.gain[c] += g * cache.xhat[r * dim + c];
                    grad.bias[c] += g;
                }
            }
        }
        dx
    }
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `x · tanh(softplus(x))`
pub fn mish(x: f64) -> f64 {
    x * softplus(x).tanh()
}

pub fn mish_grad(x: f64) -> f64 {
    let t = softplus(x).tanh();
    t + x * (1.0 - t * t) * sigmoid(x)
}

pub fn mish_all(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| mish(v)).collect()
}

pub fn mish_backward(pre: &[f64], dy: &[f64]) -> Vec<f64> {
    pre.iter().zip(dy).map(|(&p, &g)| g * mish_grad(p)).collect()
}

pub const LEAKY_SLOPE: f64 = 0.2;

pub fn leaky_relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        LEAKY_SLOPE * x
    }
}

pub fn leaky_relu_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        LEAKY_SLOPE
    }
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}
