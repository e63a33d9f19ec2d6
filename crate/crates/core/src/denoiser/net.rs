//! Graph-attention noise predictor `ε_θ(x_t, t, E)`.
//!
//! Per scene with `N` agents:
//!
//! 1. `h⁰_i = LN(MLP([x_t^i ; temb(t)]))`
//! 2. each GAT layer, with `m_j = W h_j` and the augmented edge
//!    `E_t^{ij} = [E^{ij} ; h⁰_i]`,
//!    `e_ij = LeakyReLU(a_src·m_i + a_dst·m_j + a_edge·(W_e E_t^{ij}))`,
//!    `α_ij = softmax_j(e_ij)`, `u_i = LN(h_i + Σ_j α_ij m_j)`,
//!    `h'_i = LN(u_i + MLP(u_i))`
//! 3. `ε̂_i = MLP(h^L_i) + x_t^i`
//!
//! All MLPs are two linear layers with a Mish in between. The decoder's
//! last layer starts at zero, so a fresh network returns its input.

use crate::data::EDGE_DIM;
use crate::error::{Error, Result};
use crate::math::{dot, RngStream};
use crate::nn::{
    add, leaky_relu, leaky_relu_grad, mish_all, mish_backward, LayerNorm, LayerNormCache, Linear,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetConfig {
    pub latent_dim: usize,
    pub hidden: usize,
    pub layers: usize,
    pub time_embed_dim: usize,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            latent_dim: 10,
            hidden: 128,
            layers: 3,
            time_embed_dim: 32,
        }
    }
}

/// Sinusoidal embedding, interleaved as `(sin ω₀t, cos ω₀t, sin ω₁t, …)`
/// with `ω_i = 10000^{−2i/dim}`.
pub fn time_embedding(t: usize, dim: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(dim);
    for i in 0..dim / 2 {
        let freq = 10000f64.powf(-((2 * i) as f64) / dim as f64);
        let (s, c) = (t as f64 * freq).sin_cos();
        out.push(s);
        out.push(c);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub l1: Linear,
    pub l2: Linear,
}

struct MlpCache {
    input: Vec<f64>,
    pre: Vec<f64>,
    act: Vec<f64>,
}

impl Mlp {
    fn new(i: usize, h: usize, o: usize, rng: &mut RngStream) -> Self {
        Self {
            l1: Linear::new(i, h, true, rng),
            l2: Linear::new(h, o, true, rng),
        }
    }

    fn zeros_like(&self) -> Self {
        Self {
            l1: self.l1.zeros_like(),
            l2: self.l2.zeros_like(),
        }
    }

    fn forward(&self, x: &[f64]) -> (Vec<f64>, MlpCache) {
        let pre = self.l1.forward(x);
        let act = mish_all(&pre);
        let y = self.l2.forward(&act);
        (
            y,
            MlpCache {
                input: x.to_vec(),
                pre,
                act,
            },
        )
    }

    fn backward(&self, c: &MlpCache, dy: &[f64], grad: Option<&mut Mlp>) -> Vec<f64> {
        let (g1, g2) = match grad {
            Some(g) => (Some(&mut g.l1), Some(&mut g.l2)),
            None => (None, None),
        };
        let dact = self.l2.backward(&c.act, dy, g2);
        let dpre = mish_backward(&c.pre, &dact);
        self.l1.backward(&c.input, &dpre, g1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GatLayer {
    pub w: Linear,
    pub attn_src: Vec<f64>,
    pub attn_dst: Vec<f64>,
    /// `(EDGE_DIM + hidden) → hidden`, bias-free.
    pub edge_proj: Linear,
    pub attn_edge: Vec<f64>,
    pub norm1: LayerNorm,
    pub ffn: Mlp,
    pub norm2: LayerNorm,
}

struct GatCache {
    input: Vec<f64>,
    msg: Vec<f64>,
    /// `edge_projᵀ · attn_edge`
    edge_vec: Vec<f64>,
    pre: Vec<f64>,
    attn: Vec<f64>,
    norm1: LayerNormCache,
    ffn: MlpCache,
    norm2: LayerNormCache,
}

impl GatLayer {
    fn new(h: usize, rng: &mut RngStream) -> Self {
        let bound = 1.0 / (h as f64).sqrt();
        let vec_h = |rng: &mut RngStream| (0..h).map(|_| rng.uniform_range(-bound, bound)).collect();
        Self {
            w: Linear::new(h, h, false, rng),
            attn_src: vec_h(rng),
            attn_dst: vec_h(rng),
            edge_proj: Linear::new(EDGE_DIM + h, h, false, rng),
            attn_edge: vec_h(rng),
            norm1: LayerNorm::new(h),
            ffn: Mlp::new(h, h, h, rng),
            norm2: LayerNorm::new(h),
        }
    }

    fn zeros_like(&self) -> Self {
        let h = self.attn_src.len();
        Self {
            w: self.w.zeros_like(),
            attn_src: vec![0.0; h],
            attn_dst: vec![0.0; h],
            edge_proj: self.edge_proj.zeros_like(),
            attn_edge: vec![0.0; h],
            norm1: self.norm1.zeros_like(),
            ffn: self.ffn.zeros_like(),
            norm2: self.norm2.zeros_like(),
        }
    }

    fn forward(&self, h_in: &[f64], h0: &[f64], edges: &[[f64; EDGE_DIM]], n: usize) -> (Vec<f64>, GatCache) {
        let hd = self.attn_src.len();
        let msg = self.w.forward(h_in);
        let edge_vec = self.edge_proj.apply_transpose(&self.attn_edge);
        let (v_edge, v_node) = edge_vec.split_at(EDGE_DIM);

        let src: Vec<f64> = (0..n).map(|i| dot(&self.attn_src, &msg[i * hd..(i + 1) * hd])).collect();
        let dst: Vec<f64> = (0..n).map(|j| dot(&self.attn_dst, &msg[j * hd..(j + 1) * hd])).collect();
        let node_term: Vec<f64> = (0..n).map(|i| dot(v_node, &h0[i * hd..(i + 1) * hd])).collect();

        let mut pre = vec![0.0; n * n];
        let mut attn = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                pre[i * n + j] = src[i] + dst[j] + node_term[i] + dot(v_edge, &edges[i * n + j]);
            }
            let row = &pre[i * n..(i + 1) * n];
            let max = row.iter().map(|&p| leaky_relu(p)).fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for j in 0..n {
                let e = (leaky_relu(row[j]) - max).exp();
                attn[i * n + j] = e;
                z += e;
            }
            attn[i * n..(i + 1) * n].iter_mut().for_each(|a| *a /= z);
        }

        let mut r1 = h_in.to_vec();
        for i in 0..n {
            for j in 0..n {
                let a = attn[i * n + j];
                let mj = &msg[j * hd..(j + 1) * hd];
                for (r, m) in r1[i * hd..(i + 1) * hd].iter_mut().zip(mj) {
                    *r += a * m;
                }
            }
        }
        let (u, norm1) = self.norm1.forward(&r1);
        let (f, ffn) = self.ffn.forward(&u);
        let (out, norm2) = self.norm2.forward(&add(&u, &f));
        (
            out,
            GatCache {
                input: h_in.to_vec(),
                msg,
                edge_vec,
                pre,
                attn,
                norm1,
                ffn,
                norm2,
            },
        )
    }

    /// Returns `dL/dh_in`; adds the contribution through the augmented edges
    /// to `dh0`.
    fn backward(
        &self,
        c: &GatCache,
        dout: &[f64],
        h0: &[f64],
        edges: &[[f64; EDGE_DIM]],
        n: usize,
        dh0: &mut [f64],
        mut grad: Option<&mut GatLayer>,
    ) -> Vec<f64> {
        let hd = self.attn_src.len();
        let dr2 = self.norm2.backward(&c.norm2, dout, grad.as_deref_mut().map(|g| &mut g.norm2));
        let mut du = self.ffn.backward(&c.ffn, &dr2, grad.as_deref_mut().map(|g| &mut g.ffn));
        du.iter_mut().zip(&dr2).for_each(|(a, b)| *a += b);
        let dr1 = self.norm1.backward(&c.norm1, &du, grad.as_deref_mut().map(|g| &mut g.norm1));

        let mut dh_in = dr1.clone();
        let mut dmsg = vec![0.0; n * hd];
        let mut dpre = vec![0.0; n * n];
        for i in 0..n {
            let dagg = &dr1[i * hd..(i + 1) * hd];
            let mut dattn = vec![0.0; n];
            for j in 0..n {
                let a = c.attn[i * n + j];
                let mj = &c.msg[j * hd..(j + 1) * hd];
                dattn[j] = dot(dagg, mj);
                for (d, g) in dmsg[j * hd..(j + 1) * hd].iter_mut().zip(dagg) {
                    *d += a * g;
                }
            }
            let row_attn = &c.attn[i * n..(i + 1) * n];
            let s: f64 = row_attn.iter().zip(&dattn).map(|(a, d)| a * d).sum();
            for j in 0..n {
                let de = row_attn[j] * (dattn[j] - s);
                dpre[i * n + j] = de * leaky_relu_grad(c.pre[i * n + j]);
            }
        }

        let v_node = &c.edge_vec[EDGE_DIM..];
        let mut dvec = vec![0.0; EDGE_DIM + hd];
        let mut dsrc = vec![0.0; hd];
        let mut ddst = vec![0.0; hd];
        for i in 0..n {
            let row_sum: f64 = dpre[i * n..(i + 1) * n].iter().sum();
            let col_sum: f64 = (0..n).map(|r| dpre[r * n + i]).sum();
            let mi = &c.msg[i * hd..(i + 1) * hd];
            for k in 0..hd {
                dsrc[k] += row_sum * mi[k];
                ddst[k] += col_sum * mi[k];
                dmsg[i * hd + k] += row_sum * self.attn_src[k] + col_sum * self.attn_dst[k];
                dvec[EDGE_DIM + k] += row_sum * h0[i * hd + k];
                dh0[i * hd + k] += row_sum * v_node[k];
            }
            for j in 0..n {
                let g = dpre[i * n + j];
                for (d, e) in dvec[..EDGE_DIM].iter_mut().zip(&edges[i * n + j]) {
                    *d += g * e;
                }
            }
        }

        let dw_in = self.w.backward(&c.input, &dmsg, grad.as_deref_mut().map(|g| &mut g.w));
        dh_in.iter_mut().zip(&dw_in).for_each(|(a, b)| *a += b);

        if let Some(g) = grad {
            for k in 0..hd {
                g.attn_src[k] += dsrc[k];
                g.attn_dst[k] += ddst[k];
            }
            let cols = EDGE_DIM + hd;
            for o in 0..hd {
                let ae = self.attn_edge[o];
                let wrow = &self.edge_proj.w[o * cols..(o + 1) * cols];
                g.attn_edge[o] += dot(wrow, &dvec);
                for (d, v) in g.edge_proj.w[o * cols..(o + 1) * cols].iter_mut().zip(&dvec) {
                    *d += ae * v;
                }
            }
        }
        dh_in
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenoiserNet {
    pub config: NetConfig,
    pub encoder: Mlp,
    pub encoder_norm: LayerNorm,
    pub layers: Vec<GatLayer>,
    pub decoder: Mlp,
}

/// Activations saved by [`DenoiserNet::forward`] for the backward pass.
pub struct ForwardPass {
    pub eps_hat: Vec<f64>,
    n: usize,
    enc: MlpCache,
    enc_norm: LayerNormCache,
    h0: Vec<f64>,
    layers: Vec<GatCache>,
    dec: MlpCache,
}

impl ForwardPass {
    /// Row-stochastic `N × N` attention matrix of GAT layer `layer`.
    pub fn attention(&self, layer: usize) -> &[f64] {
        &self.layers[layer].attn
    }

    pub fn num_agents(&self) -> usize {
        self.n
    }
}

impl DenoiserNet {
    pub fn new(config: NetConfig, seed: u64) -> Self {
        let mut rng = RngStream::derive(seed, &[0x6e6574]);
        let h = config.hidden;
        let encoder = Mlp::new(config.latent_dim + config.time_embed_dim, h, h, &mut rng);
        let layers = (0..config.layers).map(|_| GatLayer::new(h, &mut rng)).collect();
        let mut decoder = Mlp::new(h, h, config.latent_dim, &mut rng);
        decoder.l2 = Linear::zeros(h, config.latent_dim, true);
        Self {
            config,
            encoder,
            encoder_norm: LayerNorm::new(h),
            layers,
            decoder,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            config: self.config,
            encoder: self.encoder.zeros_like(),
            encoder_norm: self.encoder_norm.zeros_like(),
            layers: self.layers.iter().map(GatLayer::zeros_like).collect(),
            decoder: self.decoder.zeros_like(),
        }
    }

    /// Parameter tensors in checkpoint order.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = vec![
            &self.encoder.l1.w,
            &self.encoder.l1.b,
            &self.encoder.l2.w,
            &self.encoder.l2.b,
            &self.encoder_norm.gain,
            &self.encoder_norm.bias,
        ];
        for l in &self.layers {
            out.extend([
                &l.w.w[..],
                &l.attn_src,
                &l.attn_dst,
                &l.edge_proj.w,
                &l.attn_edge,
                &l.norm1.gain,
                &l.norm1.bias,
                &l.ffn.l1.w,
                &l.ffn.l1.b,
                &l.ffn.l2.w,
                &l.ffn.l2.b,
                &l.norm2.gain,
                &l.norm2.bias,
            ]);
        }
        out.extend([
            &self.decoder.l1.w[..],
            &self.decoder.l1.b,
            &self.decoder.l2.w,
            &self.decoder.l2.b,
        ]);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![
            &mut self.encoder.l1.w,
            &mut self.encoder.l1.b,
            &mut self.encoder.l2.w,
            &mut self.encoder.l2.b,
            &mut self.encoder_norm.gain,
            &mut self.encoder_norm.bias,
        ];
        for l in &mut self.layers {
            out.extend([
                &mut l.w.w[..],
                &mut l.attn_src,
                &mut l.attn_dst,
                &mut l.edge_proj.w,
                &mut l.attn_edge,
                &mut l.norm1.gain,
                &mut l.norm1.bias,
                &mut l.ffn.l1.w,
                &mut l.ffn.l1.b,
                &mut l.ffn.l2.w,
                &mut l.ffn.l2.b,
                &mut l.norm2.gain,
                &mut l.norm2.bias,
            ]);
        }
        out.extend([
            &mut self.decoder.l1.w[..],
            &mut self.decoder.l1.b,
            &mut self.decoder.l2.w,
            &mut self.decoder.l2.b,
        ]);
        out
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn flat_params(&self) -> Vec<f64> {
        self.tensors().concat()
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        let expected = self.num_params();
        if flat.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: flat.len(),
            });
        }
        let mut off = 0;
        for t in self.tensors_mut() {
            t.copy_from_slice(&flat[off..off + t.len()]);
            off += t.len();
        }
        Ok(())
    }

    /// Runs the network on `n` latent nodes (`x_t` is `n × latent_dim`).
    pub fn forward(&self, x_t: &[f64], n: usize, t: usize, edges: &[[f64; EDGE_DIM]]) -> Result<ForwardPass> {
        let k = self.config.latent_dim;
        if x_t.len() != n * k {
            return Err(Error::DimensionMismatch {
                expected: n * k,
                got: x_t.len(),
            });
        }
        if edges.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: edges.len(),
            });
        }
        let temb = time_embedding(t, self.config.time_embed_dim);
        let mut input = Vec::with_capacity(n * (k + temb.len()));
        for i in 0..n {
            input.extend_from_slice(&x_t[i * k..(i + 1) * k]);
            input.extend_from_slice(&temb);
        }
        let (a, enc) = self.encoder.forward(&input);
        let (h0, enc_norm) = self.encoder_norm.forward(&a);
        check_finite(&h0, "encoder")?;

        let mut h = h0.clone();
        let mut caches = Vec::with_capacity(self.layers.len());
        for (li, layer) in self.layers.iter().enumerate() {
            let (out, cache) = layer.forward(&h, &h0, edges, n);
            check_finite(&out, &format!("GAT layer {li}"))?;
            h = out;
            caches.push(cache);
        }
        let (out, dec) = self.decoder.forward(&h);
        let eps_hat = add(&out, x_t);
        check_finite(&eps_hat, "decoder")?;
        Ok(ForwardPass {
            eps_hat,
            n,
            enc,
            enc_norm,
            h0,
            layers: caches,
            dec,
        })
    }

    /// Backpropagates `d_eps = dL/dε̂`; returns `dL/dx_t` and, when `grads`
    /// is given, accumulates parameter gradients into it.
    pub fn backward(
        &self,
        pass: &ForwardPass,
        d_eps: &[f64],
        edges: &[[f64; EDGE_DIM]],
        mut grads: Option<&mut DenoiserNet>,
    ) -> Vec<f64> {
        let n = pass.n;
        let k = self.config.latent_dim;
        let hd = self.config.hidden;
        let mut dx = d_eps.to_vec();
        let mut dh = self
            .decoder
            .backward(&pass.dec, d_eps, grads.as_deref_mut().map(|g| &mut g.decoder));
        let mut dh0 = vec![0.0; n * hd];
        for (li, layer) in self.layers.iter().enumerate().rev() {
            let g = grads.as_deref_mut().map(|g| &mut g.layers[li]);
            dh = layer.backward(&pass.layers[li], &dh, &pass.h0, edges, n, &mut dh0, g);
        }
        dh.iter_mut().zip(&dh0).for_each(|(a, b)| *a += b);
        let da = self
            .encoder_norm
            .backward(&pass.enc_norm, &dh, grads.as_deref_mut().map(|g| &mut g.encoder_norm));
        let din = self
            .encoder
            .backward(&pass.enc, &da, grads.as_deref_mut().map(|g| &mut g.encoder));
        let width = k + self.config.time_embed_dim;
        for i in 0..n {
            for c in 0..k {
                dx[i * k + c] += din[i * width + c];
            }
        }
        dx
    }
}

fn check_finite(v: &[f64], context: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::numeric(context))
    }
}
