//! Binary checkpoint format.
//!
//! All integers are little-endian `u64` unless noted, floats are
//! little-endian `f64`:
//!
//! ```text
//! magic "GFTDCKPT" (8 bytes)
//! format version (u32), RNG version (u32)
//! latent_dim, hidden, layers, time_embed_dim, t_hist, t_fut
//! schedule: steps, kind (0 linear, 1 cosine), beta_start, beta_end, gamma
//! codec: ambient dim D, mean[D], components[k·D] row-major,
//!        explained_variance[k], total_variance
//! latent_scale
//! parameter count, parameters in `DenoiserNet::tensors` order
//! ```

use std::path::Path;

use super::model::DenoiserModel;
use super::net::{DenoiserNet, NetConfig};
use crate::error::{Error, Result};
use crate::math::{Matrix, PcaCodec, RNG_VERSION};
use crate::schedule::{NoiseSchedule, ScheduleKind};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"GFTDCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

/// A trained model with the schedule it was trained under.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: DenoiserModel,
    pub schedule: NoiseSchedule,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let m = &self.model;
        let c = m.net.config;
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&RNG_VERSION.to_le_bytes());
        for v in [c.latent_dim, c.hidden, c.layers, c.time_embed_dim, m.t_hist, m.t_fut] {
            put_u64(&mut out, v as u64);
        }
        put_u64(&mut out, self.schedule.steps() as u64);
        let (kind, b0, b1) = match self.schedule.kind() {
            ScheduleKind::Linear { beta_start, beta_end } => (0, beta_start, beta_end),
            ScheduleKind::Cosine => (1, 0.0, 0.0),
        };
        put_u64(&mut out, kind);
        put_f64s(&mut out, &[b0, b1, self.schedule.gamma()]);
        put_u64(&mut out, m.codec.ambient_dim() as u64);
        put_f64s(&mut out, m.codec.mean());
        put_f64s(&mut out, m.codec.components().data());
        put_f64s(&mut out, m.codec.explained_variance());
        put_f64s(&mut out, &[m.codec.total_variance(), m.latent_scale]);
        let params = m.net.flat_params();
        put_u64(&mut out, params.len() as u64);
        put_f64s(&mut out, &params);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported format version {version}")));
        }
        let rng_version = r.u32()?;
        if rng_version != RNG_VERSION {
            return Err(Error::Checkpoint(format!("unsupported RNG version {rng_version}")));
        }
        let config = NetConfig {
            latent_dim: r.usize()?,
            hidden: r.usize()?,
            layers: r.usize()?,
            time_embed_dim: r.usize()?,
        };
        if config.latent_dim == 0 || config.hidden == 0 || config.time_embed_dim % 2 != 0 {
            return Err(Error::Checkpoint("invalid network hyperparameters".into()));
        }
        let t_hist = r.usize()?;
        let t_fut = r.usize()?;
        let steps = r.usize()?;
        let kind = r.u64()?;
        let b0 = r.f64()?;
        let b1 = r.f64()?;
        let gamma = r.f64()?;
        let kind = match kind {
            0 => ScheduleKind::Linear {
                beta_start: b0,
                beta_end: b1,
            },
            1 => ScheduleKind::Cosine,
            other => return Err(Error::Checkpoint(format!("unknown schedule kind {other}"))),
        };
        let schedule = NoiseSchedule::new(steps, kind, gamma)?;
        let dim = r.usize()?;
        if dim != 2 * (t_hist + t_fut) {
            return Err(Error::Checkpoint("codec dimension does not match horizon".into()));
        }
        let k = config.latent_dim;
        let mean = r.f64s(dim)?;
        let components = Matrix::new(k, dim, r.f64s(k * dim)?)
            .map_err(|_| Error::Checkpoint("non-finite codec components".into()))?;
        let explained = r.f64s(k)?;
        let total = r.f64()?;
        let codec = PcaCodec::from_parts(mean, components, explained, total)?;
        let latent_scale = r.f64()?;
        let count = r.usize()?;
        // Shapes are fully determined by the config; the seed is irrelevant.
        let mut net = DenoiserNet::new(config, 0);
        if count != net.num_params() {
            return Err(Error::Checkpoint(format!(
                "parameter count {count} does not match architecture ({})",
                net.num_params()
            )));
        }
        net.set_flat_params(&r.f64s(count)?)?;
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint("trailing bytes".into()));
        }
        let model = DenoiserModel {
            net,
            codec,
            latent_scale,
            t_hist,
            t_fut,
        };
        model
            .validate()
            .map_err(|e| Error::Checkpoint(format!("inconsistent model: {e}")))?;
        Ok(Self { model, schedule })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f64s(out: &mut Vec<u8>, v: &[f64]) {
    for x in v {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|e| *e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint("truncated file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn usize(&mut self) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v)
            .ok()
            .filter(|v| *v < (1 << 32))
            .ok_or_else(|| Error::Checkpoint(format!("implausible size {v}")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::Checkpoint("size overflow".into()))?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}
