//! Guided full-trajectory diffusion for joint multi-agent trajectory
//! prediction.
//!
//! A DDPM is trained over whole (history + future) agent trajectories in a
//! PCA latent space. At inference time, history conditioning, goal reaching
//! and collision avoidance are all expressed as guidance losses on the
//! posterior-mean trajectory, optionally combined with RePaint-style hard
//! overwriting of the history.

pub mod data;
pub mod denoiser;
pub mod error;
pub mod guidance;
pub mod math;
pub mod metrics;
pub mod nn;
pub mod sampler;
pub mod schedule;
pub mod synthgen;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
