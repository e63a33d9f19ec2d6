//! Numeric kernels: dense matrices, seeded random streams, PCA and
//! finite-difference gradients.

mod gradcheck;
mod matrix;
mod pca;
mod rng;

pub use gradcheck::{finite_diff_grad, relative_error};
pub use matrix::{dot, norm, symmetric_eigen, Matrix};
pub use pca::PcaCodec;
pub use rng::{RngStream, RNG_VERSION};
