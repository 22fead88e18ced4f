//! Low-Tucker-rank estimation of order-3 tensors by regularized projected
//! gradient descent on factors and core.
//!
//! Four observation models share one fitting loop: sub-Gaussian denoising,
//! tensor regression, Poisson and binomial. Spectral initializers, Tucker
//! decompositions, seeded data generators and a sweep harness with CSV
//! output sit around it.

pub mod bench;
pub mod dataset;
pub mod decomp;
pub mod error;
pub mod init;
pub mod io;
pub mod linalg;
pub mod matrix;
pub mod models;
pub mod pgd;
pub mod simgen;
pub mod tensor;

pub use error::{Error, Result};
pub use matrix::{kron, Matrix};
pub use tensor::{Dims, Tensor3, TuckerState};
