//! Spectral initializers for each observation model.
//!
//! Each initializer forms a model-specific proxy `X̃` of the truth, takes a
//! rank-`(r1, r2, r3)` Tucker approximation `[[S̃; Ũ1, Ũ2, Ũ3]]` with
//! orthonormal `Ũ_k`, and returns the balanced state `U_k = b Ũ_k`,
//! `S = S̃ / b³`. The reconstruction does not depend on `b`.
//!
//! | model      | proxy / factor estimate                                |
//! |------------|--------------------------------------------------------|
//! | denoise    | `Ũ_k` = HeteroPCA of `M_k(Y) M_k(Y)^T`, `S̃ = Y ×Ũ^T`   |
//! | regression | `X̃ = (1/n) Σ y_i A_i`                                  |
//! | poisson    | `X̃ = log((Y + ½) / I)`                                 |
//! | binomial   | `X̃ = log((Y + ½) / (N − Y + ½))`                       |

use crate::decomp::{check_ranks, hooi, hosvd};
use crate::error::{ensure, Result};
use crate::linalg::{hetero_pca, HETERO_PCA_MAX_ITERS};
use crate::models::ObservationModel;
use crate::tensor::{Dims, Tensor3, TuckerState};

/// Default number of HOOI sweeps inside an initializer.
pub const INIT_HOOI_ITERS: usize = 10;

/// How the Tucker approximation of the proxy tensor is taken.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Spectral {
    Hosvd,
    Hooi { t_max: usize },
}

impl Default for Spectral {
    fn default() -> Self {
        Spectral::Hooi { t_max: INIT_HOOI_ITERS }
    }
}

impl Spectral {
    pub fn from_flag(use_hooi: bool) -> Self {
        if use_hooi {
            Spectral::default()
        } else {
            Spectral::Hosvd
        }
    }

    /// Orthonormal-factor Tucker approximation (`scale_b = 1`).
    pub fn decompose(self, x: &Tensor3, ranks: Dims) -> Result<TuckerState> {
        match self {
            Spectral::Hosvd => hosvd(x, ranks),
            Spectral::Hooi { t_max } => hooi(x, ranks, t_max),
        }
    }
}

fn balanced(state: TuckerState, b: f64) -> Result<TuckerState> {
    ensure!(b > 0.0 && b.is_finite(), InvalidArgument, "scale b must be positive, got {b}");
    state.rescale(b)
}

/// Sub-Gaussian denoising: HeteroPCA on each mode's Gram matrix.
pub fn init_subgaussian(y: &Tensor3, ranks: Dims, b: f64) -> Result<TuckerState> {
    check_ranks(y.dims(), ranks)?;
    let mut factors = Vec::with_capacity(3);
    for mode in 1..=3 {
        let m = y.matricize(mode)?;
        factors.push(hetero_pca(&m.matmul_t(&m)?, ranks[mode - 1], HETERO_PCA_MAX_ITERS)?);
    }
    let factors: [_; 3] = factors.try_into().expect("three modes");
    let core = y.project(&factors)?;
    balanced(TuckerState::new(core, factors, 1.0)?, b)
}

/// `(1/n) Σ y_i A_i` over designs stored back to back.
pub fn regression_sketch(dims: Dims, designs: &[f64], responses: &[f64]) -> Result<Tensor3> {
    let n = responses.len();
    ensure!(n >= 1, InvalidArgument, "regression needs at least one sample");
    let len: usize = dims.iter().product();
    ensure!(designs.len() == n * len, DimensionMismatch, "{} design entries for {n} samples", designs.len());
    let mut acc = vec![0.0; len];
    for (a, &y) in designs.chunks_exact(len).zip(responses) {
        for (s, &v) in acc.iter_mut().zip(a) {
            *s += y * v;
        }
    }
    let inv = 1.0 / n as f64;
    acc.iter_mut().for_each(|v| *v *= inv);
    Tensor3::from_vec(dims, acc)
}

pub fn init_regression(
    designs: &[Tensor3],
    responses: &[f64],
    ranks: Dims,
    b: f64,
    spectral: Spectral,
) -> Result<TuckerState> {
    ensure!(!designs.is_empty(), InvalidArgument, "regression needs at least one sample");
    ensure!(designs.len() == responses.len(), DimensionMismatch, "{} designs, {} responses", designs.len(), responses.len());
    let dims = designs[0].dims();
    let mut flat = Vec::with_capacity(designs.len() * designs[0].len());
    for a in designs {
        a.check_same_dims(&designs[0])?;
        flat.extend_from_slice(a.as_slice());
    }
    let sketch = regression_sketch(dims, &flat, responses)?;
    balanced(spectral.decompose(&sketch, ranks)?, b)
}

/// `log((Y + ½) / I)`.
pub fn poisson_sketch(y: &Tensor3, intensity: f64) -> Result<Tensor3> {
    ensure!(intensity > 0.0 && intensity.is_finite(), InvalidArgument, "intensity must be positive, got {intensity}");
    ensure!(y.as_slice().iter().all(|&v| v >= 0.0), InvalidArgument, "counts must be non-negative");
    Ok(y.map(|v| ((v + 0.5) / intensity).ln()))
}

pub fn init_poisson(y: &Tensor3, intensity: f64, ranks: Dims, b: f64, spectral: Spectral) -> Result<TuckerState> {
    balanced(spectral.decompose(&poisson_sketch(y, intensity)?, ranks)?, b)
}

/// `log((Y + ½) / (N − Y + ½))`.
pub fn binomial_sketch(y: &Tensor3, n_pop: &Tensor3) -> Result<Tensor3> {
    ensure!(
        y.as_slice().iter().zip(n_pop.as_slice()).all(|(&k, &n)| 0.0 <= k && k <= n),
        InvalidArgument,
        "binomial counts must lie in [0, N]"
    );
    y.zip_map(n_pop, |k, n| ((k + 0.5) / (n - k + 0.5)).ln())
}

pub fn init_binomial(y: &Tensor3, n_pop: &Tensor3, ranks: Dims, b: f64, spectral: Spectral) -> Result<TuckerState> {
    balanced(spectral.decompose(&binomial_sketch(y, n_pop)?, ranks)?, b)
}

/// Proxy tensor `X̃` for the three models that decompose one (denoising
/// returns `Y`).
pub fn sketch(model: &ObservationModel) -> Result<Tensor3> {
    use crate::models::ModelKind::*;
    match model.kind() {
        SubGaussianPca => Ok(model.observations().expect("dense model").clone()),
        TensorRegression => regression_sketch(
            model.dims(),
            model.designs_flat().expect("regression model"),
            model.responses().expect("regression model"),
        ),
        PoissonPca => poisson_sketch(model.observations().expect("dense model"), model.intensity().expect("poisson")),
        BinomialPca => binomial_sketch(model.observations().expect("dense model"), model.population().expect("binomial")),
    }
}

/// The model's own initializer. `spectral` is ignored for denoising, which
/// always uses HeteroPCA.
pub fn initialize(model: &ObservationModel, ranks: Dims, b: f64, spectral: Spectral) -> Result<TuckerState> {
    use crate::models::ModelKind::*;
    match model.kind() {
        SubGaussianPca => init_subgaussian(model.observations().expect("dense model"), ranks, b),
        _ => balanced(spectral.decompose(&sketch(model)?, ranks)?, b),
    }
}
