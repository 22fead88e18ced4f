//! Observation models: sub-Gaussian denoising, tensor trace regression,
//! Poisson PCA and binomial PCA.
//!
//! Every model exposes its loss `L(X)`, the full gradient `∇L(X)`, and the
//! partial gradients with respect to the Tucker blocks of `X = [[S; U1, U2, U3]]`:
//!
//! ```text
//! ∇_{U1} L = M1(∇L) (U3 ⊗ U2) M1(S)^T     (cyclically for U2, U3)
//! ∇_S L    = ∇L ×_1 U1^T ×_2 U2^T ×_3 U3^T
//! ```
//!
//! Loss conventions:
//!
//! | model      | loss                                   | gradient              |
//! |------------|----------------------------------------|-----------------------|
//! | denoise    | ½‖X − Y‖²_F                            | X − Y                 |
//! | regression | ½ Σᵢ (⟨Aᵢ, X⟩ − yᵢ)²                   | Σᵢ (⟨Aᵢ, X⟩ − yᵢ) Aᵢ  |
//! | poisson    | Σ (−Y X / I + exp X)                   | −Y / I + exp X        |
//! | binomial   | Σ (log(1 + exp X) − P̂ X), P̂ = Y / N    | s(X) − P̂              |
//!
//! The Poisson loss is the negative log-likelihood divided by the intensity
//! `I`, so gradients stay O(1) as `I` grows.

use std::fmt;
use std::str::FromStr;

use crate::decomp::{check_ranks, hooi};
use crate::error::{ensure, Error, Result};
use crate::matrix::{dot, Matrix};
use crate::tensor::{Dims, Tensor3, TuckerState};

/// Default bound on `|X|` entries inside `exp`.
pub const DEFAULT_EXP_CAP: f64 = 50.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum ModelKind {
    #[serde(rename = "denoise")]
    SubGaussianPca,
    #[serde(rename = "regression")]
    TensorRegression,
    #[serde(rename = "poisson")]
    PoissonPca,
    #[serde(rename = "binomial")]
    BinomialPca,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] =
        [ModelKind::SubGaussianPca, ModelKind::TensorRegression, ModelKind::PoissonPca, ModelKind::BinomialPca];

    /// Short name used in files and on the command line.
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::SubGaussianPca => "denoise",
            ModelKind::TensorRegression => "regression",
            ModelKind::PoissonPca => "poisson",
            ModelKind::BinomialPca => "binomial",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "denoise" | "subgaussian" | "sub-gaussian" | "gaussian" => Ok(ModelKind::SubGaussianPca),
            "regression" => Ok(ModelKind::TensorRegression),
            "poisson" => Ok(ModelKind::PoissonPca),
            "binomial" => Ok(ModelKind::BinomialPca),
            other => Err(Error::InvalidArgument(format!(
                "unknown model {other:?}; expected denoise, regression, poisson or binomial"
            ))),
        }
    }
}

#[derive(Clone, Debug)]
enum Data {
    SubGaussian {
        y: Tensor3,
    },
    Regression {
        dims: Dims,
        /// `n` designs laid end to end, each in tensor storage order.
        designs: Vec<f64>,
        responses: Vec<f64>,
    },
    Poisson {
        y: Tensor3,
        intensity: f64,
    },
    Binomial {
        y: Tensor3,
        n_pop: Tensor3,
        p_hat: Tensor3,
    },
}

/// Observed data together with the loss it induces.
#[derive(Clone, Debug)]
pub struct ObservationModel {
    data: Data,
    exp_cap: f64,
}

/// Gradients of the loss with respect to the Tucker blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct PartialGradients {
    pub g_u: [Matrix; 3],
    pub g_s: Tensor3,
}

fn is_count(v: f64) -> bool {
    v >= 0.0 && v.fract() == 0.0 && v.is_finite()
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl ObservationModel {
    /// `Y = X* + noise` with entrywise independent sub-Gaussian noise.
    pub fn sub_gaussian(y: Tensor3) -> Result<Self> {
        ensure!(y.is_finite(), InvalidArgument, "observations contain non-finite values");
        Ok(Self { data: Data::SubGaussian { y }, exp_cap: DEFAULT_EXP_CAP })
    }

    /// `y_i = <A_i, X*> + eps_i`.
    pub fn regression(designs: &[Tensor3], responses: Vec<f64>) -> Result<Self> {
        ensure!(!designs.is_empty(), InvalidArgument, "regression needs at least one sample");
        let dims = designs[0].dims();
        let mut flat = Vec::with_capacity(designs.len() * designs[0].len());
        for (i, a) in designs.iter().enumerate() {
            ensure!(a.dims() == dims, DimensionMismatch, "design {i} has dims {:?}, expected {dims:?}", a.dims());
            flat.extend_from_slice(a.as_slice());
        }
        Self::regression_flat(dims, flat, responses)
    }

    /// Regression from designs stored back to back in tensor storage order.
    pub fn regression_flat(dims: Dims, designs: Vec<f64>, responses: Vec<f64>) -> Result<Self> {
        let len: usize = dims.iter().product();
        let n = responses.len();
        ensure!(n >= 1, InvalidArgument, "regression needs at least one sample");
        ensure!(
            designs.len() == n * len,
            DimensionMismatch,
            "{} design entries for {n} samples of dims {dims:?}",
            designs.len()
        );
        ensure!(
            designs.iter().chain(&responses).all(|v| v.is_finite()),
            InvalidArgument,
            "regression data contain non-finite values"
        );
        Ok(Self { data: Data::Regression { dims, designs, responses }, exp_cap: DEFAULT_EXP_CAP })
    }

    /// `Y_ijk ~ Poisson(I exp(X*_ijk))`.
    pub fn poisson(y: Tensor3, intensity: f64) -> Result<Self> {
        ensure!(intensity > 0.0 && intensity.is_finite(), InvalidArgument, "intensity must be positive, got {intensity}");
        ensure!(
            y.as_slice().iter().all(|&v| is_count(v)),
            InvalidArgument,
            "Poisson observations must be non-negative integers"
        );
        Ok(Self { data: Data::Poisson { y, intensity }, exp_cap: DEFAULT_EXP_CAP })
    }

    /// `Y_ijk ~ Binomial(N_ijk, s(X*_ijk))` with the logistic link `s`.
    pub fn binomial(y: Tensor3, n_pop: Tensor3) -> Result<Self> {
        y.check_same_dims(&n_pop)?;
        ensure!(
            n_pop.as_slice().iter().all(|&v| is_count(v) && v > 0.0),
            InvalidArgument,
            "population sizes must be positive integers"
        );
        ensure!(
            y.as_slice().iter().zip(n_pop.as_slice()).all(|(&k, &n)| is_count(k) && k <= n),
            InvalidArgument,
            "binomial counts must be integers in [0, N]"
        );
        let p_hat = y.zip_map(&n_pop, |k, n| k / n)?;
        Ok(Self { data: Data::Binomial { y, n_pop, p_hat }, exp_cap: DEFAULT_EXP_CAP })
    }

    /// Replaces the bound on `|X|` entries admitted by the Poisson and
    /// binomial losses.
    pub fn with_exp_cap(mut self, cap: f64) -> Self {
        self.exp_cap = cap;
        self
    }

    pub fn kind(&self) -> ModelKind {
        match self.data {
            Data::SubGaussian { .. } => ModelKind::SubGaussianPca,
            Data::Regression { .. } => ModelKind::TensorRegression,
            Data::Poisson { .. } => ModelKind::PoissonPca,
            Data::Binomial { .. } => ModelKind::BinomialPca,
        }
    }

    /// Dims of the estimand.
    pub fn dims(&self) -> Dims {
        match &self.data {
            Data::SubGaussian { y } | Data::Poisson { y, .. } | Data::Binomial { y, .. } => y.dims(),
            Data::Regression { dims, .. } => *dims,
        }
    }

    /// The observed tensor `Y` (denoising, Poisson, binomial).
    pub fn observations(&self) -> Option<&Tensor3> {
        match &self.data {
            Data::SubGaussian { y } | Data::Poisson { y, .. } | Data::Binomial { y, .. } => Some(y),
            Data::Regression { .. } => None,
        }
    }

    pub fn intensity(&self) -> Option<f64> {
        match self.data {
            Data::Poisson { intensity, .. } => Some(intensity),
            _ => None,
        }
    }

    pub fn population(&self) -> Option<&Tensor3> {
        match &self.data {
            Data::Binomial { n_pop, .. } => Some(n_pop),
            _ => None,
        }
    }

    /// Regression responses `y_i`.
    pub fn responses(&self) -> Option<&[f64]> {
        match &self.data {
            Data::Regression { responses, .. } => Some(responses),
            _ => None,
        }
    }

    /// Regression designs stored back to back.
    pub fn designs_flat(&self) -> Option<&[f64]> {
        match &self.data {
            Data::Regression { designs, .. } => Some(designs),
            _ => None,
        }
    }

    /// Iterator over the regression designs as flat slices.
    pub fn designs(&self) -> impl Iterator<Item = &[f64]> {
        let (flat, len): (&[f64], usize) = match &self.data {
            Data::Regression { designs, dims, .. } => (designs, dims.iter().product()),
            _ => (&[], 1),
        };
        flat.chunks_exact(len)
    }

    /// Typical magnitude of the loss Hessian in `X`, used to normalize the
    /// default step size: 1 for denoising, `Σ‖A_i‖²/(p1 p2 p3)` (≈ n for
    /// standard designs) for regression, the mean of `Y/I` for Poisson and
    /// the mean of `P̂(1 − P̂)` for binomial.
    pub fn curvature_scale(&self) -> f64 {
        match &self.data {
            Data::SubGaussian { .. } => 1.0,
            Data::Regression { dims, designs, .. } => {
                let len: usize = dims.iter().product();
                dot(designs, designs) / len as f64
            }
            Data::Poisson { y, intensity } => {
                (y.as_slice().iter().sum::<f64>() / (y.len() as f64 * intensity)).max(1e-2)
            }
            Data::Binomial { p_hat, .. } => {
                (p_hat.as_slice().iter().map(|p| p * (1.0 - p)).sum::<f64>() / p_hat.len() as f64).max(1e-2)
            }
        }
    }

    fn check_input(&self, x: &Tensor3) -> Result<()> {
        ensure!(
            x.dims() == self.dims(),
            DimensionMismatch,
            "estimate has dims {:?}, model expects {:?}",
            x.dims(),
            self.dims()
        );
        if matches!(self.data, Data::Poisson { .. } | Data::Binomial { .. }) {
            let m = x.max_abs();
            ensure!(
                m <= self.exp_cap,
                Numeric,
                "estimate entry of magnitude {m:.3e} exceeds the exponential cap {}",
                self.exp_cap
            );
        }
        ensure!(x.is_finite(), Numeric, "estimate contains non-finite entries");
        Ok(())
    }

    fn residuals(dims: Dims, designs: &[f64], responses: &[f64], x: &Tensor3) -> Vec<f64> {
        let len: usize = dims.iter().product();
        designs.chunks_exact(len).zip(responses).map(|(a, y)| dot(a, x.as_slice()) - y).collect()
    }

    /// `L(X)`.
    pub fn loss(&self, x: &Tensor3) -> Result<f64> {
        self.check_input(x)?;
        let xs = x.as_slice();
        let value = match &self.data {
            Data::SubGaussian { y } => {
                0.5 * xs.iter().zip(y.as_slice()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
            }
            Data::Regression { dims, designs, responses } => {
                0.5 * Self::residuals(*dims, designs, responses, x).iter().map(|r| r * r).sum::<f64>()
            }
            Data::Poisson { y, intensity } => {
                xs.iter().zip(y.as_slice()).map(|(&v, &k)| -k * v / intensity + v.exp()).sum()
            }
            Data::Binomial { p_hat, .. } => {
                xs.iter().zip(p_hat.as_slice()).map(|(&v, &p)| softplus(v) - p * v).sum()
            }
        };
        ensure!(value.is_finite(), Numeric, "loss is not finite");
        Ok(value)
    }

    /// `∇L(X)`.
    pub fn grad(&self, x: &Tensor3) -> Result<Tensor3> {
        self.loss_and_grad(x).map(|(_, g)| g)
    }

    /// `L(X)` and `∇L(X)` in one pass over the data.
    pub fn loss_and_grad(&self, x: &Tensor3) -> Result<(f64, Tensor3)> {
        self.check_input(x)?;
        let (value, grad) = match &self.data {
            Data::SubGaussian { y } => {
                let g = x.zip_map(y, |a, b| a - b)?;
                (0.5 * dot(g.as_slice(), g.as_slice()), g)
            }
            Data::Regression { dims, designs, responses } => {
                let len: usize = dims.iter().product();
                let res = Self::residuals(*dims, designs, responses, x);
                let mut g = vec![0.0; len];
                for (a, &r) in designs.chunks_exact(len).zip(&res) {
                    for (gi, &ai) in g.iter_mut().zip(a) {
                        *gi += r * ai;
                    }
                }
                (0.5 * dot(&res, &res), Tensor3::from_vec(*dims, g)?)
            }
            Data::Poisson { y, intensity } => {
                let g = x.zip_map(y, |v, k| -k / intensity + v.exp())?;
                let l = x.as_slice().iter().zip(y.as_slice()).map(|(&v, &k)| -k * v / intensity + v.exp()).sum();
                (l, g)
            }
            Data::Binomial { p_hat, .. } => {
                let g = x.zip_map(p_hat, |v, p| sigmoid(v) - p)?;
                let l = x.as_slice().iter().zip(p_hat.as_slice()).map(|(&v, &p)| softplus(v) - p * v).sum();
                (l, g)
            }
        };
        ensure!(value.is_finite() && grad.is_finite(), Numeric, "loss or gradient is not finite");
        Ok((value, grad))
    }

    /// Partial gradients at `X = reconstruct(t)`.
    pub fn partial_grads(&self, t: &TuckerState) -> Result<PartialGradients> {
        let g = self.grad(&t.reconstruct())?;
        partial_grads_from_full(t, &g)
    }

    /// Approximate noise level at the truth: the Frobenius norm of the
    /// HOOI rank-`ranks` approximation of `∇L(X*)`. This is a lower bound
    /// on the supremum of `|<∇L(X*), T>|` over unit-norm tensors `T` of
    /// Tucker rank at most `ranks`, exact when HOOI finds the global optimum.
    pub fn xi_diagnostic(&self, x_star: &Tensor3, ranks: Dims, t_max: usize) -> Result<f64> {
        check_ranks(x_star.dims(), ranks)?;
        let g = self.grad(x_star)?;
        Ok(hooi(&g, ranks, t_max)?.core.frob_norm())
    }
}

/// Chain rule through `X = [[S; U1, U2, U3]]` given `∇L(X)`. The Kronecker
/// products are never formed: `M1(G)(U3 ⊗ U2) = M1(G ×_2 U2^T ×_3 U3^T)`.
pub fn partial_grads_from_full(t: &TuckerState, grad: &Tensor3) -> Result<PartialGradients> {
    ensure!(
        grad.dims() == t.dims(),
        DimensionMismatch,
        "gradient dims {:?} vs state dims {:?}",
        grad.dims(),
        t.dims()
    );
    let [u1, u2, u3] = &t.factors;
    let g1 = grad.mode_product_t(1, u1)?;
    let g12 = g1.mode_product_t(2, u2)?;
    let g13 = g1.mode_product_t(3, u3)?;
    let g23 = grad.mode_product_t(2, u2)?.mode_product_t(3, u3)?;
    let g_s = g12.mode_product_t(3, u3)?;
    let s = &t.core;
    let g_u = [
        g23.matricize(1)?.matmul_t(&s.matricize(1)?)?,
        g13.matricize(2)?.matmul_t(&s.matricize(2)?)?,
        g12.matricize(3)?.matmul_t(&s.matricize(3)?)?,
    ];
    Ok(PartialGradients { g_u, g_s })
}
