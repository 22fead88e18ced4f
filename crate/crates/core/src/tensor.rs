//! Dense order-3 tensors, matricization, mode products and Tucker states.
//!
//! Storage is first-index-fastest: entry `(i, j, k)` of a `p1 x p2 x p3`
//! tensor lives at `i + p1 * (j + p2 * k)`. Modes are numbered 1, 2, 3.
//!
//! Mode-`k` matricization places index `i_k` on the rows and orders the
//! columns with the next mode (cyclically) running fastest:
//!
//! ```text
//! M1(X)[i1, i2 + p2*i3] = X[i1, i2, i3]
//! M2(X)[i2, i3 + p3*i1] = X[i1, i2, i3]
//! M3(X)[i3, i1 + p1*i2] = X[i1, i2, i3]
//! ```
//!
//! With this convention `M_k([[S; U1, U2, U3]]) = U_k M_k(S) (U_{k+2} ⊗ U_{k+1})^T`.

use std::ops::{Add, Sub};

use crate::error::{ensure, Error, Result};
use crate::matrix::{dot, Matrix};

/// Tensor dimensions `(p1, p2, p3)`.
pub type Dims = [usize; 3];

/// Validates a 1-based mode number and returns the 0-based axis.
pub(crate) fn axis(mode: usize) -> Result<usize> {
    ensure!((1..=3).contains(&mode), InvalidArgument, "mode must be 1, 2 or 3, got {mode}");
    Ok(mode - 1)
}

/// A dense `p1 x p2 x p3` real tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor3 {
    dims: Dims,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(dims: Dims) -> Self {
        Self { dims, data: vec![0.0; dims.iter().product()] }
    }

    pub fn filled(dims: Dims, value: f64) -> Self {
        Self { dims, data: vec![value; dims.iter().product()] }
    }

    /// Wraps data already in first-index-fastest order.
    pub fn from_vec(dims: Dims, data: Vec<f64>) -> Result<Self> {
        let len: usize = dims.iter().product();
        ensure!(
            data.len() == len,
            DimensionMismatch,
            "tensor of dims {dims:?} needs {len} entries, got {}",
            data.len()
        );
        Ok(Self { dims, data })
    }

    /// Builds a tensor from `f(i, j, k)` with 0-based indices.
    pub fn from_fn(dims: Dims, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(dims.iter().product());
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    data.push(f(i, j, k));
                }
            }
        }
        Self { dims, data }
    }

    #[inline]
    pub fn dims(&self) -> Dims {
        self.dims
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.offset(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let o = self.offset(i, j, k);
        self.data[o] = v;
    }

    /// Mode-`mode` matricization, a `p_k x (p1 p2 p3 / p_k)` matrix.
    pub fn matricize(&self, mode: usize) -> Result<Matrix> {
        let a = axis(mode)?;
        let (b, c) = ((a + 1) % 3, (a + 2) % 3);
        let (pa, pb) = (self.dims[a], self.dims[b]);
        let cols = self.data.len() / pa.max(1);
        let mut out = Matrix::zeros(pa, cols);
        let out_data = out.as_mut_slice();
        let mut idx = [0usize; 3];
        for k in 0..self.dims[2] {
            idx[2] = k;
            for j in 0..self.dims[1] {
                idx[1] = j;
                for i in 0..self.dims[0] {
                    idx[0] = i;
                    let col = idx[b] + pb * idx[c];
                    out_data[idx[a] * cols + col] = self.data[i + self.dims[0] * (j + self.dims[1] * k)];
                }
            }
        }
        Ok(out)
    }

    /// Inverse of [`Tensor3::matricize`].
    pub fn unmatricize(m: &Matrix, mode: usize, dims: Dims) -> Result<Tensor3> {
        let a = axis(mode)?;
        let (b, c) = ((a + 1) % 3, (a + 2) % 3);
        let total: usize = dims.iter().product();
        ensure!(
            m.rows() == dims[a] && m.rows() * m.cols() == total,
            DimensionMismatch,
            "a {}x{} matrix is not a mode-{mode} unfolding of a {dims:?} tensor",
            m.rows(),
            m.cols()
        );
        let cols = m.cols();
        let src = m.as_slice();
        let mut data = vec![0.0; total];
        let mut idx = [0usize; 3];
        for k in 0..dims[2] {
            idx[2] = k;
            for j in 0..dims[1] {
                idx[1] = j;
                for i in 0..dims[0] {
                    idx[0] = i;
                    let col = idx[b] + dims[b] * idx[c];
                    data[i + dims[0] * (j + dims[1] * k)] = src[idx[a] * cols + col];
                }
            }
        }
        Ok(Tensor3 { dims, data })
    }

    /// Mode-`mode` product `X ×_k U`, where `U` is `q x p_k`. The result has
    /// `p_k` replaced by `q`.
    pub fn mode_product(&self, mode: usize, u: &Matrix) -> Result<Tensor3> {
        let a = axis(mode)?;
        let p = self.dims[a];
        ensure!(
            u.cols() == p,
            DimensionMismatch,
            "mode-{mode} product needs a matrix with {p} columns, got {}x{}",
            u.rows(),
            u.cols()
        );
        let q = u.rows();
        let left: usize = self.dims[..a].iter().product();
        let right: usize = self.dims[a + 1..].iter().product();
        let mut dims = self.dims;
        dims[a] = q;
        let mut out = vec![0.0; left * q * right];
        let ud = u.as_slice();
        if left == 1 {
            // Mode 1: contiguous fibres along the contracted index.
            for r in 0..right {
                let x_fibre = &self.data[r * p..(r + 1) * p];
                for row in 0..q {
                    out[row + q * r] = dot(&ud[row * p..(row + 1) * p], x_fibre);
                }
            }
        } else {
            for r in 0..right {
                for row in 0..q {
                    let dst = &mut out[left * (row + q * r)..left * (row + q * r + 1)];
                    for (i, &coef) in ud[row * p..(row + 1) * p].iter().enumerate() {
                        if coef == 0.0 {
                            continue;
                        }
                        let src = &self.data[left * (i + p * r)..left * (i + p * r + 1)];
                        for (d, &s) in dst.iter_mut().zip(src) {
                            *d += coef * s;
                        }
                    }
                }
            }
        }
        Ok(Tensor3 { dims, data: out })
    }

    /// `X ×_k U^T` for a `p_k x r` matrix `U`.
    pub fn mode_product_t(&self, mode: usize, u: &Matrix) -> Result<Tensor3> {
        self.mode_product(mode, &u.transpose())
    }

    /// `X ×_1 A ×_2 B ×_3 C`, skipping modes given as `None`.
    pub fn multilinear(&self, factors: [Option<&Matrix>; 3]) -> Result<Tensor3> {
        let mut out = self.clone();
        for (k, f) in factors.iter().enumerate() {
            if let Some(u) = f {
                out = out.mode_product(k + 1, u)?;
            }
        }
        Ok(out)
    }

    /// `X ×_1 U1^T ×_2 U2^T ×_3 U3^T`.
    pub fn project(&self, factors: &[Matrix; 3]) -> Result<Tensor3> {
        let t: Vec<Matrix> = factors.iter().map(Matrix::transpose).collect();
        self.multilinear([Some(&t[0]), Some(&t[1]), Some(&t[2])])
    }

    /// Sum of entrywise products.
    pub fn inner(&self, other: &Tensor3) -> Result<f64> {
        self.check_same_dims(other)?;
        Ok(dot(&self.data, &other.data))
    }

    pub fn frob_norm(&self) -> f64 {
        dot(&self.data, &self.data).sqrt()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scale(&self, c: f64) -> Tensor3 {
        self.map(|v| v * c)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor3 {
        Tensor3 { dims: self.dims, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    /// Entrywise combination of two tensors of equal dims.
    pub fn zip_map(&self, other: &Tensor3, f: impl Fn(f64, f64) -> f64) -> Result<Tensor3> {
        self.check_same_dims(other)?;
        Ok(Tensor3 {
            dims: self.dims,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    /// `self += c * other`.
    pub fn axpy(&mut self, c: f64, other: &Tensor3) -> Result<()> {
        self.check_same_dims(other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub(crate) fn check_same_dims(&self, other: &Tensor3) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch(format!(
                "tensor dims {:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        Ok(())
    }
}

impl Add for &Tensor3 {
    type Output = Tensor3;

    fn add(self, rhs: &Tensor3) -> Tensor3 {
        self.zip_map(rhs, |a, b| a + b).expect("tensor add dims mismatch")
    }
}

impl Sub for &Tensor3 {
    type Output = Tensor3;

    fn sub(self, rhs: &Tensor3) -> Tensor3 {
        self.zip_map(rhs, |a, b| a - b).expect("tensor sub dims mismatch")
    }
}

/// Free-standing matricization, see [`Tensor3::matricize`].
pub fn matricize(x: &Tensor3, mode: usize) -> Result<Matrix> {
    x.matricize(mode)
}

/// Free-standing inverse matricization.
pub fn unmatricize(m: &Matrix, mode: usize, dims: Dims) -> Result<Tensor3> {
    Tensor3::unmatricize(m, mode, dims)
}

/// Free-standing mode product.
pub fn mode_product(x: &Tensor3, mode: usize, u: &Matrix) -> Result<Tensor3> {
    x.mode_product(mode, u)
}

/// Factored iterate `[[S; U1, U2, U3]]` together with the scale `b` the
/// factors are regularized towards (`U_k^T U_k ≈ b² I`).
#[derive(Clone, Debug, PartialEq)]
pub struct TuckerState {
    pub core: Tensor3,
    pub factors: [Matrix; 3],
    pub scale_b: f64,
}

impl TuckerState {
    pub fn new(core: Tensor3, factors: [Matrix; 3], scale_b: f64) -> Result<Self> {
        let ranks = core.dims();
        for (k, u) in factors.iter().enumerate() {
            ensure!(
                u.cols() == ranks[k],
                DimensionMismatch,
                "factor {} has {} columns but the core has rank {} in that mode",
                k + 1,
                u.cols(),
                ranks[k]
            );
            ensure!(
                ranks[k] <= u.rows(),
                InvalidArgument,
                "rank {} exceeds dimension {} in mode {}",
                ranks[k],
                u.rows(),
                k + 1
            );
        }
        ensure!(scale_b > 0.0 && scale_b.is_finite(), InvalidArgument, "scale b must be positive, got {scale_b}");
        Ok(Self { core, factors, scale_b })
    }

    /// Ambient dims `(p1, p2, p3)`.
    pub fn dims(&self) -> Dims {
        [self.factors[0].rows(), self.factors[1].rows(), self.factors[2].rows()]
    }

    /// Tucker ranks `(r1, r2, r3)`.
    pub fn ranks(&self) -> Dims {
        self.core.dims()
    }

    /// `S ×_1 U1 ×_2 U2 ×_3 U3`, evaluated by successive mode products.
    pub fn reconstruct(&self) -> Tensor3 {
        let [u1, u2, u3] = &self.factors;
        self.core
            .multilinear([Some(u1), Some(u2), Some(u3)])
            .expect("TuckerState shapes are validated at construction")
    }

    /// Moves to a new scale: `U_k ← (b'/b) U_k`, `S ← (b/b')³ S`. The
    /// reconstruction is unchanged up to rounding.
    pub fn rescale(&self, new_b: f64) -> Result<TuckerState> {
        ensure!(new_b > 0.0 && new_b.is_finite(), InvalidArgument, "scale b must be positive, got {new_b}");
        let ratio = new_b / self.scale_b;
        Ok(TuckerState {
            core: self.core.scale(1.0 / (ratio * ratio * ratio)),
            factors: [self.factors[0].scale(ratio), self.factors[1].scale(ratio), self.factors[2].scale(ratio)],
            scale_b: new_b,
        })
    }

    pub fn is_finite(&self) -> bool {
        self.core.is_finite() && self.factors.iter().all(Matrix::is_finite)
    }
}

/// Free-standing reconstruction.
pub fn reconstruct(t: &TuckerState) -> Tensor3 {
    t.reconstruct()
}
