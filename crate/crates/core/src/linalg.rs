//! Spectral primitives: thin SVD, leading singular subspaces, QR, and the
//! diagonal-imputing HeteroPCA iteration.
//!
//! Dense factorizations are delegated to `nalgebra`. Singular vectors are
//! sign-normalized so the largest-magnitude entry of every left singular
//! vector is positive, which makes every routine here deterministic.

use nalgebra::SVD;

use crate::error::{ensure, Error, Result};
use crate::matrix::Matrix;

const SVD_MAX_SWEEPS: usize = 10_000;

/// Thin singular value decomposition `m = u * diag(s) * vt`.
#[derive(Clone, Debug)]
pub struct SvdResult {
    /// `rows x k` with orthonormal columns, `k = min(rows, cols)`.
    pub u: Matrix,
    /// Non-increasing, non-negative.
    pub s: Vec<f64>,
    /// `k x cols` with orthonormal rows.
    pub vt: Matrix,
}

impl SvdResult {
    /// `u * diag(s) * vt` truncated to the leading `r` triplets.
    pub fn truncated(&self, r: usize) -> Matrix {
        let r = r.min(self.s.len());
        let us = Matrix::from_fn(self.u.rows(), r, |i, j| self.u[(i, j)] * self.s[j]);
        let vt = Matrix::from_fn(r, self.vt.cols(), |i, j| self.vt[(i, j)]);
        us.matmul(&vt).expect("consistent svd shapes")
    }
}

fn is_zero(m: &Matrix) -> bool {
    m.as_slice().iter().all(|&v| v == 0.0)
}

/// Flips column `j` of `u` (and row `j` of `vt`, when present) so the
/// largest-magnitude entry of the column is positive.
fn fix_signs(u: &mut Matrix, mut vt: Option<&mut Matrix>) {
    for j in 0..u.cols() {
        let mut best = 0.0f64;
        for i in 0..u.rows() {
            let v = u[(i, j)];
            if v.abs() > best.abs() {
                best = v;
            }
        }
        if best < 0.0 {
            for i in 0..u.rows() {
                u[(i, j)] = -u[(i, j)];
            }
            if let Some(vt) = vt.as_deref_mut() {
                for v in vt.row_mut(j) {
                    *v = -*v;
                }
            }
        }
    }
}

fn decompose(m: &Matrix, compute_v: bool) -> Result<SVD<f64, nalgebra::Dyn, nalgebra::Dyn>> {
    ensure!(m.is_finite(), Numeric, "SVD input contains non-finite entries");
    SVD::try_new(m.to_nalgebra(), true, compute_v, f64::EPSILON, SVD_MAX_SWEEPS)
        .ok_or_else(|| Error::Numeric(format!("SVD of a {}x{} matrix did not converge", m.rows(), m.cols())))
}

/// Thin SVD with deterministic signs. A zero matrix yields canonical basis
/// vectors and zero singular values.
pub fn svd(m: &Matrix) -> Result<SvdResult> {
    let (rows, cols) = m.shape();
    let k = rows.min(cols);
    if is_zero(m) {
        return Ok(SvdResult {
            u: Matrix::from_fn(rows, k, |i, j| if i == j { 1.0 } else { 0.0 }),
            s: vec![0.0; k],
            vt: Matrix::from_fn(k, cols, |i, j| if i == j { 1.0 } else { 0.0 }),
        });
    }
    let svd = decompose(m, true)?;
    let mut u = Matrix::from_nalgebra(svd.u.as_ref().expect("u requested"));
    let mut vt = Matrix::from_nalgebra(svd.v_t.as_ref().expect("v requested"));
    fix_signs(&mut u, Some(&mut vt));
    Ok(SvdResult { u, s: svd.singular_values.iter().copied().collect(), vt })
}

/// Singular values only, non-increasing.
pub fn singular_values(m: &Matrix) -> Result<Vec<f64>> {
    if is_zero(m) {
        return Ok(vec![0.0; m.rows().min(m.cols())]);
    }
    ensure!(m.is_finite(), Numeric, "SVD input contains non-finite entries");
    let mut svd = SVD::try_new(m.to_nalgebra(), false, false, f64::EPSILON, SVD_MAX_SWEEPS)
        .ok_or_else(|| Error::Numeric("singular value iteration did not converge".into()))?;
    svd.singular_values.as_mut_slice().sort_by(|a, b| b.total_cmp(a));
    Ok(svd.singular_values.iter().copied().collect())
}

/// Top-`r` left singular vectors, a `rows x r` matrix with orthonormal
/// columns. For a zero matrix the first `r` canonical basis vectors are
/// returned.
pub fn svd_r(m: &Matrix, r: usize) -> Result<Matrix> {
    ensure!(
        r >= 1 && r <= m.rows().min(m.cols()),
        InvalidArgument,
        "rank {r} out of range for a {}x{} matrix",
        m.rows(),
        m.cols()
    );
    if is_zero(m) {
        return Ok(Matrix::from_fn(m.rows(), r, |i, j| if i == j { 1.0 } else { 0.0 }));
    }
    let svd = decompose(m, false)?;
    let mut u = Matrix::from_nalgebra(&svd.u.expect("u requested").columns(0, r).into_owned());
    fix_signs(&mut u, None);
    Ok(u)
}

/// Largest singular value `||m||`.
pub fn spectral_norm(m: &Matrix) -> Result<f64> {
    Ok(singular_values(m)?.first().copied().unwrap_or(0.0))
}

/// The `r`-th largest singular value (1-based).
pub fn sigma_r(m: &Matrix, r: usize) -> Result<f64> {
    let s = singular_values(m)?;
    ensure!(r >= 1 && r <= s.len(), InvalidArgument, "sigma_{r} requested from {} singular values", s.len());
    Ok(s[r - 1])
}

/// Orthonormal basis of the column space via Householder QR, with columns
/// signed so that `R` has a non-negative diagonal.
pub fn qr_orthonormalize(m: &Matrix) -> Result<Matrix> {
    ensure!(m.is_finite(), Numeric, "QR input contains non-finite entries");
    ensure!(m.cols() <= m.rows(), InvalidArgument, "QR orthonormalization needs rows >= cols, got {:?}", m.shape());
    let qr = m.to_nalgebra().qr();
    let r = qr.r();
    let mut q = Matrix::from_nalgebra(&qr.q());
    for j in 0..q.cols() {
        if r[(j, j)] < 0.0 {
            for i in 0..q.rows() {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    Ok(q)
}

/// Sine of the largest principal angle between the column spaces of two
/// matrices with orthonormal columns.
pub fn sin_theta_distance(u: &Matrix, v: &Matrix) -> Result<f64> {
    ensure!(u.shape() == v.shape(), DimensionMismatch, "subspace bases {:?} vs {:?}", u.shape(), v.shape());
    let s = singular_values(&u.t_matmul(v)?)?;
    let smallest = s.last().copied().unwrap_or(1.0).min(1.0);
    Ok((1.0 - smallest * smallest).max(0.0).sqrt())
}

/// `||U U^T - V V^T||_F` for orthonormal bases; zero iff the spans agree.
pub fn projection_distance(u: &Matrix, v: &Matrix) -> Result<f64> {
    ensure!(u.rows() == v.rows(), DimensionMismatch, "subspace bases {:?} vs {:?}", u.shape(), v.shape());
    let pu = u.matmul_t(u)?;
    let pv = v.matmul_t(v)?;
    Ok((&pu - &pv).frob_norm())
}

/// Orthogonal `R` minimizing `||target - basis * R||_F` (orthogonal
/// Procrustes): with `basis^T target = W Σ Z^T`, `R = W Z^T`.
pub fn procrustes_rotation(basis: &Matrix, target: &Matrix) -> Result<Matrix> {
    ensure!(
        basis.shape() == target.shape(),
        DimensionMismatch,
        "procrustes operands {:?} vs {:?}",
        basis.shape(),
        target.shape()
    );
    let cross = basis.t_matmul(target)?;
    let svd = svd(&cross)?;
    svd.u.matmul(&svd.vt)
}

/// Default iteration cap for [`hetero_pca`].
pub const HETERO_PCA_MAX_ITERS: usize = 50;
/// Relative change in `N` below which HeteroPCA stops early.
pub const HETERO_PCA_TOL: f64 = 1e-8;

fn off_diagonal(a: &Matrix) -> Matrix {
    let mut out = a.clone();
    for i in 0..a.rows() {
        out[(i, i)] = 0.0;
    }
    out
}

fn check_symmetric(a: &Matrix) -> Result<()> {
    ensure!(a.rows() == a.cols(), InvalidArgument, "HeteroPCA needs a square matrix, got {:?}", a.shape());
    let scale = a.as_slice().iter().fold(1.0f64, |m, v| m.max(v.abs()));
    for i in 0..a.rows() {
        for j in 0..i {
            ensure!(
                (a[(i, j)] - a[(j, i)]).abs() <= 1e-8 * scale,
                InvalidArgument,
                "HeteroPCA needs a symmetric matrix; entries ({i},{j}) and ({j},{i}) differ"
            );
        }
    }
    Ok(())
}

/// Eigenpairs of a symmetric matrix with the `r` algebraically largest
/// eigenvalues, in non-increasing order. Eigenvectors are sign-normalized
/// like singular vectors.
pub fn top_eigenpairs(a: &Matrix, r: usize) -> Result<(Vec<f64>, Matrix)> {
    check_symmetric(a)?;
    ensure!(r >= 1 && r <= a.rows(), InvalidArgument, "rank {r} out of range for dim {}", a.rows());
    ensure!(a.is_finite(), Numeric, "eigen input contains non-finite entries");
    if is_zero(a) {
        return Ok((vec![0.0; r], Matrix::from_fn(a.rows(), r, |i, j| if i == j { 1.0 } else { 0.0 })));
    }
    let eig = nalgebra::SymmetricEigen::try_new(a.to_nalgebra(), f64::EPSILON, SVD_MAX_SWEEPS)
        .ok_or_else(|| Error::Numeric(format!("eigendecomposition of a {}x{} matrix did not converge", a.rows(), a.cols())))?;
    let mut order: Vec<usize> = (0..a.rows()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]).then(i.cmp(&j)));
    let values = order[..r].iter().map(|&j| eig.eigenvalues[j]).collect();
    let mut vectors = Matrix::from_fn(a.rows(), r, |i, j| eig.eigenvectors[(i, order[j])]);
    fix_signs(&mut vectors, None);
    Ok((values, vectors))
}

/// Runs the HeteroPCA iteration and returns every imputed matrix
/// `N^(0), N^(1), ...` it visits.
fn hetero_pca_iterates(sigma_hat: &Matrix, r: usize, t_max: usize) -> Result<Vec<Matrix>> {
    check_symmetric(sigma_hat)?;
    ensure!(r >= 1 && r <= sigma_hat.rows(), InvalidArgument, "rank {r} out of range for dim {}", sigma_hat.rows());
    let n0 = off_diagonal(sigma_hat);
    let stop = HETERO_PCA_TOL * n0.frob_norm();
    let mut iterates = vec![n0];
    for _ in 0..t_max {
        let n = iterates.last().expect("non-empty");
        let (values, vectors) = top_eigenpairs(n, r)?;
        // Diagonal from the rank-r fit, off-diagonal kept from the data.
        let mut next = n.clone();
        for i in 0..next.rows() {
            next[(i, i)] = (0..r).map(|j| values[j] * vectors[(i, j)] * vectors[(i, j)]).sum();
        }
        let change = (&next - n).frob_norm();
        iterates.push(next);
        if change <= stop {
            break;
        }
    }
    Ok(iterates)
}

/// Leading `r`-dimensional eigenspace of a symmetric matrix whose diagonal is
/// unreliable (heteroskedastic noise). The diagonal is discarded, then
/// iteratively re-imputed from the diagonal of the rank-`r` fit built on the
/// `r` largest eigenvalues, for at most `t_max` rounds, stopping early once
/// `||N^(t+1) - N^(t)||_F <= 1e-8 ||N^(0)||_F`. Returns the top-`r`
/// eigenvectors of the final imputed matrix.
pub fn hetero_pca(sigma_hat: &Matrix, r: usize, t_max: usize) -> Result<Matrix> {
    let iterates = hetero_pca_iterates(sigma_hat, r, t_max)?;
    top_eigenpairs(iterates.last().expect("non-empty"), r).map(|(_, v)| v)
}

/// Top-`r` subspace estimate after each HeteroPCA round, starting with the
/// diagonal-deleted input. Useful for monitoring convergence.
pub fn hetero_pca_path(sigma_hat: &Matrix, r: usize, t_max: usize) -> Result<Vec<Matrix>> {
    hetero_pca_iterates(sigma_hat, r, t_max)?.iter().map(|n| top_eigenpairs(n, r).map(|(_, v)| v)).collect()
}
