//! Spectral Tucker decompositions: HOSVD and HOOI.

use crate::error::{ensure, Result};
use crate::linalg::{sin_theta_distance, svd_r};
use crate::matrix::Matrix;
use crate::tensor::{Dims, Tensor3, TuckerState};

/// Default sweep cap for [`hooi`].
pub const HOOI_MAX_ITERS: usize = 30;
/// HOOI stops once every factor moves less than this in sin-Θ distance.
pub const HOOI_TOL: f64 = 1e-10;

pub(crate) fn check_ranks(dims: Dims, ranks: Dims) -> Result<()> {
    for k in 0..3 {
        ensure!(
            ranks[k] >= 1 && ranks[k] <= dims[k],
            InvalidArgument,
            "rank {} out of range for mode {} of size {}",
            ranks[k],
            k + 1,
            dims[k]
        );
    }
    Ok(())
}

/// Higher-order SVD: `U_k = SVD_{r_k}(M_k(Y))`, `S = Y ×_1 U1^T ×_2 U2^T ×_3 U3^T`.
/// The returned state has `scale_b = 1`.
pub fn hosvd(y: &Tensor3, ranks: Dims) -> Result<TuckerState> {
    check_ranks(y.dims(), ranks)?;
    let factors = [
        svd_r(&y.matricize(1)?, ranks[0])?,
        svd_r(&y.matricize(2)?, ranks[1])?,
        svd_r(&y.matricize(3)?, ranks[2])?,
    ];
    let core = y.project(&factors)?;
    TuckerState::new(core, factors, 1.0)
}

/// `Y` contracted with `U_j^T` on every mode except `mode`.
fn partial_projection(y: &Tensor3, factors: &[Matrix; 3], mode: usize) -> Result<Tensor3> {
    let mut out = y.clone();
    for other in 1..=3 {
        if other != mode {
            out = out.mode_product_t(other, &factors[other - 1])?;
        }
    }
    Ok(out)
}

/// Higher-order orthogonal iteration started from HOSVD, with at most
/// `t_max` sweeps. Each factor update uses the most recent estimates of the
/// other two factors. Also returns `||Y ×_1 U1^T ×_2 U2^T ×_3 U3^T||_F` after
/// HOSVD and after every single-factor update.
pub fn hooi_trace(y: &Tensor3, ranks: Dims, t_max: usize) -> Result<(TuckerState, Vec<f64>)> {
    let init = hosvd(y, ranks)?;
    let mut trace = vec![init.core.frob_norm()];
    let mut factors = init.factors;
    for _ in 0..t_max {
        let mut largest_move = 0.0f64;
        for mode in 1..=3 {
            let a = partial_projection(y, &factors, mode)?.matricize(mode)?;
            let u = svd_r(&a, ranks[mode - 1])?;
            largest_move = largest_move.max(sin_theta_distance(&u, &factors[mode - 1])?);
            // ||U^T A||_F equals the core norm with the updated factor.
            trace.push(u.t_matmul(&a)?.frob_norm());
            factors[mode - 1] = u;
        }
        if largest_move < HOOI_TOL {
            break;
        }
    }
    let core = y.project(&factors)?;
    Ok((TuckerState::new(core, factors, 1.0)?, trace))
}

/// Higher-order orthogonal iteration; `t_max = 0` reproduces [`hosvd`].
pub fn hooi(y: &Tensor3, ranks: Dims, t_max: usize) -> Result<TuckerState> {
    hooi_trace(y, ranks, t_max).map(|(state, _)| state)
}
