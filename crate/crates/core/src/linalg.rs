//! Dense solvers: SVD pseudoinverse for the rectangular system and a
//! Cholesky solve for the square regularized one.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_RCOND: f64 = 1e-10;

/// Conditioning summary of a pseudoinverse solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub effective_rank: usize,
    pub max_singular_value: f64,
    /// Smallest singular value above the cutoff, 0 when rank is 0.
    pub min_kept_singular_value: f64,
    pub residual_norm: f64,
}

/// Minimum-norm least-squares solution of `B c = f`.
///
/// Singular values `<= rcond * sigma_max` are dropped.
pub fn pseudoinverse_solve(
    b: &DMatrix<f64>,
    f: &DVector<f64>,
    rcond: f64,
) -> Result<(DVector<f64>, SolveReport)> {
    let (m, p) = b.shape();
    if m == 0 || p == 0 {
        return Err(Error::InvalidParameter(format!("empty matrix {m}x{p}")));
    }
    if f.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: f.len() });
    }
    if !(rcond > 0.0 && rcond < 1.0) {
        return Err(Error::InvalidParameter(format!("rcond must lie in (0, 1), got {rcond}")));
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("design matrix"));
    }
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("target vector"));
    }

    // nalgebra's bidiagonal SVD loses accuracy on rank-deficient input, so
    // the decomposition itself is done by faer
    let bf = faer::Mat::<f64>::from_fn(m, p, |i, j| b[(i, j)]);
    let svd = bf
        .thin_svd()
        .map_err(|_| Error::InvalidParameter("SVD failed to converge".into()))?;
    let (u, v) = (svd.U(), svd.V());
    let sigma = svd.S().column_vector();

    let sigma_max = sigma.iter().copied().fold(0.0, f64::max);
    let cutoff = rcond * sigma_max;

    // c = V diag(1/s) U^T f over the kept singular triplets
    let mut c = DVector::zeros(p);
    let mut rank = 0;
    let mut min_kept = f64::INFINITY;
    for (k, &s) in sigma.iter().enumerate() {
        if sigma_max > 0.0 && s > cutoff {
            rank += 1;
            min_kept = min_kept.min(s);
            let ut_f: f64 = (0..m).map(|i| u[(i, k)] * f[i]).sum();
            for j in 0..p {
                c[j] += ut_f / s * v[(j, k)];
            }
        }
    }
    if rank == 0 {
        min_kept = 0.0;
    }

    let residual_norm = (b * &c - f).norm();
    Ok((
        c,
        SolveReport {
            effective_rank: rank,
            max_singular_value: sigma_max,
            min_kept_singular_value: min_kept,
            residual_norm,
        },
    ))
}

/// Solves `K c = f` for a symmetric positive definite `K` (which already
/// carries any diagonal regularization).
pub fn regularized_solve(k: &DMatrix<f64>, f: &DVector<f64>) -> Result<DVector<f64>> {
    let (m, n) = k.shape();
    if m != n {
        return Err(Error::DimensionMismatch { expected: m, got: n });
    }
    if f.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: f.len() });
    }
    if k.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("covariance matrix"));
    }
    let chol = nalgebra::Cholesky::new(k.clone()).ok_or(Error::NotPositiveDefinite)?;
    let c = chol.solve(f);
    // a pivot that only just survived rounding gives a meaningless solve
    let fnorm = f.norm();
    if !c.iter().all(|v| v.is_finite()) || (k * &c - f).norm() > 1e-8 * fnorm.max(f64::MIN_POSITIVE) {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(c)
}
