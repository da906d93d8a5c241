//! Small dense linear-algebra helpers shared by the estimators.

use alloc::format;
use core::f64::consts::{PI, TAU};

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{Error, Result};

/// Relative jitter levels tried, in order, when a factorization fails.
const JITTER_LEVELS: [f64; 7] = [1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3];

/// Cholesky-factors a symmetric matrix, escalating a diagonal jitter of
/// `level * scale` through `1e-9 ..= 1e-3` when the plain factorization fails.
pub(crate) fn factor_spd(m: &DMatrix<f64>, scale: f64, what: &str) -> Result<Cholesky<f64, Dyn>> {
    if let Some(chol) = m.clone().cholesky() {
        return Ok(chol);
    }
    let n = m.nrows();
    for level in JITTER_LEVELS {
        let mut jittered = m.clone();
        for i in 0..n {
            jittered[(i, i)] += level * scale;
        }
        if let Some(chol) = jittered.cholesky() {
            return Ok(chol);
        }
    }
    Err(Error::numerical(format!(
        "{what} is not positive definite after jitter escalation"
    )))
}

/// Replaces `m` by `(m + mᵀ) / 2`.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Wraps an angle to `[-π, π)`.
pub fn wrap_pi(angle: f64) -> f64 {
    let wrapped = angle - TAU * libm::floor((angle + PI) / TAU);
    // floor can land exactly on the open end through rounding
    if wrapped >= PI {
        wrapped - TAU
    } else {
        wrapped
    }
}

/// Wraps an angle to `[0, 2π)`.
pub fn wrap_two_pi(angle: f64) -> f64 {
    let wrapped = angle - TAU * libm::floor(angle / TAU);
    if wrapped >= TAU {
        0.0
    } else {
        wrapped
    }
}
