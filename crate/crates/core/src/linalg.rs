//! Symmetric positive (semi)definite solves with a single deterministic
//! jitter retry.

use nalgebra::{Cholesky, DMatrix, Dyn};

/// Relative jitter added to the diagonal on retry, scaled by `trace / dim`.
pub const JITTER: f64 = 1e-10;

/// Why a symmetric solve failed, before the caller attaches context.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveFailure {
    pub dim: usize,
    pub jitter: f64,
}

/// Outcome of a symmetric solve: the solution and whether jitter was needed.
#[derive(Debug, Clone)]
pub struct SpdSolution {
    pub x: DMatrix<f64>,
    pub jittered: bool,
}

fn factor(matrix: &DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    let dim = matrix.nrows();
    let max_diag = matrix
        .diagonal()
        .iter()
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    if !(max_diag.is_finite()) || max_diag == 0.0 {
        return None;
    }
    let chol = Cholesky::new(matrix.clone())?;
    // Pivots that are positive only through rounding are treated as zero.
    let floor = max_diag * f64::EPSILON * 16.0 * dim as f64;
    let l = chol.l_dirty();
    if (0..dim).any(|i| l[(i, i)] * l[(i, i)] <= floor) {
        return None;
    }
    Some(chol)
}

/// Solve `matrix * x = rhs` for symmetric `matrix`.
///
/// Tries a Cholesky factorization first; when it reports a non-positive
/// (or numerically zero) pivot, adds `JITTER * trace / dim` to the diagonal
/// and retries once.
pub fn solve_spd(matrix: &DMatrix<f64>, rhs: &DMatrix<f64>) -> Result<SpdSolution, SolveFailure> {
    let dim = matrix.nrows();
    debug_assert_eq!(dim, matrix.ncols());
    debug_assert_eq!(dim, rhs.nrows());
    if dim == 0 {
        return Ok(SpdSolution {
            x: DMatrix::zeros(0, rhs.ncols()),
            jittered: false,
        });
    }
    if let Some(chol) = factor(matrix) {
        return Ok(SpdSolution {
            x: chol.solve(rhs),
            jittered: false,
        });
    }
    let jitter = JITTER * matrix.trace() / dim as f64;
    if !(jitter > 0.0 && jitter.is_finite()) {
        return Err(SolveFailure { dim, jitter });
    }
    let mut shifted = matrix.clone();
    for i in 0..dim {
        shifted[(i, i)] += jitter;
    }
    match factor(&shifted) {
        Some(chol) => Ok(SpdSolution {
            x: chol.solve(rhs),
            jittered: true,
        }),
        None => Err(SolveFailure { dim, jitter }),
    }
}

/// Inverse of a symmetric positive definite matrix under the same policy.
pub fn inverse_spd(matrix: &DMatrix<f64>) -> Result<SpdSolution, SolveFailure> {
    solve_spd(matrix, &DMatrix::identity(matrix.nrows(), matrix.nrows()))
}

/// Largest absolute entry.
pub(crate) fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}
