//! Coefficients of ergodicity for row-stochastic matrices.
//!
//! * `δ(A) = max_j max_{i1,i2} |A[i1][j] - A[i2][j]|`
//! * `λ(A) = 1 - min_{i1,i2} Σ_j min(A[i1][j], A[i2][j])`
//!
//! A matrix is scrambling when every pair of rows shares positive mass in
//! some column, i.e. `λ(A) < 1`.

use serde::Serialize;

use super::dense::{compensated_sum, Matrix};
use crate::error::{Error, Result};

/// Row sums may drift this far from 1 before a matrix is rejected.
pub const STOCHASTIC_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ErgodicityReport {
    pub delta: f64,
    pub lambda: f64,
    /// `min_{i1,i2} Σ_j min(A[i1][j], A[i2][j])`, so `lambda = 1 - overlap`.
    /// Kept separately because an overlap below `f64::EPSILON` still makes
    /// the matrix scrambling even though `1 - overlap` rounds to 1.
    pub overlap: f64,
    pub scrambling: bool,
}

/// Evaluates both coefficients pairwise over rows.
pub fn ergodicity(m: &Matrix) -> Result<ErgodicityReport> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    m.check_row_stochastic(STOCHASTIC_TOL)?;

    let n = m.nrows();
    let mut delta: f64 = 0.0;
    let mut overlap: f64 = 1.0;
    for i1 in 0..n {
        for i2 in (i1 + 1)..n {
            let (r1, r2) = (m.row(i1), m.row(i2));
            for (a, b) in r1.iter().zip(r2) {
                delta = delta.max((a - b).abs());
            }
            let shared = compensated_sum(r1.iter().zip(r2).map(|(a, b)| a.min(*b).max(0.0)));
            overlap = overlap.min(shared);
        }
    }
    let overlap = overlap.clamp(0.0, 1.0);
    Ok(ErgodicityReport {
        delta: delta.min(1.0),
        lambda: (1.0 - overlap).clamp(0.0, 1.0),
        overlap,
        scrambling: overlap > 0.0,
    })
}

pub fn delta(m: &Matrix) -> Result<f64> {
    ergodicity(m).map(|r| r.delta)
}

pub fn lambda(m: &Matrix) -> Result<f64> {
    ergodicity(m).map(|r| r.lambda)
}

/// Hajnal's inequality evaluated on a concrete product.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HajnalCheck {
    pub holds: bool,
    pub product_delta: f64,
    pub lambda_product: f64,
}

/// Slack allowed on `δ(Q1···Qp) <= Π λ(Qi)`.
pub const HAJNAL_SLACK: f64 = 1e-10;

/// Checks `δ(Q(1)···Q(p)) <= Π λ(Q(i))`. The product is taken left to right.
pub fn hajnal_bound_check(matrices: &[Matrix]) -> Result<HajnalCheck> {
    let first = matrices
        .first()
        .ok_or_else(|| Error::Dimension("need at least one matrix".into()))?;
    let mut product = Matrix::identity(first.nrows());
    let mut lambda_product = 1.0;
    for q in matrices {
        lambda_product *= lambda(q)?;
        product = product.mul(q)?;
    }
    let product_delta = delta(&product)?;
    Ok(HajnalCheck {
        holds: product_delta <= lambda_product + HAJNAL_SLACK,
        product_delta,
        lambda_product,
    })
}
