//! Small dense helpers shared by the canonical-form and transform code.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Maximum absolute column sum.
pub fn norm_1(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Maximum absolute row sum.
pub fn norm_inf(a: &DMatrix<f64>) -> f64 {
    a.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Inverse of a square matrix together with its 1-norm condition number.
///
/// LU with partial pivoting, followed by one step of iterative refinement
/// `X <- X + X (I - A X)` computed through the same factorization.
pub fn inverse_with_cond(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "cannot invert a {}x{} matrix",
            n,
            a.ncols()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix to invert".into()));
    }
    let eye = DMatrix::<f64>::identity(n, n);
    let lu = a.clone().lu();
    let mut x = lu
        .solve(&eye)
        .ok_or(Error::Singular { cond: f64::INFINITY })?;
    let residual = &eye - a * &x;
    if let Some(dx) = lu.solve(&residual) {
        x += dx;
    }
    let cond = norm_1(a) * norm_1(&x);
    if !cond.is_finite() {
        return Err(Error::Singular { cond: f64::INFINITY });
    }
    Ok((x, cond))
}

/// Inverse that rejects matrices whose condition exceeds `cond_limit`.
pub fn inverse(a: &DMatrix<f64>, cond_limit: f64) -> Result<DMatrix<f64>> {
    let (x, cond) = inverse_with_cond(a)?;
    if cond > cond_limit {
        return Err(Error::Singular { cond });
    }
    Ok(x)
}

/// Ratio of smallest to largest singular value (0 for the zero matrix).
pub fn singular_value_ratio(a: &DMatrix<f64>) -> f64 {
    let sv = a.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if max == 0.0 {
        0.0
    } else {
        min / max
    }
}
