//! Controllable canonical (companion) form for single-input pairs.
//!
//! Coefficient convention: `p_A(s) = s^n + c_{n-1} s^{n-1} + ... + c_0`, and
//! the companion matrix stores `[-c_0, -c_1, ..., -c_{n-1}]` in its last row,
//! so `theta = [alpha_1 .. alpha_n] = [c_0 .. c_{n-1}]`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::LinearSystem;

/// Default relative singular-value threshold for the controllability test.
pub const DEFAULT_CONTROLLABILITY_TOL: f64 = 1e-10;

/// Coefficients `(c_0 .. c_{n-1})` of the monic characteristic polynomial,
/// by the Faddeev-LeVerrier recurrence.
pub fn char_coeffs(a: &DMatrix<f64>) -> Vec<f64> {
    assert!(a.is_square(), "char_coeffs needs a square matrix");
    let n = a.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let mut c = vec![0.0; n];
    // M_1 = I, c_{n-1} = -tr(A)
    let mut m = eye.clone();
    for k in 1..=n {
        let am = a * &m;
        let ck = -am.trace() / k as f64;
        c[n - k] = ck;
        if k < n {
            m = am + &eye * ck;
        }
    }
    c
}

/// Companion matrix with superdiagonal ones and last row `-c`.
pub fn companion(c: &[f64]) -> DMatrix<f64> {
    let n = c.len();
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n.saturating_sub(1) {
        a[(i, i + 1)] = 1.0;
    }
    for (j, cj) in c.iter().enumerate() {
        a[(n - 1, j)] = -cj;
    }
    a
}

/// `[b, Ab, ..., A^{n-1} b]`.
pub fn controllability_matrix(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if !a.is_square() || b.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "A is {}x{}, b has {} entries",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    let mut w = DMatrix::zeros(n, n);
    let mut col = b.clone();
    for j in 0..n {
        w.set_column(j, &col);
        col = a * col;
    }
    Ok(w)
}

/// Controllable canonical form of a single-input pair `(A, b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalForm {
    t: DMatrix<f64>,
    t_inv: DMatrix<f64>,
    a_bar: DMatrix<f64>,
    b_bar: DVector<f64>,
    theta: Vec<f64>,
}

impl CanonicalForm {
    pub fn n(&self) -> usize {
        self.theta.len()
    }

    /// Transformation with `A_bar = T A T^-1`, `b_bar = T b`.
    pub fn t(&self) -> &DMatrix<f64> {
        &self.t
    }

    pub fn t_inv(&self) -> &DMatrix<f64> {
        &self.t_inv
    }

    pub fn a_bar(&self) -> &DMatrix<f64> {
        &self.a_bar
    }

    pub fn b_bar(&self) -> &DVector<f64> {
        &self.b_bar
    }

    /// `[alpha_1 .. alpha_n]`; the last row of `A_bar` is its negation.
    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// `||T A T^-1 - A_bar||_inf`, the similarity residual against the source matrix.
    pub fn similarity_residual(&self, a: &DMatrix<f64>) -> f64 {
        linalg::norm_inf(&(&self.t * a * &self.t_inv - &self.a_bar))
    }
}

/// Canonical form of `(A, b)`.
///
/// `T^-1 = [v_1 .. v_n]` with `v_n = b`, `v_j = A v_{j+1} + c_j b`.
pub fn to_canonical(a: &DMatrix<f64>, b: &DVector<f64>, tol: f64) -> Result<CanonicalForm> {
    let n = a.nrows();
    let ctrb = controllability_matrix(a, b)?;
    if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("canonicalization input".into()));
    }
    let ratio = linalg::singular_value_ratio(&ctrb);
    if !(ratio > tol) {
        return Err(Error::Uncontrollable { ratio, tol });
    }
    let c = char_coeffs(a);
    let mut t_inv = DMatrix::zeros(n, n);
    let mut v = b.clone();
    t_inv.set_column(n - 1, &v);
    for j in (0..n - 1).rev() {
        // column j holds v_{j+1} in one-based terms
        v = a * &v + b * c[j + 1];
        t_inv.set_column(j, &v);
    }
    let (t, _) = linalg::inverse_with_cond(&t_inv)?;
    let mut b_bar = DVector::zeros(n);
    b_bar[n - 1] = 1.0;
    Ok(CanonicalForm {
        t,
        t_inv,
        a_bar: companion(&c),
        b_bar,
        theta: c,
    })
}

/// Canonical form of a single-input [`LinearSystem`].
pub fn system_to_canonical(sys: &LinearSystem, tol: f64) -> Result<CanonicalForm> {
    if sys.inputs() != 1 {
        return Err(Error::MultiInput { inputs: sys.inputs() });
    }
    to_canonical(sys.a(), &sys.b().column(0).into_owned(), tol)
}
