//! Matrix-valued weights carrying a convex combination of vertex systems into
//! canonical coordinates.
//!
//! With `T_p^-1 = sum w_i T_i^-1` and `S_i = T_p T_i^-1`, the reconstructed
//! plant is `A_bar_p = sum w_i S_i A_bar_i S_i^-1` and `sum w_i S_i = I`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::canonical::{self, CanonicalForm};
use crate::error::{Error, Result};
use crate::linalg;
use crate::weights::SimplexWeights;

pub const DEFAULT_COND_LIMIT: f64 = 1e12;

#[derive(Debug, Clone)]
pub struct TransformBundle {
    pub t_inv_list: Vec<DMatrix<f64>>,
    /// `(sum w_i T_i^-1)^-1`.
    pub t_p: DMatrix<f64>,
    /// `sum w_i T_i^-1`.
    pub t_p_inv: DMatrix<f64>,
    pub s_list: Vec<DMatrix<f64>>,
    pub weights: SimplexWeights,
    /// 1-norm condition number of the mixture.
    pub condition: f64,
}

impl TransformBundle {
    /// `max |(sum w_i S_i - I)_jk|`.
    pub fn sum_to_identity_residual(&self) -> f64 {
        let n = self.t_p.nrows();
        let mut acc = -DMatrix::<f64>::identity(n, n);
        for (s, w) in self.s_list.iter().zip(self.weights.values()) {
            acc += s * *w;
        }
        linalg::max_abs(&acc)
    }
}

pub fn build_transform_bundle(
    models: &[CanonicalForm],
    w: &SimplexWeights,
    cond_limit: f64,
) -> Result<TransformBundle> {
    if models.is_empty() || models.len() != w.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} canonical models for {} weights",
            models.len(),
            w.len()
        )));
    }
    let n = models[0].n();
    if models.iter().any(|m| m.n() != n) {
        return Err(Error::DimensionMismatch("canonical models differ in dimension".into()));
    }
    let mut mixture = DMatrix::zeros(n, n);
    for (m, wi) in models.iter().zip(w.values()) {
        mixture += m.t_inv() * *wi;
    }
    let (t_p, cond) = linalg::inverse_with_cond(&mixture).map_err(|e| match e {
        Error::Singular { cond } => Error::SingularMixture { cond },
        other => other,
    })?;
    if cond > cond_limit {
        return Err(Error::SingularMixture { cond });
    }
    let lu = mixture.clone().lu();
    let s_list = models
        .iter()
        .map(|m| {
            let mut s = &t_p * m.t_inv();
            let r = m.t_inv() - &mixture * &s;
            if let Some(ds) = lu.solve(&r) {
                s += ds;
            }
            s
        })
        .collect();
    Ok(TransformBundle {
        t_inv_list: models.iter().map(|m| m.t_inv().clone()).collect(),
        t_p,
        t_p_inv: mixture,
        s_list,
        weights: w.clone(),
        condition: cond,
    })
}

#[derive(Debug, Clone)]
pub struct ReconstructedPlant {
    pub a_bar: DMatrix<f64>,
    /// Always `e_n`.
    pub b_bar: DVector<f64>,
    /// `max |sum w_i S_i b_bar_i - e_n|`.
    pub b_residual: f64,
}

/// `A_bar_p = sum w_i S_i A_bar_i S_i^-1`, with `S_i^-1 = T_i T_p^-1`.
pub fn reconstruct_canonical_plant(bundle: &TransformBundle, models: &[CanonicalForm]) -> Result<ReconstructedPlant> {
    if models.len() != bundle.s_list.len() {
        return Err(Error::DimensionMismatch(format!(
            "bundle holds {} transforms, got {} models",
            bundle.s_list.len(),
            models.len()
        )));
    }
    let n = bundle.t_p.nrows();
    let mut a_bar = DMatrix::zeros(n, n);
    let mut b_mix = DVector::zeros(n);
    for ((s, m), wi) in bundle.s_list.iter().zip(models).zip(bundle.weights.values()) {
        let s_inv = m.t() * &bundle.t_p_inv;
        a_bar += (s * m.a_bar() * s_inv) * *wi;
        b_mix += (s * m.b_bar()) * *wi;
    }
    if a_bar.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("reconstructed canonical plant".into()));
    }
    let mut b_bar = DVector::zeros(n);
    b_bar[n - 1] = 1.0;
    let b_residual = (&b_mix - &b_bar).amax();
    Ok(ReconstructedPlant { a_bar, b_bar, b_residual })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConsistencyReport {
    /// Worst deviation of rows `1..n-1` from the shifted-identity pattern.
    pub structure_residual: f64,
    /// `max |A_bar_p - A_bar_direct|` relative to `max |A_bar_direct|`, where
    /// `A_bar_direct` canonicalizes `(sum w_i A_i, sum w_i b_i)` directly.
    pub oracle_residual: f64,
    /// Same comparison restricted to the characteristic coefficients.
    pub coefficient_residual: f64,
    pub consistent: bool,
}

/// Deviation of rows `1..n-1` from the shifted-identity pattern.
pub fn companion_structure_residual(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n.saturating_sub(1) {
        for j in 0..n {
            let expected = if j == i + 1 { 1.0 } else { 0.0 };
            worst = worst.max((a[(i, j)] - expected).abs());
        }
    }
    worst
}

/// Compares a reconstructed plant against the direct canonical form of the
/// mixed original-coordinate system.
///
/// `systems` are the `(A_i, b_i)` the canonical models were built from.
pub fn verify_companion_consistency(
    a_bar_p: &DMatrix<f64>,
    systems: &[(DMatrix<f64>, DVector<f64>)],
    w: &SimplexWeights,
    tol: f64,
) -> Result<ConsistencyReport> {
    if systems.is_empty() || systems.len() != w.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} systems for {} weights",
            systems.len(),
            w.len()
        )));
    }
    let n = a_bar_p.nrows();
    let mut a_mix = DMatrix::zeros(n, n);
    let mut b_mix = DVector::zeros(n);
    for ((a, b), wi) in systems.iter().zip(w.values()) {
        a_mix += a * *wi;
        b_mix += b * *wi;
    }
    let direct = canonical::to_canonical(&a_mix, &b_mix, canonical::DEFAULT_CONTROLLABILITY_TOL)?;
    let scale = linalg::max_abs(direct.a_bar()).max(1.0);
    let oracle_residual = linalg::max_abs(&(a_bar_p - direct.a_bar())) / scale;
    let coeffs = canonical::char_coeffs(a_bar_p);
    let coefficient_residual = coeffs
        .iter()
        .zip(direct.theta())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
        / scale;
    let structure_residual = companion_structure_residual(a_bar_p);
    Ok(ConsistencyReport {
        structure_residual,
        oracle_residual,
        coefficient_residual,
        consistent: structure_residual <= tol && oracle_residual <= tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canonical::to_canonical;
    use nalgebra::{dmatrix, dvector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_model(rng: &mut ChaCha8Rng, n: usize) -> (DMatrix<f64>, DVector<f64>, CanonicalForm) {
        loop {
            let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            let b = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
            if let Ok(cf) = to_canonical(&a, &b, 1e-3) {
                return (a, b, cf);
            }
        }
    }

    fn random_weights(rng: &mut ChaCha8Rng, n: usize) -> SimplexWeights {
        let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
        let sum: f64 = raw.iter().sum();
        SimplexWeights::project(&raw.iter().map(|v| v / sum).collect::<Vec<_>>())
    }

    #[test]
    fn single_model_is_identity() {
        let cf = to_canonical(&dmatrix![-1.0, 0.5; 0.0, -2.0], &dvector![1.0, 1.0], 1e-10).unwrap();
        let bundle = build_transform_bundle(&[cf.clone()], &SimplexWeights::uniform(1), DEFAULT_COND_LIMIT).unwrap();
        assert!((&bundle.s_list[0] - DMatrix::<f64>::identity(2, 2)).amax() < 1e-12);
        let plant = reconstruct_canonical_plant(&bundle, &[cf.clone()]).unwrap();
        assert!((plant.a_bar - cf.a_bar()).amax() < 1e-12);
    }

    #[test]
    fn common_transformation_gives_identity_weights() {
        let cf = to_canonical(&dmatrix![0.0, 1.0; -3.0, -1.0], &dvector![0.0, 1.0], 1e-10).unwrap();
        let models = vec![cf.clone(), cf.clone(), cf];
        let w = SimplexWeights::new(vec![0.2, 0.3, 0.5]).unwrap();
        let bundle = build_transform_bundle(&models, &w, DEFAULT_COND_LIMIT).unwrap();
        for s in &bundle.s_list {
            assert!((s - DMatrix::<f64>::identity(2, 2)).amax() < 1e-12);
        }
    }

    #[test]
    fn random_bundles_sum_to_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let models: Vec<CanonicalForm> = (0..3).map(|_| random_model(&mut rng, 3).2).collect();
            let w = random_weights(&mut rng, 3);
            match build_transform_bundle(&models, &w, DEFAULT_COND_LIMIT) {
                Ok(bundle) => assert!(bundle.sum_to_identity_residual() <= 1e-9),
                Err(Error::SingularMixture { .. }) => {}
                Err(e) => panic!("{e}"),
            }
        }
    }

    #[test]
    fn one_hot_weights_reproduce_the_vertex() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in 2..=4 {
            let models: Vec<CanonicalForm> = (0..3).map(|_| random_model(&mut rng, n).2).collect();
            for i in 0..3 {
                let w = SimplexWeights::vertex(3, i);
                let bundle = build_transform_bundle(&models, &w, DEFAULT_COND_LIMIT).unwrap();
                let plant = reconstruct_canonical_plant(&bundle, &models).unwrap();
                let scale = linalg::max_abs(models[i].a_bar()).max(1.0);
                assert!((plant.a_bar - models[i].a_bar()).amax() <= 1e-10 * scale);
            }
        }
    }

    #[test]
    fn two_companion_models_with_shared_input() {
        // companion pairs share T = I, so the reconstruction is the plain mixture
        let a1 = dmatrix![0.0, 1.0; -2.0, -3.0];
        let a2 = dmatrix![0.0, 1.0; -5.0, -1.0];
        let b = dvector![0.0, 1.0];
        let models = vec![to_canonical(&a1, &b, 1e-10).unwrap(), to_canonical(&a2, &b, 1e-10).unwrap()];
        let w = SimplexWeights::uniform(2);
        let bundle = build_transform_bundle(&models, &w, DEFAULT_COND_LIMIT).unwrap();
        let plant = reconstruct_canonical_plant(&bundle, &models).unwrap();
        let report =
            verify_companion_consistency(&plant.a_bar, &[(a1, b.clone()), (a2, b)], &w, 1e-8).unwrap();
        assert!(report.consistent, "{report:?}");
        assert!(plant.b_residual < 1e-12);
    }

    #[test]
    fn reconstruction_is_similar_to_the_mixture() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut non_companion = 0;
        for _ in 0..50 {
            let drawn: Vec<_> = (0..3).map(|_| random_model(&mut rng, 3)).collect();
            let models: Vec<CanonicalForm> = drawn.iter().map(|d| d.2.clone()).collect();
            let systems: Vec<_> = drawn.iter().map(|d| (d.0.clone(), d.1.clone())).collect();
            let w = random_weights(&mut rng, 3);
            let bundle = build_transform_bundle(&models, &w, DEFAULT_COND_LIMIT).unwrap();
            let plant = reconstruct_canonical_plant(&bundle, &models).unwrap();
            assert!(plant.b_residual < 1e-9);
            let report = verify_companion_consistency(&plant.a_bar, &systems, &w, 1e-8).unwrap();
            assert!(report.coefficient_residual < 1e-8, "{report:?}");
            if report.structure_residual > 1e-3 {
                non_companion += 1;
            }
        }
        // T_i^-1 depends nonlinearly on (A_i, b_i), so the companion pattern is generically lost
        assert!(non_companion > 40);
    }

    #[test]
    fn corrupted_similarity_is_flagged() {
        let a1 = dmatrix![0.0, 1.0; -2.0, -3.0];
        let a2 = dmatrix![0.0, 1.0; -5.0, -1.0];
        let b = dvector![0.0, 1.0];
        let models = vec![to_canonical(&a1, &b, 1e-10).unwrap(), to_canonical(&a2, &b, 1e-10).unwrap()];
        let w = SimplexWeights::uniform(2);
        let mut bundle = build_transform_bundle(&models, &w, DEFAULT_COND_LIMIT).unwrap();
        bundle.s_list[0][(0, 1)] += 0.5;
        let plant = reconstruct_canonical_plant(&bundle, &models).unwrap();
        let report =
            verify_companion_consistency(&plant.a_bar, &[(a1, b.clone()), (a2, b)], &w, 1e-8).unwrap();
        assert!(!report.consistent);
        assert!(report.structure_residual > 0.1 || report.oracle_residual > 0.1);
        assert!(bundle.sum_to_identity_residual() > 0.1);
    }

    #[test]
    fn singular_mixture_is_reported() {
        // T_1^-1 = -T_2^-1 makes the equal-weight mixture zero
        let cf1 = to_canonical(&dmatrix![-1.0, 0.0; 0.0, -2.0], &dvector![1.0, 1.0], 1e-10).unwrap();
        let cf2 = to_canonical(&dmatrix![-1.0, 0.0; 0.0, -2.0], &dvector![-1.0, -1.0], 1e-10).unwrap();
        let err = build_transform_bundle(&[cf1, cf2], &SimplexWeights::uniform(2), DEFAULT_COND_LIMIT).unwrap_err();
        assert!(matches!(err, Error::SingularMixture { .. }));
    }
}
