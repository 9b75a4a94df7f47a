//! Parameter boxes, corners and parameterized uncertain linear systems.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tying::{Direction, MonotonicityReport};

/// Default ceiling on `k` for exhaustive corner enumeration (2^20 corners).
pub const CORNER_ENUMERATION_BUDGET: usize = 20;

/// Hyper-rectangle of admissible parameter values, `[p_l, q_l]` per parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterBox {
    names: Vec<String>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl ParameterBox {
    pub fn new(names: Vec<String>, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::InvalidBox("at least one parameter is required".into()));
        }
        if names.len() != lower.len() || names.len() != upper.len() {
            return Err(Error::InvalidBox(format!(
                "{} names, {} lower bounds, {} upper bounds",
                names.len(),
                lower.len(),
                upper.len()
            )));
        }
        for (l, (p, q)) in lower.iter().zip(&upper).enumerate() {
            if !p.is_finite() || !q.is_finite() {
                return Err(Error::InvalidBox(format!("bounds of {} are not finite", names[l])));
            }
            if p >= q {
                return Err(Error::InvalidBox(format!(
                    "{}: lower bound {} must be strictly below upper bound {}",
                    names[l], p, q
                )));
            }
        }
        Ok(ParameterBox { names, lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, m: &ParameterVector) -> bool {
        m.len() == self.dim()
            && m.values()
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (p, q))| p <= v && v <= q)
    }

    pub fn center(&self) -> ParameterVector {
        ParameterVector::new(
            self.lower
                .iter()
                .zip(&self.upper)
                .map(|(p, q)| 0.5 * (p + q))
                .collect(),
        )
    }

    pub fn corner_vector(&self, corner: &Corner) -> Result<ParameterVector> {
        if corner.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "corner has {} slots, box has {} parameters",
                corner.len(),
                self.dim()
            )));
        }
        Ok(ParameterVector::new(
            corner
                .levels()
                .iter()
                .enumerate()
                .map(|(l, level)| match level {
                    Level::Low => self.lower[l],
                    Level::High => self.upper[l],
                })
                .collect(),
        ))
    }

    /// Uniform draw from the box.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ParameterVector {
        ParameterVector::new(
            self.lower
                .iter()
                .zip(&self.upper)
                .map(|(p, q)| rng.gen_range(*p..=*q))
                .collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterVector(Vec<f64>);

impl ParameterVector {
    pub fn new(values: Vec<f64>) -> Self {
        ParameterVector(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn with(&self, l: usize, value: f64) -> Self {
        let mut v = self.0.clone();
        v[l] = value;
        ParameterVector(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Level {
    Low,
    High,
}

/// A vertex of the parameter box. Ordering is lexicographic with `Low < High`
/// and the leftmost parameter most significant.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Corner(Vec<Level>);

impl Corner {
    pub fn new(levels: Vec<Level>) -> Self {
        Corner(levels)
    }

    pub fn all(k: usize, level: Level) -> Self {
        Corner(vec![level; k])
    }

    /// Corner number `index` of a `k`-parameter box, leftmost parameter in the
    /// most significant bit.
    pub fn from_index(k: usize, index: u64) -> Self {
        Corner(
            (0..k)
                .map(|l| {
                    if (index >> (k - 1 - l)) & 1 == 1 {
                        Level::High
                    } else {
                        Level::Low
                    }
                })
                .collect(),
        )
    }

    pub fn index(&self) -> u64 {
        self.0
            .iter()
            .fold(0, |acc, l| (acc << 1) | u64::from(*l == Level::High))
    }

    pub fn levels(&self) -> &[Level] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for Corner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for level in &self.0 {
            f.write_str(match level {
                Level::Low => "L",
                Level::High => "H",
            })?;
        }
        Ok(())
    }
}

/// State-space pair `(A, B)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
}

impl LinearSystem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "A must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if b.nrows() != a.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "B has {} rows, A has {}",
                b.nrows(),
                a.nrows()
            )));
        }
        Ok(LinearSystem { a, b })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn into_parts(self) -> (DMatrix<f64>, DMatrix<f64>) {
        (self.a, self.b)
    }
}

type EvalFn = dyn Fn(&ParameterVector) -> LinearSystem + Send + Sync;

/// An uncertain system `m -> (A(m), B(m))` over a parameter box.
#[derive(Clone)]
pub struct ParameterizedSystem {
    pbox: ParameterBox,
    n: usize,
    h: usize,
    eval: Arc<EvalFn>,
}

impl fmt::Debug for ParameterizedSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ParameterizedSystem")
            .field("box", &self.pbox)
            .field("n", &self.n)
            .field("h", &self.h)
            .finish_non_exhaustive()
    }
}

impl ParameterizedSystem {
    pub fn new<F>(pbox: ParameterBox, n: usize, h: usize, eval: F) -> Self
    where
        F: Fn(&ParameterVector) -> LinearSystem + Send + Sync + 'static,
    {
        ParameterizedSystem {
            pbox,
            n,
            h,
            eval: Arc::new(eval),
        }
    }

    pub fn parameter_box(&self) -> &ParameterBox {
        &self.pbox
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn inputs(&self) -> usize {
        self.h
    }

    pub fn k(&self) -> usize {
        self.pbox.dim()
    }

    /// Evaluates the system at `m`. Points outside the box are accepted so
    /// that out-of-box excursions can be simulated.
    pub fn eval(&self, m: &ParameterVector) -> Result<LinearSystem> {
        if m.len() != self.k() {
            return Err(Error::DimensionMismatch(format!(
                "parameter vector has {} entries, box has {}",
                m.len(),
                self.k()
            )));
        }
        let sys = (self.eval)(m);
        if sys.n() != self.n || sys.inputs() != self.h {
            return Err(Error::DimensionMismatch(format!(
                "evaluation returned n={}, h={}; expected n={}, h={}",
                sys.n(),
                sys.inputs(),
                self.n,
                self.h
            )));
        }
        Ok(sys)
    }

    pub fn eval_at_corner(&self, corner: &Corner) -> Result<LinearSystem> {
        let m = self.pbox.corner_vector(corner)?;
        self.eval(&m)
    }
}

/// Element-wise bounds `lb <= A <= ub`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixInterval {
    lb: DMatrix<f64>,
    ub: DMatrix<f64>,
}

impl MatrixInterval {
    pub fn new(lb: DMatrix<f64>, ub: DMatrix<f64>) -> Result<Self> {
        if !lb.is_square() || lb.shape() != ub.shape() {
            return Err(Error::DimensionMismatch(format!(
                "interval bounds must be equal-sized square matrices, got {:?} and {:?}",
                lb.shape(),
                ub.shape()
            )));
        }
        for (i, (l, u)) in lb.iter().zip(ub.iter()).enumerate() {
            if !l.is_finite() || !u.is_finite() {
                return Err(Error::NonFinite("matrix interval".into()));
            }
            if l > u {
                let n = lb.nrows();
                // column-major storage
                return Err(Error::InvalidArgument(format!(
                    "lb > ub at ({}, {})",
                    i % n,
                    i / n
                )));
            }
        }
        Ok(MatrixInterval { lb, ub })
    }

    /// Degenerate interval `lb = ub = a`.
    pub fn point(a: &DMatrix<f64>) -> Result<Self> {
        MatrixInterval::new(a.clone(), a.clone())
    }

    pub fn n(&self) -> usize {
        self.lb.nrows()
    }

    pub fn lb(&self) -> &DMatrix<f64> {
        &self.lb
    }

    pub fn ub(&self) -> &DMatrix<f64> {
        &self.ub
    }

    pub fn contains(&self, a: &DMatrix<f64>) -> bool {
        a.shape() == self.lb.shape()
            && a.iter()
                .zip(self.lb.iter().zip(self.ub.iter()))
                .all(|(v, (l, u))| l <= v && v <= u)
    }

    /// Principal sub-interval on the index set `rows` (used for both rows and columns).
    pub fn principal(&self, idx: &[usize]) -> MatrixInterval {
        let k = idx.len();
        let lb = DMatrix::from_fn(k, k, |r, c| self.lb[(idx[r], idx[c])]);
        let ub = DMatrix::from_fn(k, k, |r, c| self.ub[(idx[r], idx[c])]);
        MatrixInterval { lb, ub }
    }

    /// Uniform element-wise draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::from_fn(n, n, |i, j| {
            let (l, u) = (self.lb[(i, j)], self.ub[(i, j)]);
            if l == u {
                l
            } else {
                rng.gen_range(l..=u)
            }
        })
    }
}

/// Evaluates `ps` at a corner of its box.
pub fn eval_at_corner(ps: &ParameterizedSystem, corner: &Corner) -> Result<LinearSystem> {
    ps.eval_at_corner(corner)
}

/// Element-wise bounds of `A(m)` over the box, using the default enumeration budget.
pub fn element_bounds(ps: &ParameterizedSystem, report: &MonotonicityReport) -> Result<MatrixInterval> {
    element_bounds_with_budget(ps, report, CORNER_ENUMERATION_BUDGET)
}

/// Element-wise bounds of `A(m)`.
///
/// Requires every entry to be monotone in every parameter. With `k <= budget`
/// the min/max is taken over all `2^k` corners; otherwise each entry is
/// evaluated only at the extremal corner its monotone directions imply.
pub fn element_bounds_with_budget(
    ps: &ParameterizedSystem,
    report: &MonotonicityReport,
    budget: usize,
) -> Result<MatrixInterval> {
    let (k, n) = (ps.k(), ps.n());
    if report.k() != k || report.n() != n {
        return Err(Error::DimensionMismatch(format!(
            "report covers k={}, n={}; system has k={}, n={}",
            report.k(),
            report.n(),
            k,
            n
        )));
    }
    if let Some((param, row, col)) = report.first_non_monotone() {
        return Err(Error::NonMonotoneEntry { param, row, col });
    }

    if k <= budget {
        let mut lb = DMatrix::from_element(n, n, f64::INFINITY);
        let mut ub = DMatrix::from_element(n, n, f64::NEG_INFINITY);
        for index in 0..(1u64 << k) {
            let sys = ps.eval_at_corner(&Corner::from_index(k, index))?;
            for (v, (l, u)) in sys.a().iter().zip(lb.iter_mut().zip(ub.iter_mut())) {
                *l = l.min(*v);
                *u = u.max(*v);
            }
        }
        return MatrixInterval::new(lb, ub);
    }

    let mut lb = DMatrix::zeros(n, n);
    let mut ub = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut hi = Vec::with_capacity(k);
            let mut lo = Vec::with_capacity(k);
            for l in 0..k {
                let (h, w) = match report.direction(l, i, j) {
                    Direction::Increasing => (Level::High, Level::Low),
                    Direction::Decreasing => (Level::Low, Level::High),
                    _ => (Level::Low, Level::Low),
                };
                hi.push(h);
                lo.push(w);
            }
            ub[(i, j)] = ps.eval_at_corner(&Corner::new(hi))?.a()[(i, j)];
            lb[(i, j)] = ps.eval_at_corner(&Corner::new(lo))?.a()[(i, j)];
        }
    }
    MatrixInterval::new(lb, ub)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tying::{scan_monotonicity, ScanOptions};
    use nalgebra::dmatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit_box(k: usize) -> ParameterBox {
        ParameterBox::new(
            (0..k).map(|l| format!("m{}", l + 1)).collect(),
            vec![0.0; k],
            vec![1.0; k],
        )
        .unwrap()
    }

    fn single(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static, k: usize) -> ParameterizedSystem {
        ParameterizedSystem::new(unit_box(k), 1, 1, move |m| {
            LinearSystem::new(dmatrix![f(m.values())], dmatrix![1.0]).unwrap()
        })
    }

    #[test]
    fn box_rejects_degenerate_bounds() {
        let err = ParameterBox::new(vec!["a".into()], vec![1.0], vec![1.0]).unwrap_err();
        assert!(matches!(err, Error::InvalidBox(_)));
        assert!(ParameterBox::new(vec![], vec![], vec![]).is_err());
        assert!(ParameterBox::new(vec!["a".into()], vec![0.0, 1.0], vec![1.0]).is_err());
    }

    #[test]
    fn corner_index_round_trip_and_order() {
        let c = Corner::from_index(3, 0b101);
        assert_eq!(c.levels(), &[Level::High, Level::Low, Level::High]);
        assert_eq!(c.index(), 5);
        assert_eq!(c.to_string(), "HLH");
        assert!(Corner::from_index(3, 3) < Corner::from_index(3, 4));
    }

    #[test]
    fn constant_map_corner_is_identity() {
        let ps = ParameterizedSystem::new(unit_box(1), 2, 1, |_| {
            LinearSystem::new(DMatrix::identity(2, 2), dmatrix![0.0; 1.0]).unwrap()
        });
        for c in [Level::Low, Level::High] {
            let sys = eval_at_corner(&ps, &Corner::all(1, c)).unwrap();
            assert_eq!(sys.a(), &DMatrix::identity(2, 2));
        }
    }

    #[test]
    fn diagonal_substitution_at_corner() {
        let pbox = ParameterBox::new(
            vec!["m1".into(), "m2".into()],
            vec![1.0, -3.0],
            vec![2.0, 5.0],
        )
        .unwrap();
        let ps = ParameterizedSystem::new(pbox, 2, 1, |m| {
            let v = m.values();
            LinearSystem::new(dmatrix![v[0], 0.0; 0.0, v[1]], dmatrix![1.0; 1.0]).unwrap()
        });
        let sys = eval_at_corner(&ps, &Corner::new(vec![Level::High, Level::Low])).unwrap();
        assert_eq!(sys.a(), &dmatrix![2.0, 0.0; 0.0, -3.0]);
        let err = eval_at_corner(&ps, &Corner::all(3, Level::Low)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch(_)));
    }

    #[test]
    fn bounds_of_monotone_sum_and_difference() {
        let sum = single(|m| m[0] + m[1], 2);
        let report = scan_monotonicity(&sum, &ScanOptions::default()).unwrap();
        let mi = element_bounds(&sum, &report).unwrap();
        assert_eq!((mi.lb()[(0, 0)], mi.ub()[(0, 0)]), (0.0, 2.0));

        let diff = single(|m| m[0] - m[1], 2);
        let report = scan_monotonicity(&diff, &ScanOptions::default()).unwrap();
        let mi = element_bounds(&diff, &report).unwrap();
        assert_eq!((mi.lb()[(0, 0)], mi.ub()[(0, 0)]), (-1.0, 1.0));
        // monotone-direction shortcut agrees with enumeration
        let shortcut = element_bounds_with_budget(&diff, &report, 0).unwrap();
        assert_eq!(shortcut, mi);
    }

    #[test]
    fn bounds_refuse_non_monotone_entry() {
        let pbox = ParameterBox::new(vec!["m".into()], vec![-1.0], vec![1.0]).unwrap();
        let ps = ParameterizedSystem::new(pbox, 1, 1, |m| {
            LinearSystem::new(dmatrix![m.values()[0].powi(2)], dmatrix![1.0]).unwrap()
        });
        let report = scan_monotonicity(&ps, &ScanOptions::default()).unwrap();
        assert_eq!(
            element_bounds(&ps, &report).unwrap_err(),
            Error::NonMonotoneEntry { param: 0, row: 0, col: 0 }
        );
    }

    #[test]
    fn sampled_entries_stay_inside_bounds() {
        let ps = ParameterizedSystem::new(unit_box(3), 2, 1, |m| {
            let v = m.values();
            LinearSystem::new(
                dmatrix![v[0] * v[1] + 1.0, (v[2] + 1.0).ln(); -v[0].exp(), v[1] - 2.0 * v[2]],
                dmatrix![0.0; 1.0],
            )
            .unwrap()
        });
        let report = scan_monotonicity(&ps, &ScanOptions::default()).unwrap();
        let mi = element_bounds(&ps, &report).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let a = ps.eval(&ps.parameter_box().sample(&mut rng)).unwrap().a().clone();
            for (v, (l, u)) in a.iter().zip(mi.lb().iter().zip(mi.ub().iter())) {
                assert!(*l - 1e-12 <= *v && *v <= *u + 1e-12);
            }
        }
    }

    #[test]
    fn eval_is_deterministic() {
        let ps = single(|m| (m[0] * 3.1).sin() + m[1].sqrt(), 2);
        let m = ParameterVector::new(vec![0.37, 0.81]);
        assert_eq!(ps.eval(&m).unwrap(), ps.eval(&m).unwrap());
    }

    #[test]
    fn interval_validation() {
        assert!(MatrixInterval::new(dmatrix![1.0], dmatrix![0.0]).is_err());
        let mi = MatrixInterval::new(dmatrix![0.0, 1.0; 2.0, 3.0], dmatrix![1.0, 1.0; 2.5, 4.0]).unwrap();
        let sub = mi.principal(&[1]);
        assert_eq!(sub.lb()[(0, 0)], 3.0);
        assert!(mi.contains(&dmatrix![0.5, 1.0; 2.2, 3.5]));
        assert!(!mi.contains(&dmatrix![0.5, 1.1; 2.2, 3.5]));
    }
}
