//! Interval enclosures of characteristic-polynomial coefficients of an
//! element-wise bounded matrix.
//!
//! `c_{n-1}` comes from the trace, `c_0` from a Leibniz expansion of the
//! determinant, and the intermediate coefficients from sums of principal
//! minors. Permutation products are bounded with general interval
//! multiplication; [`ProductRule::Literal`] instead multiplies lower bounds
//! together and upper bounds together, which is only an enclosure when all
//! factors are nonnegative.
//!
//! Sums over permutations ignore that the same entry appears in several
//! products, so the result is an outer enclosure, not the exact hull.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::MatrixInterval;

/// Largest matrix (or principal minor) whose permutations are enumerated: 8! = 40,320.
pub const MAX_PERMUTATION_DIM: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi || lo.is_nan() || hi.is_nan());
        Interval { lo, hi }
    }

    pub fn point(v: f64) -> Self {
        Interval { lo: v, hi: v }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn neg(self) -> Self {
        Interval { lo: -self.hi, hi: -self.lo }
    }

    pub fn add(self, other: Interval) -> Self {
        Interval {
            lo: self.lo + other.lo,
            hi: self.hi + other.hi,
        }
    }

    /// Exact interval product: min/max over the four endpoint products.
    pub fn mul(self, other: Interval) -> Self {
        let p = [
            self.lo * other.lo,
            self.lo * other.hi,
            self.hi * other.lo,
            self.hi * other.hi,
        ];
        Interval {
            lo: p.iter().cloned().fold(f64::INFINITY, f64::min),
            hi: p.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// Multiplies by +1 or -1.
    pub fn signed(self, sign: i8) -> Self {
        if sign < 0 {
            self.neg()
        } else {
            self
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProductRule {
    /// Interval multiplication folded over the factors (sound for any signs).
    #[default]
    Interval,
    /// Product of lower bounds to product of upper bounds.
    Literal,
}

/// `lb[k] <= c_k <= ub[k]` for `k = 0 .. n-1`; the monic leading term is implicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientBounds {
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
}

impl CoefficientBounds {
    pub fn len(&self) -> usize {
        self.lb.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lb.is_empty()
    }

    pub fn interval(&self, k: usize) -> Interval {
        Interval::new(self.lb[k], self.ub[k])
    }

    /// Checks `c` against the bounds with relative slack `rel_tol`
    /// (scaled by the larger of the bound magnitudes and 1).
    pub fn contains(&self, c: &[f64], rel_tol: f64) -> bool {
        c.len() == self.len()
            && c.iter().enumerate().all(|(k, v)| {
                let scale = self.lb[k].abs().max(self.ub[k].abs()).max(1.0);
                let slack = rel_tol * scale;
                self.lb[k] - slack <= *v && *v <= self.ub[k] + slack
            })
    }
}

/// Bounds on `c_{n-1} = -tr(A)`.
pub fn trace_coeff_bounds(mi: &MatrixInterval) -> Interval {
    let n = mi.n();
    let (mut lo, mut hi) = (0.0, 0.0);
    for i in 0..n {
        lo -= mi.ub()[(i, i)];
        hi -= mi.lb()[(i, i)];
    }
    Interval::new(lo, hi)
}

fn entry(mi: &MatrixInterval, i: usize, j: usize) -> Interval {
    Interval::new(mi.lb()[(i, j)], mi.ub()[(i, j)])
}

fn permutation_product(mi: &MatrixInterval, perm: &[usize], sign: i8, rule: ProductRule) -> Interval {
    match rule {
        ProductRule::Interval => perm
            .iter()
            .enumerate()
            .fold(Interval::point(1.0), |acc, (i, &j)| acc.mul(entry(mi, i, j)))
            .signed(sign),
        ProductRule::Literal => {
            let lo: f64 = perm.iter().enumerate().map(|(i, &j)| mi.lb()[(i, j)]).product();
            let hi: f64 = perm.iter().enumerate().map(|(i, &j)| mi.ub()[(i, j)]).product();
            if sign > 0 {
                Interval { lo, hi }
            } else {
                Interval { lo: -hi, hi: -lo }
            }
        }
    }
}

/// Calls `visit(perm, sign)` for every permutation of `0..n` (Heap's algorithm).
pub(crate) fn for_each_permutation(n: usize, mut visit: impl FnMut(&[usize], i8)) {
    let mut perm: Vec<usize> = (0..n).collect();
    let mut counters = vec![0usize; n];
    let mut sign = 1i8;
    visit(&perm, sign);
    let mut i = 0;
    while i < n {
        if counters[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(counters[i], i);
            }
            sign = -sign;
            visit(&perm, sign);
            counters[i] += 1;
            i = 0;
        } else {
            counters[i] = 0;
            i += 1;
        }
    }
}

/// Interval enclosure of `det(A)` over the Leibniz expansion.
pub fn det_bounds(mi: &MatrixInterval) -> Result<Interval> {
    det_bounds_with_rule(mi, ProductRule::Interval)
}

pub fn det_bounds_with_rule(mi: &MatrixInterval, rule: ProductRule) -> Result<Interval> {
    let n = mi.n();
    if n > MAX_PERMUTATION_DIM {
        return Err(Error::DimensionTooLarge { n, max: MAX_PERMUTATION_DIM });
    }
    if n == 0 {
        return Ok(Interval::point(1.0));
    }
    let mut acc = Interval::point(0.0);
    for_each_permutation(n, |perm, sign| {
        acc = acc.add(permutation_product(mi, perm, sign, rule));
    });
    Ok(acc)
}

/// Bounds on `c_0 = (-1)^n det(A)`.
pub fn constant_term_bounds(mi: &MatrixInterval) -> Result<Interval> {
    constant_term_bounds_with_rule(mi, ProductRule::Interval)
}

pub fn constant_term_bounds_with_rule(mi: &MatrixInterval, rule: ProductRule) -> Result<Interval> {
    let det = det_bounds_with_rule(mi, rule)?;
    Ok(if mi.n() % 2 == 0 { det } else { det.neg() })
}

/// Bounds on `c_k = (-1)^{n-k} * sum of principal minors of order n-k`, `1 <= k <= n-2`.
pub fn intermediate_coeff_bounds(mi: &MatrixInterval, k: usize) -> Result<Interval> {
    intermediate_coeff_bounds_with_rule(mi, k, ProductRule::Interval)
}

pub fn intermediate_coeff_bounds_with_rule(
    mi: &MatrixInterval,
    k: usize,
    rule: ProductRule,
) -> Result<Interval> {
    let n = mi.n();
    if k == 0 || k + 2 > n {
        return Err(Error::InvalidArgument(format!(
            "intermediate coefficient index {k} outside 1..={}",
            n.saturating_sub(2)
        )));
    }
    let order = n - k;
    if order > MAX_PERMUTATION_DIM {
        return Err(Error::DimensionTooLarge { n: order, max: MAX_PERMUTATION_DIM });
    }
    let sign: i8 = if order % 2 == 0 { 1 } else { -1 };
    let mut acc = Interval::point(0.0);
    for subset in combinations(n, order) {
        let minor = det_bounds_with_rule(&mi.principal(&subset), rule)?;
        acc = acc.add(minor.signed(sign));
    }
    Ok(acc)
}

/// All `r`-subsets of `0..n` in lexicographic order.
fn combinations(n: usize, r: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..r).collect();
    if r > n {
        return out;
    }
    loop {
        out.push(idx.clone());
        let mut i = r;
        while i > 0 && idx[i - 1] == n - r + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        idx[i - 1] += 1;
        for j in i..r {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

pub fn all_coeff_bounds(mi: &MatrixInterval) -> Result<CoefficientBounds> {
    all_coeff_bounds_with_rule(mi, ProductRule::Interval)
}

pub fn all_coeff_bounds_with_rule(mi: &MatrixInterval, rule: ProductRule) -> Result<CoefficientBounds> {
    let n = mi.n();
    if n == 0 {
        return Err(Error::InvalidArgument("empty matrix interval".into()));
    }
    let mut intervals = vec![Interval::point(0.0); n];
    intervals[n - 1] = trace_coeff_bounds(mi);
    if n >= 2 {
        intervals[0] = constant_term_bounds_with_rule(mi, rule)?;
    }
    for (k, slot) in intervals.iter_mut().enumerate().take(n - 1).skip(1) {
        *slot = intermediate_coeff_bounds_with_rule(mi, k, rule)?;
    }
    Ok(CoefficientBounds {
        lb: intervals.iter().map(|i| i.lo).collect(),
        ub: intervals.iter().map(|i| i.hi).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canonical::char_coeffs;
    use nalgebra::{dmatrix, DMatrix};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cofactor_det(a: &DMatrix<f64>) -> f64 {
        let n = a.nrows();
        if n == 1 {
            return a[(0, 0)];
        }
        (0..n)
            .map(|j| {
                let minor = a.clone().remove_row(0).remove_column(j);
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                sign * a[(0, j)] * cofactor_det(&minor)
            })
            .sum()
    }

    fn uniform(n: usize, lo: f64, hi: f64) -> MatrixInterval {
        MatrixInterval::new(DMatrix::from_element(n, n, lo), DMatrix::from_element(n, n, hi)).unwrap()
    }

    #[test]
    fn permutations_carry_correct_signs() {
        let mut count = 0;
        let mut net = 0i32;
        for_each_permutation(4, |p, s| {
            let inversions = (0..4).flat_map(|i| (i + 1..4).map(move |j| (i, j))).filter(|&(i, j)| p[i] > p[j]).count();
            assert_eq!(s, if inversions % 2 == 0 { 1 } else { -1 });
            count += 1;
            net += i32::from(s);
        });
        assert_eq!((count, net), (24, 0));
    }

    #[test]
    fn combinations_enumerate_subsets() {
        assert_eq!(combinations(4, 2).len(), 6);
        assert_eq!(combinations(3, 3), vec![vec![0, 1, 2]]);
        assert_eq!(combinations(3, 1), vec![vec![0], vec![1], vec![2]]);
    }

    #[test]
    fn trace_bounds() {
        let mi = uniform(2, -2.0, -1.0);
        assert_eq!(trace_coeff_bounds(&mi), Interval::new(2.0, 4.0));
        let a = dmatrix![1.5, 2.0; -3.0, 0.25];
        assert_eq!(trace_coeff_bounds(&MatrixInterval::point(&a).unwrap()), Interval::point(-1.75));
    }

    #[test]
    fn det_of_unit_and_symmetric_boxes() {
        assert_eq!(det_bounds(&uniform(2, 0.0, 1.0)).unwrap(), Interval::new(-1.0, 1.0));
        // brute force over the 2^4 sign corners gives the same extremes
        let mut corner_max = f64::NEG_INFINITY;
        for bits in 0..16u32 {
            let v: Vec<f64> = (0..4).map(|i| if bits >> i & 1 == 1 { 1.0 } else { -1.0 }).collect();
            corner_max = corner_max.max(v[0] * v[3] - v[1] * v[2]);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10_000 {
            let v: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            assert!(v[0] * v[3] - v[1] * v[2] <= corner_max);
        }
        assert_eq!(corner_max, 2.0);
        assert_eq!(det_bounds(&uniform(2, -1.0, 1.0)).unwrap(), Interval::new(-2.0, 2.0));
    }

    #[test]
    fn point_det_matches_cofactor_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for n in 1..=6 {
            let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-2.0..2.0));
            let d = det_bounds(&MatrixInterval::point(&a).unwrap()).unwrap();
            assert_eq!(d.lo, d.hi);
            let oracle = cofactor_det(&a);
            assert!((d.lo - oracle).abs() <= 1e-10 * oracle.abs().max(1.0));
        }
    }

    #[test]
    fn det_budget_is_enforced() {
        let mi = uniform(9, 0.0, 1.0);
        assert_eq!(det_bounds(&mi).unwrap_err(), Error::DimensionTooLarge { n: 9, max: 8 });
        assert!(all_coeff_bounds(&mi).is_err());
    }

    #[test]
    fn constant_term_parity() {
        // n = 2: c_0 = det
        assert_eq!(constant_term_bounds(&uniform(2, 0.0, 1.0)).unwrap(), Interval::new(-1.0, 1.0));
        // n = 3 diagonal with det in [0, 5] -> c_0 in [-5, 0]
        let lb = DMatrix::from_diagonal(&nalgebra::dvector![0.0, 1.0, 1.0]);
        let ub = DMatrix::from_diagonal(&nalgebra::dvector![5.0, 1.0, 1.0]);
        let mi = MatrixInterval::new(lb, ub).unwrap();
        assert_eq!(det_bounds(&mi).unwrap(), Interval::new(0.0, 5.0));
        assert_eq!(constant_term_bounds(&mi).unwrap(), Interval::new(-5.0, 0.0));
    }

    #[test]
    fn diagonal_intermediate_is_sum_of_pair_products() {
        let lo = [1.0, -2.0, 0.5];
        let hi = [2.0, -1.0, 3.0];
        let mi = MatrixInterval::new(
            DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&lo)),
            DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&hi)),
        )
        .unwrap();
        let mut expected = Interval::point(0.0);
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            expected = expected.add(Interval::new(lo[i], hi[i]).mul(Interval::new(lo[j], hi[j])));
        }
        assert_eq!(intermediate_coeff_bounds(&mi, 1).unwrap(), expected);
        assert!(intermediate_coeff_bounds(&mi, 2).is_err());
    }

    #[test]
    fn point_interval_collapses_to_char_coeffs() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for n in 1..=5 {
            let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-3.0..3.0));
            let cb = all_coeff_bounds(&MatrixInterval::point(&a).unwrap()).unwrap();
            let c = char_coeffs(&a);
            for k in 0..n {
                assert_eq!(cb.lb[k], cb.ub[k]);
                assert!((cb.lb[k] - c[k]).abs() <= 1e-10 * c[k].abs().max(1.0));
            }
        }
    }

    #[test]
    fn literal_rule_is_unsound_for_sign_indefinite_entries() {
        let mi = uniform(2, -1.0, 1.0);
        let literal = det_bounds_with_rule(&mi, ProductRule::Literal).unwrap();
        // det = a d - b c reaches 2 at a = d = 1, b = -c = 1, which the literal rule misses
        assert!(!literal.contains(2.0));
        assert!(det_bounds(&mi).unwrap().contains(2.0));
    }

    #[test]
    fn sampled_coefficients_stay_inside() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for n in 2..=4 {
            let center = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-5.0..5.0));
            let radius = DMatrix::from_fn(n, n, |_, _| rng.gen_range(0.0..1.0));
            let mi = MatrixInterval::new(&center - &radius, &center + &radius).unwrap();
            let cb = all_coeff_bounds(&mi).unwrap();
            for _ in 0..2000 {
                assert!(cb.contains(&char_coeffs(&mi.sample(&mut rng)), 1e-12));
            }
        }
    }

    proptest! {
        #[test]
        fn widening_never_shrinks_bounds(
            lo in prop::collection::vec(-3.0f64..3.0, 9),
            width in prop::collection::vec(0.0f64..2.0, 9),
            extra in prop::collection::vec(0.0f64..1.0, 9),
        ) {
            let lb = DMatrix::from_row_slice(3, 3, &lo);
            let ub = &lb + DMatrix::from_row_slice(3, 3, &width);
            let grow = DMatrix::from_row_slice(3, 3, &extra);
            let narrow = all_coeff_bounds(&MatrixInterval::new(lb.clone(), ub.clone()).unwrap()).unwrap();
            let wide = all_coeff_bounds(&MatrixInterval::new(&lb - &grow, &ub + &grow).unwrap()).unwrap();
            for k in 0..3 {
                let tol = 1e-12 * narrow.lb[k].abs().max(narrow.ub[k].abs()).max(1.0);
                prop_assert!(wide.lb[k] <= narrow.lb[k] + tol);
                prop_assert!(wide.ub[k] >= narrow.ub[k] - tol);
            }
        }
    }
}
