//! Simplex weights from identification errors, and the sign test for plant
//! inclusion in the convex hull of the identification models.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default proximal weight toward the previous solution.
pub const DEFAULT_REGULARIZATION: f64 = 1e-6;
/// Projected-gradient iteration cap per solve.
pub const MAX_ITERATIONS: usize = 10_000;
/// Relative objective-decrease threshold for the inner solver.
pub const OBJECTIVE_TOL: f64 = 1e-12;
const MAX_PROXIMAL_ROUNDS: usize = 8;

/// Identification errors `E = [e_1 .. e_N]` restricted to the observed channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorMatrix {
    e: DMatrix<f64>,
    t: f64,
}

impl ErrorMatrix {
    pub fn new(e: DMatrix<f64>, t: f64) -> Result<Self> {
        if e.ncols() < 2 {
            return Err(Error::InvalidArgument(format!(
                "error matrix needs at least two model columns, got {}",
                e.ncols()
            )));
        }
        if e.nrows() == 0 {
            return Err(Error::InvalidArgument("error matrix has no observed channel".into()));
        }
        if e.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("error matrix".into()));
        }
        Ok(ErrorMatrix { e, t })
    }

    /// Single observed channel.
    pub fn from_row(values: &[f64], t: f64) -> Result<Self> {
        ErrorMatrix::new(DMatrix::from_row_slice(1, values.len(), values), t)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.e
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn models(&self) -> usize {
        self.e.ncols()
    }

    pub fn channels(&self) -> usize {
        self.e.nrows()
    }

    /// `||E w||_2`.
    pub fn residual(&self, w: &SimplexWeights) -> f64 {
        (&self.e * w.as_vector()).norm()
    }
}

/// Nonnegative weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexWeights(Vec<f64>);

impl SimplexWeights {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::InvalidArgument("empty weight vector".into()));
        }
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidArgument("weights must be finite and nonnegative".into()));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("weights sum to {sum}, not 1")));
        }
        Ok(SimplexWeights(w))
    }

    pub fn uniform(n: usize) -> Self {
        SimplexWeights(vec![1.0 / n as f64; n])
    }

    pub fn vertex(n: usize, i: usize) -> Self {
        let mut w = vec![0.0; n];
        w[i] = 1.0;
        SimplexWeights(w)
    }

    /// Euclidean projection of `v` onto the probability simplex.
    pub fn project(v: &[f64]) -> Self {
        SimplexWeights(project_to_simplex(v))
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

    pub fn as_vector(&self) -> DVector<f64> {
        DVector::from_row_slice(&self.0)
    }
}

/// Sort-based projection onto `{w >= 0, sum w = 1}`.
fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut shift = 0.0;
    for (i, u) in sorted.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - 1.0) / (i + 1) as f64;
        if u - candidate > 0.0 {
            shift = candidate;
        }
    }
    let mut w: Vec<f64> = v.iter().map(|x| (x - shift).max(0.0)).collect();
    // absorb rounding so the sum is 1 to the last ulp or so
    let sum: f64 = w.iter().sum();
    if sum > 0.0 {
        let top = (0..w.len()).fold(0, |b, i| if w[i] > w[b] { i } else { b });
        w[top] += 1.0 - sum;
        if w[top] < 0.0 {
            w[top] = 0.0;
        }
    }
    w
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum InclusionStatus {
    Inside,
    Outside,
    Boundary,
}

impl InclusionStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            InclusionStatus::Inside => "INSIDE",
            InclusionStatus::Outside => "OUTSIDE",
            InclusionStatus::Boundary => "BOUNDARY",
        }
    }
}

/// Channel and a pair of columns with opposite signs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignWitness {
    pub channel: usize,
    pub positive: usize,
    pub negative: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InclusionVerdict {
    pub status: InclusionStatus,
    pub witness: Option<SignWitness>,
    pub deadband: f64,
}

/// Sign test on each observed channel: entries within `deadband` of zero
/// count as zero. Any channel with all entries strictly one-signed makes the
/// verdict `Outside`; every channel mixed or all-zero, with at least one
/// mixed, makes it `Inside`; anything else is `Boundary`.
pub fn inclusion_criterion(e: &ErrorMatrix, deadband: f64) -> InclusionVerdict {
    let deadband = deadband.max(0.0);
    let mut witness = None;
    let mut all_settled = true;
    for (ch, row) in e.matrix().row_iter().enumerate() {
        let mut pos = None;
        let mut neg = None;
        let mut zeros = 0;
        for (col, v) in row.iter().enumerate() {
            if *v > deadband {
                pos.get_or_insert(col);
            } else if *v < -deadband {
                neg.get_or_insert(col);
            } else {
                zeros += 1;
            }
        }
        match (pos, neg) {
            (Some(p), Some(n)) => {
                witness.get_or_insert(SignWitness {
                    channel: ch,
                    positive: p,
                    negative: n,
                });
            }
            (Some(_), None) | (None, Some(_)) if zeros == 0 => {
                return InclusionVerdict {
                    status: InclusionStatus::Outside,
                    witness: None,
                    deadband,
                };
            }
            (None, None) => {}
            _ => all_settled = false,
        }
    }
    let status = if all_settled && witness.is_some() {
        InclusionStatus::Inside
    } else {
        InclusionStatus::Boundary
    };
    InclusionVerdict {
        status,
        witness: if status == InclusionStatus::Inside { witness } else { None },
        deadband,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightSolution {
    pub weights: SimplexWeights,
    /// `||E w||_2` in the units of `E`.
    pub residual: f64,
    pub iterations: usize,
}

/// Upper bound on the largest eigenvalue of a symmetric PSD matrix: its trace.
/// For a single observed channel the normalized data term has rank one and
/// the bound is exact.
fn lipschitz_bound(q: &DMatrix<f64>) -> f64 {
    q.trace().max(f64::MIN_POSITIVE)
}

/// Minimizes `||E~ w||^2 + lambda ||w - anchor||^2` over the simplex, `E~ = E / ||E||_F`,
/// by accelerated projected gradient descent with step `1/L` and a restart
/// whenever the objective rises. The KKT solve on the anchor's support is
/// tried first and returned when it is optimal.
fn proximal_solve(
    q_data: &DMatrix<f64>,
    lambda: f64,
    anchor: &DVector<f64>,
    budget: &mut usize,
) -> DVector<f64> {
    let n = anchor.len();
    let q = q_data + DMatrix::<f64>::identity(n, n) * lambda;
    let step = 1.0 / (2.0 * lipschitz_bound(&q));
    let objective = |w: &DVector<f64>| {
        let d = w - anchor;
        (w.transpose() * q_data * w)[(0, 0)] + lambda * d.norm_squared()
    };
    if let Some(exact) = polish(&q, lambda, anchor, anchor) {
        return exact;
    }
    let mut w = anchor.clone();
    let mut y = w.clone();
    let mut momentum = 1.0f64;
    let mut f = objective(&w);
    while *budget > 0 {
        *budget -= 1;
        let grad = (q_data * &y) * 2.0 + (&y - anchor) * (2.0 * lambda);
        let next = DVector::from_vec(project_to_simplex((&y - grad * step).as_slice()));
        let f_next = objective(&next);
        if f_next > f {
            if momentum == 1.0 {
                break;
            }
            y = w.clone();
            momentum = 1.0;
            continue;
        }
        let moved = (&next - &w).amax();
        let done = f - f_next <= OBJECTIVE_TOL * f || moved <= f64::EPSILON;
        let momentum_next = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
        y = &next + (&next - &w) * ((momentum - 1.0) / momentum_next);
        momentum = momentum_next;
        w = next;
        f = f_next;
        if done {
            break;
        }
    }
    polish(&q, lambda, anchor, &w).unwrap_or(w)
}

/// Exact minimizer on the support of `w`, from the equality-constrained KKT
/// system. `None` when it leaves the simplex or violates optimality off the support.
fn polish(q: &DMatrix<f64>, lambda: f64, anchor: &DVector<f64>, w: &DVector<f64>) -> Option<DVector<f64>> {
    let support: Vec<usize> = (0..w.len()).filter(|&i| w[i] > 0.0).collect();
    let m = support.len();
    let mut kkt = DMatrix::zeros(m + 1, m + 1);
    let mut rhs = DVector::zeros(m + 1);
    for (r, &i) in support.iter().enumerate() {
        for (c, &j) in support.iter().enumerate() {
            kkt[(r, c)] = 2.0 * q[(i, j)];
        }
        kkt[(r, m)] = 1.0;
        kkt[(m, r)] = 1.0;
        rhs[r] = 2.0 * lambda * anchor[i];
    }
    rhs[m] = 1.0;
    let sol = kkt.lu().solve(&rhs)?;
    if (0..m).any(|r| !(sol[r] >= 0.0)) {
        return None;
    }
    let mut out = DVector::zeros(w.len());
    for (r, &i) in support.iter().enumerate() {
        out[i] = sol[r];
    }
    let nu = sol[m];
    let grad = q * &out * 2.0 - anchor * (2.0 * lambda);
    let slack = 1e-12 * grad.amax().max(nu.abs()).max(f64::MIN_POSITIVE);
    if (0..w.len()).any(|j| out[j] == 0.0 && grad[j] + nu < -slack) {
        return None;
    }
    let total: f64 = out.iter().sum();
    Some(out / total)
}

/// Weights on the simplex minimizing `||E w||`, nearest to `w_prev` among
/// the minimizers (uniform when `w_prev` is absent).
///
/// The objective is normalized by `||E||_F^2`, so scaling `E` leaves the
/// result unchanged. Each round solves the `lambda`-regularized problem
/// anchored at the previous round's solution, which removes the `O(lambda)`
/// bias of a single regularized solve.
pub fn solve_weights(e: &ErrorMatrix, lambda: f64, w_prev: Option<&SimplexWeights>) -> Result<WeightSolution> {
    let n = e.models();
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!("regularization must be >= 0, got {lambda}")));
    }
    let start = match w_prev {
        Some(w) if w.len() == n => w.as_vector(),
        Some(w) => {
            return Err(Error::DimensionMismatch(format!(
                "previous weights have {} entries, error matrix has {} models",
                w.len(),
                n
            )))
        }
        None => SimplexWeights::uniform(n).as_vector(),
    };
    let scale = e.matrix().norm();
    if scale == 0.0 {
        let weights = SimplexWeights(start.iter().cloned().collect());
        return Ok(WeightSolution {
            weights,
            residual: 0.0,
            iterations: 0,
        });
    }
    let en = e.matrix() / scale;
    let q_data = en.transpose() * &en;

    let mut budget = MAX_ITERATIONS;
    let mut anchor = start;
    let mut best = anchor.clone();
    let mut best_res = (&en * &best).norm();
    for _ in 0..MAX_PROXIMAL_ROUNDS {
        let w = proximal_solve(&q_data, lambda, &anchor, &mut budget);
        let res = (&en * &w).norm();
        let moved = (&w - &anchor).amax();
        if res <= best_res {
            best = w.clone();
            best_res = res;
        }
        if budget == 0 || moved <= 1e-15 || res <= 1e-15 || lambda == 0.0 {
            break;
        }
        anchor = w;
    }
    let weights = SimplexWeights(best.iter().cloned().collect());
    Ok(WeightSolution {
        residual: best_res * scale,
        weights,
        iterations: MAX_ITERATIONS - budget,
    })
}

/// `x_hat = sum w_i x_i`.
pub fn estimate_state(states: &[DVector<f64>], w: &SimplexWeights) -> Result<DVector<f64>> {
    if states.len() != w.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} model states for {} weights",
            states.len(),
            w.len()
        )));
    }
    let dim = states[0].len();
    if states.iter().any(|x| x.len() != dim) {
        return Err(Error::DimensionMismatch("model states differ in dimension".into()));
    }
    let mut acc = DVector::zeros(dim);
    for (x, wi) in states.iter().zip(w.values()) {
        acc.axpy(*wi, x, 1.0);
    }
    Ok(acc)
}
