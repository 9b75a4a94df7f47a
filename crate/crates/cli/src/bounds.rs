use std::fmt::Write as _;

use mmas_core::canonical::char_coeffs;
use mmas_core::charpoly_bounds::{all_coeff_bounds_with_rule, CoefficientBounds, ProductRule};
use mmas_core::model::{element_bounds, MatrixInterval};
use mmas_core::tying::scan_monotonicity;
use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::analyze::scan_options;
use crate::config::{BoundsConfig, ExplicitInterval};
use crate::CommandError;

#[derive(Debug, Clone, Serialize)]
pub struct CoefficientRow {
    /// Power of lambda the coefficient multiplies.
    pub power: usize,
    pub lower: f64,
    pub upper: f64,
    pub sample_min: f64,
    pub sample_max: f64,
    /// `(sample_min - lower) / scale`; negative means a violation.
    pub slack_low: f64,
    /// `(upper - sample_max) / scale`.
    pub slack_high: f64,
    pub violations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundsReport {
    pub source: String,
    pub rule: ProductRule,
    pub n: usize,
    pub lb: Vec<Vec<f64>>,
    pub ub: Vec<Vec<f64>>,
    pub samples: usize,
    pub tol: f64,
    pub coefficients: Vec<CoefficientRow>,
    /// Samples with at least one coefficient outside its bounds.
    pub violating_samples: usize,
    /// For a degenerate interval, the largest relative gap between the bounds
    /// and the coefficients of the single matrix.
    pub point_gap: Option<f64>,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().cloned().collect()).collect()
}

fn from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>, CommandError> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(CommandError::Config(format!(
            "interval bounds must be a non-empty square array, got {} rows",
            n
        )));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

pub fn interval_from_config(cfg: &BoundsConfig, seed: u64) -> Result<(String, MatrixInterval), CommandError> {
    match &cfg.interval {
        Some(ExplicitInterval { lb, ub }) => {
            let mi = MatrixInterval::new(from_rows(lb)?, from_rows(ub)?)
                .map_err(|e| CommandError::Config(e.to_string()))?;
            Ok(("explicit".to_string(), mi))
        }
        None => {
            let ps = cfg.family.build(&cfg.vehicle)?;
            let report = scan_monotonicity(&ps, &scan_options(&cfg.scan, seed))?;
            Ok((cfg.family.name().to_string(), element_bounds(&ps, &report)?))
        }
    }
}

/// Relative scale used for containment slack.
pub fn coefficient_scale(bounds: &CoefficientBounds, k: usize) -> f64 {
    bounds.lb[k].abs().max(bounds.ub[k].abs()).max(1.0)
}

/// Samples matrices from `mi` and counts coefficient-bound violations.
pub fn containment<R: Rng>(
    mi: &MatrixInterval,
    bounds: &CoefficientBounds,
    samples: usize,
    tol: f64,
    rng: &mut R,
) -> (Vec<CoefficientRow>, usize) {
    let n = mi.n();
    let mut min = vec![f64::INFINITY; n];
    let mut max = vec![f64::NEG_INFINITY; n];
    let mut violations = vec![0usize; n];
    let mut violating = 0;
    for _ in 0..samples {
        let c = char_coeffs(&mi.sample(rng));
        let mut bad = false;
        for k in 0..n {
            min[k] = min[k].min(c[k]);
            max[k] = max[k].max(c[k]);
            let slack = tol * coefficient_scale(bounds, k);
            if c[k] < bounds.lb[k] - slack || c[k] > bounds.ub[k] + slack {
                violations[k] += 1;
                bad = true;
            }
        }
        if bad {
            violating += 1;
        }
    }
    let rows = (0..n)
        .map(|k| {
            let scale = coefficient_scale(bounds, k);
            CoefficientRow {
                power: k,
                lower: bounds.lb[k],
                upper: bounds.ub[k],
                sample_min: min[k],
                sample_max: max[k],
                slack_low: (min[k] - bounds.lb[k]) / scale,
                slack_high: (bounds.ub[k] - max[k]) / scale,
                violations: violations[k],
            }
        })
        .collect();
    (rows, violating)
}

pub fn run(cfg: &BoundsConfig, seed: u64) -> Result<BoundsReport, CommandError> {
    let (source, mi) = interval_from_config(cfg, seed)?;
    let bounds = all_coeff_bounds_with_rule(&mi, cfg.rule)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (coefficients, violating_samples) = containment(&mi, &bounds, cfg.samples, cfg.tol, &mut rng);
    let point_gap = (mi.lb() == mi.ub()).then(|| {
        let c = char_coeffs(mi.lb());
        (0..mi.n())
            .map(|k| {
                let scale = c[k].abs().max(1.0);
                ((bounds.lb[k] - c[k]).abs().max((bounds.ub[k] - c[k]).abs())) / scale
            })
            .fold(0.0, f64::max)
    });
    Ok(BoundsReport {
        source,
        rule: cfg.rule,
        n: mi.n(),
        lb: rows(mi.lb()),
        ub: rows(mi.ub()),
        samples: cfg.samples,
        tol: cfg.tol,
        coefficients,
        violating_samples,
        point_gap,
    })
}

pub fn render(r: &BoundsReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "interval: {} ({}x{})", r.source, r.n, r.n);
    let _ = writeln!(out, "product rule: {:?}", r.rule);
    for (i, (l, u)) in r.lb.iter().zip(&r.ub).enumerate() {
        let cells: Vec<String> = l.iter().zip(u).map(|(a, b)| format!("[{a:.6e}, {b:.6e}]")).collect();
        let _ = writeln!(out, "  row {i}: {}", cells.join(" "));
    }
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "coefficients of lambda^k in det(lambda I - A), {} samples, tolerance {:.1e} relative:",
        r.samples, r.tol
    );
    for c in &r.coefficients {
        let _ = writeln!(
            out,
            "  k={} bounds [{:.9e}, {:.9e}] samples [{:.9e}, {:.9e}] slack {:.3e} / {:.3e} violations {}",
            c.power, c.lower, c.upper, c.sample_min, c.sample_max, c.slack_low, c.slack_high, c.violations
        );
    }
    if r.n == 2 {
        let det = &r.coefficients[0];
        let _ = writeln!(out, "det(A) in [{:.9e}, {:.9e}]", det.lower, det.upper);
    }
    if let Some(gap) = r.point_gap {
        let _ = writeln!(
            out,
            "point interval: bounds {} the characteristic coefficients (largest relative gap {:.3e})",
            if gap <= 1e-10 { "match" } else { "DO NOT match" },
            gap
        );
    }
    let _ = writeln!(out, "violating samples: {}", r.violating_samples);
    let _ = writeln!(out, "result: {}", if r.violating_samples == 0 { "OK" } else { "VIOLATIONS" });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::Family;

    #[test]
    fn unit_square_determinant() {
        let cfg = BoundsConfig {
            interval: Some(ExplicitInterval {
                lb: vec![vec![0.0, 0.0], vec![0.0, 0.0]],
                ub: vec![vec![1.0, 1.0], vec![1.0, 1.0]],
            }),
            samples: 500,
            ..BoundsConfig::default()
        };
        let r = run(&cfg, 0).unwrap();
        assert_eq!((r.coefficients[0].lower, r.coefficients[0].upper), (-1.0, 1.0));
        assert!(render(&r).contains("det(A) in [-1.000000000e0, 1.000000000e0]"));
        assert_eq!(r.violating_samples, 0);
    }

    #[test]
    fn point_interval_matches() {
        let m = vec![vec![1.0, 2.0, 0.5], vec![-1.0, 0.0, 3.0], vec![0.25, 1.0, -2.0]];
        let cfg = BoundsConfig {
            interval: Some(ExplicitInterval { lb: m.clone(), ub: m }),
            samples: 10,
            ..BoundsConfig::default()
        };
        let r = run(&cfg, 0).unwrap();
        assert!(r.point_gap.unwrap() <= 1e-10);
        assert!(render(&r).contains("bounds match"));
    }

    #[test]
    fn vehicle_interval_contains_samples() {
        let cfg = BoundsConfig {
            family: Family::Vehicle,
            samples: 2000,
            ..BoundsConfig::default()
        };
        let r = run(&cfg, 3).unwrap();
        assert_eq!(r.n, 4);
        assert_eq!(r.violating_samples, 0);
    }

    #[test]
    fn ragged_interval_is_a_config_error() {
        let cfg = BoundsConfig {
            interval: Some(ExplicitInterval {
                lb: vec![vec![0.0, 0.0], vec![0.0]],
                ub: vec![vec![1.0, 1.0], vec![1.0, 1.0]],
            }),
            ..BoundsConfig::default()
        };
        assert!(matches!(run(&cfg, 0), Err(CommandError::Config(_))));
    }
}
