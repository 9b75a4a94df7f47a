//! Property suites run by `mmas verify`. Every suite is seeded and
//! single-threaded, so reports are reproducible byte for byte.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use mmas_core::canonical::{char_coeffs, to_canonical, CanonicalForm};
use mmas_core::charpoly_bounds::{all_coeff_bounds_with_rule, ProductRule};
use mmas_core::model::{element_bounds, MatrixInterval};
use mmas_core::sim::{
    simulate_plant, simulate_scenario, ParameterTrajectory, PlantSchedule, Scenario, SimulationError, SteeringProfile,
};
use mmas_core::transform::{
    build_transform_bundle, reconstruct_canonical_plant, verify_companion_consistency, DEFAULT_COND_LIMIT,
};
use mmas_core::tying::{scan_monotonicity, Direction, ScanOptions, VertexModelSet};
use mmas_core::vehicle::{make_uncertain_vehicle, SignConvention, VehicleParams, UNCERTAIN_PARAMETERS};
use mmas_core::weights::{inclusion_criterion, solve_weights, ErrorMatrix, InclusionStatus, SimplexWeights};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::analyze::select_models;
use crate::bounds::containment;
use crate::config::VerifyMode;
use crate::CommandError;

/// Problem sizes for one verification run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sizes {
    pub bound_samples: usize,
    pub bound_families: usize,
    pub point_matrices: usize,
    pub canonical_pairs: usize,
    pub transform_instances: usize,
    pub forward_scenarios: usize,
    pub backward_scenarios: usize,
    pub scenario_horizon: f64,
    pub scenario_step: f64,
    pub recovery_horizon: f64,
}

impl Sizes {
    pub fn for_mode(mode: VerifyMode) -> Self {
        match mode {
            VerifyMode::Full => Sizes {
                bound_samples: 10_000,
                bound_families: 10,
                point_matrices: 1000,
                canonical_pairs: 1000,
                transform_instances: 1000,
                forward_scenarios: 100,
                backward_scenarios: 100,
                scenario_horizon: 3.0,
                scenario_step: 2e-3,
                recovery_horizon: 5.0,
            },
            VerifyMode::Smoke => Sizes {
                bound_samples: 1000,
                bound_families: 3,
                point_matrices: 100,
                canonical_pairs: 100,
                transform_instances: 100,
                forward_scenarios: 10,
                backward_scenarios: 10,
                scenario_horizon: 2.0,
                scenario_step: 4e-3,
                recovery_horizon: 3.0,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteResult {
    pub name: String,
    pub passed: bool,
    pub checked: usize,
    pub failed: usize,
    pub metrics: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl SuiteResult {
    fn new(name: &str) -> Self {
        SuiteResult {
            name: name.to_string(),
            passed: true,
            checked: 0,
            failed: 0,
            metrics: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    fn record(&mut self, ok: bool) {
        self.checked += 1;
        if !ok {
            self.failed += 1;
        }
    }

    fn metric(&mut self, key: &str, value: f64) {
        self.metrics.insert(key.to_string(), value);
    }

    fn finish(mut self) -> Self {
        self.passed = self.failed == 0;
        self
    }
}

pub const SUITE_NAMES: [&str; 12] = [
    "charpoly_soundness",
    "point_exactness",
    "canonical_round_trip",
    "transform_sum_identity",
    "transform_oracle",
    "transform_negative_control",
    "weights_examples",
    "vehicle_model_count",
    "inclusion_forward",
    "inclusion_backward",
    "weight_recovery",
    "rk4_order",
];

fn suite_rng(seed: u64, name: &str) -> ChaCha8Rng {
    let salt = name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    });
    ChaCha8Rng::seed_from_u64(seed ^ salt)
}

pub fn run_suite(name: &str, sizes: &Sizes, rule: ProductRule, seed: u64) -> Result<SuiteResult, CommandError> {
    let rng = suite_rng(seed, name);
    match name {
        "charpoly_soundness" => charpoly_soundness(sizes, rule, rng),
        "point_exactness" => point_exactness(sizes, rule, rng),
        "canonical_round_trip" => Ok(canonical_round_trip(sizes, rng)),
        "transform_sum_identity" => Ok(transform_sum_identity(sizes, seed)),
        "transform_oracle" => Ok(transform_oracle(sizes, seed)),
        "transform_negative_control" => Ok(transform_negative_control(false)),
        "negative_control_corrupted" => Ok(transform_negative_control(true)),
        "weights_examples" => Ok(weights_examples()),
        "vehicle_model_count" => vehicle_model_count(seed),
        "inclusion_forward" => inclusion_forward(sizes, seed, rng),
        "inclusion_backward" => inclusion_backward(sizes, seed, rng),
        "weight_recovery" => weight_recovery(sizes, seed),
        "rk4_order" => rk4_order(),
        other => Err(CommandError::Config(format!(
            "unknown suite {other:?}; known suites: {}",
            SUITE_NAMES.join(", ")
        ))),
    }
}

/// Random interval matrix around a random center.
pub fn random_interval<R: Rng>(rng: &mut R, n: usize) -> MatrixInterval {
    let center = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let width = DMatrix::from_fn(n, n, |_, _| rng.gen_range(0.0..0.5));
    MatrixInterval::new(&center - &width, &center + &width).expect("ordered bounds")
}

fn vehicle_interval(seed: u64) -> Result<MatrixInterval, CommandError> {
    let ps = make_uncertain_vehicle(&VehicleParams::default())?;
    let report = scan_monotonicity(
        &ps,
        &ScanOptions {
            seed,
            ..ScanOptions::default()
        },
    )?;
    Ok(element_bounds(&ps, &report)?)
}

fn charpoly_soundness(sizes: &Sizes, rule: ProductRule, mut rng: ChaCha8Rng) -> Result<SuiteResult, CommandError> {
    let mut r = SuiteResult::new("charpoly_soundness");
    let mut intervals = vec![("vehicle".to_string(), vehicle_interval(0)?)];
    for f in 0..sizes.bound_families {
        let n = 2 + f % 3;
        intervals.push((format!("random_{f}_n{n}"), random_interval(&mut rng, n)));
    }
    let mut worst_slack = f64::INFINITY;
    for (label, mi) in &intervals {
        let bounds = all_coeff_bounds_with_rule(mi, rule)?;
        let (rows, violating) = containment(mi, &bounds, sizes.bound_samples, 1e-12, &mut rng);
        r.checked += sizes.bound_samples;
        r.failed += violating;
        for row in &rows {
            worst_slack = worst_slack.min(row.slack_low.min(row.slack_high));
        }
        if violating > 0 {
            r.notes.push(format!("{label}: {violating} samples outside the bounds"));
        }
    }
    r.metric("families", intervals.len() as f64);
    r.metric("min_relative_slack", worst_slack);
    Ok(r.finish())
}

fn point_exactness(sizes: &Sizes, rule: ProductRule, mut rng: ChaCha8Rng) -> Result<SuiteResult, CommandError> {
    let mut r = SuiteResult::new("point_exactness");
    let mut worst = 0.0f64;
    for i in 0..sizes.point_matrices {
        let n = 2 + i % 5;
        let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-2.0..2.0));
        let bounds = all_coeff_bounds_with_rule(&MatrixInterval::point(&a)?, rule)?;
        let c = char_coeffs(&a);
        let gap = (0..n)
            .map(|k| (bounds.lb[k] - c[k]).abs().max((bounds.ub[k] - c[k]).abs()) / c[k].abs().max(1.0))
            .fold(0.0, f64::max);
        worst = worst.max(gap);
        r.record(gap <= 1e-10);
    }
    r.metric("worst_relative_gap", worst);
    Ok(r.finish())
}

fn canonical_round_trip(sizes: &Sizes, mut rng: ChaCha8Rng) -> SuiteResult {
    let mut r = SuiteResult::new("canonical_round_trip");
    let mut worst = 0.0f64;
    let mut rejected = 0;
    let mut done = 0;
    while done < sizes.canonical_pairs {
        let n = 2 + done % 5;
        let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let b = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let Ok(cf) = to_canonical(&a, &b, 1e-6) else {
            rejected += 1;
            continue;
        };
        done += 1;
        let scale = a.abs().row_sum().max();
        let res = cf.similarity_residual(&a) / scale.max(1.0);
        let companion_ok = cf.a_bar().rows(0, n - 1).columns(1, n - 1) == DMatrix::identity(n - 1, n - 1)
            && cf.b_bar()[n - 1] == 1.0;
        worst = worst.max(res);
        r.record(res <= 1e-8 && companion_ok);
    }
    r.metric("worst_relative_residual", worst);
    r.metric("rejected_uncontrollable", rejected as f64);
    r.finish()
}

pub struct TransformInstance {
    pub systems: Vec<(DMatrix<f64>, DVector<f64>)>,
    pub models: Vec<CanonicalForm>,
    pub weights: SimplexWeights,
}

/// Random instances with `n` and the model count cycling through 2, 3, 4.
pub fn transform_instances(count: usize, seed: u64) -> Vec<TransformInstance> {
    let mut rng = suite_rng(seed, "transform_instances");
    (0..count)
        .map(|i| {
            let n = 2 + i % 3;
            let models_count = 2 + (i / 3) % 3;
            let mut systems = Vec::new();
            let mut models = Vec::new();
            while models.len() < models_count {
                let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
                let b = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
                if let Ok(cf) = to_canonical(&a, &b, 1e-3) {
                    systems.push((a, b));
                    models.push(cf);
                }
            }
            let raw: Vec<f64> = (0..models_count).map(|_| -rng.gen_range(1e-12f64..1.0).ln()).collect();
            let total: f64 = raw.iter().sum();
            let weights = SimplexWeights::project(&raw.iter().map(|v| v / total).collect::<Vec<_>>());
            TransformInstance {
                systems,
                models,
                weights,
            }
        })
        .collect()
}

fn transform_sum_identity(sizes: &Sizes, seed: u64) -> SuiteResult {
    let mut r = SuiteResult::new("transform_sum_identity");
    let mut worst = 0.0f64;
    let mut singular = 0;
    for inst in transform_instances(sizes.transform_instances, seed) {
        match build_transform_bundle(&inst.models, &inst.weights, DEFAULT_COND_LIMIT) {
            Ok(bundle) => {
                let res = bundle.sum_to_identity_residual();
                worst = worst.max(res);
                r.record(res <= 1e-9);
            }
            Err(_) => singular += 1,
        }
    }
    r.metric("worst_abs_residual", worst);
    r.metric("singular_mixtures", singular as f64);
    r.finish()
}

fn transform_oracle(sizes: &Sizes, seed: u64) -> SuiteResult {
    let mut r = SuiteResult::new("transform_oracle");
    let mut residuals = Vec::new();
    let mut coefficient_ok = 0;
    let mut companion_ok = 0;
    for inst in transform_instances(sizes.transform_instances, seed) {
        let Ok(bundle) = build_transform_bundle(&inst.models, &inst.weights, DEFAULT_COND_LIMIT) else {
            continue;
        };
        let outcome = reconstruct_canonical_plant(&bundle, &inst.models)
            .and_then(|p| verify_companion_consistency(&p.a_bar, &inst.systems, &inst.weights, 1e-8));
        match outcome {
            Ok(rep) => {
                residuals.push(rep.oracle_residual);
                coefficient_ok += usize::from(rep.coefficient_residual <= 1e-8);
                companion_ok += usize::from(rep.structure_residual <= 1e-8);
                r.record(rep.oracle_residual <= 1e-8);
            }
            Err(e) => {
                r.record(false);
                r.notes.push(format!("instance failed: {e}"));
            }
        }
    }
    residuals.sort_by(f64::total_cmp);
    if !residuals.is_empty() {
        r.metric("median_relative_residual", residuals[residuals.len() / 2]);
        r.metric("max_relative_residual", residuals[residuals.len() - 1]);
    }
    r.metric("characteristic_coefficients_agree", coefficient_ok as f64);
    r.metric("companion_structure_holds", companion_ok as f64);
    if r.failed > 0 {
        r.notes.push(
            "the reconstruction is similar to the mixed system (same characteristic coefficients) \
             but is generally not in companion form, so it differs from the direct canonical form"
                .to_string(),
        );
    }
    r.finish()
}

/// Corrupts one similarity matrix and checks that the consistency report
/// flags it. With `report_corrupted` the corrupted result is scored as if it
/// had to pass, so the suite fails on purpose.
fn transform_negative_control(report_corrupted: bool) -> SuiteResult {
    let name = if report_corrupted {
        "negative_control_corrupted"
    } else {
        "transform_negative_control"
    };
    let mut r = SuiteResult::new(name);
    let a1 = nalgebra::dmatrix![0.0, 1.0; -2.0, -3.0];
    let a2 = nalgebra::dmatrix![0.0, 1.0; -5.0, -1.0];
    let b = nalgebra::dvector![0.0, 1.0];
    let models = vec![
        to_canonical(&a1, &b, 1e-10).expect("controllable"),
        to_canonical(&a2, &b, 1e-10).expect("controllable"),
    ];
    let w = SimplexWeights::uniform(2);
    let mut bundle = build_transform_bundle(&models, &w, DEFAULT_COND_LIMIT).expect("regular mixture");
    let clean = reconstruct_canonical_plant(&bundle, &models)
        .and_then(|p| verify_companion_consistency(&p.a_bar, &[(a1.clone(), b.clone()), (a2.clone(), b.clone())], &w, 1e-8))
        .expect("clean reconstruction");
    bundle.s_list[0][(0, 1)] += 0.5;
    let corrupted = reconstruct_canonical_plant(&bundle, &models)
        .and_then(|p| verify_companion_consistency(&p.a_bar, &[(a1, b.clone()), (a2, b)], &w, 1e-8))
        .expect("corrupted reconstruction");
    r.metric("clean_oracle_residual", clean.oracle_residual);
    r.metric("corrupted_oracle_residual", corrupted.oracle_residual);
    r.metric("corrupted_sum_identity_residual", bundle.sum_to_identity_residual());
    if report_corrupted {
        r.record(corrupted.consistent);
        r.notes.push("deliberately corrupted similarity matrix; failure expected".to_string());
    } else {
        r.record(clean.consistent);
        r.record(!corrupted.consistent);
    }
    r.finish()
}

fn weights_examples() -> SuiteResult {
    let mut r = SuiteResult::new("weights_examples");
    let solve = |row: &[f64]| {
        let e = ErrorMatrix::from_row(row, 0.0).expect("finite");
        solve_weights(&e, mmas_core::weights::DEFAULT_REGULARIZATION, None).expect("solvable")
    };
    let close = |w: &SimplexWeights, expected: &[f64]| w.values().iter().zip(expected).all(|(a, b)| (a - b).abs() <= 1e-9);
    r.record(close(&solve(&[1.0, -1.0]).weights, &[0.5, 0.5]));
    r.record(close(&solve(&[2.0, -1.0]).weights, &[1.0 / 3.0, 2.0 / 3.0]));
    let outside = solve(&[1.0, 2.0]);
    r.record(close(&outside.weights, &[1.0, 0.0]) && (outside.residual - 1.0).abs() <= 1e-9);
    let status = |row: &[f64]| inclusion_criterion(&ErrorMatrix::from_row(row, 0.0).expect("finite"), 1e-6).status;
    r.record(status(&[0.3, -0.2]) == InclusionStatus::Inside);
    r.record(status(&[0.3, 0.2]) == InclusionStatus::Outside);
    r.record(status(&[0.0, 0.5]) == InclusionStatus::Boundary);
    r.finish()
}

fn vehicle_model_count(seed: u64) -> Result<SuiteResult, CommandError> {
    let mut r = SuiteResult::new("vehicle_model_count");
    for sign in [SignConvention::AsPrinted, SignConvention::Standard] {
        let ps = make_uncertain_vehicle(&VehicleParams {
            sign,
            ..VehicleParams::default()
        })?;
        let scan = ScanOptions {
            seed,
            ..ScanOptions::default()
        };
        let (report, set) = select_models(&ps, &scan, mmas_core::canonical::DEFAULT_CONTROLLABILITY_TOL)?;
        r.record(report.all_monotone());
        r.record(set.len() <= 4);
        r.record(report.direction(5, 0, 2) == Direction::Decreasing);
        let key = match sign {
            SignConvention::AsPrinted => "models_as_printed",
            SignConvention::Standard => "models_standard_sign",
        };
        r.metric(key, set.len() as f64);
    }
    r.metric("claimed_models", 2.0);
    r.metric("corners", 64.0);
    Ok(r.finish())
}

/// Tying-selected models for the standard-sign vehicle at `speed`.
pub fn scenario_models(speed: f64, seed: u64) -> Result<(VehicleParams, VertexModelSet), CommandError> {
    let vp = VehicleParams {
        u: speed,
        sign: SignConvention::Standard,
        ..VehicleParams::default()
    };
    let ps = make_uncertain_vehicle(&vp)?;
    let scan = ScanOptions {
        seed,
        ..ScanOptions::default()
    };
    let (_, set) = select_models(&ps, &scan, mmas_core::canonical::DEFAULT_CONTROLLABILITY_TOL)?;
    Ok((vp, set))
}

fn base_scenario(sizes: &Sizes, vp: &VehicleParams, frequency_hz: f64) -> Scenario {
    Scenario {
        speed: vp.u,
        horizon: sizes.scenario_horizon,
        step: sizes.scenario_step,
        steering: SteeringProfile::Sine {
            amplitude_deg: 2.0,
            frequency_hz,
        },
        vehicle: vp.clone(),
        ..Scenario::default()
    }
}

fn inclusion_forward(sizes: &Sizes, seed: u64, mut rng: ChaCha8Rng) -> Result<SuiteResult, CommandError> {
    let mut r = SuiteResult::new("inclusion_forward");
    let (vp, set) = scenario_models(50.0 / 3.6, seed)?;
    let pbox = make_uncertain_vehicle(&vp)?.parameter_box().clone();
    let mut outside_scenarios = 0;
    let mut residual_scenarios = 0;
    let mut worst = 0.0f64;
    for s in 0..sizes.forward_scenarios {
        let mut trajectories = BTreeMap::new();
        for (l, name) in UNCERTAIN_PARAMETERS.iter().enumerate() {
            let (lo, hi) = (pbox.lower()[l], pbox.upper()[l]);
            let mean = rng.gen_range(lo..=hi);
            let traj = if s % 2 == 0 {
                ParameterTrajectory::Constant { value: mean }
            } else {
                let amplitude = rng.gen_range(0.0..=1.0) * (mean - lo).min(hi - mean);
                ParameterTrajectory::Sinusoid {
                    mean,
                    amplitude,
                    frequency_hz: rng.gen_range(0.05..0.5),
                    phase: rng.gen_range(0.0..2.0 * PI),
                }
            };
            trajectories.insert(name.to_string(), traj);
        }
        let sc = Scenario {
            plant: PlantSchedule::Parameters { trajectories },
            ..base_scenario(sizes, &vp, rng.gen_range(0.3..1.0))
        };
        let trace = match simulate_scenario(&sc, &set) {
            Ok(t) => t,
            Err(SimulationError::Diverged { t, .. }) => {
                r.record(false);
                r.notes.push(format!("scenario {s}: diverged at {t:.3} s"));
                continue;
            }
            Err(SimulationError::Setup(e)) => return Err(e.into()),
        };
        let outside = trace.count(InclusionStatus::Outside);
        let mut scenario_worst = 0.0f64;
        for smp in &trace.samples {
            if smp.error_norm > 0.0 {
                scenario_worst = scenario_worst.max(smp.residual / smp.error_norm);
            }
        }
        worst = worst.max(scenario_worst);
        outside_scenarios += usize::from(outside > 0);
        residual_scenarios += usize::from(scenario_worst > 1e-8);
        let ok = outside == 0 && scenario_worst <= 1e-8;
        r.record(ok);
        if !ok && r.notes.len() < 10 {
            r.notes.push(format!(
                "scenario {s} ({}): {outside} OUTSIDE steps, worst relative residual {scenario_worst:.3e}",
                if s % 2 == 0 { "constant" } else { "sinusoidal" }
            ));
        }
    }
    r.metric("scenarios_with_outside", outside_scenarios as f64);
    r.metric("scenarios_over_residual_limit", residual_scenarios as f64);
    r.metric("worst_relative_residual", worst);
    Ok(r.finish())
}

/// Relative yaw change from moving parameter `l` from `bound` to `value`,
/// all other parameters at the box center.
pub fn yaw_sensitivity(sizes: &Sizes, vp: &VehicleParams, l: usize, bound: f64, value: f64) -> Result<f64, CommandError> {
    let pbox = make_uncertain_vehicle(vp)?.parameter_box().clone();
    let center = pbox.center();
    let yaw = |v: f64| -> Result<Vec<f64>, CommandError> {
        let trajectories = UNCERTAIN_PARAMETERS
            .iter()
            .enumerate()
            .map(|(k, name)| {
                let value = if k == l { v } else { center.values()[k] };
                (name.to_string(), ParameterTrajectory::Constant { value })
            })
            .collect();
        let sc = Scenario {
            plant: PlantSchedule::Parameters { trajectories },
            ..base_scenario(sizes, vp, 0.5)
        };
        Ok(simulate_plant(&sc)?.iter().map(|x| x[mmas_core::sim::YAW_CHANNEL]).collect())
    };
    let at_bound = yaw(bound)?;
    let moved = yaw(value)?;
    let diff: f64 = at_bound.iter().zip(&moved).map(|(a, b)| (a - b).powi(2)).sum();
    let base: f64 = at_bound.iter().map(|a| a * a).sum();
    Ok((diff / base.max(f64::MIN_POSITIVE)).sqrt())
}

/// Minimum relative yaw change at a 10% excursion for a direction to count
/// as observable through the yaw channel.
pub const YAW_OBSERVABLE: f64 = 0.01;

fn inclusion_backward(sizes: &Sizes, seed: u64, mut rng: ChaCha8Rng) -> Result<SuiteResult, CommandError> {
    let mut r = SuiteResult::new("inclusion_backward");
    let (vp, set) = scenario_models(50.0 / 3.6, seed)?;
    let pbox = make_uncertain_vehicle(&vp)?.parameter_box().clone();
    let mut directions = Vec::new();
    for (l, name) in UNCERTAIN_PARAMETERS.iter().enumerate() {
        for up in [true, false] {
            let width = pbox.upper()[l] - pbox.lower()[l];
            let (bound, value) = if up {
                (pbox.upper()[l], pbox.upper()[l] + 0.1 * width)
            } else {
                (pbox.lower()[l], pbox.lower()[l] - 0.1 * width)
            };
            let sens = yaw_sensitivity(sizes, &vp, l, bound, value)?;
            let label = format!("{name}_{}", if up { "up" } else { "down" });
            r.metric(&format!("yaw_sensitivity_{label}"), sens);
            if sens >= YAW_OBSERVABLE {
                directions.push((l, up));
            } else {
                r.notes.push(format!("{label} excluded: relative yaw change {sens:.2e} at 10% beyond the box"));
            }
        }
    }
    if directions.is_empty() {
        r.passed = false;
        r.notes.push("no yaw-observable excursion direction".to_string());
        return Ok(r);
    }
    let onset = 1.0;
    let mut fired = 0;
    let mut early = 0;
    for s in 0..sizes.backward_scenarios {
        let (l, up) = directions[s % directions.len()];
        let fraction = rng.gen_range(0.1..0.3);
        let width = pbox.upper()[l] - pbox.lower()[l];
        let value = if up {
            pbox.upper()[l] + fraction * width
        } else {
            pbox.lower()[l] - fraction * width
        };
        let mut trajectories = BTreeMap::new();
        for (k, name) in UNCERTAIN_PARAMETERS.iter().enumerate() {
            let base = rng.gen_range(pbox.lower()[k]..=pbox.upper()[k]);
            let traj = if k == l {
                ParameterTrajectory::Piecewise {
                    times: vec![0.0, onset],
                    values: vec![base, value],
                }
            } else {
                ParameterTrajectory::Constant { value: base }
            };
            trajectories.insert(name.to_string(), traj);
        }
        let sc = Scenario {
            plant: PlantSchedule::Parameters { trajectories },
            ..base_scenario(sizes, &vp, rng.gen_range(0.3..1.0))
        };
        let trace = match simulate_scenario(&sc, &set) {
            Ok(t) => t,
            Err(SimulationError::Diverged { partial, .. }) => partial,
            Err(SimulationError::Setup(e)) => return Err(e.into()),
        };
        let during = trace
            .samples
            .iter()
            .filter(|x| x.t >= onset && x.inclusion == InclusionStatus::Outside)
            .count();
        let before = trace
            .samples
            .iter()
            .filter(|x| x.t < onset && x.inclusion == InclusionStatus::Outside)
            .count();
        early += usize::from(before > 0);
        r.checked += 1;
        if during > 0 {
            fired += 1;
        } else {
            r.notes.push(format!(
                "scenario {s}: no OUTSIDE verdict with {} at {:.0}% {} the box",
                UNCERTAIN_PARAMETERS[l],
                100.0 * fraction,
                if up { "above" } else { "below" }
            ));
        }
    }
    let rate = if r.checked == 0 { 0.0 } else { fired as f64 / r.checked as f64 };
    r.failed = r.checked - fired;
    r.metric("fired_fraction", rate);
    r.metric("scenarios_with_outside_before_excursion", early as f64);
    r.passed = rate >= 0.95;
    Ok(r)
}

fn weight_recovery(sizes: &Sizes, seed: u64) -> Result<SuiteResult, CommandError> {
    let mut r = SuiteResult::new("weight_recovery");
    let (vp, set) = scenario_models(50.0 / 3.6, seed)?;
    let two = VertexModelSet::from_systems(
        set.corners[..2].to_vec(),
        set.systems[..2].to_vec(),
        mmas_core::canonical::DEFAULT_CONTROLLABILITY_TOL,
    )?;
    let target = [0.3, 0.7];
    let sc = Scenario {
        speed: vp.u,
        horizon: sizes.recovery_horizon,
        vehicle: vp.clone(),
        plant: PlantSchedule::Mixture {
            weights: target.to_vec(),
        },
        ..Scenario::default()
    };
    let trace = simulate_scenario(&sc, &two).map_err(|e| CommandError::Failed(e.to_string()))?;
    let worst_weight = trace
        .samples
        .iter()
        .filter(|s| s.t >= 1.0)
        .map(|s| {
            s.weights
                .values()
                .iter()
                .zip(&target)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    r.record(worst_weight <= 1e-3);
    r.metric("max_weight_error_after_1s", worst_weight);
    for (k, name) in ["beta", "r", "phi", "phidot"].iter().enumerate() {
        let rel = trace.estimate_rmse(k) / trace.plant_rms(k).max(f64::MIN_POSITIVE);
        r.record(rel <= 1e-6);
        r.metric(&format!("relative_rmse_{name}"), rel);
    }
    let last = trace.samples.last().expect("non-empty trace");
    r.metric("final_w_1", last.weights.values()[0]);
    if r.failed > 0 {
        r.notes.push(
            "a plant with averaged matrices does not produce the averaged model trajectories, \
             so the observed-channel weights differ from the matrix weights"
                .to_string(),
        );
    }
    Ok(r.finish())
}

/// Max-norm error ratio of steps `h` and `h/2` against `h/4`.
pub fn rk4_ratio(speed: f64, h: f64) -> Result<f64, CommandError> {
    let sc = Scenario {
        speed,
        horizon: 2.0,
        steering: SteeringProfile::Sine {
            amplitude_deg: 2.0,
            frequency_hz: 0.5,
        },
        plant: PlantSchedule::Parameters {
            trajectories: [(
                "C_af".to_string(),
                ParameterTrajectory::Sinusoid {
                    mean: 80400.0,
                    amplitude: 15000.0,
                    frequency_hz: 0.7,
                    phase: 0.0,
                },
            )]
            .into_iter()
            .collect(),
        },
        ..Scenario::default()
    };
    let end = |step: f64| -> Result<DVector<f64>, CommandError> {
        let xs = simulate_plant(&Scenario { step, ..sc.clone() })?;
        Ok(xs.last().expect("non-empty").clone())
    };
    let reference = end(h / 4.0)?;
    let coarse = (end(h)? - &reference).amax();
    let fine = (end(h / 2.0)? - &reference).amax();
    Ok(coarse / fine)
}

fn rk4_order() -> Result<SuiteResult, CommandError> {
    let mut r = SuiteResult::new("rk4_order");
    for (label, kmh) in [("50kmh", 50.0), ("100kmh", 100.0)] {
        let ratio = rk4_ratio(kmh / 3.6, 0.02)?;
        r.record((8.0..=32.0).contains(&ratio));
        r.metric(&format!("ratio_{label}"), ratio);
    }
    Ok(r.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use mmas_core::charpoly_bounds::all_coeff_bounds;

    #[test]
    fn smoke_suites_that_must_pass() {
        let sizes = Sizes::for_mode(VerifyMode::Smoke);
        for name in [
            "charpoly_soundness",
            "point_exactness",
            "canonical_round_trip",
            "transform_sum_identity",
            "transform_negative_control",
            "weights_examples",
            "vehicle_model_count",
            "rk4_order",
        ] {
            let r = run_suite(name, &sizes, ProductRule::Interval, 0).unwrap();
            assert!(r.passed, "{r:?}");
        }
    }

    #[test]
    fn corrupted_control_fails() {
        let r = run_suite("negative_control_corrupted", &Sizes::for_mode(VerifyMode::Smoke), ProductRule::Interval, 0)
            .unwrap();
        assert!(!r.passed);
    }

    #[test]
    fn literal_rule_is_caught() {
        let r = run_suite("charpoly_soundness", &Sizes::for_mode(VerifyMode::Smoke), ProductRule::Literal, 0).unwrap();
        assert!(!r.passed);
    }

    #[test]
    fn unknown_suite() {
        assert!(run_suite("nope", &Sizes::for_mode(VerifyMode::Smoke), ProductRule::Interval, 0).is_err());
    }

    #[test]
    fn instances_are_reproducible() {
        let a = transform_instances(5, 3);
        let b = transform_instances(5, 3);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.weights, y.weights);
            assert_eq!(x.systems, y.systems);
        }
    }

    #[test]
    fn point_bounds_are_tight() {
        let a = nalgebra::dmatrix![1.0, 2.0; 3.0, 4.0];
        let b = all_coeff_bounds(&MatrixInterval::point(&a).unwrap()).unwrap();
        assert_eq!(b.lb, vec![-2.0, -5.0]);
        assert_eq!(b.ub, vec![-2.0, -5.0]);
    }
}
