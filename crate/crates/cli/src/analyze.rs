use std::collections::BTreeMap;
use std::fmt::Write as _;

use mmas_core::model::{ParameterVector, ParameterizedSystem};
use mmas_core::sim::{simulate_scenario, ParameterTrajectory, PlantSchedule, Scenario, SimulationError};
use mmas_core::tying::{
    check_coordination, extremal_corners, scan_monotonicity, select_vertex_models, CoordinationVerdict, Direction,
    MonotonicityReport, ScanOptions, VertexModelSet, WitnessStep,
};
use mmas_core::vehicle::{VehicleParams, UNCERTAIN_PARAMETERS};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{AnalyzeConfig, CoverageSettings, ScanSettings};
use crate::families::Family;
use crate::CommandError;

#[derive(Debug, Clone, Serialize)]
pub struct ParameterRange {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EntryDirections {
    pub row: usize,
    pub col: usize,
    pub directions: Vec<Direction>,
}

#[derive(Debug, Clone, Serialize)]
pub struct NonMonotoneFinding {
    pub row: usize,
    pub col: usize,
    pub param: String,
    pub rising: WitnessStep,
    pub falling: WitnessStep,
}

#[derive(Debug, Clone, Serialize)]
pub struct TemplateRow {
    pub row: usize,
    pub col: usize,
    pub argmin: String,
    pub argmax: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Selection {
    pub corners: Vec<String>,
    pub values: Vec<Vec<f64>>,
    pub model_count: usize,
    pub corner_count: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoverageReport {
    pub samples: usize,
    pub covered: usize,
    pub fraction: f64,
    pub tol: f64,
    pub horizon: f64,
    pub step: f64,
    /// Largest `||E w|| / ||E||` seen in any sample.
    pub worst_residual: f64,
    /// Samples whose simulation diverged; counted as not covered.
    pub diverged: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoordinationRow {
    pub param: String,
    pub first: [usize; 2],
    pub second: [usize; 2],
    pub verdict: Option<CoordinationVerdict>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalyzeReport {
    pub family: String,
    pub n: usize,
    pub parameters: Vec<ParameterRange>,
    pub scan: ScanOptions,
    pub directions: Vec<EntryDirections>,
    pub all_monotone: bool,
    pub non_monotone: Vec<NonMonotoneFinding>,
    pub templates: Vec<TemplateRow>,
    pub selection: Option<Selection>,
    pub selection_error: Option<String>,
    pub target_models: usize,
    pub max_models: usize,
    pub discrepancy: Option<String>,
    pub coverage: Option<CoverageReport>,
    pub coordination: Vec<CoordinationRow>,
    pub acceptable: bool,
}

pub fn scan_options(s: &ScanSettings, seed: u64) -> ScanOptions {
    ScanOptions {
        grid: s.grid,
        cross_sections: s.cross_sections,
        tol: s.tol,
        seed,
    }
}

/// Monotonicity scan and greedy vertex selection for a family.
pub fn select_models(
    ps: &ParameterizedSystem,
    scan: &ScanOptions,
    controllability_tol: f64,
) -> Result<(MonotonicityReport, VertexModelSet), CommandError> {
    let report = scan_monotonicity(ps, scan)?;
    let templates = extremal_corners(&report)?;
    let set = select_vertex_models(ps, &templates, controllability_tol)?;
    Ok((report, set))
}

pub fn run(cfg: &AnalyzeConfig, seed: u64) -> Result<AnalyzeReport, CommandError> {
    let ps = cfg.family.build(&cfg.vehicle)?;
    let pbox = ps.parameter_box().clone();
    let names = pbox.names().to_vec();
    let scan = scan_options(&cfg.scan, seed);
    let report = scan_monotonicity(&ps, &scan)?;
    let n = ps.n();

    let directions = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| EntryDirections {
            row: i,
            col: j,
            directions: (0..ps.k()).map(|l| report.direction(l, i, j)).collect(),
        })
        .collect();
    let non_monotone: Vec<NonMonotoneFinding> = report
        .non_monotone()
        .map(|(&(l, i, j), w)| NonMonotoneFinding {
            row: i,
            col: j,
            param: names[l].clone(),
            rising: w.rising.clone(),
            falling: w.falling.clone(),
        })
        .collect();

    let mut templates = Vec::new();
    let mut selection = None;
    let mut selection_error = None;
    let mut set = None;
    match extremal_corners(&report) {
        Ok(t) => {
            templates = t
                .iter()
                .map(|e| TemplateRow {
                    row: e.row,
                    col: e.col,
                    argmin: e.argmin.to_string(),
                    argmax: e.argmax.to_string(),
                })
                .collect();
            match select_vertex_models(&ps, &t, cfg.controllability_tol) {
                Ok(s) => {
                    selection = Some(Selection {
                        corners: s.corners.iter().map(|c| c.to_string()).collect(),
                        values: s
                            .corners
                            .iter()
                            .map(|c| pbox.corner_vector(c).map(|v| v.values().to_vec()))
                            .collect::<mmas_core::Result<_>>()?,
                        model_count: s.len(),
                        corner_count: 1u64 << ps.k(),
                    });
                    set = Some(s);
                }
                Err(e) => selection_error = Some(e.to_string()),
            }
        }
        Err(e) => selection_error = Some(e.to_string()),
    }

    let discrepancy = selection.as_ref().and_then(|s| {
        (cfg.family == Family::Vehicle && s.model_count != cfg.target_models).then(|| {
            format!(
                "selected {} models where {} were claimed; {}",
                s.model_count,
                cfg.target_models,
                conflict_note(&templates)
            )
        })
    });

    let coverage = match (&set, cfg.family) {
        (Some(s), Family::Vehicle) if cfg.coverage.samples > 0 && s.len() >= 2 => {
            Some(coverage(&ps, s, &cfg.vehicle, &cfg.coverage, seed)?)
        }
        _ => None,
    };

    let requests = cfg.coordination.clone().unwrap_or_else(|| cfg.family.default_coordination());
    let center = pbox.center();
    let coordination = requests
        .iter()
        .map(|r| {
            let result = names
                .iter()
                .position(|p| *p == r.param)
                .ok_or_else(|| format!("unknown parameter {:?}", r.param))
                .and_then(|l| {
                    check_coordination(
                        &ps,
                        l,
                        (r.first[0], r.first[1]),
                        (r.second[0], r.second[1]),
                        &center,
                        r.grid,
                        r.tol,
                    )
                    .map_err(|e| e.to_string())
                });
            let (verdict, error) = match result {
                Ok(v) => (Some(v), None),
                Err(e) => (None, Some(e)),
            };
            CoordinationRow {
                param: r.param.clone(),
                first: r.first,
                second: r.second,
                verdict,
                error,
            }
        })
        .collect();

    let all_monotone = report.all_monotone();
    let acceptable = all_monotone && selection.as_ref().is_some_and(|s| s.model_count <= cfg.max_models);
    Ok(AnalyzeReport {
        family: cfg.family.name().to_string(),
        n,
        parameters: names
            .iter()
            .enumerate()
            .map(|(l, name)| ParameterRange {
                name: name.clone(),
                lower: pbox.lower()[l],
                upper: pbox.upper()[l],
            })
            .collect(),
        scan,
        directions,
        all_monotone,
        non_monotone,
        templates,
        selection,
        selection_error,
        target_models: cfg.target_models,
        max_models: cfg.max_models,
        discrepancy,
        coverage,
        coordination,
        acceptable,
    })
}

/// Names the pairs of entries whose extremes pull shared parameters to
/// opposite levels.
fn conflict_note(templates: &[TemplateRow]) -> String {
    let mut conflicts = Vec::new();
    for (a, ta) in templates.iter().enumerate() {
        for tb in &templates[a + 1..] {
            let clash = |x: &str, y: &str| x.chars().zip(y.chars()).any(|(p, q)| p != '*' && q != '*' && p != q);
            let all_clash = [&ta.argmin, &ta.argmax]
                .iter()
                .all(|x| [&tb.argmin, &tb.argmax].iter().all(|y| clash(x, y)));
            if all_clash {
                conflicts.push(format!(
                    "a[{}][{}] ({} / {}) vs a[{}][{}] ({} / {})",
                    ta.row, ta.col, ta.argmin, ta.argmax, tb.row, tb.col, tb.argmin, tb.argmax
                ));
            }
        }
    }
    if conflicts.is_empty() {
        "no pairwise template conflict found".to_string()
    } else {
        format!("extremes that no shared corner can satisfy: {}", conflicts.join("; "))
    }
}

/// Fraction of sampled constant in-box plants whose observed-channel weight
/// residual stays within `tol` relative at every step.
pub fn coverage(
    ps: &ParameterizedSystem,
    set: &VertexModelSet,
    vehicle: &VehicleParams,
    s: &CoverageSettings,
    seed: u64,
) -> Result<CoverageReport, CommandError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x636f_7665_7261_6765);
    let mut covered = 0;
    let mut diverged = 0;
    let mut worst = 0.0f64;
    for _ in 0..s.samples {
        let m: ParameterVector = ps.parameter_box().sample(&mut rng);
        let trajectories: BTreeMap<String, ParameterTrajectory> = UNCERTAIN_PARAMETERS
            .iter()
            .zip(m.values())
            .map(|(name, v)| (name.to_string(), ParameterTrajectory::Constant { value: *v }))
            .collect();
        let sc = Scenario {
            speed: vehicle.u,
            horizon: s.horizon,
            step: s.step,
            plant: PlantSchedule::Parameters { trajectories },
            vehicle: vehicle.clone(),
            ..Scenario::default()
        };
        match simulate_scenario(&sc, set) {
            Ok(trace) => {
                let mut ok = true;
                for smp in &trace.samples {
                    if smp.error_norm > 0.0 {
                        let rel = smp.residual / smp.error_norm;
                        worst = worst.max(rel);
                        ok &= rel <= s.tol;
                    }
                }
                if ok {
                    covered += 1;
                }
            }
            Err(SimulationError::Diverged { .. }) => diverged += 1,
            Err(SimulationError::Setup(e)) => return Err(e.into()),
        }
    }
    Ok(CoverageReport {
        samples: s.samples,
        covered,
        fraction: if s.samples == 0 { 0.0 } else { covered as f64 / s.samples as f64 },
        tol: s.tol,
        horizon: s.horizon,
        step: s.step,
        worst_residual: worst,
        diverged,
    })
}

fn symbol(d: Direction) -> char {
    match d {
        Direction::Increasing => '+',
        Direction::Decreasing => '-',
        Direction::Constant => '0',
        Direction::NonMonotone => '~',
    }
}

pub fn render(r: &AnalyzeReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "family: {}", r.family);
    let _ = writeln!(out, "state dimension: {}", r.n);
    let _ = writeln!(out, "parameters:");
    for p in &r.parameters {
        let _ = writeln!(out, "  {:<10} [{:.6e}, {:.6e}]", p.name, p.lower, p.upper);
    }
    let _ = writeln!(
        out,
        "scan: grid {} cross-sections {} tol {:.1e} seed {}",
        r.scan.grid, r.scan.cross_sections, r.scan.tol, r.scan.seed
    );
    let _ = writeln!(out);
    let _ = writeln!(out, "directions (+ increasing, - decreasing, 0 constant, ~ non-monotone):");
    let header: Vec<String> = r.parameters.iter().map(|p| format!("{:>8}", p.name)).collect();
    let _ = writeln!(out, "  entry   {}", header.join(""));
    for e in &r.directions {
        let cells: Vec<String> = e.directions.iter().map(|d| format!("{:>8}", symbol(*d))).collect();
        let _ = writeln!(out, "  a[{}][{}] {}", e.row, e.col, cells.join(""));
    }
    let _ = writeln!(out, "all entries monotone: {}", if r.all_monotone { "yes" } else { "no" });
    for f in &r.non_monotone {
        let _ = writeln!(
            out,
            "NON_MONOTONE a[{}][{}] in {}: rises {:.6} -> {:.6} at {:?}, falls {:.6} -> {:.6} at {:?}",
            f.row,
            f.col,
            f.param,
            f.rising.from,
            f.rising.to,
            f.rising.base.values(),
            f.falling.from,
            f.falling.to,
            f.falling.base.values()
        );
    }
    if !r.templates.is_empty() {
        let _ = writeln!(out);
        let _ = writeln!(out, "extremal templates (argmin / argmax, * = either bound):");
        for t in &r.templates {
            let _ = writeln!(out, "  a[{}][{}] {} / {}", t.row, t.col, t.argmin, t.argmax);
        }
    }
    let _ = writeln!(out);
    match &r.selection {
        Some(s) => {
            let _ = writeln!(out, "selected models: {} of {} corners", s.model_count, s.corner_count);
            for (c, v) in s.corners.iter().zip(&s.values) {
                let vals: Vec<String> = v.iter().map(|x| format!("{x:.6e}")).collect();
                let _ = writeln!(out, "  {c}  [{}]", vals.join(", "));
            }
            let _ = writeln!(out, "target model count: {}", r.target_models);
            let _ = writeln!(
                out,
                "model count within limit {}: {}",
                r.max_models,
                if s.model_count <= r.max_models { "yes" } else { "no" }
            );
        }
        None => {
            let _ = writeln!(
                out,
                "no model selection: {}",
                r.selection_error.as_deref().unwrap_or("unavailable")
            );
        }
    }
    if let Some(d) = &r.discrepancy {
        let _ = writeln!(out, "DISCREPANCY: {d}");
    }
    if let Some(c) = &r.coverage {
        let _ = writeln!(
            out,
            "hull coverage: {}/{} sampled in-box plants ({:.4}) with weight residual <= {:.1e} relative over {} s at {} s steps; worst {:.3e}; diverged {}",
            c.covered, c.samples, c.fraction, c.tol, c.horizon, c.step, c.worst_residual, c.diverged
        );
    }
    if !r.coordination.is_empty() {
        let _ = writeln!(out);
        let _ = writeln!(out, "coordination (affine / functional / symmetry / critical points / periodic):");
        for c in &r.coordination {
            let pair = format!(
                "a[{}][{}] vs a[{}][{}] over {}",
                c.first[0], c.first[1], c.second[0], c.second[1], c.param
            );
            match (&c.verdict, &c.error) {
                (Some(v), _) => {
                    let _ = writeln!(
                        out,
                        "  {pair}: {:?} / {:?} / {:?} / {:?} / {:?}",
                        v.affine.status, v.functional.status, v.symmetry.status, v.critical_points.status, v.periodic.status
                    );
                }
                (None, Some(e)) => {
                    let _ = writeln!(out, "  {pair}: error: {e}");
                }
                (None, None) => {}
            }
        }
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "result: {}", if r.acceptable { "OK" } else { "NOT ACCEPTABLE" });
    out
}
