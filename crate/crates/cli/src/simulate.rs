use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use mmas_core::model::{Corner, Level};
use mmas_core::sim::{simulate_scenario, SimulationError, SimulationTrace};
use mmas_core::tying::VertexModelSet;
use mmas_core::vehicle::make_uncertain_vehicle;
use mmas_core::weights::InclusionStatus;
use serde::Serialize;

use crate::analyze::{scan_options, select_models};
use crate::config::{ModelChoice, SimulateConfig};
use crate::svg::{line_chart, timeline, Series};
use crate::CommandError;

pub const STATE_NAMES: [&str; 4] = ["beta", "r", "phi", "phidot"];

#[derive(Debug, Clone, Serialize)]
pub struct SimulateSummary {
    pub corners: Vec<String>,
    pub samples: usize,
    pub inside: usize,
    pub outside: usize,
    pub boundary: usize,
    pub final_weights: Vec<f64>,
    /// Estimation RMSE of each state relative to the state's RMS.
    pub relative_rmse: Vec<f64>,
    pub diverged_at: Option<f64>,
}

fn parse_corner(s: &str, k: usize) -> Result<Corner, CommandError> {
    if s.len() != k {
        return Err(CommandError::Config(format!("corner {s:?} must have {k} letters")));
    }
    s.chars()
        .map(|c| match c {
            'L' | 'l' => Ok(Level::Low),
            'H' | 'h' => Ok(Level::High),
            other => Err(CommandError::Config(format!("corner {s:?} has invalid letter {other:?}"))),
        })
        .collect::<Result<Vec<_>, _>>()
        .map(Corner::new)
}

pub fn build_models(cfg: &SimulateConfig, seed: u64) -> Result<VertexModelSet, CommandError> {
    let vp = cfg.scenario.vehicle_at_speed();
    let ps = make_uncertain_vehicle(&vp).map_err(|e| CommandError::Config(e.to_string()))?;
    let tol = mmas_core::canonical::DEFAULT_CONTROLLABILITY_TOL;
    match &cfg.models {
        ModelChoice::Selected => Ok(select_models(&ps, &scan_options(&cfg.scan, seed), tol)?.1),
        ModelChoice::Corners { corners } => {
            let corners = corners
                .iter()
                .map(|c| parse_corner(c, ps.k()))
                .collect::<Result<Vec<_>, _>>()?;
            let systems = corners
                .iter()
                .map(|c| ps.eval_at_corner(c))
                .collect::<mmas_core::Result<Vec<_>>>()?;
            Ok(VertexModelSet::from_systems(corners, systems, tol)?)
        }
    }
}

pub fn csv_header(n_models: usize) -> String {
    let mut cols: Vec<String> = vec!["t".into()];
    cols.extend(STATE_NAMES.iter().map(|s| s.to_string()));
    cols.extend(STATE_NAMES.iter().map(|s| format!("{s}_hat")));
    cols.extend((1..=n_models).map(|i| format!("w_{i}")));
    cols.push("inclusion".into());
    cols.join(",")
}

pub fn write_csv(path: &Path, trace: &SimulationTrace, n_models: usize) -> std::io::Result<()> {
    let mut f = BufWriter::new(fs::File::create(path)?);
    writeln!(f, "{}", csv_header(n_models))?;
    for s in &trace.samples {
        let mut line = format!("{}", s.t);
        for v in s.plant.iter().chain(s.estimate.iter()).chain(s.weights.values()) {
            let _ = write!(line, ",{v}");
        }
        let _ = write!(line, ",{}", s.inclusion.as_str());
        writeln!(f, "{line}")?;
    }
    f.flush()
}

fn decimate(trace: &SimulationTrace, points: usize) -> Vec<usize> {
    let n = trace.len();
    if n == 0 {
        return vec![];
    }
    let stride = n.div_ceil(points.max(2)).max(1);
    let mut idx: Vec<usize> = (0..n).step_by(stride).collect();
    if *idx.last().unwrap() != n - 1 {
        idx.push(n - 1);
    }
    idx
}

pub fn write_plots(dir: &Path, trace: &SimulationTrace, n_models: usize, points: usize) -> std::io::Result<()> {
    let idx = decimate(trace, points);
    let ts: Vec<f64> = idx.iter().map(|&k| trace.samples[k].t).collect();
    for (c, name) in STATE_NAMES.iter().enumerate() {
        let truth: Vec<f64> = idx.iter().map(|&k| trace.samples[k].plant[c]).collect();
        let est: Vec<f64> = idx.iter().map(|&k| trace.samples[k].estimate[c]).collect();
        let svg = line_chart(
            &format!("{name}: plant and estimate"),
            "t (s)",
            &ts,
            &[
                Series {
                    label: name,
                    values: &truth,
                    dashed: false,
                },
                Series {
                    label: &format!("{name}_hat"),
                    values: &est,
                    dashed: true,
                },
            ],
        );
        fs::write(dir.join(format!("{name}.svg")), svg)?;
    }
    let weights: Vec<Vec<f64>> = (0..n_models)
        .map(|i| idx.iter().map(|&k| trace.samples[k].weights.values()[i]).collect())
        .collect();
    let labels: Vec<String> = (1..=n_models).map(|i| format!("w_{i}")).collect();
    let series: Vec<Series<'_>> = weights
        .iter()
        .zip(&labels)
        .map(|(v, l)| Series {
            label: l,
            values: v,
            dashed: false,
        })
        .collect();
    fs::write(dir.join("weights.svg"), line_chart("model weights", "t (s)", &ts, &series))?;
    let all_t: Vec<f64> = trace.samples.iter().map(|s| s.t).collect();
    let states: Vec<&str> = trace.samples.iter().map(|s| s.inclusion.as_str()).collect();
    fs::write(
        dir.join("inclusion.svg"),
        timeline(
            "inclusion verdict",
            &all_t,
            &states,
            &[("INSIDE", "#2ca02c"), ("BOUNDARY", "#bbbbbb"), ("OUTSIDE", "#d62728")],
        ),
    )
}

fn summarize(models: &VertexModelSet, trace: &SimulationTrace, diverged_at: Option<f64>) -> SimulateSummary {
    SimulateSummary {
        corners: models.corners.iter().map(|c| c.to_string()).collect(),
        samples: trace.len(),
        inside: trace.count(InclusionStatus::Inside),
        outside: trace.count(InclusionStatus::Outside),
        boundary: trace.count(InclusionStatus::Boundary),
        final_weights: trace
            .samples
            .last()
            .map(|s| s.weights.values().to_vec())
            .unwrap_or_default(),
        relative_rmse: (0..4)
            .map(|k| {
                let rms = trace.plant_rms(k);
                if rms > 0.0 {
                    trace.estimate_rmse(k) / rms
                } else {
                    trace.estimate_rmse(k)
                }
            })
            .collect(),
        diverged_at,
    }
}

pub fn render(s: &SimulateSummary) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "models: {}", s.corners.join(" "));
    let _ = writeln!(out, "samples: {}", s.samples);
    let _ = writeln!(
        out,
        "inclusion: INSIDE {} BOUNDARY {} OUTSIDE {}",
        s.inside, s.boundary, s.outside
    );
    let w: Vec<String> = s.final_weights.iter().map(|v| format!("{v:.6}")).collect();
    let _ = writeln!(out, "final weights: [{}]", w.join(", "));
    for (name, e) in STATE_NAMES.iter().zip(&s.relative_rmse) {
        let _ = writeln!(out, "relative RMSE {name}: {e:.3e}");
    }
    if let Some(t) = s.diverged_at {
        let _ = writeln!(out, "DIVERGED at t = {t:.6} s; trace truncated");
    }
    out
}

pub fn run(cfg: &SimulateConfig, seed: u64, out: &Path) -> Result<SimulateSummary, CommandError> {
    cfg.scenario.validate().map_err(|e| CommandError::Config(e.to_string()))?;
    let models = build_models(cfg, seed)?;
    let (trace, diverged_at) = match simulate_scenario(&cfg.scenario, &models) {
        Ok(t) => (t, None),
        Err(SimulationError::Diverged { t, partial }) => (partial, Some(t)),
        Err(SimulationError::Setup(e)) => return Err(CommandError::Config(e.to_string())),
    };
    write_csv(&out.join("trace.csv"), &trace, models.len())?;
    write_plots(out, &trace, models.len(), cfg.plot_points)?;
    let summary = summarize(&models, &trace, diverged_at);
    fs::write(out.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    fs::write(out.join("summary.txt"), render(&summary))?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use mmas_core::sim::{Scenario, SteeringProfile};

    #[test]
    fn header_layout() {
        assert_eq!(
            csv_header(2),
            "t,beta,r,phi,phidot,beta_hat,r_hat,phi_hat,phidot_hat,w_1,w_2,inclusion"
        );
    }

    #[test]
    fn corner_strings() {
        assert_eq!(parse_corner("LhH", 3).unwrap().to_string(), "LHH");
        assert!(parse_corner("LX", 2).is_err());
        assert!(parse_corner("L", 2).is_err());
    }

    #[test]
    fn writes_all_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = SimulateConfig {
            scenario: Scenario {
                horizon: 0.2,
                steering: SteeringProfile::Step {
                    amplitude_deg: 1.0,
                    at: 0.0,
                },
                ..Scenario::default()
            },
            ..SimulateConfig::default()
        };
        let s = run(&cfg, 0, dir.path()).unwrap();
        assert_eq!(s.samples, 201);
        let csv = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
        assert_eq!(csv.lines().count(), 202);
        assert!(csv.lines().next().unwrap().ends_with("w_4,inclusion"));
        for f in ["beta", "r", "phi", "phidot", "weights", "inclusion"] {
            assert!(dir.path().join(format!("{f}.svg")).exists(), "{f}");
        }
    }
}
