use std::fmt::Write as _;

use mmas_core::charpoly_bounds::ProductRule;
use serde::Serialize;

use crate::config::{VerifyConfig, VerifyMode};
use crate::suites::{run_suite, Sizes, SuiteResult, SUITE_NAMES};
use crate::CommandError;

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub mode: VerifyMode,
    pub seed: u64,
    pub rule: ProductRule,
    pub sizes: Sizes,
    pub suites: Vec<SuiteResult>,
    pub passed: bool,
}

pub fn suite_list(cfg: &VerifyConfig) -> Vec<String> {
    let mut names: Vec<String> = if cfg.suites.is_empty() {
        SUITE_NAMES.iter().map(|s| s.to_string()).collect()
    } else {
        cfg.suites.clone()
    };
    if cfg.negative_control && !names.iter().any(|n| n == "negative_control_corrupted") {
        names.push("negative_control_corrupted".to_string());
    }
    names
}

pub fn run(cfg: &VerifyConfig, seed: u64) -> Result<VerifyReport, CommandError> {
    let sizes = Sizes::for_mode(cfg.mode);
    let names = suite_list(cfg);
    if let Some(bad) = names
        .iter()
        .find(|n| !SUITE_NAMES.contains(&n.as_str()) && n.as_str() != "negative_control_corrupted")
    {
        return Err(CommandError::Config(format!(
            "unknown suite {bad:?}; known suites: {}",
            SUITE_NAMES.join(", ")
        )));
    }
    let suites = names
        .iter()
        .map(|n| run_suite(n, &sizes, cfg.rule, seed))
        .collect::<Result<Vec<_>, _>>()?;
    let passed = suites.iter().all(|s| s.passed);
    Ok(VerifyReport {
        mode: cfg.mode,
        seed,
        rule: cfg.rule,
        sizes,
        suites,
        passed,
    })
}

pub fn render(r: &VerifyReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "verify: mode {:?}, seed {}, product rule {:?}", r.mode, r.seed, r.rule);
    for s in &r.suites {
        let _ = writeln!(
            out,
            "{} {} (checked {}, failed {})",
            if s.passed { "PASS" } else { "FAIL" },
            s.name,
            s.checked,
            s.failed
        );
        for (k, v) in &s.metrics {
            let _ = writeln!(out, "    {k} = {v:.6e}");
        }
        for n in &s.notes {
            let _ = writeln!(out, "    note: {n}");
        }
    }
    let failed: Vec<&str> = r.suites.iter().filter(|s| !s.passed).map(|s| s.name.as_str()).collect();
    if failed.is_empty() {
        let _ = writeln!(out, "result: all {} suites passed", r.suites.len());
    } else {
        let _ = writeln!(out, "result: {} of {} suites failed: {}", failed.len(), r.suites.len(), failed.join(", "));
    }
    out
}
