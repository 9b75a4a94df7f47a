//! JSON run configuration. Every command reads its own section; absent
//! sections take their defaults.

use std::path::Path;

use mmas_core::charpoly_bounds::ProductRule;
use mmas_core::sim::Scenario;
use mmas_core::vehicle::VehicleParams;
use serde::{Deserialize, Serialize};

use crate::families::Family;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: unsupported schema version {found}, expected {SCHEMA_VERSION}")]
    Schema { path: String, found: u32 },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub schema: u32,
    #[serde(default)]
    pub analyze: AnalyzeConfig,
    #[serde(default)]
    pub bounds: BoundsConfig,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
}

impl ConfigFile {
    pub fn defaults() -> Self {
        ConfigFile {
            schema: SCHEMA_VERSION,
            ..Default::default()
        }
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let shown = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: shown.clone(),
            source,
        })?;
        Self::parse(&text, &shown)
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let cfg: ConfigFile = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_string(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        if cfg.schema != SCHEMA_VERSION {
            return Err(ConfigError::Schema {
                path: origin.to_string(),
                found: cfg.schema,
            });
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSettings {
    pub grid: usize,
    pub cross_sections: usize,
    pub tol: f64,
}

impl Default for ScanSettings {
    fn default() -> Self {
        ScanSettings {
            grid: 9,
            cross_sections: 8,
            tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoverageSettings {
    /// In-box plants sampled; 0 skips the statistic.
    pub samples: usize,
    pub horizon: f64,
    pub step: f64,
    /// Relative weight-residual threshold on the observed channel.
    pub tol: f64,
}

impl Default for CoverageSettings {
    fn default() -> Self {
        CoverageSettings {
            samples: 10_000,
            horizon: 1.0,
            step: 0.01,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoordinationRequest {
    /// Parameter name as listed in the family's box.
    pub param: String,
    pub first: [usize; 2],
    pub second: [usize; 2],
    #[serde(default = "default_coordination_grid")]
    pub grid: usize,
    #[serde(default = "default_coordination_tol")]
    pub tol: f64,
}

fn default_coordination_grid() -> usize {
    21
}

fn default_coordination_tol() -> f64 {
    1e-9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeConfig {
    pub family: Family,
    pub vehicle: VehicleParams,
    pub scan: ScanSettings,
    pub controllability_tol: f64,
    /// Model count claimed for the vehicle box; reported next to the measured count.
    pub target_models: usize,
    /// Upper limit on the selected model count for the run to count as acceptable.
    pub max_models: usize,
    pub coverage: CoverageSettings,
    /// `None` uses the family's built-in pairs.
    pub coordination: Option<Vec<CoordinationRequest>>,
}

impl Default for AnalyzeConfig {
    fn default() -> Self {
        AnalyzeConfig {
            family: Family::Vehicle,
            vehicle: VehicleParams::default(),
            scan: ScanSettings::default(),
            controllability_tol: mmas_core::canonical::DEFAULT_CONTROLLABILITY_TOL,
            target_models: 2,
            max_models: 4,
            coverage: CoverageSettings::default(),
            coordination: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitInterval {
    pub lb: Vec<Vec<f64>>,
    pub ub: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsConfig {
    pub family: Family,
    pub vehicle: VehicleParams,
    /// Overrides the family when present.
    pub interval: Option<ExplicitInterval>,
    pub samples: usize,
    pub rule: ProductRule,
    /// Relative containment slack.
    pub tol: f64,
    pub scan: ScanSettings,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        BoundsConfig {
            family: Family::Vehicle,
            vehicle: VehicleParams::default(),
            interval: None,
            samples: 10_000,
            rule: ProductRule::Interval,
            tol: 1e-12,
            scan: ScanSettings::default(),
        }
    }
}

/// Which vertex models the simulation runs against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelChoice {
    /// The tying-based minimal set for the scenario's vehicle.
    #[default]
    Selected,
    /// Explicit corners written as `L`/`H` strings in box order.
    Corners { corners: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub scenario: Scenario,
    pub models: ModelChoice,
    pub scan: ScanSettings,
    /// Points per plotted line; traces are decimated to this size.
    pub plot_points: usize,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            scenario: Scenario::default(),
            models: ModelChoice::Selected,
            scan: ScanSettings::default(),
            plot_points: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum VerifyMode {
    Smoke,
    #[default]
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub mode: VerifyMode,
    /// Names of suites to run; empty runs all.
    pub suites: Vec<String>,
    /// Adds a suite whose similarity matrices are deliberately corrupted and
    /// whose failure is expected to be reported.
    pub negative_control: bool,
    /// Product rule used by the coefficient-bound suites.
    pub rule: ProductRule,
}
