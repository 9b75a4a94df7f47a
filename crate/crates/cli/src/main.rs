use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mmas_cli::config::{ConfigFile, VerifyMode};
use mmas_cli::families::Family;
use mmas_cli::{analyze, bounds, simulate, verify, CommandError};
use mmas_core::charpoly_bounds::ProductRule;
use mmas_core::vehicle::SignConvention;
use serde::Serialize;

/// Multiple-model adaptive estimation toolkit.
#[derive(Debug, Parser)]
#[command(name = "mmas", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON configuration file; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for reports and artifacts.
    #[arg(long, default_value = "mmas-out")]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monotonicity scan, tying analysis and model selection.
    Analyze {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        family: Option<Family>,
        /// Flip the sign of the cornering-stiffness terms.
        #[arg(long)]
        standard_sign: bool,
        /// Monte Carlo samples for the coverage check.
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Characteristic-polynomial coefficient bounds with a containment check.
    Bounds {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        family: Option<Family>,
        #[arg(long)]
        standard_sign: bool,
        /// Use the literal endpoint-product rule instead of interval products.
        #[arg(long)]
        literal_bounds: bool,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Closed-loop estimation run with CSV and SVG output.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Property suites with a PASS/FAIL report.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Reduced problem sizes.
        #[arg(long)]
        smoke: bool,
        /// Add a deliberately corrupted suite whose failure must be reported.
        #[arg(long)]
        negative_control: bool,
        #[arg(long)]
        literal_bounds: bool,
        /// Run only the named suites.
        #[arg(long = "suite")]
        suites: Vec<String>,
    },
}

fn load(common: &Common) -> Result<ConfigFile, CommandError> {
    match &common.config {
        Some(p) => Ok(ConfigFile::load(p)?),
        None => Ok(ConfigFile::defaults()),
    }
}

fn write_reports<T: Serialize>(out: &Path, text: &str, report: &T) -> Result<(), CommandError> {
    fs::write(out.join("report.txt"), text)?;
    fs::write(out.join("report.json"), serde_json::to_string_pretty(report)? + "\n")?;
    print!("{text}");
    Ok(())
}

fn prepare(common: &Common) -> Result<ConfigFile, CommandError> {
    let cfg = load(common)?;
    fs::create_dir_all(&common.out)?;
    Ok(cfg)
}

fn sign(standard: bool, current: SignConvention) -> SignConvention {
    if standard {
        SignConvention::Standard
    } else {
        current
    }
}

fn run(cli: Cli) -> Result<bool, CommandError> {
    match cli.command {
        Command::Analyze {
            common,
            family,
            standard_sign,
            samples,
        } => {
            let mut cfg = prepare(&common)?.analyze;
            if let Some(f) = family {
                cfg.family = f;
            }
            cfg.vehicle.sign = sign(standard_sign, cfg.vehicle.sign);
            if let Some(s) = samples {
                cfg.coverage.samples = s;
            }
            let report = analyze::run(&cfg, common.seed)?;
            write_reports(&common.out, &analyze::render(&report), &report)?;
            Ok(report.acceptable)
        }
        Command::Bounds {
            common,
            family,
            standard_sign,
            literal_bounds,
            samples,
        } => {
            let mut cfg = prepare(&common)?.bounds;
            if let Some(f) = family {
                cfg.family = f;
            }
            cfg.vehicle.sign = sign(standard_sign, cfg.vehicle.sign);
            if literal_bounds {
                cfg.rule = ProductRule::Literal;
            }
            if let Some(s) = samples {
                cfg.samples = s;
            }
            let report = bounds::run(&cfg, common.seed)?;
            write_reports(&common.out, &bounds::render(&report), &report)?;
            Ok(report.violating_samples == 0)
        }
        Command::Simulate { common } => {
            let cfg = prepare(&common)?.simulate;
            let summary = simulate::run(&cfg, common.seed, &common.out)?;
            print!("{}", simulate::render(&summary));
            Ok(summary.diverged_at.is_none())
        }
        Command::Verify {
            common,
            smoke,
            negative_control,
            literal_bounds,
            suites,
        } => {
            let mut cfg = prepare(&common)?.verify;
            if smoke {
                cfg.mode = VerifyMode::Smoke;
            }
            cfg.negative_control |= negative_control;
            if literal_bounds {
                cfg.rule = ProductRule::Literal;
            }
            if !suites.is_empty() {
                cfg.suites = suites;
            }
            let report = verify::run(&cfg, common.seed)?;
            write_reports(&common.out, &verify::render(&report), &report)?;
            Ok(report.passed)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
