//! `coexist`: dark-space schedules, flashlight link budgets, interference
//! compliance runs and flashlight experiment plans from one scenario file.
//!
//! Precedence: command-line flag, then config field, then built-in default.
//! Exit codes: 0 success, 2 config or validation error, 3 computation error.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use coexist::geofence::PolicyKind;
use coexist::propagation::PathModel;
use num_complex::Complex64;

use crate::config::Loaded;
pub use crate::output::Provenance;
use crate::output::OutDir;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("computation error: {0}")]
    Compute(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Compute(_) => 3,
        }
    }
}

#[derive(Parser)]
#[command(name = "coexist", version, about = "EESS radiometer / mm-wave coexistence toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// scenario JSON file
    #[arg(long)]
    config: PathBuf,
    /// every output lands here
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// overrides the config seed
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Dark-space schedules and availability for every transmitter
    Darkspaces {
        #[command(flatten)]
        common: Common,
        /// pixel | scanline
        #[arg(long)]
        policy: Option<PolicyKind>,
    },
    /// Flashlight link budget at named geometries
    Linkbudget {
        #[command(flatten)]
        common: Common,
        /// nadir, edge, nadir-geometry, edge-geometry or a config geometry
        #[arg(long)]
        geometry: Option<String>,
    },
    /// Monte Carlo interference grid and compliance report
    ItuSim {
        #[command(flatten)]
        common: Common,
        /// los | two-ray
        #[arg(long)]
        model: Option<PathModel>,
        /// reflection coefficient, `re` or `re,im`
        #[arg(long, value_parser = parse_gamma, allow_hyphen_values = true)]
        gamma: Option<Complex64>,
        /// dBm/MHz
        #[arg(long, allow_hyphen_values = true)]
        threshold: Option<f64>,
        #[arg(long)]
        quantile: Option<f64>,
    },
    /// Flashlight pulse plan, exclusions and safety audit
    Experiment {
        #[command(flatten)]
        common: Common,
    },
    /// Parse TLE files and propagate each set to its epoch
    ValidateTle {
        /// take the TLE files from this config's satellites
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        files: Vec<PathBuf>,
    },
}

fn parse_gamma(s: &str) -> Result<Complex64, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |p: &str| p.parse::<f64>().map_err(|e| format!("{p:?}: {e}"));
    match parts.as_slice() {
        [re] => Ok(Complex64::new(num(re)?, 0.0)),
        [re, im] => Ok(Complex64::new(num(re)?, num(im)?)),
        _ => Err("expected `re` or `re,im`".into()),
    }
}

fn provenance(command: &str, cfg: Option<&Loaded>, seed: u64, overrides: Vec<(String, String)>) -> Provenance {
    Provenance {
        tool: "coexist",
        version: env!("CARGO_PKG_VERSION"),
        command: command.to_string(),
        config_sha256: cfg.map(|c| c.sha256.clone()).unwrap_or_default(),
        seed,
        overrides,
    }
}

fn flag<T: ToString>(name: &str, v: &Option<T>) -> Option<(String, String)> {
    v.as_ref().map(|v| (format!("--{name}"), v.to_string()))
}

fn run(cli: Cli) -> Result<PathBuf, CliError> {
    match cli.command {
        Command::Darkspaces { common, policy } => {
            let (cfg, seed, mut out) = open(&common)?;
            let overrides = [flag("seed", &common.seed), flag("policy", &policy)].into_iter().flatten().collect();
            let prov = provenance("darkspaces", Some(&cfg), seed, overrides);
            commands::darkspaces(&cfg, policy, &prov, &mut out)?;
            out.finish(&prov)
        }
        Command::Linkbudget { common, geometry } => {
            let (cfg, seed, mut out) = open(&common)?;
            let overrides = [flag("seed", &common.seed), flag("geometry", &geometry)].into_iter().flatten().collect();
            let prov = provenance("linkbudget", Some(&cfg), seed, overrides);
            commands::linkbudget(&cfg, geometry.as_deref(), &prov, &mut out)?;
            out.finish(&prov)
        }
        Command::ItuSim { common, model, gamma, threshold, quantile } => {
            let (cfg, seed, mut out) = open(&common)?;
            let overrides = [
                flag("seed", &common.seed),
                flag("model", &model),
                flag("gamma", &gamma),
                flag("threshold", &threshold),
                flag("quantile", &quantile),
            ]
            .into_iter()
            .flatten()
            .collect();
            let prov = provenance("itu-sim", Some(&cfg), seed, overrides);
            let flags = commands::ItuFlags { model, gamma, threshold, quantile };
            commands::itu_sim(&cfg, &flags, seed, &prov, &mut out)?;
            out.finish(&prov)
        }
        Command::Experiment { common } => {
            let (cfg, seed, mut out) = open(&common)?;
            let prov = provenance("experiment", Some(&cfg), seed, flag("seed", &common.seed).into_iter().collect());
            commands::experiment(&cfg, &prov, &mut out)?;
            out.finish(&prov)
        }
        Command::ValidateTle { config, out_dir, mut files } => {
            let cfg = config.as_deref().map(Loaded::read).transpose()?;
            if let Some(c) = &cfg {
                files.extend(commands::config_tle_paths(c));
            }
            let prov = provenance("validate-tle", cfg.as_ref(), cfg.as_ref().map_or(0, |c| c.config.seed), Vec::new());
            let mut out = OutDir::create(&out_dir)?;
            commands::validate_tle(&files, &prov, &mut out)?;
            out.finish(&prov)
        }
    }
}

fn open(common: &Common) -> Result<(Loaded, u64, OutDir), CliError> {
    let cfg = Loaded::read(&common.config)?;
    let seed = common.seed.unwrap_or(cfg.config.seed);
    let out = OutDir::create(&common.out_dir)?;
    Ok((cfg, seed, out))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(dir) => {
            println!("outputs in {}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
