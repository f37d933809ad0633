//! Command-line pipeline: meter data in, synthetic prosumer profiles out.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use prosynth::data_model::DayType;

use crate::config::{parse_penetration_list, ExperimentConfig, Overrides, SolarParams};
use crate::dataset::SampleSpec;
pub use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct PenetrationList(pub Vec<f64>);

fn penetration_arg(raw: &str) -> Result<PenetrationList, String> {
    parse_penetration_list(raw).map(PenetrationList)
}

fn day_type_arg(raw: &str) -> Result<DayType, String> {
    raw.parse().map_err(|e: prosynth::Error| e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "prosynth", version, about = "Synthetic residential demand and PV generation profiles")]
pub struct Cli {
    /// Experiment config (TOML).
    #[arg(long, global = true, default_value = "experiment.toml")]
    pub config: PathBuf,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// weekday or weekend.
    #[arg(long, global = true, value_parser = day_type_arg)]
    pub day_type: Option<DayType>,
    /// Comma-separated PV penetration fractions, e.g. 0,0.271,0.8,1.
    #[arg(long, global = true, value_parser = penetration_arg)]
    pub penetration: Option<PenetrationList>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse meter data into day profiles and customer summaries.
    Ingest,
    /// Cluster peak generation into capacity classes and fit Dirichlet models.
    Cluster,
    /// Assign features to the synthetic population.
    Assign,
    /// Build the demand transition tensor for the day type.
    BuildDemand,
    /// Size observed PV systems and learn the clearness-index chain.
    BuildSolar,
    /// Sample demand, generation and net demand; validates the result.
    Synth,
    /// Compare synthetic against observed profiles.
    Validate,
    /// Summarize every stage.
    Report,
    /// Run every stage in order.
    All,
    /// Write the bundled synthetic meter dataset.
    SampleData {
        /// Destination CSV.
        path: PathBuf,
        #[arg(long, default_value_t = 60)]
        customers: usize,
        #[arg(long, default_value_t = 28)]
        days: usize,
    },
}

impl Cli {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            out: self.out.clone(),
            day_type: self.day_type,
            penetration: self.penetration.as_ref().map(|p| p.0.clone()),
        }
    }
}

fn print<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("summaries serialize"));
}

/// Runs one command, printing its summary to stdout.
pub fn run(cli: &Cli) -> CliResult<()> {
    if let Command::SampleData { path, customers, days } = &cli.command {
        let mut spec = SampleSpec { customers: *customers, days: *days, ..SampleSpec::default() };
        if let Some(seed) = cli.seed {
            spec.seed = seed;
        }
        return write_sample(&spec, &SolarParams::default(), path);
    }
    let config = ExperimentConfig::load(&cli.config, &cli.overrides())?;
    match cli.command {
        Command::Ingest => print(&commands::ingest(&config)?),
        Command::Cluster => print(&commands::cluster(&config)?),
        Command::Assign => print(&commands::assign(&config)?),
        Command::BuildDemand => print(&commands::build_demand(&config)?),
        Command::BuildSolar => print(&commands::build_solar(&config)?),
        Command::Synth => print(&commands::synth(&config)?.0),
        Command::Validate => print(&commands::validate(&config)?),
        Command::Report => print!("{}", commands::report(&config)?),
        Command::All => print!("{}", run_all(&config)?),
        Command::SampleData { .. } => unreachable!("handled above"),
    }
    Ok(())
}

/// Every stage in dependency order; returns the final report.
pub fn run_all(config: &ExperimentConfig) -> CliResult<commands::Report> {
    commands::ingest(config)?;
    commands::cluster(config)?;
    commands::assign(config)?;
    commands::build_demand(config)?;
    commands::build_solar(config)?;
    commands::synth(config)?;
    commands::report(config)
}

pub fn write_sample(spec: &SampleSpec, solar: &SolarParams, path: &std::path::Path) -> CliResult<()> {
    let io = |e: std::io::Error| CliError::Io { path: path.to_path_buf(), message: e.to_string() };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    let file = std::fs::File::create(path).map_err(io)?;
    let mut w = std::io::BufWriter::new(file);
    dataset::write_sample_meter_csv(spec, solar, &mut w).map_err(|e| CliError::at(path, e))?;
    std::io::Write::flush(&mut w).map_err(io)
}
