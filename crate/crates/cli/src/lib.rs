//! Command-line frontend: reads an experiment configuration, runs one stage
//! of the pipeline and writes plain files (JSON, CSV, raw `f64`/`c64`
//! grids and PGM previews).
//!
//! Exit codes: 0 success, 2 configuration error, 3 solver failure,
//! 4 I/O error.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use shgcint_core::imaging::Method;
use shgcint_core::stats::DataSource;
use shgcint_core::waves::Harmonic;

pub use config::ExperimentConfig;
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "shgcint", version, about = "Second-harmonic imaging in random media")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// JSON configuration; built-in defaults when absent.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Medium seed (first ensemble seed for `ensemble`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Cap on worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Data model for `forward`, `image` and `ensemble`.
    #[arg(long, global = true, value_enum)]
    pub data_source: Option<SourceArg>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SourceArg {
    Pde,
    Go,
}

impl From<SourceArg> for DataSource {
    fn from(s: SourceArg) -> Self {
        match s {
            SourceArg::Pde => DataSource::Pde,
            SourceArg::Go => DataSource::Go,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Migration,
    Cint,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample one realization of the random medium.
    GenMedium,
    /// Simulate the array data for every incident direction.
    Forward,
    /// Form migration or CINT images.
    Image {
        /// Array data written by `forward` (stem or `.json`); acquired on
        /// the fly when absent.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
        /// Harmonic to image, 1 or 2; both when absent.
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
        harmonic: Option<u8>,
    },
    /// Monte-Carlo stability study of migration and CINT.
    Ensemble,
    /// Phase-screen predictions of scattering and decoherence scales.
    Theory,
    /// Homogeneous-medium point spread functions.
    Psf,
}

/// Load the configuration and apply command-line overrides.
pub fn resolve_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let mut config = match &cli.global.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.global.seed {
        config.medium.seed = seed;
        config.ensemble.first_seed = seed;
    }
    if let Some(out) = &cli.global.out {
        config.output = out.clone();
    }
    if let Some(s) = cli.global.data_source {
        config.ensemble.source = s.into();
    }
    if let Command::Image { method: Some(m), .. } = &cli.command {
        config.imaging.method = match m {
            MethodArg::Migration => Method::Migration,
            MethodArg::Cint => Method::Cint,
        };
    }
    config.validate()?;
    Ok(config)
}

/// Run one subcommand and return the paths of the main files written.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    if let Some(n) = cli.global.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        // A pool may already exist when called twice in one process; the
        // first cap then stays in force.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let config = resolve_config(cli)?;
    let source = cli.global.data_source.map(DataSource::from).unwrap_or(DataSource::Pde);
    match &cli.command {
        Command::GenMedium => commands::gen_medium(&config),
        Command::Forward => commands::forward(&config, source),
        Command::Image { data, harmonic, .. } => {
            let harmonics = match harmonic {
                Some(j) => vec![Harmonic::try_from(*j).map_err(CliError::Config)?],
                None => Harmonic::BOTH.to_vec(),
            };
            commands::image(&config, data.as_deref(), source, &harmonics)
        }
        Command::Ensemble => commands::ensemble(&config),
        Command::Theory => commands::theory(&config),
        Command::Psf => commands::psf(&config),
    }
}
