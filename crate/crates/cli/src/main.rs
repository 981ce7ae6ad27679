//! `epiforge`: ingest data, calibrate, project, run correlation studies and serve the API.

mod commands;
mod ingest;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use epiforge_core::scenario::DEFAULT_HORIZON_DAYS;
use epiforge_core::{FactorPair, ScenarioKind, DEFAULT_ALPHA, DEFAULT_LAG_DAYS};

#[derive(Debug, Parser)]
#[command(name = "epiforge", version, about = "Epidemic calibration, projection and correlation engine")]
struct Cli {
    /// Data directory holding the store and reports.
    #[arg(long, global = true, env = "EPIFORGE_DATA_DIR", default_value = "epiforge-data")]
    data_dir: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load case, covariate, metadata, pyramid and contact-matrix CSVs into the data directory.
    ///
    /// Directories are searched recursively for .csv files. The file kind is taken from its
    /// header; contact matrices are headerless and named home.csv, school.csv, work.csv or other.csv.
    Ingest {
        /// Files or directories to read.
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Fit β, λ_r and λ_d to stored case histories and save them under params/.
    Calibrate {
        /// Country codes to fit.
        #[arg(required_unless_present = "all")]
        countries: Vec<String>,
        /// Fit every country with case data.
        #[arg(long, conflicts_with = "countries")]
        all: bool,
        /// JSON fit settings: {"defaults": {...}, "countries": {"CC": {...}}}.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Use the un-normalised β·S·I transmission term instead of β·S·I/N.
        #[arg(long)]
        strict_literal: bool,
    },
    /// Project daily affected and deaths for a calibrated country.
    Project {
        country: String,
        /// lockdown_distancing, released_distancing or released_no_distancing; all three when omitted.
        #[arg(long)]
        scenario: Option<ScenarioKind>,
        /// Days to project.
        #[arg(long, default_value_t = DEFAULT_HORIZON_DAYS, value_parser = clap::value_parser!(u32).range(1..))]
        horizon: u32,
        /// JSON δ presets overriding the data directory's scenarios.json.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Require a fit made with the un-normalised transmission term.
        #[arg(long)]
        strict_literal: bool,
    },
    /// Run Pearson, Spearman and Kendall studies for factor pairs.
    Correlate {
        /// Factor pair, e.g. temperature-affected; every pair when omitted.
        #[arg(long)]
        pair: Option<FactorPair>,
        /// Days between a covariate observation and the case count it is paired with.
        #[arg(long, default_value_t = DEFAULT_LAG_DAYS)]
        lag: u32,
        /// Significance level.
        #[arg(long, default_value_t = DEFAULT_ALPHA, value_parser = parse_alpha)]
        alpha: f64,
    },
    /// Death, active and recovery rates from the latest stored day.
    Rates {
        /// Country codes; every country with case data when omitted.
        countries: Vec<String>,
    },
    /// Serve the JSON API until interrupted.
    Serve {
        /// Address to listen on.
        #[arg(long, env = "EPIFORGE_LISTEN", default_value = "127.0.0.1:8080")]
        listen: SocketAddr,
        /// Upstream live snapshot (JSON file). Without it, live routes serve the store's latest day, flagged stale.
        #[arg(long, env = "EPIFORGE_UPSTREAM")]
        upstream: Option<PathBuf>,
        /// Seconds a live response stays cached.
        #[arg(long, env = "EPIFORGE_LIVE_TTL", default_value_t = epiforge_server::DEFAULT_LIVE_TTL_SECS)]
        live_ttl: u64,
    },
}

fn parse_alpha(s: &str) -> Result<f64, String> {
    let a: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if a > 0.0 && a < 1.0 {
        Ok(a)
    } else {
        Err(format!("alpha must lie strictly between 0 and 1, got {a}"))
    }
}

/// A command failure: message for stderr, nonzero exit.
#[derive(Debug)]
pub struct Failure(pub String);

impl Failure {
    pub fn new(msg: impl Into<String>) -> Self {
        Self(msg.into())
    }
}

impl<E: std::error::Error> From<E> for Failure {
    fn from(e: E) -> Self {
        Self(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let dir = cli.data_dir;
    let result = match cli.command {
        Command::Ingest { paths } => commands::ingest(&dir, &paths),
        Command::Calibrate {
            countries,
            all,
            config,
            strict_literal,
        } => commands::calibrate(&dir, &countries, all, config.as_deref(), strict_literal),
        Command::Project {
            country,
            scenario,
            horizon,
            config,
            strict_literal,
        } => commands::project(&dir, &country, scenario, horizon, config.as_deref(), strict_literal),
        Command::Correlate { pair, lag, alpha } => commands::correlate(&dir, pair, lag, alpha),
        Command::Rates { countries } => commands::rates(&dir, &countries),
        Command::Serve {
            listen,
            upstream,
            live_ttl,
        } => commands::serve(&dir, listen, upstream, live_ttl),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
