//! Epidemic decision-support engine.
//!
//! The crate is organised bottom-up:
//!
//! - [`timeseries`]: dated series, cumulative/daily transforms, lag alignment, CSV ingestion.
//! - [`analytics`]: death, active and recovery rate families.
//! - [`stats`]: covariance, Pearson/Spearman/Kendall with p-values, per-country studies.
//! - [`epi_model`]: SIR, SIRD with vital dynamics, and the 16-class age-structured model.
//! - [`calibration`]: fitting (β, λ_d, λ_r) to historical daily summaries.
//! - [`scenario`]: lockdown/social-distancing regimes and horizon projections.
//! - [`study`]: factor pairs and sample construction for correlation studies.
//! - [`datastore`]: file-backed persistence for summaries, metadata, covariates and fits.
//! - [`workflow`]: store-backed calibration, rates and projection setup.

pub mod analytics;
pub mod calibration;
pub mod datastore;
pub mod epi_model;
pub mod optim;
pub mod scenario;
pub mod stats;
pub mod study;
pub mod timeseries;
pub mod workflow;

pub use analytics::{CountrySnapshot, RateFamily, RateReport};
pub use calibration::{FitConfig, FitResult};
pub use datastore::{CountryMeta, DataStore};
pub use epi_model::{
    AgeState, AgeStructure, CompartmentState, ContactMatrices, ContactMatrix, MixingCoefficients,
    ModelParams, ReinfectionSchedule, TransmissionForm, Trajectory,
};
pub use scenario::{Projection, ScenarioConfig, ScenarioKind};
pub use stats::{CorrelationResult, Method, PairedSample, StudySummary, Verdict};
pub use study::FactorPair;
pub use timeseries::{DailySummary, DatedSeries, Metric};

/// Significance level used by the correlation study unless overridden.
pub const DEFAULT_ALPHA: f64 = 0.05;

/// Days between a covariate observation and the case count it is paired with.
pub const DEFAULT_LAG_DAYS: u32 = 5;
