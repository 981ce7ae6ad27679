//! Glue between the store and the numerical modules, shared by the CLI and the service.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytics::{all_rates, AnalyticsError, CountrySnapshot, RateReport};
use crate::calibration::{fit, CalibrationError, FitConfig, FitResult};
use crate::datastore::{DataStore, StoreError};
use crate::epi_model::{AgeStructure, ContactMatrices, ModelParams, TransmissionForm};
use crate::scenario::{
    project, seed_age_state, DeltaPresets, Projection, ProjectionStart, ScenarioConfig,
    ScenarioError, ScenarioKind,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorkflowError {
    #[error("unknown country {0}")]
    UnknownCountry(String),
    #[error("no case history stored for {0}")]
    NoHistory(String),
    #[error("no population recorded for {0}")]
    NoPopulation(String),
    #[error("{0} has not been calibrated; run `epiforge calibrate {0}` first")]
    Uncalibrated(String),
    #[error("no contact matrices in the data directory")]
    NoContactMatrices,
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
}

/// Per-country fit settings: `{"defaults": {...}, "countries": {"CC": {...}}}`.
///
/// A country entry replaces the defaults wholesale; fields it omits take the
/// built-in values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfigFile {
    pub defaults: FitConfig,
    pub countries: BTreeMap<String, FitConfig>,
}

impl FitConfigFile {
    pub fn for_country(&self, code: &str) -> FitConfig {
        self.countries
            .get(code)
            .cloned()
            .unwrap_or_else(|| self.defaults.clone())
    }
}

pub fn known(store: &DataStore, code: &str) -> bool {
    store.meta(code).is_some() || store.latest(code).is_some()
}

/// Fits the scalar model to the stored history of `code`.
pub fn calibrate(store: &DataStore, code: &str, config: &FitConfig) -> Result<FitResult, WorkflowError> {
    if !known(store, code) {
        return Err(WorkflowError::UnknownCountry(code.to_string()));
    }
    let history = store.history(code);
    if history.is_empty() {
        return Err(WorkflowError::NoHistory(code.to_string()));
    }
    let population = store
        .meta(code)
        .and_then(|m| m.population)
        .ok_or_else(|| WorkflowError::NoPopulation(code.to_string()))?;
    Ok(fit(code, &history, population, config)?)
}

/// Latest counts of `code` with its population and area; absent metadata yields absent rates.
pub fn snapshot(store: &DataStore, code: &str) -> Result<CountrySnapshot, WorkflowError> {
    if !known(store, code) {
        return Err(WorkflowError::UnknownCountry(code.to_string()));
    }
    let latest = store
        .latest(code)
        .ok_or_else(|| WorkflowError::NoHistory(code.to_string()))?;
    let meta = store.meta(code);
    Ok(CountrySnapshot::from_counts(
        code,
        latest.date,
        latest.affected,
        latest.dead,
        latest.recovered,
        meta.and_then(|m| m.population).unwrap_or(0.0),
        meta.and_then(|m| m.area).unwrap_or(0.0),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatesDocument {
    pub country: String,
    pub date: chrono::NaiveDate,
    pub death: RateReport,
    pub active: RateReport,
    pub recovery: RateReport,
}

pub fn rates(store: &DataStore, code: &str) -> Result<RatesDocument, WorkflowError> {
    let s = snapshot(store, code)?;
    let [death, active, recovery] = all_rates(&s)?;
    Ok(RatesDocument {
        country: code.to_string(),
        date: s.date,
        death,
        active,
        recovery,
    })
}

/// Everything a projection of one country needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionInputs {
    pub start: ProjectionStart,
    pub params: ModelParams,
    pub contacts: ContactMatrices,
    pub presets: DeltaPresets,
    /// Form the parameters were fitted under.
    pub form: TransmissionForm,
    /// Notes about fallbacks taken, such as a missing population pyramid.
    pub warnings: Vec<String>,
}

impl ProjectionInputs {
    pub fn config(&self, kind: ScenarioKind, horizon: u32) -> ScenarioConfig {
        ScenarioConfig {
            horizon,
            form: self.form,
            ..ScenarioConfig::from_presets(kind, &self.presets)
        }
    }

    pub fn run(&self, config: &ScenarioConfig) -> Result<Projection, ScenarioError> {
        project(&self.start, &self.params, &self.contacts, config)
    }
}

pub fn projection_inputs(store: &DataStore, code: &str) -> Result<ProjectionInputs, WorkflowError> {
    if !known(store, code) {
        return Err(WorkflowError::UnknownCountry(code.to_string()));
    }
    let fit = store
        .load_fit(code)?
        .ok_or_else(|| WorkflowError::Uncalibrated(code.to_string()))?;
    let latest = store
        .latest(code)
        .ok_or_else(|| WorkflowError::NoHistory(code.to_string()))?
        .clone();
    let contacts = store
        .load_contact_matrices()?
        .ok_or(WorkflowError::NoContactMatrices)?;
    let mut warnings = Vec::new();
    let structure = match store.load_pyramid(code)? {
        Some(s) => s,
        None => {
            warnings.push(format!(
                "no population pyramid for {code}; splitting the population evenly across age classes"
            ));
            AgeStructure::uniform(fit.population).map_err(ScenarioError::from)?
        }
    };
    let state = seed_age_state(&latest, &structure)?;
    Ok(ProjectionInputs {
        start: ProjectionStart {
            country_code: code.to_string(),
            latest_date: latest.date,
            state,
            structure,
        },
        params: fit.params,
        form: fit.form,
        contacts,
        presets: store.delta_presets()?,
        warnings,
    })
}
