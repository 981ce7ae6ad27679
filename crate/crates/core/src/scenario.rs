//! Lockdown and social-distancing regimes, and projections under them.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::epi_model::{
    effective_contact_matrix, integrate, AgeSirdSystem, AgeState, AgeStructure, CompartmentState,
    ContactMatrices, MixingCoefficients, ModelError, ModelParams, ReinfectionSchedule,
    TransmissionForm, DEFAULT_STEP,
};
use crate::timeseries::DailySummary;

pub const DEFAULT_HORIZON_DAYS: u32 = 60;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("unknown scenario `{0}`; expected lockdown_distancing, released_distancing or released_no_distancing")]
    UnknownScenario(String),
    #[error("class {class} would start with {value} susceptibles; counts exceed the class population")]
    InconsistentSeed { class: usize, value: f64 },
    #[error("horizon must be at least one day")]
    InvalidHorizon,
    #[error("invalid scenario configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    LockdownDistancing,
    ReleasedDistancing,
    ReleasedNoDistancing,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 3] = [
        ScenarioKind::LockdownDistancing,
        ScenarioKind::ReleasedDistancing,
        ScenarioKind::ReleasedNoDistancing,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::LockdownDistancing => "lockdown_distancing",
            ScenarioKind::ReleasedDistancing => "released_distancing",
            ScenarioKind::ReleasedNoDistancing => "released_no_distancing",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioKind {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| ScenarioError::UnknownScenario(s.to_string()))
    }
}

/// δ values for each regime. Any preset left out of an override file keeps its default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeltaPresets {
    pub lockdown_distancing: MixingCoefficients,
    pub released_distancing: MixingCoefficients,
    pub released_no_distancing: MixingCoefficients,
}

impl Default for DeltaPresets {
    fn default() -> Self {
        let m = |h, s, w, o| MixingCoefficients {
            home: h,
            school: s,
            work: w,
            other: o,
        };
        Self {
            lockdown_distancing: m(1.0, 0.0, 0.1, 0.1),
            released_distancing: m(1.0, 0.5, 0.5, 0.3),
            released_no_distancing: m(1.0, 1.0, 1.0, 1.0),
        }
    }
}

impl DeltaPresets {
    pub fn get(&self, kind: ScenarioKind) -> MixingCoefficients {
        match kind {
            ScenarioKind::LockdownDistancing => self.lockdown_distancing,
            ScenarioKind::ReleasedDistancing => self.released_distancing,
            ScenarioKind::ReleasedNoDistancing => self.released_no_distancing,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let p: Self = serde_json::from_str(text).map_err(|e| ScenarioError::Config(e.to_string()))?;
        for kind in ScenarioKind::ALL {
            p.get(kind)
                .validate()
                .map_err(|e| ScenarioError::Config(format!("{kind}: {e}")))?;
        }
        Ok(p)
    }
}

/// Shipped δ for `kind`.
pub fn preset_deltas(kind: ScenarioKind) -> MixingCoefficients {
    DeltaPresets::default().get(kind)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub deltas: MixingCoefficients,
    pub zeta: ReinfectionSchedule,
    pub horizon: u32,
    #[serde(default)]
    pub form: TransmissionForm,
    #[serde(default = "default_step")]
    pub step: f64,
}

fn default_step() -> f64 {
    DEFAULT_STEP
}

impl ScenarioConfig {
    /// Shipped δ for `kind`, no reinfection, 60 days.
    pub fn preset(kind: ScenarioKind) -> Self {
        Self::from_presets(kind, &DeltaPresets::default())
    }

    pub fn from_presets(kind: ScenarioKind, presets: &DeltaPresets) -> Self {
        Self {
            kind,
            deltas: presets.get(kind),
            zeta: ReinfectionSchedule::default(),
            horizon: DEFAULT_HORIZON_DAYS,
            form: TransmissionForm::Normalized,
            step: DEFAULT_STEP,
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.horizon < 1 {
            return Err(ScenarioError::InvalidHorizon);
        }
        self.deltas.validate()?;
        self.zeta.validate()?;
        Ok(())
    }
}

/// Where a projection starts: the latest observed day and the state on it.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionStart {
    pub country_code: String,
    pub latest_date: NaiveDate,
    pub state: AgeState,
    pub structure: AgeStructure,
}

/// Daily new affected and deaths over the horizon, starting the day after the latest data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub country_code: String,
    pub scenario: ScenarioKind,
    pub start_date: NaiveDate,
    pub deltas: MixingCoefficients,
    pub daily_affected: Vec<f64>,
    pub daily_deaths: Vec<f64>,
    pub cumulative_affected: Vec<f64>,
    pub cumulative_deaths: Vec<f64>,
    /// Number of times a compartment was clamped at zero during integration.
    pub clamp_events: usize,
}

/// The document handed to the explorer client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionExport {
    pub country: String,
    pub scenario: ScenarioKind,
    pub start_date: NaiveDate,
    pub daily_affected: Vec<f64>,
    pub daily_deaths: Vec<f64>,
}

pub const PROJECTION_CSV_HEADER: &str =
    "date,daily_affected,daily_deaths,cumulative_affected,cumulative_deaths";

impl Projection {
    pub fn horizon(&self) -> usize {
        self.daily_affected.len()
    }

    pub fn export(&self) -> ProjectionExport {
        ProjectionExport {
            country: self.country_code.clone(),
            scenario: self.scenario,
            start_date: self.start_date,
            daily_affected: self.daily_affected.clone(),
            daily_deaths: self.daily_deaths.clone(),
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{PROJECTION_CSV_HEADER}")?;
        for k in 0..self.horizon() {
            writeln!(
                out,
                "{},{},{},{},{}",
                self.start_date + Days::new(k as u64),
                self.daily_affected[k],
                self.daily_deaths[k],
                self.cumulative_affected[k],
                self.cumulative_deaths[k]
            )?;
        }
        Ok(())
    }
}

fn running_sum(values: &[f64]) -> Vec<f64> {
    values
        .iter()
        .scan(0.0, |acc, v| {
            *acc += v;
            Some(*acc)
        })
        .collect()
}

/// Integrates the age-structured model under `config` from `start`.
pub fn project(
    start: &ProjectionStart,
    params: &ModelParams,
    cm: &ContactMatrices,
    config: &ScenarioConfig,
) -> Result<Projection, ScenarioError> {
    config.validate()?;
    let c = effective_contact_matrix(cm, &config.deltas);
    let system = AgeSirdSystem::new(
        *params,
        c,
        start.structure.clone(),
        config.zeta.clone(),
        config.form,
    )?;
    let tr = integrate(
        &system,
        &start.state.to_vec(),
        start.latest_date,
        config.horizon,
        config.step,
    )?;
    let daily_affected = tr.daily_new_infections();
    let daily_deaths = tr.daily_new_deaths();
    Ok(Projection {
        country_code: start.country_code.clone(),
        scenario: config.kind,
        start_date: start.latest_date + Days::new(1),
        deltas: config.deltas,
        cumulative_affected: running_sum(&daily_affected),
        cumulative_deaths: running_sum(&daily_deaths),
        daily_affected,
        daily_deaths,
        clamp_events: tr.clamp_events.len(),
    })
}

/// Splits national active, recovered and dead counts across classes in proportion to class size.
pub fn seed_age_state(latest: &DailySummary, structure: &AgeStructure) -> Result<AgeState, ScenarioError> {
    let n = structure.total();
    if !(n > 0.0) {
        return Err(ModelError::InvalidPopulation(n).into());
    }
    let (i, r, d) = (latest.active(), latest.recovered, latest.dead);
    if [i, r, d].iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(ScenarioError::Config(format!(
            "seed counts must be non-negative, got active {i}, recovered {r}, dead {d}"
        )));
    }
    let classes = structure
        .populations()
        .iter()
        .enumerate()
        .map(|(k, &nk)| {
            let share = nk / n;
            let (ik, rk, dk) = (i * share, r * share, d * share);
            let sk = nk - ik - rk - dk;
            if sk < 0.0 {
                Err(ScenarioError::InconsistentSeed { class: k, value: sk })
            } else {
                Ok(CompartmentState::new(sk, ik, rk, dk))
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(AgeState { classes })
}
