//! Factor pairs for the correlation studies and the sample construction behind each.
//!
//! Weather pairs are longitudinal: each country contributes its own sample of
//! (covariate `lag` days earlier, new cases that day). Socio-economic pairs are
//! cross-sectional: every country contributes one point to a single worldwide
//! sample keyed [`WORLD`].

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytics::simple_death_rate;
use crate::datastore::{CountryMeta, DataStore};
use crate::stats::{run_study, PairedSample, SkippedCountry, StatsError, StudySummary};
use crate::timeseries::{lag_align, DailySummary, Metric, SeriesForm};

/// Key of the single sample in cross-sectional studies.
pub const WORLD: &str = "WORLD";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StudyError {
    #[error("unknown factor pair `{0}`")]
    UnknownPair(String),
    #[error("no usable data for {0}")]
    NoData(FactorPair),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FactorPair {
    #[serde(rename = "temperature-affected")]
    TemperatureAffected,
    #[serde(rename = "humidity-affected")]
    HumidityAffected,
    #[serde(rename = "pollution-affected")]
    PollutionAffected,
    #[serde(rename = "food_security-affected")]
    FoodSecurityAffected,
    #[serde(rename = "healthcare-recovered")]
    HealthcareRecovered,
    #[serde(rename = "tests-death_rate")]
    TestsDeathRate,
}

impl FactorPair {
    pub const ALL: [FactorPair; 6] = [
        FactorPair::TemperatureAffected,
        FactorPair::HumidityAffected,
        FactorPair::PollutionAffected,
        FactorPair::FoodSecurityAffected,
        FactorPair::HealthcareRecovered,
        FactorPair::TestsDeathRate,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FactorPair::TemperatureAffected => "temperature-affected",
            FactorPair::HumidityAffected => "humidity-affected",
            FactorPair::PollutionAffected => "pollution-affected",
            FactorPair::FoodSecurityAffected => "food_security-affected",
            FactorPair::HealthcareRecovered => "healthcare-recovered",
            FactorPair::TestsDeathRate => "tests-death_rate",
        }
    }

    /// Whether each country yields a time-series sample of its own.
    pub fn is_longitudinal(self) -> bool {
        matches!(self, FactorPair::TemperatureAffected | FactorPair::HumidityAffected)
    }
}

impl fmt::Display for FactorPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FactorPair {
    type Err = StudyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| StudyError::UnknownPair(s.to_string()))
    }
}

/// Samples for one study plus the countries that could not contribute.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StudyInput {
    pub samples: BTreeMap<String, PairedSample>,
    pub skipped: Vec<SkippedCountry>,
}

fn cross_value(pair: FactorPair, meta: &CountryMeta, latest: &DailySummary) -> Result<(f64, f64), String> {
    let need = |v: Option<f64>, what: &str| v.ok_or_else(|| format!("no {what} in metadata"));
    match pair {
        FactorPair::PollutionAffected => Ok((need(meta.pollution_index, "pollution index")?, latest.affected)),
        FactorPair::FoodSecurityAffected => Ok((need(meta.food_security_index, "food security index")?, latest.affected)),
        FactorPair::HealthcareRecovered => Ok((need(meta.healthcare_index, "healthcare index")?, latest.recovered)),
        FactorPair::TestsDeathRate => {
            let tests = need(meta.tests_per_million, "tests per million")?;
            let rate = simple_death_rate(latest.dead, latest.affected).map_err(|e| e.to_string())?;
            Ok((tests, rate))
        }
        _ => unreachable!("longitudinal pairs are built elsewhere"),
    }
}

/// Builds the paired samples for `pair` from the store.
pub fn build_samples(store: &DataStore, pair: FactorPair, lag_days: u32) -> StudyInput {
    let mut input = StudyInput::default();
    let skip = |input: &mut StudyInput, code: &str, reason: String| {
        input.skipped.push(SkippedCountry {
            country_code: code.to_string(),
            reason,
        })
    };
    if pair.is_longitudinal() {
        let metric = match pair {
            FactorPair::TemperatureAffected => Metric::Temperature,
            _ => Metric::Humidity,
        };
        for code in store.countries_with_covariates() {
            let Some(cov) = store.covariate_series(&code, metric) else {
                skip(&mut input, &code, format!("no {metric} observations"));
                continue;
            };
            let history = store.history(&code);
            if history.is_empty() {
                skip(&mut input, &code, "no case data".into());
                continue;
            }
            let daily = DailySummary::series(&code, &history, Metric::Confirmed, SeriesForm::Daily)
                .expect("daily confirmed is carried by summaries");
            match lag_align(&daily, &cov, lag_days) {
                Ok(s) => {
                    input.samples.insert(code, s);
                }
                Err(e) => skip(&mut input, &code, e.to_string()),
            }
        }
    } else {
        let (mut x, mut y) = (Vec::new(), Vec::new());
        for (code, meta) in store.country_meta() {
            let Some(latest) = store.latest(code) else {
                skip(&mut input, code, "no case data".into());
                continue;
            };
            match cross_value(pair, meta, latest) {
                Ok((a, b)) => {
                    x.push(a);
                    y.push(b);
                }
                Err(reason) => skip(&mut input, code, reason),
            }
        }
        if !x.is_empty() {
            input
                .samples
                .insert(WORLD.to_string(), PairedSample::new(x, y).expect("equal lengths"));
        }
    }
    input
}

/// Builds samples and runs all three correlations at `alpha`.
pub fn run_pair(
    store: &DataStore,
    pair: FactorPair,
    lag_days: u32,
    alpha: f64,
) -> Result<StudySummary, StudyError> {
    let input = build_samples(store, pair, lag_days);
    if input.samples.is_empty() {
        return Err(StudyError::NoData(pair));
    }
    let mut summary = run_study(pair.as_str(), &input.samples, alpha)?;
    summary.skipped.extend(input.skipped);
    summary.skipped.sort_by(|a, b| a.country_code.cmp(&b.country_code));
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for p in FactorPair::ALL {
            assert_eq!(p.as_str().parse::<FactorPair>().unwrap(), p);
            assert_eq!(serde_json::to_string(&p).unwrap(), format!("\"{p}\""));
        }
        assert_eq!(
            "wind-affected".parse::<FactorPair>(),
            Err(StudyError::UnknownPair("wind-affected".into()))
        );
    }

    #[test]
    fn empty_store_has_no_data() {
        let dir = tempfile::tempdir().unwrap();
        let store = DataStore::create(dir.path()).unwrap();
        for p in FactorPair::ALL {
            assert_eq!(run_pair(&store, p, 5, 0.05), Err(StudyError::NoData(p)));
        }
    }
}
