//! Death, active and recovery rate families for a country snapshot.
//!
//! Percent rates are taken against affected (and, for deaths and actives,
//! against the closed-outcome total with recovered). Population rates are per
//! million persons and area rates per 100 km². A rate whose denominator is zero
//! is reported as absent rather than as zero.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticsError {
    #[error("invalid snapshot: {field} = {value} (counts must be finite and non-negative)")]
    InvalidSnapshot { field: &'static str, value: f64 },
    #[error("death rate undefined with zero affected")]
    UndefinedRate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountrySnapshot {
    pub country_code: String,
    pub date: NaiveDate,
    pub affected: f64,
    pub deaths: f64,
    pub recovered: f64,
    pub active: f64,
    /// Persons.
    pub population: f64,
    /// Surface in units of 100 km².
    pub area: f64,
}

impl CountrySnapshot {
    /// Snapshot with `active` derived as affected − deaths − recovered.
    pub fn from_counts(
        country_code: impl Into<String>,
        date: NaiveDate,
        affected: f64,
        deaths: f64,
        recovered: f64,
        population: f64,
        area: f64,
    ) -> Self {
        Self {
            country_code: country_code.into(),
            date,
            affected,
            deaths,
            recovered,
            active: affected - deaths - recovered,
            population,
            area,
        }
    }

    fn validate(&self) -> Result<(), AnalyticsError> {
        for (field, value) in [
            ("affected", self.affected),
            ("deaths", self.deaths),
            ("recovered", self.recovered),
            ("active", self.active),
            ("population", self.population),
            ("area", self.area),
        ] {
            if !value.is_finite() || value < 0.0 {
                return Err(AnalyticsError::InvalidSnapshot { field, value });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateFamily {
    Death,
    Active,
    Recovery,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub family: RateFamily,
    /// Percent of affected.
    pub wrt_affected: Option<f64>,
    /// Percent of (count + recovered). Never present for the recovery family.
    pub wrt_recovered: Option<f64>,
    pub per_million_population: Option<f64>,
    pub per_area: Option<f64>,
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den != 0.0).then(|| num / den)
}

fn report(family: RateFamily, count: f64, s: &CountrySnapshot, with_recovered: bool) -> RateReport {
    RateReport {
        family,
        wrt_affected: ratio(count, s.affected).map(|r| r * 100.0),
        wrt_recovered: if with_recovered {
            ratio(count, count + s.recovered).map(|r| r * 100.0)
        } else {
            None
        },
        per_million_population: ratio(count, s.population / 1e6),
        per_area: ratio(count, s.area),
    }
}

pub fn death_rates(s: &CountrySnapshot) -> Result<RateReport, AnalyticsError> {
    s.validate()?;
    Ok(report(RateFamily::Death, s.deaths, s, true))
}

pub fn active_rates(s: &CountrySnapshot) -> Result<RateReport, AnalyticsError> {
    s.validate()?;
    Ok(report(RateFamily::Active, s.active, s, true))
}

pub fn recovery_rates(s: &CountrySnapshot) -> Result<RateReport, AnalyticsError> {
    s.validate()?;
    Ok(report(RateFamily::Recovery, s.recovered, s, false))
}

/// All three families, in death/active/recovery order.
pub fn all_rates(s: &CountrySnapshot) -> Result<[RateReport; 3], AnalyticsError> {
    Ok([death_rates(s)?, active_rates(s)?, recovery_rates(s)?])
}

/// Deaths per affected as a plain ratio (callers scale to percent for display).
pub fn simple_death_rate(deaths: f64, affected: f64) -> Result<f64, AnalyticsError> {
    if affected <= 0.0 {
        return Err(AnalyticsError::UndefinedRate);
    }
    if !deaths.is_finite() || deaths < 0.0 {
        return Err(AnalyticsError::InvalidSnapshot {
            field: "deaths",
            value: deaths,
        });
    }
    Ok(deaths / affected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn snap(affected: f64, deaths: f64, recovered: f64, population: f64, area: f64) -> CountrySnapshot {
        CountrySnapshot::from_counts(
            "US",
            NaiveDate::from_ymd_opt(2020, 5, 1).unwrap(),
            affected,
            deaths,
            recovered,
            population,
            area,
        )
    }

    #[test]
    fn zero_deaths_is_zero_percent() {
        let r = death_rates(&snap(100.0, 0.0, 10.0, 1e6, 10.0)).unwrap();
        assert_eq!(r.wrt_affected, Some(0.0));
    }

    #[test]
    fn deaths_without_recoveries_is_full_share() {
        let r = death_rates(&snap(50.0, 5.0, 0.0, 1e6, 10.0)).unwrap();
        assert_eq!(r.wrt_recovered, Some(100.0));
    }

    #[test]
    fn death_rates_by_hand() {
        let r = death_rates(&snap(200.0, 10.0, 0.0, 2e6, 50.0)).unwrap();
        assert_eq!(r.wrt_affected, Some(5.0));
        assert_eq!(r.per_million_population, Some(5.0));
        assert_eq!(r.per_area, Some(0.2));
    }

    #[test]
    fn zero_denominators_are_absent() {
        let r = death_rates(&snap(0.0, 0.0, 0.0, 0.0, 0.0)).unwrap();
        assert_eq!(r.wrt_affected, None);
        assert_eq!(r.wrt_recovered, None);
        assert_eq!(r.per_million_population, None);
        assert_eq!(r.per_area, None);
    }

    #[test]
    fn active_rates_by_hand() {
        let zero = active_rates(&snap(100.0, 20.0, 80.0, 1e6, 1.0)).unwrap();
        assert_eq!(zero.wrt_affected, Some(0.0));
        assert_eq!(zero.wrt_recovered, Some(0.0));
        let all_active = active_rates(&snap(50.0, 0.0, 0.0, 1e6, 1.0)).unwrap();
        assert_eq!(all_active.wrt_recovered, Some(100.0));
        let quarter = active_rates(&snap(120.0, 40.0, 50.0, 1e6, 1.0)).unwrap();
        assert_eq!(quarter.wrt_affected, Some(25.0));
    }

    #[test]
    fn recovery_rates_by_hand() {
        assert_eq!(
            recovery_rates(&snap(100.0, 0.0, 100.0, 1e6, 1.0)).unwrap().wrt_affected,
            Some(100.0)
        );
        assert_eq!(
            recovery_rates(&snap(100.0, 1.0, 0.0, 1e6, 1.0)).unwrap().wrt_affected,
            Some(0.0)
        );
        let r = recovery_rates(&snap(100.0, 3.0, 94.0, 1e6, 1.0)).unwrap();
        assert_eq!(r.wrt_affected, Some(94.0));
        assert_eq!(r.wrt_recovered, None);
    }

    #[test]
    fn negative_counts_rejected() {
        let mut s = snap(100.0, 1.0, 1.0, 1e6, 1.0);
        s.deaths = -1.0;
        assert!(matches!(
            death_rates(&s),
            Err(AnalyticsError::InvalidSnapshot { field: "deaths", .. })
        ));
    }

    #[test]
    fn simple_death_rate_cases() {
        assert_eq!(simple_death_rate(0.0, 10.0).unwrap(), 0.0);
        assert_eq!(simple_death_rate(6.0, 100.0).unwrap(), 0.06);
        assert_eq!(simple_death_rate(3.0, 250.0).unwrap(), 0.012);
        assert_eq!(simple_death_rate(1.0, 0.0), Err(AnalyticsError::UndefinedRate));
    }

    proptest! {
        #[test]
        fn percent_shares_sum_to_hundred(d in 0u32..10_000, r in 0u32..10_000, a in 1u32..10_000) {
            let s = snap((d + r + a) as f64, d as f64, r as f64, 1e6, 5.0);
            let [dr, ar, rr] = all_rates(&s).unwrap();
            let total = dr.wrt_affected.unwrap() + ar.wrt_affected.unwrap() + rr.wrt_affected.unwrap();
            prop_assert!((total - 100.0).abs() < 1e-9);
        }

        #[test]
        fn rates_scale_covariantly(d in 0u32..1000, r in 0u32..1000, a in 1u32..1000, k in 1u32..50) {
            let s = snap((d + r + a) as f64, d as f64, r as f64, 3e6, 40.0);
            let k = k as f64;
            let t = snap(s.affected * k, s.deaths * k, s.recovered * k, 3e6, 40.0);
            for (x, y) in all_rates(&s).unwrap().iter().zip(all_rates(&t).unwrap().iter()) {
                if let (Some(p), Some(q)) = (x.wrt_affected, y.wrt_affected) {
                    prop_assert!((p - q).abs() < 1e-9);
                }
                let (p, q) = (x.per_area.unwrap(), y.per_area.unwrap());
                prop_assert!((p * k - q).abs() <= 1e-9 * q.max(1.0));
            }
        }
    }
}
