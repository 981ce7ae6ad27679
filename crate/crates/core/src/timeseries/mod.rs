//! Dated series and the transforms applied before any analysis.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stats::PairedSample;

pub mod ingest;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeriesError {
    #[error("series is empty")]
    Empty,
    #[error("metric {0} is not cumulative")]
    NotCumulative(Metric),
    #[error("dates must be strictly increasing (offending date {0})")]
    UnorderedDates(NaiveDate),
    #[error("cumulative {metric} value {value} on {date} is negative")]
    NegativeCumulative {
        metric: Metric,
        date: NaiveDate,
        value: f64,
    },
    #[error("inconsistent inputs: {0}")]
    Inconsistent(String),
    #[error("no overlapping dates after applying a lag of {lag_days} days")]
    EmptySample { lag_days: u32 },
    #[error("no observations between {start} and {end}")]
    EmptyWindow { start: NaiveDate, end: NaiveDate },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Confirmed,
    Deaths,
    Recovered,
    Active,
    Temperature,
    Humidity,
}

impl Metric {
    /// Running-total metrics; these are the ones that can be differenced into daily counts.
    pub fn is_cumulative(self) -> bool {
        matches!(self, Metric::Confirmed | Metric::Deaths | Metric::Recovered)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Confirmed => "confirmed",
            Metric::Deaths => "deaths",
            Metric::Recovered => "recovered",
            Metric::Active => "active",
            Metric::Temperature => "temperature",
            Metric::Humidity => "humidity",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How the values of a series relate to time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesForm {
    /// Running totals.
    Cumulative,
    /// Per-day increments of a cumulative metric.
    Daily,
    /// Point observations (active counts, weather).
    Level,
}

/// Country-tagged time series of one metric, one value per calendar day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatedSeries {
    pub country_code: String,
    pub metric: Metric,
    pub form: SeriesForm,
    points: Vec<(NaiveDate, f64)>,
}

impl DatedSeries {
    /// Builds a series in the natural form for `metric` (cumulative for case totals).
    pub fn new(
        country_code: impl Into<String>,
        metric: Metric,
        points: Vec<(NaiveDate, f64)>,
    ) -> Result<Self, SeriesError> {
        let form = if metric.is_cumulative() {
            SeriesForm::Cumulative
        } else {
            SeriesForm::Level
        };
        Self::with_form(country_code, metric, form, points)
    }

    pub fn with_form(
        country_code: impl Into<String>,
        metric: Metric,
        form: SeriesForm,
        points: Vec<(NaiveDate, f64)>,
    ) -> Result<Self, SeriesError> {
        for w in points.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(SeriesError::UnorderedDates(w[1].0));
            }
        }
        if form == SeriesForm::Cumulative {
            if let Some(&(date, value)) = points.iter().find(|(_, v)| *v < 0.0) {
                return Err(SeriesError::NegativeCumulative {
                    metric,
                    date,
                    value,
                });
            }
        }
        Ok(Self {
            country_code: country_code.into(),
            metric,
            form,
            points,
        })
    }

    /// Convenience constructor for consecutive days starting at `start`.
    pub fn from_values(
        country_code: impl Into<String>,
        metric: Metric,
        start: NaiveDate,
        values: &[f64],
    ) -> Result<Self, SeriesError> {
        let points = values
            .iter()
            .enumerate()
            .map(|(i, &v)| (start + Days::new(i as u64), v))
            .collect();
        Self::new(country_code, metric, points)
    }

    pub fn points(&self) -> &[(NaiveDate, f64)] {
        &self.points
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|&(_, v)| v).collect()
    }

    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        self.points.iter().map(|&(d, _)| d)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn get(&self, date: NaiveDate) -> Option<f64> {
        self.points
            .binary_search_by_key(&date, |&(d, _)| d)
            .ok()
            .map(|i| self.points[i].1)
    }
}

/// Non-fatal observations raised while transforming a series.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SeriesWarning {
    /// A cumulative total went down; the day's increment is negative.
    NegativeIncrement { date: NaiveDate, value: f64 },
    /// Some provinces had no value on this date and were counted as zero.
    MissingProvinceValue { date: NaiveDate, missing: usize },
}

impl fmt::Display for SeriesWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SeriesWarning::NegativeIncrement { date, value } => {
                write!(f, "negative daily increment {value} on {date}")
            }
            SeriesWarning::MissingProvinceValue { date, missing } => {
                write!(f, "{missing} province(s) missing on {date}, counted as 0")
            }
        }
    }
}

/// A transformed series together with any warnings raised on the way.
#[derive(Debug, Clone, PartialEq)]
pub struct Transformed {
    pub series: DatedSeries,
    pub warnings: Vec<SeriesWarning>,
}

/// Differences a cumulative series into per-day counts. The first point is kept as is.
///
/// Negative increments (upstream corrections) are kept and reported, so that
/// [`prefix_sum`] reconstructs the input exactly.
pub fn cumulative_to_daily(series: &DatedSeries) -> Result<Transformed, SeriesError> {
    if series.is_empty() {
        return Err(SeriesError::Empty);
    }
    if !series.metric.is_cumulative() || series.form != SeriesForm::Cumulative {
        return Err(SeriesError::NotCumulative(series.metric));
    }
    let mut warnings = Vec::new();
    let mut points = Vec::with_capacity(series.len());
    let mut prev = None;
    for &(date, value) in series.points() {
        let inc = match prev {
            None => value,
            Some(p) => value - p,
        };
        if inc < 0.0 {
            warnings.push(SeriesWarning::NegativeIncrement { date, value: inc });
        }
        points.push((date, inc));
        prev = Some(value);
    }
    let series = DatedSeries::with_form(
        series.country_code.clone(),
        series.metric,
        SeriesForm::Daily,
        points,
    )?;
    Ok(Transformed { series, warnings })
}

/// Running total of a daily series; the inverse of [`cumulative_to_daily`].
pub fn prefix_sum(series: &DatedSeries) -> DatedSeries {
    let mut acc = 0.0;
    let points = series
        .points()
        .iter()
        .map(|&(d, v)| {
            acc += v;
            (d, acc)
        })
        .collect();
    DatedSeries {
        country_code: series.country_code.clone(),
        metric: series.metric,
        form: SeriesForm::Cumulative,
        points,
    }
}

/// Sums province-level series into one national series.
///
/// Every date seen in any province appears in the output; a province without a
/// value on that date contributes zero and a warning is emitted.
pub fn aggregate_provinces(records: &[DatedSeries]) -> Result<Transformed, SeriesError> {
    let first = records.first().ok_or(SeriesError::Empty)?;
    for r in records {
        if r.country_code != first.country_code || r.metric != first.metric || r.form != first.form
        {
            return Err(SeriesError::Inconsistent(format!(
                "cannot aggregate {}/{} with {}/{}",
                first.country_code, first.metric, r.country_code, r.metric
            )));
        }
    }
    let mut by_date: BTreeMap<NaiveDate, Vec<f64>> = BTreeMap::new();
    for r in records {
        for &(d, v) in r.points() {
            by_date.entry(d).or_default().push(v);
        }
    }
    let mut warnings = Vec::new();
    let points = by_date
        .into_iter()
        .map(|(date, mut values)| {
            let missing = records.len() - values.len();
            if missing > 0 {
                warnings.push(SeriesWarning::MissingProvinceValue { date, missing });
            }
            // summing in sorted order keeps the result independent of input order
            values.sort_by(f64::total_cmp);
            (date, values.iter().sum())
        })
        .collect();
    let series = DatedSeries::with_form(
        first.country_code.clone(),
        first.metric,
        first.form,
        points,
    )?;
    Ok(Transformed { series, warnings })
}

/// Pairs `covariate[d - lag_days]` with `dependent[d]`.
///
/// Dates where the dependent value is zero are skipped: days without new cases
/// carry no information about the covariate.
pub fn lag_align(
    dependent: &DatedSeries,
    covariate: &DatedSeries,
    lag_days: u32,
) -> Result<PairedSample, SeriesError> {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for &(date, value) in dependent.points() {
        if value == 0.0 {
            continue;
        }
        let Some(source) = date.checked_sub_days(Days::new(lag_days as u64)) else {
            continue;
        };
        if let Some(c) = covariate.get(source) {
            x.push(c);
            y.push(value);
        }
    }
    if x.is_empty() {
        return Err(SeriesError::EmptySample { lag_days });
    }
    Ok(PairedSample::new(x, y).expect("paired vectors have equal length"))
}

/// Lookup of individual stored values, used to patch gaps in a series.
pub trait SeriesSource {
    /// `Ok(None)` when the store has no value; `Err` when the store cannot be reached.
    fn value_on(
        &self,
        country_code: &str,
        metric: Metric,
        form: SeriesForm,
        date: NaiveDate,
    ) -> Result<Option<f64>, String>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct FillReport {
    pub series: DatedSeries,
    /// Gap dates the store could not supply either.
    pub unresolved: Vec<NaiveDate>,
    /// Set when the store was unavailable and the series was returned untouched.
    pub error_note: Option<String>,
}

/// Fills calendar gaps between the first and last point from `store`.
pub fn fill_missing(series: &DatedSeries, store: &dyn SeriesSource) -> FillReport {
    let (Some(&(first, _)), Some(&(last, _))) = (series.points.first(), series.points.last())
    else {
        return FillReport {
            series: series.clone(),
            unresolved: Vec::new(),
            error_note: None,
        };
    };
    let present: BTreeSet<NaiveDate> = series.dates().collect();
    let mut filled: BTreeMap<NaiveDate, f64> = series.points.iter().copied().collect();
    let mut unresolved = Vec::new();
    for date in first.iter_days().take_while(|d| *d <= last) {
        if present.contains(&date) {
            continue;
        }
        match store.value_on(&series.country_code, series.metric, series.form, date) {
            Ok(Some(v)) => {
                filled.insert(date, v);
            }
            Ok(None) => unresolved.push(date),
            Err(note) => {
                return FillReport {
                    series: series.clone(),
                    unresolved: Vec::new(),
                    error_note: Some(note),
                }
            }
        }
    }
    FillReport {
        series: DatedSeries {
            points: filled.into_iter().collect(),
            ..series.clone()
        },
        unresolved,
        error_note: None,
    }
}

/// Arithmetic mean of the values dated within `[start, end]`.
pub fn window_mean(
    series: &DatedSeries,
    start: NaiveDate,
    end: NaiveDate,
) -> Result<f64, SeriesError> {
    let inside: Vec<f64> = series
        .points()
        .iter()
        .filter(|(d, _)| *d >= start && *d <= end)
        .map(|&(_, v)| v)
        .collect();
    if inside.is_empty() {
        return Err(SeriesError::EmptyWindow { start, end });
    }
    Ok(inside.iter().sum::<f64>() / inside.len() as f64)
}

/// One country's cumulative counts on one day plus the increments since the previous report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailySummary {
    pub country_code: String,
    pub date: NaiveDate,
    pub affected: f64,
    pub dead: f64,
    pub recovered: f64,
    pub newly_affected: f64,
    pub newly_dead: f64,
    pub newly_recovered: f64,
}

impl DailySummary {
    pub fn active(&self) -> f64 {
        self.affected - self.dead - self.recovered
    }

    /// Builds summaries from ascending cumulative rows `(date, affected, dead, recovered)`.
    /// Increments are taken against the previous row; the first row's increments equal its totals.
    pub fn from_cumulative(
        country_code: &str,
        rows: &[(NaiveDate, f64, f64, f64)],
    ) -> Vec<DailySummary> {
        let mut out = Vec::with_capacity(rows.len());
        let mut prev = (0.0, 0.0, 0.0);
        for &(date, affected, dead, recovered) in rows {
            out.push(DailySummary {
                country_code: country_code.to_string(),
                date,
                affected,
                dead,
                recovered,
                newly_affected: affected - prev.0,
                newly_dead: dead - prev.1,
                newly_recovered: recovered - prev.2,
            });
            prev = (affected, dead, recovered);
        }
        out
    }

    /// Extracts one metric as a series.
    pub fn series(
        country_code: &str,
        summaries: &[DailySummary],
        metric: Metric,
        form: SeriesForm,
    ) -> Result<DatedSeries, SeriesError> {
        let pick = |s: &DailySummary| -> Option<f64> {
            match (metric, form) {
                (Metric::Confirmed, SeriesForm::Cumulative) => Some(s.affected),
                (Metric::Deaths, SeriesForm::Cumulative) => Some(s.dead),
                (Metric::Recovered, SeriesForm::Cumulative) => Some(s.recovered),
                (Metric::Confirmed, SeriesForm::Daily) => Some(s.newly_affected),
                (Metric::Deaths, SeriesForm::Daily) => Some(s.newly_dead),
                (Metric::Recovered, SeriesForm::Daily) => Some(s.newly_recovered),
                (Metric::Active, SeriesForm::Level) => Some(s.active()),
                _ => None,
            }
        };
        let points = summaries
            .iter()
            .map(|s| pick(s).map(|v| (s.date, v)))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| {
                SeriesError::Inconsistent(format!("{metric} is not carried in daily summaries"))
            })?;
        DatedSeries::with_form(country_code, metric, form, points)
    }
}
