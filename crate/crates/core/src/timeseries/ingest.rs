//! CSV readers for case counts, covariates, contact matrices and population pyramids.

use std::collections::BTreeMap;
use std::io::Read;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{aggregate_provinces, DailySummary, DatedSeries, Metric};
use crate::epi_model::{AgeStructure, ContactMatrix, AGE_CLASSES};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing required column `{0}`")]
    MissingColumn(&'static str),
    #[error("{0}")]
    Shape(String),
}

/// A rejected input row; the rest of the file still loads.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowError {
    pub line: u64,
    pub message: String,
}

#[derive(Debug, Default)]
pub struct CaseIngest {
    pub summaries: BTreeMap<String, Vec<DailySummary>>,
    pub warnings: Vec<String>,
    pub row_errors: Vec<RowError>,
}

impl CaseIngest {
    pub fn row_count(&self) -> usize {
        self.summaries.values().map(Vec::len).sum()
    }
}

/// Daily weather observation for one country.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateRow {
    pub country_code: String,
    pub date: NaiveDate,
    pub temperature_c: Option<f64>,
    pub humidity_pct: Option<f64>,
}

fn column(headers: &csv::StringRecord, name: &'static str) -> Result<usize, IngestError> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or(IngestError::MissingColumn(name))
}

fn parse_date(s: &str) -> Result<NaiveDate, String> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").map_err(|e| format!("bad date `{s}`: {e}"))
}

fn parse_count(s: &str, what: &str) -> Result<f64, String> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| format!("bad {what} value `{s}`"))?;
    if !v.is_finite() || v < 0.0 {
        return Err(format!("{what} must be a non-negative number, got `{s}`"));
    }
    Ok(v)
}

fn parse_optional(s: &str, what: &str) -> Result<Option<f64>, String> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(None);
    }
    s.parse()
        .map(Some)
        .map_err(|_| format!("bad {what} value `{s}`"))
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map(|p| p.line()).unwrap_or(0)
}

/// Reads `country_code,date,confirmed,deaths,recovered[,province]`.
///
/// Rows sharing a country but differing in `province` are summed per date.
pub fn read_cases<R: Read>(reader: R) -> Result<CaseIngest, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let c_country = column(&headers, "country_code")?;
    let c_date = column(&headers, "date")?;
    let c_conf = column(&headers, "confirmed")?;
    let c_deaths = column(&headers, "deaths")?;
    let c_rec = column(&headers, "recovered")?;
    let c_prov = headers.iter().position(|h| h == "province");

    type Key = (String, String);
    let mut rows: BTreeMap<Key, BTreeMap<NaiveDate, [f64; 3]>> = BTreeMap::new();
    let mut out = CaseIngest::default();

    for rec in rdr.records() {
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                out.row_errors.push(RowError {
                    line: e.position().map(|p| p.line()).unwrap_or(0),
                    message: e.to_string(),
                });
                continue;
            }
        };
        let line = line_of(&rec);
        let parsed = (|| -> Result<_, String> {
            let country = rec.get(c_country).unwrap_or("").to_string();
            if country.is_empty() {
                return Err("empty country_code".into());
            }
            let date = parse_date(rec.get(c_date).unwrap_or(""))?;
            let vals = [
                parse_count(rec.get(c_conf).unwrap_or(""), "confirmed")?,
                parse_count(rec.get(c_deaths).unwrap_or(""), "deaths")?,
                parse_count(rec.get(c_rec).unwrap_or(""), "recovered")?,
            ];
            let province = c_prov
                .and_then(|i| rec.get(i))
                .unwrap_or("")
                .to_string();
            Ok((country, province, date, vals))
        })();
        match parsed {
            Ok((country, province, date, vals)) => {
                let slot = rows.entry((country.clone(), province.clone())).or_default();
                if slot.insert(date, vals).is_some() {
                    out.warnings.push(format!(
                        "line {line}: duplicate {country}/{province} row for {date}, last one kept"
                    ));
                }
            }
            Err(message) => out.row_errors.push(RowError { line, message }),
        }
    }

    let mut by_country: BTreeMap<String, Vec<[DatedSeries; 3]>> = BTreeMap::new();
    for ((country, _), days) in rows {
        let metric_series = |k: usize, m: Metric| {
            DatedSeries::new(
                country.clone(),
                m,
                days.iter().map(|(d, v)| (*d, v[k])).collect(),
            )
            .expect("dates are ordered and counts non-negative")
        };
        by_country.entry(country.clone()).or_default().push([
            metric_series(0, Metric::Confirmed),
            metric_series(1, Metric::Deaths),
            metric_series(2, Metric::Recovered),
        ]);
    }

    for (country, provinces) in by_country {
        let mut national = Vec::with_capacity(3);
        for k in 0..3 {
            let parts: Vec<DatedSeries> = provinces.iter().map(|p| p[k].clone()).collect();
            let agg = aggregate_provinces(&parts).expect("same country and metric");
            out.warnings.extend(
                agg.warnings
                    .iter()
                    .map(|w| format!("{country} {}: {w}", agg.series.metric)),
            );
            national.push(agg.series);
        }
        let merged: Vec<(NaiveDate, f64, f64, f64)> = national[0]
            .points()
            .iter()
            .map(|&(d, conf)| {
                (
                    d,
                    conf,
                    national[1].get(d).unwrap_or(0.0),
                    national[2].get(d).unwrap_or(0.0),
                )
            })
            .collect();
        let summaries = DailySummary::from_cumulative(&country, &merged);
        for s in &summaries[1..] {
            for (name, v) in [
                ("affected", s.newly_affected),
                ("dead", s.newly_dead),
                ("recovered", s.newly_recovered),
            ] {
                if v < 0.0 {
                    out.warnings.push(format!(
                        "{country} {}: cumulative {name} decreased by {}",
                        s.date, -v
                    ));
                }
            }
        }
        out.summaries.insert(country, summaries);
    }
    Ok(out)
}

#[derive(Debug, Default)]
pub struct CovariateIngest {
    pub rows: BTreeMap<String, Vec<CovariateRow>>,
    pub row_errors: Vec<RowError>,
}

/// Reads `country_code,date,temperature_c,humidity_pct`; empty cells are absences.
pub fn read_covariates<R: Read>(reader: R) -> Result<CovariateIngest, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let c_country = column(&headers, "country_code")?;
    let c_date = column(&headers, "date")?;
    let c_temp = column(&headers, "temperature_c")?;
    let c_hum = column(&headers, "humidity_pct")?;
    let mut out = CovariateIngest::default();
    let mut dedup: BTreeMap<String, BTreeMap<NaiveDate, CovariateRow>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                out.row_errors.push(RowError {
                    line: e.position().map(|p| p.line()).unwrap_or(0),
                    message: e.to_string(),
                });
                continue;
            }
        };
        let parsed = (|| -> Result<CovariateRow, String> {
            Ok(CovariateRow {
                country_code: rec.get(c_country).unwrap_or("").to_string(),
                date: parse_date(rec.get(c_date).unwrap_or(""))?,
                temperature_c: parse_optional(rec.get(c_temp).unwrap_or(""), "temperature_c")?,
                humidity_pct: parse_optional(rec.get(c_hum).unwrap_or(""), "humidity_pct")?,
            })
        })();
        match parsed {
            Ok(row) => {
                dedup
                    .entry(row.country_code.clone())
                    .or_default()
                    .insert(row.date, row);
            }
            Err(message) => out.row_errors.push(RowError {
                line: line_of(&rec),
                message,
            }),
        }
    }
    out.rows = dedup
        .into_iter()
        .map(|(k, v)| (k, v.into_values().collect()))
        .collect();
    Ok(out)
}

/// Reads a headerless square matrix of comma-separated reals.
pub fn read_contact_matrix<R: Read>(reader: R) -> Result<ContactMatrix, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|c| {
                c.parse::<f64>()
                    .map_err(|_| IngestError::Shape(format!("bad contact entry `{c}`")))
            })
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push(row);
    }
    ContactMatrix::from_rows(rows).map_err(|e| IngestError::Shape(e.to_string()))
}

/// Reads `age_bin_start,population` with one row per five-year class.
pub fn read_population_pyramid<R: Read>(reader: R) -> Result<AgeStructure, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let c_start = column(&headers, "age_bin_start")?;
    let c_pop = column(&headers, "population")?;
    let mut bins = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let start: u32 = rec
            .get(c_start)
            .unwrap_or("")
            .parse()
            .map_err(|_| IngestError::Shape(format!("bad age_bin_start on line {}", line_of(&rec))))?;
        let pop = parse_count(rec.get(c_pop).unwrap_or(""), "population")
            .map_err(IngestError::Shape)?;
        bins.push((start, pop));
    }
    bins.sort_by_key(|b| b.0);
    if bins.len() != AGE_CLASSES {
        return Err(IngestError::Shape(format!(
            "expected {AGE_CLASSES} age bins, found {}",
            bins.len()
        )));
    }
    AgeStructure::new(bins.into_iter().map(|b| b.1).collect())
        .map_err(|e| IngestError::Shape(e.to_string()))
}
