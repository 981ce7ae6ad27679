//! File-backed store for daily summaries, country metadata, covariates, fits,
//! contact matrices, population pyramids and study results.
//!
//! Layout under the root directory:
//!
//! ```text
//! countries.csv
//! daily/<CC>.csv
//! covariates/<CC>.csv
//! params/<CC>.json
//! pyramid/<CC>.csv
//! contact/{home,school,work,other}.csv
//! studies/<pair>.json
//! scenarios.json            (optional δ overrides)
//! ```
//!
//! Every file is rewritten whole and in sorted order, so reopening a store and
//! saving it again reproduces the same bytes.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::FitResult;
use crate::epi_model::{AgeStructure, ContactMatrices};
use crate::scenario::DeltaPresets;
use crate::stats::StudySummary;
use crate::timeseries::ingest::{
    read_contact_matrix, read_population_pyramid, CovariateRow, RowError,
};
use crate::timeseries::{DailySummary, DatedSeries, Metric, SeriesForm, SeriesSource};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StoreError {
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("data directory {0} does not exist or is not a directory")]
    NotADirectory(PathBuf),
    #[error("invalid range: {from} is after {to}")]
    InvalidRange { from: NaiveDate, to: NaiveDate },
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> StoreError {
    StoreError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn parse_err(path: &Path, e: impl std::fmt::Display) -> StoreError {
    StoreError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Static facts about a country. Absent cells stay `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountryMeta {
    pub country_code: String,
    pub name: String,
    /// Units of 100 km².
    pub area: Option<f64>,
    pub population: Option<f64>,
    pub gdp: Option<f64>,
    pub literacy: Option<f64>,
    pub mean_temperature: Option<f64>,
    pub mean_rainfall: Option<f64>,
    pub mean_humidity: Option<f64>,
    pub pollution_index: Option<f64>,
    pub healthcare_index: Option<f64>,
    pub food_security_index: Option<f64>,
    pub hospital_beds_per_10m: Option<f64>,
    /// Tests performed per million population.
    #[serde(default)]
    pub tests_per_million: Option<f64>,
}

impl CountryMeta {
    pub fn new(country_code: &str, name: &str) -> Self {
        Self {
            country_code: country_code.to_string(),
            name: name.to_string(),
            area: None,
            population: None,
            gdp: None,
            literacy: None,
            mean_temperature: None,
            mean_rainfall: None,
            mean_humidity: None,
            pollution_index: None,
            healthcare_index: None,
            food_security_index: None,
            hospital_beds_per_10m: None,
            tests_per_million: None,
        }
    }

    fn validate(&self) -> Result<(), String> {
        if self.country_code.trim().is_empty() {
            return Err("empty country_code".into());
        }
        let positive = [("population", self.population), ("area", self.area)];
        for (name, v) in positive {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(format!("{name} must be positive, got {v}"));
                }
            }
        }
        let percent = [
            ("literacy", self.literacy),
            ("mean_humidity", self.mean_humidity),
            ("healthcare_index", self.healthcare_index),
            ("food_security_index", self.food_security_index),
        ];
        for (name, v) in percent {
            if let Some(v) = v {
                if !(0.0..=100.0).contains(&v) {
                    return Err(format!("{name} must lie in [0, 100], got {v}"));
                }
            }
        }
        let non_negative = [
            ("gdp", self.gdp),
            ("mean_rainfall", self.mean_rainfall),
            ("pollution_index", self.pollution_index),
            ("hospital_beds_per_10m", self.hospital_beds_per_10m),
            ("tests_per_million", self.tests_per_million),
        ];
        for (name, v) in non_negative {
            if let Some(v) = v {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(format!("{name} must be non-negative, got {v}"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetaLoad {
    pub countries: BTreeMap<String, CountryMeta>,
    pub row_errors: Vec<RowError>,
    pub warnings: Vec<String>,
}

/// Parses a `countries.csv` stream. Bad rows are collected and skipped; a
/// repeated code replaces the earlier row and leaves a warning.
pub fn read_country_meta<R: Read>(reader: R) -> Result<MetaLoad, csv::Error> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut out = MetaLoad::default();
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
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let parsed = rec
            .deserialize::<CountryMeta>(Some(&headers))
            .map_err(|e| e.to_string())
            .and_then(|m| m.validate().map(|_| m));
        match parsed {
            Ok(m) => {
                if out.countries.contains_key(&m.country_code) {
                    out.warnings.push(format!(
                        "line {line}: duplicate country code {}, keeping the later row",
                        m.country_code
                    ));
                }
                out.countries.insert(m.country_code.clone(), m);
            }
            Err(message) => out.row_errors.push(RowError { line, message }),
        }
    }
    Ok(out)
}

/// Reads country metadata from a CSV file.
pub fn load_country_meta(path: &Path) -> Result<MetaLoad, StoreError> {
    let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
    read_country_meta(file).map_err(|e| parse_err(path, e))
}

/// Result of a write: whether the country code was missing from the metadata.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Upserted {
    pub unknown_country: bool,
}

pub const CONTACT_SETTINGS: [&str; 4] = ["home", "school", "work", "other"];

#[derive(Debug)]
pub struct DataStore {
    root: PathBuf,
    daily: BTreeMap<String, BTreeMap<NaiveDate, DailySummary>>,
    covariates: BTreeMap<String, BTreeMap<NaiveDate, CovariateRow>>,
    meta: BTreeMap<String, CountryMeta>,
    unknown_codes: BTreeSet<String>,
    load_warnings: Vec<String>,
}

fn read_csv_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, StoreError> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    rdr.deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| parse_err(path, e))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

fn csv_bytes<T: Serialize>(rows: impl IntoIterator<Item = T>, empty_header: &str) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::WriterBuilder::new().has_headers(true).from_writer(Vec::new());
    let mut any = false;
    for row in rows {
        w.serialize(row)?;
        any = true;
    }
    let mut bytes = w.into_inner().map_err(|e| e.into_error())?;
    if !any {
        bytes = format!("{empty_header}\n").into_bytes();
    }
    Ok(bytes)
}

const DAILY_HEADER: &str =
    "country_code,date,affected,dead,recovered,newly_affected,newly_dead,newly_recovered";
const COVARIATE_HEADER: &str = "country_code,date,temperature_c,humidity_pct";
const META_HEADER: &str = "country_code,name,area,population,gdp,literacy,mean_temperature,mean_rainfall,mean_humidity,pollution_index,healthcare_index,food_security_index,hospital_beds_per_10m,tests_per_million";

fn is_safe_key(key: &str) -> bool {
    !key.is_empty()
        && key
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

fn csv_stems(dir: &Path, ext: &str) -> Result<Vec<(String, PathBuf)>, StoreError> {
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| io_err(dir, e))? {
        let path = entry.map_err(|e| io_err(dir, e))?.path();
        if path.extension().and_then(|e| e.to_str()) == Some(ext) {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                out.push((stem.to_string(), path.clone()));
            }
        }
    }
    out.sort();
    Ok(out)
}

impl DataStore {
    /// Creates the directory if needed and opens it.
    pub fn create(root: impl AsRef<Path>) -> Result<Self, StoreError> {
        let root = root.as_ref();
        fs::create_dir_all(root).map_err(|e| io_err(root, e))?;
        Self::open(root)
    }

    /// Opens an existing store and indexes its contents.
    pub fn open(root: impl AsRef<Path>) -> Result<Self, StoreError> {
        let root = root.as_ref().to_path_buf();
        if !root.is_dir() {
            return Err(StoreError::NotADirectory(root));
        }
        let mut store = Self {
            root,
            daily: BTreeMap::new(),
            covariates: BTreeMap::new(),
            meta: BTreeMap::new(),
            unknown_codes: BTreeSet::new(),
            load_warnings: Vec::new(),
        };
        let meta_path = store.root.join("countries.csv");
        if meta_path.is_file() {
            let load = load_country_meta(&meta_path)?;
            store.load_warnings.extend(load.warnings);
            store.load_warnings.extend(
                load.row_errors
                    .iter()
                    .map(|e| format!("countries.csv line {}: {}", e.line, e.message)),
            );
            store.meta = load.countries;
        }
        for (code, path) in csv_stems(&store.root.join("daily"), "csv")? {
            let rows: Vec<DailySummary> = read_csv_rows(&path)?;
            store
                .daily
                .insert(code, rows.into_iter().map(|r| (r.date, r)).collect());
        }
        for (code, path) in csv_stems(&store.root.join("covariates"), "csv")? {
            let rows: Vec<CovariateRow> = read_csv_rows(&path)?;
            store
                .covariates
                .insert(code, rows.into_iter().map(|r| (r.date, r)).collect());
        }
        store.unknown_codes = store
            .daily
            .keys()
            .chain(store.covariates.keys())
            .filter(|c| !store.meta.contains_key(*c))
            .cloned()
            .collect();
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Problems found while opening (metadata row errors, duplicates).
    pub fn load_warnings(&self) -> &[String] {
        &self.load_warnings
    }

    /// Codes with stored data but no metadata row.
    pub fn validation_report(&self) -> Vec<String> {
        self.unknown_codes
            .iter()
            .map(|c| format!("country code {c} has data but no metadata"))
            .collect()
    }

    pub fn unknown_codes(&self) -> &BTreeSet<String> {
        &self.unknown_codes
    }

    fn flag(&mut self, code: &str) -> bool {
        let unknown = !self.meta.contains_key(code);
        if unknown {
            self.unknown_codes.insert(code.to_string());
        }
        unknown
    }

    fn key_path(&self, dir: &str, code: &str, ext: &str) -> Result<PathBuf, StoreError> {
        let path = self.root.join(dir).join(format!("{code}.{ext}"));
        if !is_safe_key(code) {
            return Err(parse_err(&path, format!("`{code}` is not a valid key")));
        }
        Ok(path)
    }

    fn flush_daily(&self, code: &str) -> Result<(), StoreError> {
        let path = self.key_path("daily", code, "csv")?;
        let rows = self.daily.get(code).into_iter().flat_map(|m| m.values());
        let bytes = csv_bytes(rows, DAILY_HEADER).map_err(|e| parse_err(&path, e))?;
        write_atomic(&path, &bytes)
    }

    fn flush_covariates(&self, code: &str) -> Result<(), StoreError> {
        let path = self.key_path("covariates", code, "csv")?;
        let rows = self.covariates.get(code).into_iter().flat_map(|m| m.values());
        let bytes = csv_bytes(rows, COVARIATE_HEADER).map_err(|e| parse_err(&path, e))?;
        write_atomic(&path, &bytes)
    }

    /// Inserts or replaces the row keyed by (country, date).
    pub fn upsert_daily_summary(&mut self, summary: DailySummary) -> Result<Upserted, StoreError> {
        let code = summary.country_code.clone();
        self.key_path("daily", &code, "csv")?;
        self.daily
            .entry(code.clone())
            .or_default()
            .insert(summary.date, summary);
        self.flush_daily(&code)?;
        Ok(Upserted {
            unknown_country: self.flag(&code),
        })
    }

    /// Bulk form of [`Self::upsert_daily_summary`]; each touched partition is written once.
    /// Returns the codes that are missing from the metadata.
    pub fn upsert_daily_summaries(
        &mut self,
        summaries: impl IntoIterator<Item = DailySummary>,
    ) -> Result<BTreeSet<String>, StoreError> {
        let mut touched = BTreeSet::new();
        for s in summaries {
            self.key_path("daily", &s.country_code, "csv")?;
            touched.insert(s.country_code.clone());
            self.daily
                .entry(s.country_code.clone())
                .or_default()
                .insert(s.date, s);
        }
        let mut unknown = BTreeSet::new();
        for code in &touched {
            self.flush_daily(code)?;
            if self.flag(code) {
                unknown.insert(code.clone());
            }
        }
        Ok(unknown)
    }

    /// Stored rows with `from <= date <= to`, ascending.
    pub fn query_range(
        &self,
        country: &str,
        from: NaiveDate,
        to: NaiveDate,
    ) -> Result<Vec<DailySummary>, StoreError> {
        if from > to {
            return Err(StoreError::InvalidRange { from, to });
        }
        Ok(self
            .daily
            .get(country)
            .map(|m| m.range(from..=to).map(|(_, s)| s.clone()).collect())
            .unwrap_or_default())
    }

    /// All stored rows for `country`, ascending.
    pub fn history(&self, country: &str) -> Vec<DailySummary> {
        self.daily
            .get(country)
            .map(|m| m.values().cloned().collect())
            .unwrap_or_default()
    }

    pub fn latest(&self, country: &str) -> Option<&DailySummary> {
        self.daily.get(country).and_then(|m| m.values().next_back())
    }

    /// Codes that have daily data.
    pub fn countries_with_data(&self) -> Vec<String> {
        self.daily.keys().cloned().collect()
    }

    pub fn country_meta(&self) -> &BTreeMap<String, CountryMeta> {
        &self.meta
    }

    pub fn meta(&self, code: &str) -> Option<&CountryMeta> {
        self.meta.get(code)
    }

    /// Replaces the metadata table and writes `countries.csv`.
    pub fn set_country_meta(&mut self, meta: BTreeMap<String, CountryMeta>) -> Result<(), StoreError> {
        let path = self.root.join("countries.csv");
        let bytes = csv_bytes(meta.values(), META_HEADER).map_err(|e| parse_err(&path, e))?;
        write_atomic(&path, &bytes)?;
        self.meta = meta;
        self.unknown_codes
            .retain(|c| !self.meta.contains_key(c));
        Ok(())
    }

    pub fn upsert_covariates(
        &mut self,
        rows: impl IntoIterator<Item = CovariateRow>,
    ) -> Result<BTreeSet<String>, StoreError> {
        let mut touched = BTreeSet::new();
        for r in rows {
            self.key_path("covariates", &r.country_code, "csv")?;
            touched.insert(r.country_code.clone());
            self.covariates
                .entry(r.country_code.clone())
                .or_default()
                .insert(r.date, r);
        }
        let mut unknown = BTreeSet::new();
        for code in &touched {
            self.flush_covariates(code)?;
            if self.flag(code) {
                unknown.insert(code.clone());
            }
        }
        Ok(unknown)
    }

    pub fn countries_with_covariates(&self) -> Vec<String> {
        self.covariates.keys().cloned().collect()
    }

    /// One covariate as a level series; days where it is absent are skipped.
    pub fn covariate_series(&self, country: &str, metric: Metric) -> Option<DatedSeries> {
        let rows = self.covariates.get(country)?;
        let points: Vec<(NaiveDate, f64)> = rows
            .values()
            .filter_map(|r| {
                let v = match metric {
                    Metric::Temperature => r.temperature_c,
                    Metric::Humidity => r.humidity_pct,
                    _ => None,
                }?;
                Some((r.date, v))
            })
            .collect();
        if points.is_empty() {
            return None;
        }
        DatedSeries::with_form(country, metric, SeriesForm::Level, points).ok()
    }

    pub fn save_fit(&self, fit: &FitResult) -> Result<PathBuf, StoreError> {
        let path = self.key_path("params", &fit.country_code, "json")?;
        let mut bytes = serde_json::to_vec_pretty(fit).map_err(|e| parse_err(&path, e))?;
        bytes.push(b'\n');
        write_atomic(&path, &bytes)?;
        Ok(path)
    }

    pub fn load_fit(&self, country: &str) -> Result<Option<FitResult>, StoreError> {
        let path = self.key_path("params", country, "json")?;
        if !path.is_file() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
        serde_json::from_str(&text)
            .map(Some)
            .map_err(|e| parse_err(&path, e))
    }

    pub fn save_contact_matrices(&self, cm: &ContactMatrices) -> Result<(), StoreError> {
        for (name, m) in CONTACT_SETTINGS.iter().zip([&cm.home, &cm.school, &cm.work, &cm.other]) {
            let path = self.root.join("contact").join(format!("{name}.csv"));
            let mut text = String::new();
            for row in m.rows() {
                let cells: Vec<String> = row.iter().map(f64::to_string).collect();
                text.push_str(&cells.join(","));
                text.push('\n');
            }
            write_atomic(&path, text.as_bytes())?;
        }
        Ok(())
    }

    /// `None` when no matrices have been stored.
    pub fn load_contact_matrices(&self) -> Result<Option<ContactMatrices>, StoreError> {
        let dir = self.root.join("contact");
        if !dir.join("home.csv").is_file() {
            return Ok(None);
        }
        let mut ms = Vec::with_capacity(4);
        for name in CONTACT_SETTINGS {
            let path = dir.join(format!("{name}.csv"));
            let file = fs::File::open(&path).map_err(|e| io_err(&path, e))?;
            ms.push(read_contact_matrix(file).map_err(|e| parse_err(&path, e))?);
        }
        let other = ms.pop().unwrap();
        let work = ms.pop().unwrap();
        let school = ms.pop().unwrap();
        let home = ms.pop().unwrap();
        ContactMatrices::new(home, school, work, other)
            .map(Some)
            .map_err(|e| parse_err(&dir, e))
    }

    pub fn save_pyramid(&self, country: &str, structure: &AgeStructure) -> Result<(), StoreError> {
        let path = self.key_path("pyramid", country, "csv")?;
        let mut text = String::from("age_bin_start,population\n");
        for (k, p) in structure.populations().iter().enumerate() {
            text.push_str(&format!("{},{}\n", k * 5, p));
        }
        write_atomic(&path, text.as_bytes())
    }

    pub fn load_pyramid(&self, country: &str) -> Result<Option<AgeStructure>, StoreError> {
        let path = self.key_path("pyramid", country, "csv")?;
        if !path.is_file() {
            return Ok(None);
        }
        let file = fs::File::open(&path).map_err(|e| io_err(&path, e))?;
        read_population_pyramid(file)
            .map(Some)
            .map_err(|e| parse_err(&path, e))
    }

    pub fn save_study(&self, summary: &StudySummary) -> Result<PathBuf, StoreError> {
        let path = self.key_path("studies", &summary.pair, "json")?;
        let mut bytes = serde_json::to_vec_pretty(summary).map_err(|e| parse_err(&path, e))?;
        bytes.push(b'\n');
        write_atomic(&path, &bytes)?;
        Ok(path)
    }

    pub fn load_study(&self, pair: &str) -> Result<Option<StudySummary>, StoreError> {
        let Ok(path) = self.key_path("studies", pair, "json") else {
            return Ok(None);
        };
        if !path.is_file() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
        serde_json::from_str(&text)
            .map(Some)
            .map_err(|e| parse_err(&path, e))
    }

    /// Optional δ overrides in `scenarios.json`; defaults otherwise.
    pub fn delta_presets(&self) -> Result<DeltaPresets, StoreError> {
        let path = self.root.join("scenarios.json");
        if !path.is_file() {
            return Ok(DeltaPresets::default());
        }
        let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
        DeltaPresets::from_json(&text).map_err(|e| parse_err(&path, e))
    }

    /// Writes a report file under the store root and returns its path.
    pub fn write_report(&self, relative: &str, bytes: &[u8]) -> Result<PathBuf, StoreError> {
        let path = self.root.join(relative);
        write_atomic(&path, bytes)?;
        Ok(path)
    }
}

impl SeriesSource for DataStore {
    fn value_on(
        &self,
        country_code: &str,
        metric: Metric,
        form: SeriesForm,
        date: NaiveDate,
    ) -> Result<Option<f64>, String> {
        if matches!(metric, Metric::Temperature | Metric::Humidity) {
            let row = self.covariates.get(country_code).and_then(|m| m.get(&date));
            return Ok(row.and_then(|r| match metric {
                Metric::Temperature => r.temperature_c,
                _ => r.humidity_pct,
            }));
        }
        let Some(s) = self.daily.get(country_code).and_then(|m| m.get(&date)) else {
            return Ok(None);
        };
        Ok(match (metric, form) {
            (Metric::Confirmed, SeriesForm::Cumulative) => Some(s.affected),
            (Metric::Deaths, SeriesForm::Cumulative) => Some(s.dead),
            (Metric::Recovered, SeriesForm::Cumulative) => Some(s.recovered),
            (Metric::Confirmed, SeriesForm::Daily) => Some(s.newly_affected),
            (Metric::Deaths, SeriesForm::Daily) => Some(s.newly_dead),
            (Metric::Recovered, SeriesForm::Daily) => Some(s.newly_recovered),
            (Metric::Active, SeriesForm::Level) => Some(s.active()),
            _ => None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn day(d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2020, 4, d).unwrap()
    }

    fn summary(code: &str, d: u32, affected: f64) -> DailySummary {
        DailySummary {
            country_code: code.into(),
            date: day(d),
            affected,
            dead: 1.0,
            recovered: 2.0,
            newly_affected: 3.0,
            newly_dead: 0.0,
            newly_recovered: 1.0 / 3.0,
        }
    }

    fn meta_csv() -> &'static str {
        "country_code,name,area,population,gdp,literacy,mean_temperature,mean_rainfall,mean_humidity,pollution_index,healthcare_index,food_security_index,hospital_beds_per_10m\n\
         AA,Alpha,10,1000000,1.5,90,20,1000,70,50,60,70,300\n\
         BB,Beta,20,2000000,,,25,,,,,,\n\
         CC,Gamma,30,3000000,1,1,1,1,1,1,1,1,1\n\
         DD,Delta,40,4000000,1,1,1,1,1,1,1,1,1\n\
         EE,Epsilon,50,5000000,1,1,1,1,1,1,1,1,1\n"
    }

    #[test]
    fn write_then_read_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = DataStore::create(dir.path()).unwrap();
        let row = summary("AA", 1, 10.0);
        s.upsert_daily_summary(row.clone()).unwrap();
        let back = DataStore::open(dir.path()).unwrap();
        assert_eq!(back.query_range("AA", day(1), day(1)).unwrap(), vec![row]);
    }

    #[test]
    fn double_write_keeps_one_record() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = DataStore::create(dir.path()).unwrap();
        s.upsert_daily_summary(summary("AA", 1, 10.0)).unwrap();
        s.upsert_daily_summary(summary("AA", 1, 12.0)).unwrap();
        let rows = s.query_range("AA", day(1), day(30)).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].affected, 12.0);
    }

    #[test]
    fn unknown_code_is_stored_and_flagged() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = DataStore::create(dir.path()).unwrap();
        s.set_country_meta(read_country_meta(meta_csv().as_bytes()).unwrap().countries)
            .unwrap();
        assert!(!s.upsert_daily_summary(summary("AA", 1, 1.0)).unwrap().unknown_country);
        assert!(s.upsert_daily_summary(summary("XQ", 1, 1.0)).unwrap().unknown_country);
        assert_eq!(s.history("XQ").len(), 1);
        assert_eq!(s.validation_report().len(), 1);
        assert!(s.validation_report()[0].contains("XQ"));
    }

    #[test]
    fn query_range_basics() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = DataStore::create(dir.path()).unwrap();
        assert!(s.query_range("AA", day(1), day(5)).unwrap().is_empty());
        for d in [3, 1, 2, 9] {
            s.upsert_daily_summary(summary("AA", d, d as f64)).unwrap();
        }
        let rows = s.query_range("AA", day(1), day(5)).unwrap();
        assert_eq!(rows.iter().map(|r| r.date).collect::<Vec<_>>(), [day(1), day(2), day(3)]);
        assert_eq!(
            s.query_range("AA", day(5), day(1)),
            Err(StoreError::InvalidRange { from: day(5), to: day(1) })
        );
    }

    #[test]
    fn adjacent_ranges_union() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = DataStore::create(dir.path()).unwrap();
        for d in 1..=20 {
            if d % 3 != 0 {
                s.upsert_daily_summary(summary("AA", d, d as f64)).unwrap();
            }
        }
        for b in 1..20 {
            let mut left = s.query_range("AA", day(1), day(b)).unwrap();
            left.extend(s.query_range("AA", day(b + 1), day(20)).unwrap());
            assert_eq!(left, s.query_range("AA", day(1), day(20)).unwrap());
        }
    }

    #[test]
    fn meta_fixture_loads_five() {
        let load = read_country_meta(meta_csv().as_bytes()).unwrap();
        assert_eq!(load.countries.len(), 5);
        assert!(load.row_errors.is_empty());
        let b = &load.countries["BB"];
        assert_eq!(b.mean_humidity, None);
        assert_eq!(b.mean_temperature, Some(25.0));
    }

    #[test]
    fn duplicate_code_last_wins_with_warning() {
        let text = format!("{}AA,Alpha Two,10,1500000,,,,,,,,,\n", meta_csv());
        let load = read_country_meta(text.as_bytes()).unwrap();
        assert_eq!(load.countries.len(), 5);
        assert_eq!(load.countries["AA"].name, "Alpha Two");
        assert_eq!(load.warnings.len(), 1);
    }

    #[test]
    fn malformed_meta_row_is_collected() {
        let text = format!("{}FF,Phi,abc,100,,,,,,,,,\nGG,Gee,1,-5,,,,,,,,,\n", meta_csv());
        let load = read_country_meta(text.as_bytes()).unwrap();
        assert_eq!(load.countries.len(), 5);
        assert_eq!(load.row_errors.len(), 2);
    }

    #[test]
    fn reopen_and_rewrite_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = DataStore::create(dir.path()).unwrap();
        s.set_country_meta(read_country_meta(meta_csv().as_bytes()).unwrap().countries)
            .unwrap();
        for d in 1..=5 {
            s.upsert_daily_summary(summary("AA", d, 0.1 * d as f64)).unwrap();
        }
        let daily = fs::read(dir.path().join("daily/AA.csv")).unwrap();
        let meta = fs::read(dir.path().join("countries.csv")).unwrap();
        let mut again = DataStore::open(dir.path()).unwrap();
        let m = again.country_meta().clone();
        again.set_country_meta(m).unwrap();
        again.upsert_daily_summaries(again.history("AA")).unwrap();
        assert_eq!(fs::read(dir.path().join("daily/AA.csv")).unwrap(), daily);
        assert_eq!(fs::read(dir.path().join("countries.csv")).unwrap(), meta);
    }

    #[test]
    fn missing_directory_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            DataStore::open(dir.path().join("nope")),
            Err(StoreError::NotADirectory(_))
        ));
    }

    #[test]
    fn path_like_codes_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = DataStore::create(dir.path()).unwrap();
        assert!(s.upsert_daily_summary(summary("../x", 1, 1.0)).is_err());
    }

    #[test]
    fn serves_as_series_source() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = DataStore::create(dir.path()).unwrap();
        s.upsert_daily_summary(summary("AA", 2, 10.0)).unwrap();
        assert_eq!(
            s.value_on("AA", Metric::Confirmed, SeriesForm::Cumulative, day(2)),
            Ok(Some(10.0))
        );
        assert_eq!(s.value_on("AA", Metric::Confirmed, SeriesForm::Cumulative, day(3)), Ok(None));
    }
}
