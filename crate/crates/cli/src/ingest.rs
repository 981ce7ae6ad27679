//! Input file discovery and classification for `epiforge ingest`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use epiforge_core::datastore::{read_country_meta, CONTACT_SETTINGS};
use epiforge_core::timeseries::ingest::{
    read_cases, read_contact_matrix, read_covariates, read_population_pyramid, RowError,
};
use epiforge_core::{ContactMatrices, ContactMatrix, DataStore};
use serde::Serialize;

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FileKind {
    Metadata,
    Cases,
    Covariates,
    Pyramids,
    ContactMatrix,
}

#[derive(Debug, Clone, Serialize)]
pub struct FileReport {
    pub path: String,
    pub kind: FileKind,
    pub rows: usize,
    pub row_errors: Vec<RowError>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct IngestReport {
    pub files: Vec<FileReport>,
    /// Codes with data but no metadata row.
    pub unknown_countries: Vec<String>,
    pub warnings: Vec<String>,
}

impl IngestReport {
    pub fn problem_count(&self) -> usize {
        self.warnings.len()
            + self
                .files
                .iter()
                .map(|f| f.row_errors.len() + f.warnings.len())
                .sum::<usize>()
    }

    /// One row per problem: `path,kind,line,message`.
    pub fn to_csv(&self) -> Result<Vec<u8>, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["path", "kind", "line", "message"])?;
        for f in &self.files {
            let kind = serde_json::to_value(f.kind).expect("kind serializes");
            let kind = kind.as_str().unwrap_or_default();
            for e in &f.row_errors {
                w.write_record([f.path.as_str(), kind, &e.line.to_string(), &e.message])?;
            }
            for msg in &f.warnings {
                w.write_record([f.path.as_str(), kind, "", msg.as_str()])?;
            }
        }
        for msg in &self.warnings {
            w.write_record(["", "", "", msg.as_str()])?;
        }
        w.into_inner().map_err(|e| e.into_error().into())
    }
}

/// Expands directories (recursively, `.csv` only) and checks that every path exists.
pub fn expand(paths: &[PathBuf]) -> Result<Vec<PathBuf>, Failure> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            walk(p, &mut out)?;
        } else if p.is_file() {
            out.push(p.clone());
        } else {
            return Err(Failure::new(format!("cannot read {}: no such file or directory", p.display())));
        }
    }
    Ok(out)
}

fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), Failure> {
    let read = |e: std::io::Error| Failure::new(format!("cannot read {}: {e}", dir.display()));
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(read)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()
        .map_err(read)?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            walk(&p, out)?;
        } else if p.extension().and_then(|e| e.to_str()) == Some("csv") {
            out.push(p);
        }
    }
    Ok(())
}

pub fn classify(path: &Path, text: &str) -> Result<FileKind, Failure> {
    let first = text.lines().next().unwrap_or("");
    let cols: Vec<&str> = first.split(',').map(str::trim).collect();
    let has = |c: &str| cols.contains(&c);
    if has("confirmed") {
        Ok(FileKind::Cases)
    } else if has("temperature_c") || has("humidity_pct") {
        Ok(FileKind::Covariates)
    } else if has("age_bin_start") {
        Ok(FileKind::Pyramids)
    } else if has("country_code") && has("name") {
        Ok(FileKind::Metadata)
    } else if !first.is_empty() && cols.iter().all(|c| c.parse::<f64>().is_ok()) {
        Ok(FileKind::ContactMatrix)
    } else {
        Err(Failure::new(format!(
            "{}: unrecognised file layout (header `{first}`)",
            path.display()
        )))
    }
}

struct Loaded {
    path: PathBuf,
    kind: FileKind,
    text: String,
}

pub fn run(store: &mut DataStore, paths: &[PathBuf]) -> Result<IngestReport, Failure> {
    let mut loaded = Vec::new();
    for path in expand(paths)? {
        let text = fs::read_to_string(&path)
            .map_err(|e| Failure::new(format!("cannot read {}: {e}", path.display())))?;
        let kind = classify(&path, &text)?;
        loaded.push(Loaded { path, kind, text });
    }
    // metadata first so unknown-country flags see it
    loaded.sort_by_key(|l| l.kind);

    let mut files = Vec::new();
    let mut warnings = Vec::new();
    let mut contacts: BTreeMap<String, ContactMatrix> = BTreeMap::new();
    for l in &loaded {
        let shown = l.path.display().to_string();
        let parse = |e: &dyn std::fmt::Display| Failure::new(format!("{shown}: {e}"));
        let store_err = |e: epiforge_core::datastore::StoreError| Failure::new(e.to_string());
        let mut report = FileReport {
            path: shown.clone(),
            kind: l.kind,
            rows: 0,
            row_errors: Vec::new(),
            warnings: Vec::new(),
        };
        match l.kind {
            FileKind::Metadata => {
                let load = read_country_meta(l.text.as_bytes()).map_err(|e| parse(&e))?;
                report.rows = load.countries.len();
                report.row_errors = load.row_errors;
                report.warnings = load.warnings;
                let mut meta = store.country_meta().clone();
                meta.extend(load.countries);
                store.set_country_meta(meta).map_err(store_err)?;
            }
            FileKind::Cases => {
                let cases = read_cases(l.text.as_bytes()).map_err(|e| parse(&e))?;
                report.rows = cases.row_count();
                report.row_errors = cases.row_errors;
                report.warnings = cases.warnings;
                store
                    .upsert_daily_summaries(cases.summaries.into_values().flatten())
                    .map_err(store_err)?;
            }
            FileKind::Covariates => {
                let cov = read_covariates(l.text.as_bytes()).map_err(|e| parse(&e))?;
                report.rows = cov.rows.values().map(Vec::len).sum();
                report.row_errors = cov.row_errors;
                store
                    .upsert_covariates(cov.rows.into_values().flatten())
                    .map_err(store_err)?;
            }
            FileKind::Pyramids => {
                for (code, csv_text) in split_pyramids(&l.path, &l.text)? {
                    let structure = read_population_pyramid(csv_text.as_bytes())
                        .map_err(|e| parse(&format!("{code}: {e}")))?;
                    store.save_pyramid(&code, &structure).map_err(store_err)?;
                    report.rows += structure.classes();
                }
            }
            FileKind::ContactMatrix => {
                let setting = l
                    .path
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .filter(|s| CONTACT_SETTINGS.contains(s))
                    .ok_or_else(|| {
                        parse(&format!(
                            "contact matrix files must be named after a setting ({})",
                            CONTACT_SETTINGS.join(", ")
                        ))
                    })?;
                let m = read_contact_matrix(l.text.as_bytes()).map_err(|e| parse(&e))?;
                report.rows = m.size();
                contacts.insert(setting.to_string(), m);
            }
        }
        files.push(report);
    }

    if !contacts.is_empty() {
        let existing = store.load_contact_matrices().map_err(|e| Failure::new(e.to_string()))?;
        let mut pick = |name: &str, old: Option<&ContactMatrix>| contacts.remove(name).or_else(|| old.cloned());
        let parts = [
            pick("home", existing.as_ref().map(|c| &c.home)),
            pick("school", existing.as_ref().map(|c| &c.school)),
            pick("work", existing.as_ref().map(|c| &c.work)),
            pick("other", existing.as_ref().map(|c| &c.other)),
        ];
        match parts {
            [Some(h), Some(s), Some(w), Some(o)] => {
                let cm = ContactMatrices::new(h, s, w, o).map_err(|e| Failure::new(e.to_string()))?;
                store.save_contact_matrices(&cm).map_err(|e| Failure::new(e.to_string()))?;
            }
            _ => warnings.push(
                "contact matrices not saved: home, school, work and other are all required".into(),
            ),
        }
    }

    let unknown: Vec<String> = store.unknown_codes().iter().cloned().collect();
    for code in &unknown {
        warnings.push(format!("country {code} has data but no metadata row"));
    }
    Ok(IngestReport {
        files,
        unknown_countries: unknown,
        warnings,
    })
}

/// Splits `country_code,age_bin_start,population` into one per-country CSV.
fn split_pyramids(path: &Path, text: &str) -> Result<BTreeMap<String, String>, Failure> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let fail = |e: &dyn std::fmt::Display| Failure::new(format!("{}: {e}", path.display()));
    let headers = rdr.headers().map_err(|e| fail(&e))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| fail(&format!("missing required column `{name}`")))
    };
    let (c_code, c_start, c_pop) = (col("country_code")?, col("age_bin_start")?, col("population")?);
    let mut out: BTreeMap<String, String> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| fail(&e))?;
        let body = out
            .entry(rec[c_code].to_string())
            .or_insert_with(|| "age_bin_start,population\n".to_string());
        body.push_str(&format!("{},{}\n", &rec[c_start], &rec[c_pop]));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn headers_decide_the_kind() {
        let p = Path::new("x.csv");
        let k = |t: &str| classify(p, t).ok();
        assert_eq!(k("country_code,date,confirmed,deaths,recovered\n"), Some(FileKind::Cases));
        assert_eq!(k("country_code,date,temperature_c,humidity_pct\n"), Some(FileKind::Covariates));
        assert_eq!(k("country_code,age_bin_start,population\n"), Some(FileKind::Pyramids));
        assert_eq!(k("country_code,name,area,population\n"), Some(FileKind::Metadata));
        assert_eq!(k("0.5,1,2\n"), Some(FileKind::ContactMatrix));
        assert_eq!(k("a,b\n"), None);
        assert_eq!(k(""), None);
    }

    #[test]
    fn pyramids_split_per_country() {
        let t = "country_code,age_bin_start,population\nAA,0,10\nBB,0,20\nAA,5,11\n";
        let m = split_pyramids(Path::new("p.csv"), t).unwrap();
        assert_eq!(m["AA"], "age_bin_start,population\n0,10\n5,11\n");
        assert_eq!(m.len(), 2);
    }
}
