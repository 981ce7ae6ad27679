use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use epiforge_core::scenario::DeltaPresets;
use epiforge_core::stats::write_study_csv;
use epiforge_core::study::{run_pair, StudyError};
use epiforge_core::workflow::{self, FitConfigFile, RatesDocument};
use epiforge_core::{
    DataStore, FactorPair, FitResult, ScenarioKind, StudySummary, TransmissionForm,
};
use epiforge_server::{AppState, Fetcher, FileFetcher, NoUpstream, ServiceConfig};
use serde::Serialize;

use crate::{ingest as ingest_files, Failure};

fn open(dir: &Path) -> Result<DataStore, Failure> {
    let store = DataStore::open(dir)
        .map_err(|e| Failure::new(format!("cannot open data directory {}: {e}", dir.display())))?;
    for w in store.load_warnings() {
        eprintln!("warning: {w}");
    }
    Ok(store)
}

fn pretty<T: Serialize>(value: &T) -> Result<Vec<u8>, Failure> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Writes `<stem>.json` and its `<stem>.csv` twin under the store root.
fn write_pair(store: &DataStore, stem: &str, json: &[u8], csv: &[u8]) -> Result<PathBuf, Failure> {
    let path = store.write_report(&format!("{stem}.json"), json)?;
    store.write_report(&format!("{stem}.csv"), csv)?;
    Ok(path)
}

pub fn ingest(dir: &Path, paths: &[PathBuf]) -> Result<(), Failure> {
    // fail on missing inputs before touching the store
    ingest_files::expand(paths)?;
    let mut store = DataStore::create(dir)?;
    let report = ingest_files::run(&mut store, paths)?;
    for f in &report.files {
        for e in &f.row_errors {
            eprintln!("warning: {} line {}: {}", f.path, e.line, e.message);
        }
        for w in &f.warnings {
            eprintln!("warning: {}: {w}", f.path);
        }
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let path = write_pair(&store, "reports/ingest", &pretty(&report)?, &report.to_csv()?)?;
    let rows: usize = report.files.iter().map(|f| f.rows).sum();
    println!(
        "ingested {} files, {rows} rows, {} warnings; report: {}",
        report.files.len(),
        report.problem_count(),
        path.display()
    );
    Ok(())
}

fn fit_csv(fit: &FitResult) -> Result<Vec<u8>, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "country_code", "beta", "lambda_r", "lambda_d", "mu", "gamma", "loss", "iterations",
        "converged", "start_date", "end_date",
    ])?;
    let p = fit.params;
    w.write_record([
        fit.country_code.clone(),
        p.beta.to_string(),
        p.lambda_r.to_string(),
        p.lambda_d.to_string(),
        p.mu.to_string(),
        p.gamma.to_string(),
        fit.loss.to_string(),
        fit.iterations.to_string(),
        fit.converged.to_string(),
        fit.start_date.to_string(),
        fit.end_date.to_string(),
    ])?;
    Ok(w.into_inner().map_err(|e| Failure::new(e.to_string()))?)
}

pub fn calibrate(
    dir: &Path,
    countries: &[String],
    all: bool,
    config: Option<&Path>,
    strict_literal: bool,
) -> Result<(), Failure> {
    let store = open(dir)?;
    let file: FitConfigFile = match config {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Failure::new(format!("cannot read {}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| Failure::new(format!("{}: {e}", p.display())))?
        }
        None => FitConfigFile::default(),
    };
    let codes = if all { store.countries_with_data() } else { countries.to_vec() };
    if codes.is_empty() {
        return Err(Failure::new("no countries with case data to calibrate"));
    }
    let results: Vec<_> = std::thread::scope(|s| {
        let handles: Vec<_> = codes
            .iter()
            .map(|code| {
                let mut cfg = file.for_country(code);
                if strict_literal {
                    cfg.form = TransmissionForm::Literal;
                }
                let store = &store;
                s.spawn(move || workflow::calibrate(store, code, &cfg))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("calibration thread")).collect()
    });
    let mut failed = 0;
    for (code, result) in codes.iter().zip(results) {
        match result {
            Ok(fit) => {
                store.save_fit(&fit)?;
                write_pair(&store, &format!("reports/calibration/{code}"), &pretty(&fit)?, &fit_csv(&fit)?)?;
                let p = fit.params;
                println!(
                    "{code}: beta={} lambda_r={} lambda_d={} loss={:.3e} iterations={}{}",
                    p.beta,
                    p.lambda_r,
                    p.lambda_d,
                    fit.loss,
                    fit.iterations,
                    if fit.converged { "" } else { " (not converged)" }
                );
            }
            Err(e) => {
                failed += 1;
                eprintln!("error: {code}: {e}");
            }
        }
    }
    if failed > 0 {
        return Err(Failure::new(format!("{failed} of {} calibrations failed", codes.len())));
    }
    Ok(())
}

fn projection_csv(p: &epiforge_core::Projection) -> Result<Vec<u8>, Failure> {
    let mut buf = Vec::new();
    p.write_csv(&mut buf)?;
    Ok(buf)
}

pub fn project(
    dir: &Path,
    country: &str,
    scenario: Option<ScenarioKind>,
    horizon: u32,
    config: Option<&Path>,
    strict_literal: bool,
) -> Result<(), Failure> {
    let store = open(dir)?;
    let mut inputs = workflow::projection_inputs(&store, country)?;
    if let Some(p) = config {
        let text = std::fs::read_to_string(p)
            .map_err(|e| Failure::new(format!("cannot read {}: {e}", p.display())))?;
        inputs.presets = DeltaPresets::from_json(&text)
            .map_err(|e| Failure::new(format!("{}: {e}", p.display())))?;
    }
    if strict_literal && inputs.form != TransmissionForm::Literal {
        return Err(Failure::new(format!(
            "{country} was calibrated with the normalised transmission term; rerun `epiforge calibrate {country} --strict-literal` first"
        )));
    }
    for w in &inputs.warnings {
        eprintln!("warning: {w}");
    }
    let kinds = match scenario {
        Some(k) => vec![k],
        None => ScenarioKind::ALL.to_vec(),
    };
    for kind in kinds {
        let p = inputs.run(&inputs.config(kind, horizon))?;
        if p.clamp_events > 0 {
            eprintln!(
                "warning: {country} {kind}: {} compartment values were clamped at zero",
                p.clamp_events
            );
        }
        let path = write_pair(
            &store,
            &format!("reports/projections/{country}_{kind}"),
            &pretty(&p.export())?,
            &projection_csv(&p)?,
        )?;
        println!(
            "{country} {kind}: {} days from {}, cumulative affected {:.0}, deaths {:.0}; wrote {}",
            p.horizon(),
            p.start_date,
            p.cumulative_affected.last().copied().unwrap_or(0.0),
            p.cumulative_deaths.last().copied().unwrap_or(0.0),
            path.display()
        );
    }
    Ok(())
}

/// Machine report for one correlation study.
#[derive(Debug, Serialize)]
pub struct CorrelationReport<'a> {
    /// Lag between covariate and case count; absent for cross-sectional pairs.
    pub lag_days: Option<u32>,
    #[serde(flatten)]
    pub study: &'a StudySummary,
}

pub fn correlate(dir: &Path, pair: Option<FactorPair>, lag: u32, alpha: f64) -> Result<(), Failure> {
    let store = open(dir)?;
    let pairs = match pair {
        Some(p) => vec![p],
        None => FactorPair::ALL.to_vec(),
    };
    let mut done = 0;
    for p in &pairs {
        let summary = match run_pair(&store, *p, lag, alpha) {
            Ok(s) => s,
            Err(e @ StudyError::NoData(_)) if pair.is_none() => {
                eprintln!("warning: {e}");
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        store.save_study(&summary)?;
        for s in &summary.skipped {
            eprintln!("warning: {p}: skipped {}: {}", s.country_code, s.reason);
        }
        let report = CorrelationReport {
            lag_days: p.is_longitudinal().then_some(lag),
            study: &summary,
        };
        let mut csv = Vec::new();
        write_study_csv(&summary, &mut csv)?;
        let path = write_pair(&store, &format!("reports/correlations/{p}"), &pretty(&report)?, &csv)?;
        let significant = summary
            .per_country
            .iter()
            .filter(|c| c.pearson.is_significant())
            .count();
        println!(
            "{p}: {} sample(s), median pearson {:.4} spearman {:.4} kendall {:.4}, {significant} significant at alpha={alpha}; wrote {}",
            summary.per_country.len(),
            summary.medians.pearson,
            summary.medians.spearman,
            summary.medians.kendall,
            path.display()
        );
        done += 1;
    }
    if done == 0 {
        return Err(Failure::new("no factor pair has usable data; ingest covariates and metadata first"));
    }
    Ok(())
}

fn rates_csv(doc: &RatesDocument) -> Result<Vec<u8>, Failure> {
    let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["country", "date", "family", "wrt_affected", "wrt_recovered", "per_million_population", "per_area"])?;
    for r in [&doc.death, &doc.active, &doc.recovery] {
        let family = serde_json::to_value(r.family)?;
        w.write_record([
            doc.country.clone(),
            doc.date.to_string(),
            family.as_str().unwrap_or_default().to_string(),
            cell(r.wrt_affected),
            cell(r.wrt_recovered),
            cell(r.per_million_population),
            cell(r.per_area),
        ])?;
    }
    Ok(w.into_inner().map_err(|e| Failure::new(e.to_string()))?)
}

pub fn rates(dir: &Path, countries: &[String]) -> Result<(), Failure> {
    let store = open(dir)?;
    let codes = if countries.is_empty() {
        store.countries_with_data()
    } else {
        countries.to_vec()
    };
    if codes.is_empty() {
        return Err(Failure::new("no countries with case data"));
    }
    for code in &codes {
        let doc = workflow::rates(&store, code)?;
        let path = write_pair(&store, &format!("reports/rates/{code}"), &pretty(&doc)?, &rates_csv(&doc)?)?;
        let pct = |v: Option<f64>| v.map(|x| format!("{x:.2}%")).unwrap_or_else(|| "n/a".into());
        println!(
            "{code} {}: death {} active {} recovery {} of affected; wrote {}",
            doc.date,
            pct(doc.death.wrt_affected),
            pct(doc.active.wrt_affected),
            pct(doc.recovery.wrt_affected),
            path.display()
        );
    }
    Ok(())
}

pub fn serve(dir: &Path, listen: SocketAddr, upstream: Option<PathBuf>, live_ttl: u64) -> Result<(), Failure> {
    let store = open(dir)?;
    let countries = store.country_meta().len();
    let fetcher: Arc<dyn Fetcher> = match upstream {
        Some(p) => {
            if !p.is_file() {
                eprintln!("warning: upstream {} not found; live routes will fall back to stored data", p.display());
            }
            Arc::new(FileFetcher::new(p))
        }
        None => Arc::new(NoUpstream),
    };
    let state = Arc::new(
        AppState::new(store, fetcher).with_config(ServiceConfig {
            live_ttl_secs: live_ttl,
        }),
    );
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(listen)
            .await
            .map_err(|e| Failure::new(format!("cannot listen on {listen}: {e}")))?;
        let addr = listener.local_addr()?;
        println!("epiforge serving {countries} countries on http://{addr}");
        std::io::stdout().flush()?;
        epiforge_server::serve(listener, state, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
        println!("epiforge stopped");
        Ok(())
    })
}
