//! Tiered JSON API over an epiforge data directory.
//!
//! Live counts are proxied from a [`Fetcher`] and cached with a TTL, falling
//! back to the store's latest day with `stale: true`. Projections are memoized
//! per fitted-parameter digest. Country metadata and contact matrices are
//! rendered once and served with immutable cache headers.

pub mod cache;
pub mod fetcher;

use std::collections::HashMap;
use std::future::Future;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use chrono::{DateTime, NaiveDate, Utc};
use epiforge_core::analytics::{all_rates, CountrySnapshot, RateReport};
use epiforge_core::epi_model::{ModelError, AGE_CLASSES};
use epiforge_core::scenario::ScenarioError;
use epiforge_core::study::{run_pair, StudyError};
use epiforge_core::workflow::{self, WorkflowError};
use epiforge_core::{DataStore, FactorPair, ScenarioKind, DEFAULT_ALPHA, DEFAULT_LAG_DAYS};
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use tokio::sync::OnceCell;

pub use cache::{CacheEntry, Clock, ManualClock, SystemClock, TtlCache, DEFAULT_LIVE_TTL_SECS};
pub use fetcher::{FaultInjector, FetchError, Fetcher, FileFetcher, LiveCounts, NoUpstream, UpstreamSnapshot};

/// Longest projection the service will run.
pub const MAX_HORIZON_DAYS: u32 = 3650;

pub const IMMUTABLE: &str = "public, max-age=31536000, immutable";

/// Published response schemas, by name.
pub const SCHEMAS: [(&str, &str); 7] = [
    ("live", include_str!("../schemas/live.json")),
    ("rates", include_str!("../schemas/rates.json")),
    ("projection", include_str!("../schemas/projection.json")),
    ("correlations", include_str!("../schemas/correlations.json")),
    ("countries", include_str!("../schemas/countries.json")),
    ("contact_matrices", include_str!("../schemas/contact_matrices.json")),
    ("error", include_str!("../schemas/error.json")),
];

pub fn schema(name: &str) -> Option<&'static str> {
    SCHEMAS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reason {
    NotFound,
    BadRequest,
    Uncalibrated,
    Unavailable,
    IntegrationFailed,
    Internal,
}

impl Reason {
    pub fn status(self) -> StatusCode {
        match self {
            Reason::NotFound => StatusCode::NOT_FOUND,
            Reason::BadRequest => StatusCode::BAD_REQUEST,
            Reason::Uncalibrated => StatusCode::CONFLICT,
            Reason::Unavailable => StatusCode::SERVICE_UNAVAILABLE,
            Reason::IntegrationFailed | Reason::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

/// Error body: `{"error": message, "reason": code}` plus `day` for integration failures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub error: String,
    pub reason: Reason,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub day: Option<u32>,
}

impl ApiError {
    pub fn new(reason: Reason, error: impl Into<String>) -> Self {
        Self {
            error: error.into(),
            reason,
            day: None,
        }
    }
}

impl From<WorkflowError> for ApiError {
    fn from(e: WorkflowError) -> Self {
        let reason = match &e {
            WorkflowError::UnknownCountry(_) => Reason::NotFound,
            WorkflowError::Uncalibrated(_) => Reason::Uncalibrated,
            WorkflowError::NoHistory(_)
            | WorkflowError::NoPopulation(_)
            | WorkflowError::NoContactMatrices => Reason::Unavailable,
            WorkflowError::Scenario(ScenarioError::Model(ModelError::BlowupOnDay { day, .. })) => {
                return Self {
                    error: e.to_string(),
                    reason: Reason::IntegrationFailed,
                    day: Some(*day),
                }
            }
            _ => Reason::Internal,
        };
        Self::new(reason, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = serde_json::to_vec(&self).expect("error bodies serialize");
        json(self.reason.status(), body.into(), "no-store")
    }
}

fn json(status: StatusCode, body: Bytes, cache_control: &str) -> Response {
    let mut r = (status, body).into_response();
    let h = r.headers_mut();
    h.insert(header::CONTENT_TYPE, HeaderValue::from_static("application/json"));
    h.insert(
        header::CACHE_CONTROL,
        HeaderValue::from_str(cache_control).expect("ascii header"),
    );
    r
}

fn encode<T: Serialize>(value: &T) -> Result<Bytes, ApiError> {
    serde_json::to_vec(value)
        .map(Bytes::from)
        .map_err(|e| ApiError::new(Reason::Internal, e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ServiceConfig {
    pub live_ttl_secs: u64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            live_ttl_secs: DEFAULT_LIVE_TTL_SECS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct MemoKey {
    country: String,
    scenario: ScenarioKind,
    params_digest: String,
    horizon: u32,
}

type Memo = Arc<OnceCell<Result<(Bytes, String), ApiError>>>;

pub struct AppState {
    store: Arc<RwLock<DataStore>>,
    fetcher: Arc<dyn Fetcher>,
    clock: Arc<dyn Clock>,
    config: ServiceConfig,
    live: TtlCache,
    memo: Mutex<HashMap<MemoKey, Memo>>,
    projections_run: AtomicUsize,
    countries: OnceCell<Result<Bytes, ApiError>>,
    contacts: OnceCell<Result<Bytes, ApiError>>,
}

impl AppState {
    pub fn new(store: DataStore, fetcher: Arc<dyn Fetcher>) -> Self {
        Self {
            store: Arc::new(RwLock::new(store)),
            fetcher,
            clock: Arc::new(SystemClock),
            config: ServiceConfig::default(),
            live: TtlCache::default(),
            memo: Mutex::new(HashMap::new()),
            projections_run: AtomicUsize::new(0),
            countries: OnceCell::new(),
            contacts: OnceCell::new(),
        }
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn with_config(mut self, config: ServiceConfig) -> Self {
        self.config = config;
        self
    }

    /// Number of projections actually integrated (memo misses).
    pub fn projections_run(&self) -> usize {
        self.projections_run.load(Ordering::SeqCst)
    }

    pub fn live_cache(&self) -> &TtlCache {
        &self.live
    }

    async fn with_store<T, F>(&self, f: F) -> Result<T, ApiError>
    where
        T: Send + 'static,
        F: FnOnce(&DataStore) -> Result<T, ApiError> + Send + 'static,
    {
        let store = Arc::clone(&self.store);
        tokio::task::spawn_blocking(move || f(&store.read()))
            .await
            .map_err(|e| ApiError::new(Reason::Internal, e.to_string()))?
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/live/global", get(live_global))
        .route("/api/live/country/{code}", get(live_country))
        .route("/api/rates/{code}", get(rates))
        .route("/api/predictions/{code}", get(predictions))
        .route("/api/correlations", get(correlations))
        .route("/api/static/countries", get(static_countries))
        .route("/api/static/contact-matrices", get(static_contacts))
        .fallback(|| async { ApiError::new(Reason::NotFound, "no such route") })
        .with_state(state)
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: Arc<AppState>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}

fn check_code(code: &str) -> Result<(), ApiError> {
    let ok = !code.is_empty()
        && code.len() <= 16
        && code.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
    if ok {
        Ok(())
    } else {
        Err(ApiError::new(Reason::NotFound, format!("unknown country {code}")))
    }
}

// ---- live tier ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiveRates {
    pub death: RateReport,
    pub active: RateReport,
    pub recovery: RateReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiveDocument {
    /// `global` or a country code.
    pub scope: String,
    pub date: NaiveDate,
    pub affected: f64,
    pub dead: f64,
    pub recovered: f64,
    pub active: f64,
    pub rates: LiveRates,
    /// True when the upstream could not serve this scope and the store's latest day was used.
    pub stale: bool,
    pub source: String,
    pub retrieved_at: DateTime<Utc>,
}

struct Totals {
    date: NaiveDate,
    affected: f64,
    dead: f64,
    recovered: f64,
    population: f64,
    area: f64,
}

impl Totals {
    fn new(date: NaiveDate) -> Self {
        Self {
            date,
            affected: 0.0,
            dead: 0.0,
            recovered: 0.0,
            population: 0.0,
            area: 0.0,
        }
    }

    /// Adds one country; a missing population or area voids the aggregate one.
    fn add(&mut self, store: &DataStore, code: &str, affected: f64, dead: f64, recovered: f64) {
        self.affected += affected;
        self.dead += dead;
        self.recovered += recovered;
        let meta = store.meta(code);
        let add_opt = |acc: &mut f64, v: Option<f64>| match v {
            Some(v) if acc.is_finite() => *acc += v,
            _ => *acc = f64::NAN,
        };
        add_opt(&mut self.population, meta.and_then(|m| m.population));
        add_opt(&mut self.area, meta.and_then(|m| m.area));
    }

    fn document(self, scope: &str, stale: bool, source: &str, now: DateTime<Utc>) -> Result<LiveDocument, ApiError> {
        let known = |v: f64| if v.is_finite() { v } else { 0.0 };
        let snap = CountrySnapshot::from_counts(
            scope,
            self.date,
            self.affected,
            self.dead,
            self.recovered,
            known(self.population),
            known(self.area),
        );
        let [death, active, recovery] =
            all_rates(&snap).map_err(|e| ApiError::new(Reason::Internal, e.to_string()))?;
        Ok(LiveDocument {
            scope: scope.to_string(),
            date: self.date,
            affected: self.affected,
            dead: self.dead,
            recovered: self.recovered,
            active: self.affected - self.dead - self.recovered,
            rates: LiveRates {
                death,
                active,
                recovery,
            },
            stale,
            source: source.to_string(),
            retrieved_at: now,
        })
    }
}

enum Scope<'a> {
    Global,
    Country(&'a str),
}

impl Scope<'_> {
    fn name(&self) -> &str {
        match self {
            Scope::Global => "global",
            Scope::Country(c) => c,
        }
    }

    fn from_upstream(&self, store: &DataStore, snap: &UpstreamSnapshot) -> Option<Totals> {
        let mut t = Totals::new(snap.date);
        match self {
            Scope::Global => {
                if snap.countries.is_empty() {
                    return None;
                }
                for (code, c) in &snap.countries {
                    t.add(store, code, c.affected, c.dead, c.recovered);
                }
            }
            Scope::Country(code) => {
                let c = snap.countries.get(*code)?;
                t.add(store, code, c.affected, c.dead, c.recovered);
            }
        }
        Some(t)
    }

    fn from_store(&self, store: &DataStore) -> Option<Totals> {
        let codes = match self {
            Scope::Global => store.countries_with_data(),
            Scope::Country(code) => vec![code.to_string()],
        };
        let latest: Vec<_> = codes.iter().filter_map(|c| store.latest(c)).collect();
        let date = latest.iter().map(|s| s.date).max()?;
        let mut t = Totals::new(date);
        for s in latest {
            t.add(store, &s.country_code, s.affected, s.dead, s.recovered);
        }
        Some(t)
    }
}

async fn live(state: &AppState, scope: Scope<'_>) -> Result<Response, ApiError> {
    let route = match &scope {
        Scope::Global => "/api/live/global".to_string(),
        Scope::Country(c) => format!("/api/live/country/{c}"),
    };
    let key = TtlCache::key(&route);
    let now = state.clock.now();
    if let Some(hit) = state.live.get_fresh(&key, now) {
        let cc = format!("public, max-age={}", hit.remaining_secs(now));
        return Ok(json(StatusCode::OK, hit.payload, &cc));
    }
    let fetched = state.fetcher.fetch().await;
    let store = state.store.read();
    if let Ok(snap) = &fetched {
        if let Some(t) = scope.from_upstream(&store, snap) {
            let body = encode(&t.document(scope.name(), false, "upstream", now)?)?;
            state.live.insert(CacheEntry {
                key,
                payload: body.clone(),
                fetched_at: now,
                ttl: state.config.live_ttl_secs,
            });
            let cc = format!("public, max-age={}", state.config.live_ttl_secs);
            return Ok(json(StatusCode::OK, body, &cc));
        }
    }
    if let Some(t) = scope.from_store(&store) {
        let body = encode(&t.document(scope.name(), true, "store", now)?)?;
        return Ok(json(StatusCode::OK, body, "no-store"));
    }
    if let Scope::Country(code) = scope {
        if !workflow::known(&store, code) {
            return Err(ApiError::new(Reason::NotFound, format!("unknown country {code}")));
        }
    }
    let why = match fetched {
        Err(e) => e.to_string(),
        Ok(_) => "upstream has no record".to_string(),
    };
    Err(ApiError::new(
        Reason::Unavailable,
        format!("no live data for {}: {why}, and nothing stored", scope.name()),
    ))
}

async fn live_global(State(state): State<Arc<AppState>>) -> Result<Response, ApiError> {
    live(&state, Scope::Global).await
}

async fn live_country(
    State(state): State<Arc<AppState>>,
    Path(code): Path<String>,
) -> Result<Response, ApiError> {
    check_code(&code)?;
    live(&state, Scope::Country(&code)).await
}

// ---- computed tier ----

async fn rates(State(state): State<Arc<AppState>>, Path(code): Path<String>) -> Result<Response, ApiError> {
    check_code(&code)?;
    let body = state
        .with_store(move |s| encode(&workflow::rates(s, &code)?))
        .await?;
    Ok(json(StatusCode::OK, body, "no-cache"))
}

#[derive(Debug, Deserialize)]
pub struct PredictionQuery {
    scenario: Option<String>,
    horizon: Option<String>,
}

fn parse_prediction(q: &PredictionQuery) -> Result<(ScenarioKind, u32), ApiError> {
    let kind = q
        .scenario
        .as_deref()
        .ok_or_else(|| ApiError::new(Reason::BadRequest, "missing `scenario` query parameter"))?
        .parse::<ScenarioKind>()
        .map_err(|e| ApiError::new(Reason::BadRequest, e.to_string()))?;
    let horizon = match q.horizon.as_deref() {
        None => epiforge_core::scenario::DEFAULT_HORIZON_DAYS,
        Some(h) => h
            .parse::<u32>()
            .ok()
            .filter(|h| (1..=MAX_HORIZON_DAYS).contains(h))
            .ok_or_else(|| {
                ApiError::new(
                    Reason::BadRequest,
                    format!("horizon must be an integer in 1..={MAX_HORIZON_DAYS}, got `{h}`"),
                )
            })?,
    };
    Ok((kind, horizon))
}

async fn predictions(
    State(state): State<Arc<AppState>>,
    Path(code): Path<String>,
    Query(q): Query<PredictionQuery>,
) -> Result<Response, ApiError> {
    check_code(&code)?;
    let (kind, horizon) = parse_prediction(&q)?;
    let c = code.clone();
    let inputs = state
        .with_store(move |s| Ok(workflow::projection_inputs(s, &c)?))
        .await?;
    let config = inputs.config(kind, horizon);
    let params_digest = cache::digest(&[
        &serde_json::to_vec(&inputs.params).expect("params serialize"),
        &serde_json::to_vec(&config.deltas).expect("deltas serialize"),
    ]);
    let key = MemoKey {
        country: code,
        scenario: kind,
        params_digest,
        horizon,
    };
    let cell = Arc::clone(state.memo.lock().entry(key.clone()).or_default());
    let st = Arc::clone(&state);
    let result = cell
        .get_or_init(|| async move {
            st.projections_run.fetch_add(1, Ordering::SeqCst);
            let etag = format!("\"{}\"", cache::digest(&[key.params_digest.as_bytes(), &horizon.to_le_bytes(), kind.as_str().as_bytes()]));
            tokio::task::spawn_blocking(move || {
                let p = inputs.run(&config).map_err(|e| ApiError::from(WorkflowError::from(e)))?;
                Ok((encode(&p.export())?, etag))
            })
            .await
            .map_err(|e| ApiError::new(Reason::Internal, e.to_string()))?
        })
        .await
        .clone();
    let (body, etag) = result?;
    let mut r = json(StatusCode::OK, body, "no-cache");
    r.headers_mut()
        .insert(header::ETAG, HeaderValue::from_str(&etag).expect("hex etag"));
    Ok(r)
}

#[derive(Debug, Deserialize)]
pub struct CorrelationQuery {
    pair: Option<String>,
}

async fn correlations(
    State(state): State<Arc<AppState>>,
    Query(q): Query<CorrelationQuery>,
) -> Result<Response, ApiError> {
    let name = q
        .pair
        .ok_or_else(|| ApiError::new(Reason::BadRequest, "missing `pair` query parameter"))?;
    let pair: FactorPair = name
        .parse()
        .map_err(|e: StudyError| ApiError::new(Reason::NotFound, e.to_string()))?;
    let body = state
        .with_store(move |s| {
            let stored = s
                .load_study(pair.as_str())
                .map_err(|e| ApiError::new(Reason::Internal, e.to_string()))?;
            let summary = match stored {
                Some(summary) => summary,
                None => run_pair(s, pair, DEFAULT_LAG_DAYS, DEFAULT_ALPHA).map_err(|e| match e {
                    StudyError::NoData(_) => ApiError::new(Reason::Unavailable, e.to_string()),
                    other => ApiError::new(Reason::Internal, other.to_string()),
                })?,
            };
            encode(&summary)
        })
        .await?;
    Ok(json(StatusCode::OK, body, "no-cache"))
}

// ---- fixed tier ----

#[derive(Debug, Serialize)]
struct CountriesDocument<'a> {
    countries: Vec<&'a epiforge_core::CountryMeta>,
}

#[derive(Debug, Serialize)]
struct ContactDocument {
    age_classes: usize,
    home: Vec<Vec<f64>>,
    school: Vec<Vec<f64>>,
    work: Vec<Vec<f64>>,
    other: Vec<Vec<f64>>,
}

async fn fixed(cell: &OnceCell<Result<Bytes, ApiError>>, state: &AppState, build: fn(&DataStore) -> Result<Bytes, ApiError>) -> Result<Response, ApiError> {
    let body = cell
        .get_or_init(|| async { state.with_store(build).await })
        .await
        .clone()?;
    Ok(json(StatusCode::OK, body, IMMUTABLE))
}

async fn static_countries(State(state): State<Arc<AppState>>) -> Result<Response, ApiError> {
    fixed(&state.countries, &state, |s| {
        if s.country_meta().is_empty() {
            return Err(ApiError::new(Reason::Unavailable, "no country metadata loaded"));
        }
        encode(&CountriesDocument {
            countries: s.country_meta().values().collect(),
        })
    })
    .await
}

async fn static_contacts(State(state): State<Arc<AppState>>) -> Result<Response, ApiError> {
    fixed(&state.contacts, &state, |s| {
        let cm = s
            .load_contact_matrices()
            .map_err(|e| ApiError::new(Reason::Internal, e.to_string()))?
            .ok_or_else(|| ApiError::new(Reason::Unavailable, "no contact matrices loaded"))?;
        encode(&ContactDocument {
            age_classes: AGE_CLASSES,
            home: cm.home.rows(),
            school: cm.school.rows(),
            work: cm.work.rows(),
            other: cm.other.rows(),
        })
    })
    .await
}
