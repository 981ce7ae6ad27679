//! Upstream sources for the live tier.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};

use async_trait::async_trait;
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiveCounts {
    pub affected: f64,
    pub dead: f64,
    pub recovered: f64,
}

/// Cumulative counts per country as of one date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpstreamSnapshot {
    pub date: NaiveDate,
    pub countries: BTreeMap<String, LiveCounts>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FetchError {
    #[error("upstream unavailable: {0}")]
    Unavailable(String),
    #[error("malformed upstream payload: {0}")]
    Malformed(String),
}

#[async_trait]
pub trait Fetcher: Send + Sync {
    async fn fetch(&self) -> Result<UpstreamSnapshot, FetchError>;
}

/// Reads a snapshot from a JSON file on every fetch.
#[derive(Debug, Clone)]
pub struct FileFetcher {
    path: PathBuf,
}

impl FileFetcher {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self { path: path.into() }
    }
}

#[async_trait]
impl Fetcher for FileFetcher {
    async fn fetch(&self) -> Result<UpstreamSnapshot, FetchError> {
        let bytes = tokio::fs::read(&self.path)
            .await
            .map_err(|e| FetchError::Unavailable(format!("{}: {e}", self.path.display())))?;
        let snap: UpstreamSnapshot =
            serde_json::from_slice(&bytes).map_err(|e| FetchError::Malformed(e.to_string()))?;
        for (code, c) in &snap.countries {
            let ok = [c.affected, c.dead, c.recovered]
                .iter()
                .all(|v| v.is_finite() && *v >= 0.0);
            if !ok || c.dead + c.recovered > c.affected {
                return Err(FetchError::Malformed(format!("inconsistent counts for {code}")));
            }
        }
        Ok(snap)
    }
}

/// Always fails; every live request falls back to the store.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoUpstream;

#[async_trait]
impl Fetcher for NoUpstream {
    async fn fetch(&self) -> Result<UpstreamSnapshot, FetchError> {
        Err(FetchError::Unavailable("no upstream configured".into()))
    }
}

/// Wraps a fetcher with a kill switch and a call counter.
#[derive(Debug, Default)]
pub struct FaultInjector<F> {
    inner: F,
    failing: AtomicBool,
    calls: AtomicUsize,
}

impl<F> FaultInjector<F> {
    pub fn new(inner: F) -> Self {
        Self {
            inner,
            failing: AtomicBool::new(false),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn set_failing(&self, failing: bool) {
        self.failing.store(failing, Ordering::SeqCst);
    }

    /// Fetch attempts so far, failed ones included.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

#[async_trait]
impl<F: Fetcher> Fetcher for FaultInjector<F> {
    async fn fetch(&self) -> Result<UpstreamSnapshot, FetchError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        if self.failing.load(Ordering::SeqCst) {
            return Err(FetchError::Unavailable("injected fault".into()));
        }
        self.inner.fetch().await
    }
}

#[async_trait]
impl<F: Fetcher + ?Sized> Fetcher for std::sync::Arc<F> {
    async fn fetch(&self) -> Result<UpstreamSnapshot, FetchError> {
        (**self).fetch().await
    }
}
