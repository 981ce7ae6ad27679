//! Clock abstraction and the TTL table behind the live tier.

use std::collections::HashMap;
use std::sync::Arc;

use axum::body::Bytes;
use chrono::{DateTime, Duration, Utc};
use parking_lot::Mutex;
use sha2::{Digest, Sha256};

pub const DEFAULT_LIVE_TTL_SECS: u64 = 3600;

pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// A clock that only moves when told to.
#[derive(Debug)]
pub struct ManualClock(Mutex<DateTime<Utc>>);

impl ManualClock {
    pub fn new(start: DateTime<Utc>) -> Self {
        Self(Mutex::new(start))
    }

    pub fn advance(&self, secs: i64) {
        *self.0.lock() += Duration::seconds(secs);
    }
}

impl Clock for ManualClock {
    fn now(&self) -> DateTime<Utc> {
        *self.0.lock()
    }
}

impl<C: Clock + ?Sized> Clock for Arc<C> {
    fn now(&self) -> DateTime<Utc> {
        (**self).now()
    }
}

/// Hex SHA-256 of `parts` joined by NUL.
pub fn digest(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for (k, p) in parts.iter().enumerate() {
        if k > 0 {
            h.update([0u8]);
        }
        h.update(p);
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CacheEntry {
    /// Digest of route and parameters.
    pub key: String,
    pub payload: Bytes,
    pub fetched_at: DateTime<Utc>,
    pub ttl: u64,
}

impl CacheEntry {
    pub fn age_secs(&self, now: DateTime<Utc>) -> i64 {
        (now - self.fetched_at).num_seconds()
    }

    pub fn is_fresh(&self, now: DateTime<Utc>) -> bool {
        self.age_secs(now) < self.ttl as i64
    }

    pub fn remaining_secs(&self, now: DateTime<Utc>) -> u64 {
        (self.ttl as i64 - self.age_secs(now)).max(0) as u64
    }
}

#[derive(Debug, Default)]
pub struct TtlCache {
    entries: Mutex<HashMap<String, CacheEntry>>,
}

impl TtlCache {
    pub fn key(route: &str) -> String {
        digest(&[route.as_bytes()])
    }

    /// The entry under `key` if it is still within its TTL.
    pub fn get_fresh(&self, key: &str, now: DateTime<Utc>) -> Option<CacheEntry> {
        self.entries
            .lock()
            .get(key)
            .filter(|e| e.is_fresh(now))
            .cloned()
    }

    pub fn insert(&self, entry: CacheEntry) {
        self.entries.lock().insert(entry.key.clone(), entry);
    }

    pub fn len(&self) -> usize {
        self.entries.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
