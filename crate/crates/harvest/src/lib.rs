//! Record harvesting from a paged JSON API or a local directory, with a
//! content-addressed cache, resumable checkpoints, rate limiting and
//! retry with capped exponential backoff.
//!
//! # Source contract
//!
//! *Directory mode* reads every `*.json` file in file-name order. Each file
//! is a record envelope:
//!
//! ```json
//! {"source_id": "10.14272/KEY/Raman", "submission_date": "2014-05-17", "payload": {"@context": "...", "...": "..."}}
//! ```
//!
//! *HTTP mode* pages through `GET {base_url}?page=N&per_page=K[&since=YYYY-MM-DD]`.
//! A page is either an array of listing items or `{"items": [...], "next": ...}`;
//! harvesting stops at an empty page or an explicit `"next": null`. A listing
//! item is `{"source_id", "submission_date", "href", "sha256"?, "modified"?}`
//! and `href` (absolute, or relative to `base_url`) returns the envelope. An
//! item whose `sha256` or `modified` marker matches the cache is served from
//! the cache without fetching.

pub mod cache;
pub mod transport;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use chrono::{NaiveDate, Utc};
use log::{debug, info, warn};
use rand::rngs::StdRng;
use rand::SeedableRng;
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::Value;

use kgforge_core::jsonld::RawRecord;

pub use cache::{Cache, CacheEntry, CacheError};
pub use transport::{Backoff, Clock, ManualClock, RateLimiter, Response, SystemClock, Transport, TransportError, UreqTransport};

pub const CHECKPOINT_FILE: &str = "harvest.checkpoint.json";

#[derive(Debug, thiserror::Error)]
pub enum HarvestError {
    #[error("invalid source configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error("I/O at {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("GET {url} failed after {attempts} attempt(s): {message}")]
    Network { url: String, attempts: u32, message: String },
    #[error("GET {url} returned HTTP {status}")]
    HttpStatus { url: String, status: u16 },
    #[error("malformed listing page {url}: {message}")]
    MalformedListing { url: String, message: String },
    #[error("harvest interrupted after {yielded} record(s): {reason}")]
    Interrupted { yielded: usize, reason: String },
}

impl HarvestError {
    /// Whether a checkpoint was written, so `resume` continues the run.
    pub fn is_resumable(&self) -> bool {
        matches!(
            self,
            HarvestError::Network { .. } | HarvestError::HttpStatus { .. } | HarvestError::MalformedListing { .. } | HarvestError::Interrupted { .. }
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceMode {
    Http,
    Directory,
}

fn default_page_size() -> u32 {
    100
}
fn default_rate() -> f64 {
    5.0
}
fn default_retries() -> u32 {
    3
}
fn default_backoff_base() -> u64 {
    250
}
fn default_backoff_cap() -> u64 {
    10_000
}
fn default_timeout() -> u64 {
    30
}

/// `YYYY-MM-DD`, or `YYYY-MM` meaning the first of that month.
pub fn parse_since(s: &str) -> Result<NaiveDate, String> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .or_else(|_| NaiveDate::parse_from_str(&format!("{s}-01"), "%Y-%m-%d"))
        .map_err(|_| format!("invalid date {s:?}, expected YYYY-MM or YYYY-MM-DD"))
}

fn de_since<'de, D: Deserializer<'de>>(d: D) -> Result<Option<NaiveDate>, D::Error> {
    Option::<String>::deserialize(d)?
        .map(|s| parse_since(&s).map_err(serde::de::Error::custom))
        .transpose()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub mode: SourceMode,
    /// Listing endpoint for HTTP mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_url: Option<String>,
    /// Envelope directory for directory mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<PathBuf>,
    #[serde(default = "default_page_size")]
    pub page_size: u32,
    /// Records submitted before this date are skipped.
    #[serde(default, deserialize_with = "de_since", skip_serializing_if = "Option::is_none")]
    pub since: Option<NaiveDate>,
    /// Requests per second.
    #[serde(default = "default_rate")]
    pub rate_limit: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff_base")]
    pub backoff_base_ms: u64,
    #[serde(default = "default_backoff_cap")]
    pub backoff_cap_ms: u64,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

impl SourceConfig {
    pub fn directory(dir: impl Into<PathBuf>) -> Self {
        SourceConfig {
            mode: SourceMode::Directory,
            base_url: None,
            directory: Some(dir.into()),
            page_size: default_page_size(),
            since: None,
            rate_limit: default_rate(),
            max_retries: default_retries(),
            backoff_base_ms: default_backoff_base(),
            backoff_cap_ms: default_backoff_cap(),
            timeout_secs: default_timeout(),
        }
    }

    pub fn http(base_url: impl Into<String>) -> Self {
        SourceConfig { mode: SourceMode::Http, base_url: Some(base_url.into()), directory: None, ..Self::directory("") }
    }

    pub fn validate(&self) -> Result<(), HarvestError> {
        let bad = |m: &str| Err(HarvestError::Config(m.to_string()));
        if self.page_size < 1 {
            return bad("page_size must be at least 1");
        }
        if !(self.rate_limit > 0.0 && self.rate_limit.is_finite()) {
            return bad("rate_limit must be positive");
        }
        match self.mode {
            SourceMode::Http => match &self.base_url {
                Some(u) if url::Url::parse(u).is_ok_and(|u| matches!(u.scheme(), "http" | "https")) => Ok(()),
                _ => bad("http mode needs an absolute http(s) base_url"),
            },
            SourceMode::Directory => match &self.directory {
                Some(d) if !d.as_os_str().is_empty() => Ok(()),
                _ => bad("directory mode needs a directory"),
            },
        }
    }

    fn backoff(&self) -> Backoff {
        Backoff {
            base: Duration::from_millis(self.backoff_base_ms),
            cap: Duration::from_millis(self.backoff_cap_ms.max(self.backoff_base_ms)),
        }
    }
}

#[derive(Debug, Deserialize)]
struct Envelope {
    source_id: String,
    submission_date: NaiveDate,
    payload: Value,
}

/// Parses a record envelope into a [`RawRecord`].
pub fn parse_envelope(bytes: &[u8], fetched_at: chrono::DateTime<Utc>) -> Result<RawRecord, String> {
    let env: Envelope = serde_json::from_slice(bytes).map_err(|e| e.to_string())?;
    if !(env.payload.is_object() || env.payload.is_array()) {
        return Err("payload must be a JSON object or array".into());
    }
    RawRecord::new(env.source_id, env.submission_date, env.payload, fetched_at).map_err(|e| e.to_string())
}

/// Loads the record a cache entry points at, verifying its digest.
pub fn cached_record(cache: &Cache, entry: &CacheEntry) -> Result<RawRecord, HarvestError> {
    let bytes = cache.read_verified(entry)?;
    parse_envelope(&bytes, entry.fetched_at).map_err(|message| HarvestError::Config(format!(
        "cached record {} is not a valid envelope: {message}",
        entry.source_id
    )))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub completed: bool,
    /// Listing page in progress (HTTP mode).
    pub page: u32,
    pub yielded: Vec<CacheEntry>,
}

impl Checkpoint {
    /// `Ok(None)` when absent; a corrupt file is reported as `Err` so the
    /// caller can warn and restart.
    pub fn load(path: &Path) -> Result<Option<Self>, String> {
        match std::fs::read(path) {
            Ok(bytes) => serde_json::from_slice(&bytes).map(Some).map_err(|e| e.to_string()),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.to_string()),
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), HarvestError> {
        let bytes = serde_json::to_vec_pretty(self).expect("checkpoint serializes");
        cache::write_atomic(path, &bytes).map_err(|source| HarvestError::Io { path: path.to_path_buf(), source })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HarvestReport {
    /// Records handed to the sink by this invocation.
    pub yielded: usize,
    /// Every record of the logical run, including those yielded before a
    /// resume, in yield order.
    pub entries: Vec<CacheEntry>,
    /// Records downloaded (HTTP mode) or read with bytes new to the cache
    /// (directory mode).
    pub fetched: usize,
    pub cache_hits: usize,
    pub skipped_malformed: usize,
    pub filtered_since: usize,
    pub duplicates: usize,
    /// HTTP requests sent, retries included.
    pub requests: usize,
    pub resumed: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Continue from the checkpoint of an interrupted run.
    pub resume: bool,
}

pub struct Harvester {
    cfg: SourceConfig,
    cache: Cache,
    checkpoint_path: PathBuf,
    transport: Arc<dyn Transport>,
    clock: Arc<dyn Clock>,
    limiter: RateLimiter,
    rng: StdRng,
}

struct RunState {
    report: HarvestReport,
    seen: BTreeSet<String>,
    page: u32,
}

enum Decision {
    Take,
    Skip,
}

impl Harvester {
    /// Cache under `work_dir/cache`, checkpoint at `work_dir/harvest.checkpoint.json`.
    pub fn new(cfg: SourceConfig, work_dir: &Path) -> Result<Self, HarvestError> {
        cfg.validate()?;
        let transport = Arc::new(UreqTransport::new(Duration::from_secs(cfg.timeout_secs)));
        Ok(Harvester {
            limiter: RateLimiter::new(cfg.rate_limit),
            cache: Cache::open(&work_dir.join("cache"))?,
            checkpoint_path: work_dir.join(CHECKPOINT_FILE),
            transport,
            clock: Arc::new(SystemClock::default()),
            rng: StdRng::from_entropy(),
            cfg,
        })
    }

    pub fn with_transport(mut self, t: Arc<dyn Transport>) -> Self {
        self.transport = t;
        self
    }

    pub fn with_clock(mut self, c: Arc<dyn Clock>) -> Self {
        self.clock = c;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng = StdRng::seed_from_u64(seed);
        self
    }

    pub fn cache(&self) -> &Cache {
        &self.cache
    }

    /// Harvests every record once, passing each to `sink` in source order.
    /// A sink error stops the run and leaves a checkpoint behind.
    pub fn run(
        &mut self,
        opts: RunOptions,
        sink: &mut dyn FnMut(&RawRecord) -> Result<(), String>,
    ) -> Result<HarvestReport, HarvestError> {
        let mut state = RunState { report: HarvestReport::default(), seen: BTreeSet::new(), page: 1 };
        if opts.resume {
            match Checkpoint::load(&self.checkpoint_path) {
                Ok(Some(cp)) => {
                    info!("resuming after {} record(s)", cp.yielded.len());
                    state.report.resumed = true;
                    state.seen = cp.yielded.iter().map(|e| e.source_id.clone()).collect();
                    state.report.entries = cp.yielded;
                    state.page = cp.page.max(1);
                    if cp.completed {
                        return Ok(state.report);
                    }
                }
                Ok(None) => info!("no checkpoint, starting a full run"),
                Err(e) => warn!("ignoring corrupt checkpoint ({e}), starting a full run"),
            }
        }
        let result = match self.cfg.mode {
            SourceMode::Directory => self.run_directory(&mut state, sink),
            SourceMode::Http => self.run_http(&mut state, sink),
        };
        self.cache.save()?;
        let cp = Checkpoint { completed: result.is_ok(), page: state.page, yielded: state.report.entries.clone() };
        cp.save(&self.checkpoint_path)?;
        result.map(|()| state.report)
    }

    fn admit(&self, state: &mut RunState, source_id: &str, date: NaiveDate) -> Decision {
        if self.cfg.since.is_some_and(|since| date < since) {
            debug!("{source_id}: submitted {date}, before the since date");
            state.report.filtered_since += 1;
            return Decision::Skip;
        }
        if state.seen.contains(source_id) {
            if !state.report.resumed {
                warn!("{source_id}: listed twice, keeping the first");
                state.report.duplicates += 1;
            }
            return Decision::Skip;
        }
        Decision::Take
    }

    fn emit(
        state: &mut RunState,
        record: &RawRecord,
        entry: CacheEntry,
        sink: &mut dyn FnMut(&RawRecord) -> Result<(), String>,
    ) -> Result<(), HarvestError> {
        sink(record).map_err(|reason| HarvestError::Interrupted { yielded: state.report.entries.len(), reason })?;
        state.seen.insert(entry.source_id.clone());
        state.report.entries.push(entry);
        state.report.yielded += 1;
        Ok(())
    }

    fn run_directory(
        &mut self,
        state: &mut RunState,
        sink: &mut dyn FnMut(&RawRecord) -> Result<(), String>,
    ) -> Result<(), HarvestError> {
        let dir = self.cfg.directory.clone().expect("validated");
        let io = |source| HarvestError::Io { path: dir.clone(), source };
        let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)
            .map_err(io)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "json"))
            .collect();
        files.sort();
        for path in files {
            let bytes = std::fs::read(&path).map_err(|source| HarvestError::Io { path: path.clone(), source })?;
            let now = Utc::now();
            let record = match parse_envelope(&bytes, now) {
                Ok(r) => r,
                Err(e) => {
                    warn!("skipping malformed record {}: {e}", path.display());
                    state.report.skipped_malformed += 1;
                    continue;
                }
            };
            if let Decision::Skip = self.admit(state, &record.source_id, record.submission_date) {
                continue;
            }
            let digest = kgforge_core::sha256_hex(&bytes);
            let hit = self.cache.get(&record.source_id).is_some_and(|e| e.content_digest == digest);
            if hit {
                state.report.cache_hits += 1;
            } else {
                state.report.fetched += 1;
            }
            let entry = self.cache.store(&record.source_id, record.submission_date, &bytes, None, now)?;
            let record = RawRecord { fetched_at: entry.fetched_at, ..record };
            Self::emit(state, &record, entry, sink)?;
        }
        Ok(())
    }

    fn get(&mut self, url: &str, requests: &mut usize) -> Result<Vec<u8>, HarvestError> {
        let backoff = self.cfg.backoff();
        let mut last = String::new();
        for attempt in 0..=self.cfg.max_retries {
            self.limiter.acquire(self.clock.as_ref());
            *requests += 1;
            match self.transport.get(url) {
                Ok(r) if (200..300).contains(&r.status) => return Ok(r.body),
                Ok(r) if r.status == 429 || r.status >= 500 => last = format!("HTTP {}", r.status),
                Ok(r) => return Err(HarvestError::HttpStatus { url: url.to_string(), status: r.status }),
                Err(e) => last = e.0,
            }
            if attempt < self.cfg.max_retries {
                let d = backoff.delay(attempt, &mut self.rng);
                debug!("GET {url}: {last}; retrying in {d:?}");
                self.clock.sleep(d);
            }
        }
        Err(HarvestError::Network { url: url.to_string(), attempts: self.cfg.max_retries + 1, message: last })
    }

    fn listing_url(&self, page: u32) -> String {
        let mut u = url::Url::parse(self.cfg.base_url.as_deref().expect("validated")).expect("validated");
        {
            let mut q = u.query_pairs_mut();
            q.append_pair("page", &page.to_string());
            q.append_pair("per_page", &self.cfg.page_size.to_string());
            if let Some(since) = self.cfg.since {
                q.append_pair("since", &since.to_string());
            }
        }
        u.into()
    }

    fn run_http(
        &mut self,
        state: &mut RunState,
        sink: &mut dyn FnMut(&RawRecord) -> Result<(), String>,
    ) -> Result<(), HarvestError> {
        let base = url::Url::parse(self.cfg.base_url.as_deref().expect("validated")).expect("validated");
        loop {
            let url = self.listing_url(state.page);
            let body = self.get(&url, &mut state.report.requests)?;
            let (items, more) = parse_listing(&body).map_err(|message| HarvestError::MalformedListing { url: url.clone(), message })?;
            if items.is_empty() {
                return Ok(());
            }
            for item in items {
                let item: ListingItem = match serde_json::from_value(item) {
                    Ok(i) => i,
                    Err(e) => {
                        warn!("skipping malformed listing item on page {}: {e}", state.page);
                        state.report.skipped_malformed += 1;
                        continue;
                    }
                };
                if let Decision::Skip = self.admit(state, &item.source_id, item.submission_date) {
                    continue;
                }
                let cached = self.cache.get(&item.source_id).filter(|e| {
                    item.sha256.as_ref().is_some_and(|d| *d == e.content_digest)
                        || item.modified.is_some() && item.modified == e.modified
                });
                if let Some(entry) = cached.cloned() {
                    match cached_record(&self.cache, &entry) {
                        Ok(record) => {
                            state.report.cache_hits += 1;
                            Self::emit(state, &record, entry, sink)?;
                            continue;
                        }
                        Err(e) => warn!("{}: cache entry unusable ({e}), refetching", item.source_id),
                    }
                }
                let href = match base.join(&item.href) {
                    Ok(u) => u.to_string(),
                    Err(e) => {
                        warn!("{}: bad href {:?}: {e}", item.source_id, item.href);
                        state.report.skipped_malformed += 1;
                        continue;
                    }
                };
                let bytes = match self.get(&href, &mut state.report.requests) {
                    Ok(b) => b,
                    Err(HarvestError::HttpStatus { status, .. }) if status < 500 => {
                        warn!("{}: record fetch returned HTTP {status}, skipping", item.source_id);
                        state.report.skipped_malformed += 1;
                        continue;
                    }
                    Err(e) => return Err(e),
                };
                let now = Utc::now();
                let record = match parse_envelope(&bytes, now) {
                    Ok(r) if r.source_id == item.source_id => r,
                    Ok(r) => {
                        warn!("{}: envelope names {}, skipping", item.source_id, r.source_id);
                        state.report.skipped_malformed += 1;
                        continue;
                    }
                    Err(e) => {
                        warn!("{}: malformed record: {e}", item.source_id);
                        state.report.skipped_malformed += 1;
                        continue;
                    }
                };
                state.report.fetched += 1;
                let entry = self.cache.store(&record.source_id, record.submission_date, &bytes, item.modified.clone(), now)?;
                let record = RawRecord { fetched_at: entry.fetched_at, ..record };
                Self::emit(state, &record, entry, sink)?;
            }
            if !more {
                return Ok(());
            }
            state.page += 1;
        }
    }
}

#[derive(Debug, Deserialize)]
struct ListingItem {
    source_id: String,
    submission_date: NaiveDate,
    href: String,
    #[serde(default)]
    sha256: Option<String>,
    #[serde(default)]
    modified: Option<String>,
}

/// Items of one listing page and whether another page may follow.
fn parse_listing(body: &[u8]) -> Result<(Vec<Value>, bool), String> {
    match serde_json::from_slice::<Value>(body).map_err(|e| e.to_string())? {
        Value::Array(items) => Ok((items, true)),
        Value::Object(mut o) => {
            let items = match o.remove("items") {
                Some(Value::Array(a)) => a,
                _ => return Err("expected an \"items\" array".into()),
            };
            let more = !matches!(o.get("next"), Some(Value::Null));
            Ok((items, more))
        }
        _ => Err("expected an array or an object".into()),
    }
}
