//! End-to-end harvesting over the fixture corpus: directory mode, a scripted
//! HTTP transport, and a real loopback HTTP server.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use chrono::NaiveDate;
use serde_json::{json, Value};

use kgforge_core::jsonld::RawRecord;
use kgforge_harvest::{
    cached_record, Checkpoint, Clock, HarvestError, Harvester, ManualClock, Response, RunOptions, SourceConfig,
    Transport, TransportError, CHECKPOINT_FILE,
};

fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/corpus")
}

fn corpus_files() -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(corpus_dir()).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    files
        .into_iter()
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect()
}

fn corpus_ids() -> Vec<String> {
    corpus_files()
        .iter()
        .map(|(_, b)| serde_json::from_slice::<Value>(b).unwrap()["source_id"].as_str().unwrap().to_string())
        .collect()
}

fn collect(h: &mut Harvester, resume: bool) -> (Result<kgforge_harvest::HarvestReport, HarvestError>, Vec<RawRecord>) {
    let mut got = Vec::new();
    let r = h.run(RunOptions { resume }, &mut |rec| {
        got.push(rec.clone());
        Ok(())
    });
    (r, got)
}

fn ids(records: &[RawRecord]) -> Vec<String> {
    records.iter().map(|r| r.source_id.clone()).collect()
}

#[test]
fn directory_mode_yields_every_record_once_in_order() {
    let work = tempfile::tempdir().unwrap();
    let mut h = Harvester::new(SourceConfig::directory(corpus_dir()), work.path()).unwrap();
    let (r, got) = collect(&mut h, false);
    let r = r.unwrap();
    assert_eq!(ids(&got), corpus_ids());
    assert_eq!((r.yielded, r.fetched, r.cache_hits, r.entries.len()), (50, 50, 0, 50));
    assert_eq!(h.cache().len(), 50);
    for e in &r.entries {
        let rec = cached_record(h.cache(), e).unwrap();
        assert_eq!(rec.source_id, e.source_id);
    }

    let index_before = std::fs::read(work.path().join("cache/index.json")).unwrap();
    let mut h = Harvester::new(SourceConfig::directory(corpus_dir()), work.path()).unwrap();
    let (r2, got2) = collect(&mut h, false);
    let r2 = r2.unwrap();
    assert_eq!((r2.fetched, r2.cache_hits), (0, 50));
    assert_eq!(ids(&got2), ids(&got));
    assert_eq!(std::fs::read(work.path().join("cache/index.json")).unwrap(), index_before);
    // fetched_at comes from the cache, so repeated runs yield identical records
    assert_eq!(got2, got);
}

#[test]
fn since_filter_drops_older_submissions() {
    let work = tempfile::tempdir().unwrap();
    let cfg = SourceConfig { since: NaiveDate::from_ymd_opt(2014, 6, 1), ..SourceConfig::directory(corpus_dir()) };
    let mut h = Harvester::new(cfg, work.path()).unwrap();
    let (r, got) = collect(&mut h, false);
    let r = r.unwrap();
    assert_eq!((r.yielded, r.filtered_since), (49, 1));
    assert!(got.iter().all(|g| g.submission_date >= NaiveDate::from_ymd_opt(2014, 6, 1).unwrap()));
}

#[test]
fn interrupted_run_resumes_without_repeats() {
    let work = tempfile::tempdir().unwrap();
    let mut h = Harvester::new(SourceConfig::directory(corpus_dir()), work.path()).unwrap();
    let mut first = Vec::new();
    let err = h
        .run(RunOptions::default(), &mut |rec| {
            if first.len() == 10 {
                return Err("stopped by test".into());
            }
            first.push(rec.source_id.clone());
            Ok(())
        })
        .unwrap_err();
    assert!(matches!(err, HarvestError::Interrupted { yielded: 10, .. }), "{err}");
    assert!(err.is_resumable());
    let cp = Checkpoint::load(&work.path().join(CHECKPOINT_FILE)).unwrap().unwrap();
    assert!(!cp.completed);
    assert_eq!(cp.yielded.len(), 10);

    let mut h = Harvester::new(SourceConfig::directory(corpus_dir()), work.path()).unwrap();
    let (r, rest) = collect(&mut h, true);
    let r = r.unwrap();
    assert!(r.resumed);
    assert_eq!((r.yielded, r.duplicates, r.entries.len()), (40, 0, 50));
    let mut all = first.clone();
    all.extend(ids(&rest));
    assert_eq!(all, corpus_ids());
    assert_eq!(r.entries.iter().map(|e| e.source_id.clone()).collect::<Vec<_>>(), corpus_ids());

    // a completed run resumes to nothing
    let mut h = Harvester::new(SourceConfig::directory(corpus_dir()), work.path()).unwrap();
    let (r, none) = collect(&mut h, true);
    let r = r.unwrap();
    assert!(none.is_empty());
    assert_eq!((r.yielded, r.entries.len()), (0, 50));
}

#[test]
fn corrupt_or_missing_checkpoint_means_full_run() {
    let work = tempfile::tempdir().unwrap();
    let mut h = Harvester::new(SourceConfig::directory(corpus_dir()), work.path()).unwrap();
    assert_eq!(collect(&mut h, true).1.len(), 50);
    std::fs::write(work.path().join(CHECKPOINT_FILE), b"{ truncated").unwrap();
    let mut h = Harvester::new(SourceConfig::directory(corpus_dir()), work.path()).unwrap();
    let (r, got) = collect(&mut h, true);
    assert!(!r.unwrap().resumed);
    assert_eq!(got.len(), 50);
}

#[test]
fn malformed_and_duplicate_files_are_skipped() {
    let src = tempfile::tempdir().unwrap();
    let files = corpus_files();
    for (name, bytes) in files.iter().take(5) {
        std::fs::write(src.path().join(name), bytes).unwrap();
    }
    std::fs::write(src.path().join("rec-001-copy.json"), &files[0].1).unwrap();
    std::fs::write(src.path().join("rec-002a.json"), b"{not json").unwrap();
    std::fs::write(src.path().join("rec-002b.json"), br#"{"source_id":"x","submission_date":"2014-02-30","payload":{}}"#).unwrap();
    std::fs::write(src.path().join("notes.txt"), b"ignored").unwrap();
    let work = tempfile::tempdir().unwrap();
    let mut h = Harvester::new(SourceConfig::directory(src.path()), work.path()).unwrap();
    let (r, got) = collect(&mut h, false);
    let r = r.unwrap();
    assert_eq!((r.yielded, r.skipped_malformed, r.duplicates), (5, 2, 1));
    assert_eq!(ids(&got), corpus_ids()[..5].to_vec());
}

/// Serves the corpus as a paged listing plus per-record URLs.
struct FakeApi {
    pages: BTreeMap<u32, Vec<u8>>,
    records: BTreeMap<String, Vec<u8>>,
    failures: Mutex<BTreeMap<String, usize>>,
    log: Mutex<Vec<(String, Duration)>>,
    clock: Arc<ManualClock>,
}

const BASE: &str = "http://api.test/records";

impl FakeApi {
    fn new(per_page: usize, with_digest: bool, clock: Arc<ManualClock>) -> Self {
        let files = corpus_files();
        let mut records = BTreeMap::new();
        let mut items = Vec::new();
        for (name, bytes) in &files {
            let env: Value = serde_json::from_slice(bytes).unwrap();
            let mut item = json!({
                "source_id": env["source_id"],
                "submission_date": env["submission_date"],
                "href": format!("/files/{name}"),
            });
            if with_digest {
                item["sha256"] = json!(kgforge_core::sha256_hex(bytes));
            }
            items.push(item);
            records.insert(format!("http://api.test/files/{name}"), bytes.clone());
        }
        let mut pages = BTreeMap::new();
        let chunks: Vec<&[Value]> = items.chunks(per_page).collect();
        for (i, chunk) in chunks.iter().enumerate() {
            let last = i + 1 == chunks.len();
            let next = if last { Value::Null } else { json!(format!("{BASE}?page={}", i + 2)) };
            pages.insert(i as u32 + 1, serde_json::to_vec(&json!({"items": chunk, "next": next})).unwrap());
        }
        FakeApi { pages, records, failures: Mutex::default(), log: Mutex::default(), clock }
    }

    fn fail(&self, url: &str, times: usize) {
        self.failures.lock().unwrap().insert(url.to_string(), times);
    }

    fn requests(&self) -> Vec<(String, Duration)> {
        self.log.lock().unwrap().clone()
    }
}

impl Transport for FakeApi {
    fn get(&self, url: &str) -> Result<Response, TransportError> {
        self.log.lock().unwrap().push((url.to_string(), self.clock.now()));
        if let Some(n) = self.failures.lock().unwrap().get_mut(url) {
            if *n > 0 {
                *n -= 1;
                return Ok(Response { status: 503, body: Vec::new() });
            }
        }
        let u = url::Url::parse(url).unwrap();
        if u.path() == "/records" {
            let page: u32 = u.query_pairs().find(|(k, _)| k == "page").unwrap().1.parse().unwrap();
            let body = self.pages.get(&page).cloned().unwrap_or_else(|| b"[]".to_vec());
            return Ok(Response { status: 200, body });
        }
        match self.records.get(url) {
            Some(b) => Ok(Response { status: 200, body: b.clone() }),
            None => Ok(Response { status: 404, body: Vec::new() }),
        }
    }
}

fn http_cfg() -> SourceConfig {
    SourceConfig { page_size: 20, rate_limit: 1000.0, max_retries: 3, ..SourceConfig::http(BASE) }
}

fn http_harvester(api: &Arc<FakeApi>, cfg: SourceConfig, work: &Path) -> Harvester {
    Harvester::new(cfg, work).unwrap().with_transport(api.clone()).with_clock(api.clock.clone()).with_seed(7)
}

#[test]
fn http_listing_and_cache_hits() {
    let clock = Arc::new(ManualClock::default());
    let api = Arc::new(FakeApi::new(20, true, clock));
    let work = tempfile::tempdir().unwrap();
    let mut h = http_harvester(&api, http_cfg(), work.path());
    let (r, got) = collect(&mut h, false);
    let r = r.unwrap();
    assert_eq!(ids(&got), corpus_ids());
    // three listing pages, the last with next = null, plus 50 record fetches
    assert_eq!((r.fetched, r.requests), (50, 53));
    assert!(api.requests()[0].0.contains("page=1&per_page=20"));

    let mut h = http_harvester(&api, http_cfg(), work.path());
    let (r, got2) = collect(&mut h, false);
    let r = r.unwrap();
    assert_eq!((r.fetched, r.cache_hits, r.requests), (0, 50, 3));
    assert_eq!(got2, got);
}

#[test]
fn http_without_digests_refetches_and_detects_no_change() {
    let clock = Arc::new(ManualClock::default());
    let api = Arc::new(FakeApi::new(50, false, clock));
    let work = tempfile::tempdir().unwrap();
    let mut h = http_harvester(&api, http_cfg(), work.path());
    assert_eq!(collect(&mut h, false).0.unwrap().fetched, 50);
    let index = std::fs::read(work.path().join("cache/index.json")).unwrap();
    let mut h = http_harvester(&api, http_cfg(), work.path());
    let r = collect(&mut h, false).0.unwrap();
    assert_eq!(r.yielded, 50);
    assert_eq!(std::fs::read(work.path().join("cache/index.json")).unwrap(), index);
}

#[test]
fn transient_failures_are_retried_with_backoff() {
    let clock = Arc::new(ManualClock::default());
    let api = Arc::new(FakeApi::new(20, true, clock.clone()));
    let target = "http://api.test/files/rec-003.json";
    api.fail(target, 2);
    let work = tempfile::tempdir().unwrap();
    let cfg = SourceConfig { backoff_base_ms: 100, backoff_cap_ms: 1000, ..http_cfg() };
    let mut h = http_harvester(&api, cfg, work.path());
    let (r, got) = collect(&mut h, false);
    assert_eq!(r.unwrap().requests, 55);
    assert_eq!(got.len(), 50);
    let times: Vec<Duration> = api.requests().iter().filter(|(u, _)| u == target).map(|(_, t)| *t).collect();
    assert_eq!(times.len(), 3);
    let (d1, d2) = (times[1] - times[0], times[2] - times[1]);
    assert!(d1 >= Duration::from_millis(50) && d1 < Duration::from_millis(100), "{d1:?}");
    assert!(d2 >= Duration::from_millis(100) && d2 < Duration::from_millis(200), "{d2:?}");
}

#[test]
fn exhausted_retries_abort_and_resume_later() {
    let clock = Arc::new(ManualClock::default());
    let api = Arc::new(FakeApi::new(20, true, clock));
    api.fail("http://api.test/records?page=2&per_page=20", 10);
    let work = tempfile::tempdir().unwrap();
    let mut h = http_harvester(&api, http_cfg(), work.path());
    let (r, got) = collect(&mut h, false);
    let err = r.unwrap_err();
    assert!(matches!(err, HarvestError::Network { attempts: 4, .. }), "{err}");
    assert_eq!(got.len(), 20);
    let cp = Checkpoint::load(&work.path().join(CHECKPOINT_FILE)).unwrap().unwrap();
    assert_eq!((cp.completed, cp.page, cp.yielded.len()), (false, 2, 20));

    api.fail("http://api.test/records?page=2&per_page=20", 0);
    let mut h = http_harvester(&api, http_cfg(), work.path());
    let (r, rest) = collect(&mut h, true);
    let r = r.unwrap();
    assert_eq!((r.yielded, r.entries.len()), (30, 50));
    let mut all = ids(&got);
    all.extend(ids(&rest));
    assert_eq!(all, corpus_ids());
}

#[test]
fn rate_limit_holds_on_a_manual_clock() {
    let clock = Arc::new(ManualClock::default());
    let api = Arc::new(FakeApi::new(20, true, clock.clone()));
    let work = tempfile::tempdir().unwrap();
    let cfg = SourceConfig { rate_limit: 4.0, ..http_cfg() };
    let mut h = http_harvester(&api, cfg, work.path());
    collect(&mut h, false).0.unwrap();
    let times: Vec<Duration> = api.requests().iter().map(|(_, t)| *t).collect();
    assert_eq!(times.len(), 53);
    for (i, t) in times.iter().enumerate() {
        let within = times[i..].iter().filter(|u| **u < *t + Duration::from_secs(1)).count();
        assert!(within <= 4, "{within} requests in the second after {t:?}");
    }
    assert!(clock.now() >= Duration::from_secs(13));
}

/// Answers each connection from a fixed path table, then closes it.
fn serve(routes: BTreeMap<String, Vec<u8>>) -> (String, Arc<AtomicUsize>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let hits = Arc::new(AtomicUsize::new(0));
    let counter = hits.clone();
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            counter.fetch_add(1, Ordering::SeqCst);
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request_line = String::new();
            reader.read_line(&mut request_line).unwrap();
            loop {
                let mut h = String::new();
                if reader.read_line(&mut h).unwrap() == 0 || h == "\r\n" {
                    break;
                }
            }
            let target = request_line.split_whitespace().nth(1).unwrap_or("/").to_string();
            let path = target.split('?').next().unwrap().to_string();
            let page = target.split("page=").nth(1).and_then(|s| s.split('&').next()).unwrap_or("1");
            let key = if path == "/records" { format!("/records?page={page}") } else { path };
            let (status, body) = match routes.get(&key) {
                Some(b) => ("200 OK", b.clone()),
                None if key.starts_with("/records") => ("200 OK", b"[]".to_vec()),
                None => ("404 Not Found", Vec::new()),
            };
            let head = format!(
                "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
                body.len()
            );
            let _ = stream.write_all(head.as_bytes());
            let _ = stream.write_all(&body);
        }
    });
    (format!("http://{addr}"), hits)
}

#[test]
fn real_http_round_trip() {
    let files = corpus_files();
    let mut routes = BTreeMap::new();
    let mut items = Vec::new();
    for (name, bytes) in files.iter().take(6) {
        let env: Value = serde_json::from_slice(bytes).unwrap();
        items.push(json!({"source_id": env["source_id"], "submission_date": env["submission_date"], "href": format!("files/{name}")}));
        routes.insert(format!("/files/{name}"), bytes.clone());
    }
    // bare-array pages; the third page is empty and ends the harvest
    routes.insert("/records?page=1".into(), serde_json::to_vec(&items[..4]).unwrap());
    routes.insert("/records?page=2".into(), serde_json::to_vec(&items[4..]).unwrap());
    let (origin, hits) = serve(routes);
    let work = tempfile::tempdir().unwrap();
    let cfg = SourceConfig { page_size: 4, rate_limit: 100.0, timeout_secs: 5, ..SourceConfig::http(format!("{origin}/records")) };
    let mut h = Harvester::new(cfg, work.path()).unwrap();
    let (r, got) = collect(&mut h, false);
    let r = r.unwrap();
    assert_eq!(ids(&got), corpus_ids()[..6].to_vec());
    assert_eq!((r.fetched, r.requests), (6, 9));
    assert_eq!(hits.load(Ordering::SeqCst), 9);
}

#[test]
fn invalid_configs_are_rejected_up_front() {
    let work = tempfile::tempdir().unwrap();
    assert!(matches!(
        Harvester::new(SourceConfig { page_size: 0, ..http_cfg() }, work.path()),
        Err(HarvestError::Config(_))
    ));
    let err = Harvester::new(SourceConfig::directory("/nonexistent/dir"), work.path())
        .unwrap()
        .run(RunOptions::default(), &mut |_| Ok(()))
        .unwrap_err();
    assert!(matches!(err, HarvestError::Io { .. }));
}
