//! The pipeline stages and the artifacts they leave in the work directory:
//!
//! | stage     | reads                              | writes                                   |
//! |-----------|------------------------------------|------------------------------------------|
//! | harvest   | source                             | `cache/`, `harvested.json`               |
//! | transform | `harvested.json`, cache, rules     | `staged.nq`, `transform.json`            |
//! | load      | `staged.nq`, `transform.json`      | store directory                          |
//! | validate  | store, shapes                      | `validation-report.json`                 |
//! | stats     | store, vocabulary                  | `stats.json`                             |
//!
//! Every stage also records itself in `run-summary.json`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use chrono::{SecondsFormat, Utc};
use log::{info, warn};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use kgforge_core::jsonld::JsonLdContext;
use kgforge_core::mapping::RulePack;
use kgforge_core::rdf::{parse_nquads, serialize_nquads, Graph, Iri, Quad};
use kgforge_core::store::{LoadContext, QuadStore, StoreStats};
use kgforge_core::transform::Transformer;
use kgforge_core::validator::{ShapeSet, ValidationReport};
use kgforge_core::vocab::VocabTable;
use kgforge_harvest::{cached_record, Cache, CacheEntry, HarvestReport, Harvester, RunOptions};

use crate::config::PipelineConfig;

pub const HARVESTED_FILE: &str = "harvested.json";
pub const STAGED_FILE: &str = "staged.nq";
pub const TRANSFORM_FILE: &str = "transform.json";
pub const REPORT_FILE: &str = "validation-report.json";
pub const STATS_FILE: &str = "stats.json";
pub const SUMMARY_FILE: &str = "run-summary.json";

fn write_json(path: &Path, v: &impl Serialize) -> Result<()> {
    if let Some(p) = path.parent() {
        std::fs::create_dir_all(p).with_context(|| format!("creating {}", p.display()))?;
    }
    let mut text = serde_json::to_string_pretty(v)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, hint: &str) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {} ({hint})", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn vocabulary(cfg: &PipelineConfig) -> Result<VocabTable> {
    match cfg.vocab_path() {
        Some(p) => VocabTable::load(&p).with_context(|| format!("loading vocabulary {}", p.display())),
        None => Ok(VocabTable::shipped()),
    }
}

pub fn load_store(cfg: &PipelineConfig) -> Result<QuadStore> {
    QuadStore::load(&cfg.store_dir).with_context(|| format!("loading store {}", cfg.store_dir.display()))
}

pub fn harvest(cfg: &PipelineConfig, resume: bool) -> Result<HarvestReport> {
    let mut h = Harvester::new(cfg.source.clone(), &cfg.work_dir)?;
    let report = h.run(RunOptions { resume }, &mut |_| Ok(()))?;
    write_json(&cfg.work_dir.join(HARVESTED_FILE), &report.entries)?;
    Ok(report)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransformOutcome {
    pub records: usize,
    /// Distinct staged quads.
    pub triples: usize,
    /// Distinct quads per rule.
    pub per_rule: BTreeMap<String, usize>,
    /// Records that could not be transformed and were skipped.
    pub failed_records: Vec<String>,
    /// Graph IRI → source ids of the records it receives.
    pub graph_sources: BTreeMap<String, BTreeSet<String>>,
}

pub fn transform(cfg: &PipelineConfig) -> Result<TransformOutcome> {
    let entries: Vec<CacheEntry> = read_json(&cfg.work_dir.join(HARVESTED_FILE), "run harvest first")?;
    let cache = Cache::open(&cfg.work_dir.join("cache"))?;
    let rules = RulePack::load_dir(&cfg.rules_dir).with_context(|| format!("loading rules from {}", cfg.rules_dir.display()))?;
    if rules.rules.is_empty() {
        bail!("no rules in {}", cfg.rules_dir.display());
    }
    let vocab = vocabulary(cfg)?;
    for r in &rules.rules {
        vocab.check_closed(r.iris()).with_context(|| format!("rule {}", r.name))?;
    }
    let t = Transformer::new(JsonLdContext::shipped_schema(), rules, cfg.mint.clone());

    let mut out = TransformOutcome::default();
    let mut quads: BTreeSet<Quad> = BTreeSet::new();
    let mut per_rule: BTreeMap<String, BTreeSet<Quad>> = BTreeMap::new();
    for entry in &entries {
        let result = cached_record(&cache, entry)
            .map_err(anyhow::Error::from)
            .and_then(|rec| t.transform(&rec).map_err(anyhow::Error::from));
        let rec = match result {
            Ok(r) => r,
            Err(e) => {
                warn!("skipping {}: {e:#}", entry.source_id);
                out.failed_records.push(entry.source_id.clone());
                continue;
            }
        };
        out.records += 1;
        let g = Some(rec.graph.clone());
        for (name, graph) in rec.per_rule {
            per_rule.entry(name).or_default().extend(graph.into_iter().map(|tr| tr.in_graph(g.clone())));
        }
        out.graph_sources.entry(rec.graph.as_str().to_string()).or_default().insert(rec.source_id);
        quads.extend(rec.quads);
    }
    out.triples = quads.len();
    out.per_rule = per_rule.into_iter().map(|(k, v)| (k, v.len())).collect();
    let list: Vec<Quad> = quads.into_iter().collect();
    let staged = cfg.work_dir.join(STAGED_FILE);
    std::fs::write(&staged, serialize_nquads(&list)).with_context(|| format!("writing {}", staged.display()))?;
    write_json(&cfg.work_dir.join(TRANSFORM_FILE), &out)?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadOutcome {
    pub inserted: usize,
    pub total_quads: usize,
    pub graphs: usize,
}

/// Removes only the files a store persists, never anything else.
fn clear_store(dir: &Path) -> Result<()> {
    let graphs = dir.join("graphs");
    if graphs.exists() {
        std::fs::remove_dir_all(&graphs).with_context(|| format!("removing {}", graphs.display()))?;
    }
    for f in ["manifest.json", "default.nq"] {
        let p = dir.join(f);
        if p.exists() {
            std::fs::remove_file(&p).with_context(|| format!("removing {}", p.display()))?;
        }
    }
    Ok(())
}

pub fn load(cfg: &PipelineConfig, fresh: bool) -> Result<LoadOutcome> {
    let staged_path = cfg.work_dir.join(STAGED_FILE);
    let text = std::fs::read_to_string(&staged_path)
        .with_context(|| format!("reading {} (run transform first)", staged_path.display()))?;
    let staged = parse_nquads(&text).with_context(|| format!("parsing {}", staged_path.display()))?;
    let outcome: TransformOutcome = read_json(&cfg.work_dir.join(TRANSFORM_FILE), "run transform first")?;
    if fresh {
        info!("--fresh: clearing {}", cfg.store_dir.display());
        clear_store(&cfg.store_dir)?;
    }
    let mut store = load_store(cfg)?;
    let mut ctx = LoadContext { timestamp: Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true), ..Default::default() };
    for (g, ids) in outcome.graph_sources {
        ctx.sources.insert(Some(Iri::new(g.as_str()).with_context(|| format!("graph IRI {g}"))?), ids);
    }
    let inserted = store.load_quads_with(staged, &ctx);
    store.persist(&cfg.store_dir).with_context(|| format!("persisting {}", cfg.store_dir.display()))?;
    Ok(LoadOutcome { inserted, total_quads: store.len(), graphs: store.graph_names().filter(|g| g.is_some()).count() })
}

pub fn union_graph(store: &QuadStore) -> Graph {
    store.quads().map(|q| q.triple).collect()
}

pub fn validate(cfg: &PipelineConfig) -> Result<ValidationReport> {
    let shapes = ShapeSet::load_dir(&cfg.shapes_dir).with_context(|| format!("loading shapes from {}", cfg.shapes_dir.display()))?;
    vocabulary(cfg)?.check_closed(shapes.iris()).context("shapes")?;
    let report = shapes.validate(&union_graph(&load_store(cfg)?));
    write_json(&cfg.work_dir.join(REPORT_FILE), &report.to_json())?;
    Ok(report)
}

pub fn stats(cfg: &PipelineConfig) -> Result<StoreStats> {
    let classes: Vec<Iri> = vocabulary(cfg)?.classes().cloned().collect();
    let stats = load_store(cfg)?.stats(&classes);
    write_json(&cfg.work_dir.join(STATS_FILE), &stats)?;
    Ok(stats)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub ok: bool,
    pub started_at: String,
    pub seconds: f64,
    /// Stage-specific counts.
    pub counts: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Machine-readable account of the latest run of each stage.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    /// `ok`, `violations` or `failed`.
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed_stage: Option<String>,
    pub harvested: Option<usize>,
    pub transformed_triples: Option<usize>,
    pub inserted: Option<usize>,
    pub violations: Option<usize>,
    pub warnings: Option<usize>,
    pub stages: Vec<StageRecord>,
}

impl RunSummary {
    pub fn path(work_dir: &Path) -> PathBuf {
        work_dir.join(SUMMARY_FILE)
    }

    /// A missing or unreadable summary starts empty.
    pub fn read(work_dir: &Path) -> Self {
        std::fs::read_to_string(Self::path(work_dir))
            .ok()
            .and_then(|t| serde_json::from_str(&t).ok())
            .unwrap_or_default()
    }

    pub fn write(&self, work_dir: &Path) -> Result<()> {
        write_json(&Self::path(work_dir), self)
    }

    /// Replaces the record of `rec.stage` and refreshes the headline counts.
    pub fn record(&mut self, rec: StageRecord) {
        let n = |key: &str| rec.counts.get(key).and_then(Value::as_u64).map(|v| v as usize);
        if rec.ok {
            match rec.stage.as_str() {
                "harvest" => self.harvested = n("harvested"),
                "transform" => self.transformed_triples = n("triples"),
                "load" => self.inserted = n("inserted"),
                "validate" => {
                    self.violations = n("violations");
                    self.warnings = n("warnings");
                }
                _ => {}
            }
        }
        match self.stages.iter_mut().find(|s| s.stage == rec.stage) {
            Some(s) => *s = rec,
            None => self.stages.push(rec),
        }
        self.failed_stage = self.stages.iter().find(|s| !s.ok).map(|s| s.stage.clone());
        self.status = if self.failed_stage.is_some() {
            "failed"
        } else if self.violations.unwrap_or(0) > 0 {
            "violations"
        } else {
            "ok"
        }
        .into();
    }
}

/// Runs `f` as stage `name`, timing it and recording it in the summary.
pub fn run_stage<T>(
    cfg: &PipelineConfig,
    name: &str,
    counts: impl FnOnce(&T) -> Value,
    f: impl FnOnce() -> Result<T>,
) -> Result<T> {
    let started_at = Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true);
    let t0 = Instant::now();
    let result = f();
    let rec = StageRecord {
        stage: name.to_string(),
        ok: result.is_ok(),
        started_at,
        seconds: t0.elapsed().as_secs_f64(),
        counts: result.as_ref().map(counts).unwrap_or(Value::Null),
        error: result.as_ref().err().map(|e| format!("{e:#}")),
    };
    std::fs::create_dir_all(&cfg.work_dir).with_context(|| format!("creating {}", cfg.work_dir.display()))?;
    let mut summary = RunSummary::read(&cfg.work_dir);
    summary.record(rec);
    summary.write(&cfg.work_dir)?;
    result.with_context(|| format!("stage {name} failed"))
}
