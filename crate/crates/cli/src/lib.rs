//! The `kgforge` command line: each pipeline stage as a command, plus `run`
//! for the whole daily sequence and `serve` for the query endpoint.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 stage failure,
//! 3 validation violations.

pub mod config;
pub mod lock;
pub mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, SystemTime};

use anyhow::Result;
use clap::{Parser, Subcommand};
use log::{error, info, warn};
use serde_json::json;

use kgforge_core::rdf::Iri;
use kgforge_endpoint::{Snapshot, SnapshotHandle};

pub use config::PipelineConfig;
use lock::StoreLock;
use pipeline::{run_stage, RunSummary};

#[derive(Debug, Parser)]
#[command(name = "kgforge", version, about = "Build and serve a chemistry knowledge graph from JSON-LD records")]
pub struct Cli {
    /// Pipeline configuration file.
    #[arg(short, long, env = "KGFORGE_CONFIG", default_value = "kgforge.json", global = true)]
    pub config: PathBuf,
    /// Only log warnings and errors.
    #[arg(short, long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fetch records into the cache.
    Harvest {
        /// Continue an interrupted harvest from its checkpoint.
        #[arg(long)]
        resume: bool,
    },
    /// Convert cached records into staged quads with the rule pack.
    Transform,
    /// Add staged quads to the store.
    Load {
        /// Empty the store first.
        #[arg(long)]
        fresh: bool,
    },
    /// Check the store against the shapes; exits 3 on violations.
    Validate,
    /// Print store statistics.
    Stats,
    /// Serve the store over HTTP until interrupted.
    Serve {
        /// Overrides the configured bind address.
        #[arg(long)]
        bind: Option<String>,
    },
    /// harvest, transform, load, validate and stats in sequence.
    Run {
        /// Continue an interrupted harvest from its checkpoint.
        #[arg(long)]
        resume: bool,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("{0:#}")]
    Usage(anyhow::Error),
    #[error("{0:#}")]
    Stage(anyhow::Error),
    #[error("validation found {0} violation(s)")]
    Violations(usize),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Stage(_) => 2,
            Failure::Violations(_) => 3,
        }
    }
}

fn stage_err(e: anyhow::Error) -> Failure {
    Failure::Stage(e)
}

fn lock(cfg: &PipelineConfig) -> Result<StoreLock, Failure> {
    StoreLock::acquire(&cfg.store_dir).map_err(stage_err)
}

pub fn cmd_harvest(cfg: &PipelineConfig, resume: bool) -> Result<usize, Failure> {
    let _lock = lock(cfg)?;
    harvest_stage(cfg, resume)
}

fn harvest_stage(cfg: &PipelineConfig, resume: bool) -> Result<usize, Failure> {
    let r = run_stage(
        cfg,
        "harvest",
        |r: &kgforge_harvest::HarvestReport| {
            json!({
                "harvested": r.entries.len(),
                "yielded": r.yielded,
                "fetched": r.fetched,
                "cache_hits": r.cache_hits,
                "skipped_malformed": r.skipped_malformed,
                "filtered_since": r.filtered_since,
                "duplicates": r.duplicates,
                "requests": r.requests,
                "resumed": r.resumed,
            })
        },
        || pipeline::harvest(cfg, resume),
    )
    .map_err(stage_err)?;
    println!(
        "harvested {} records ({} fetched, {} from cache, {} skipped as malformed, {} before the since date)",
        r.entries.len(),
        r.fetched,
        r.cache_hits,
        r.skipped_malformed,
        r.filtered_since
    );
    Ok(r.entries.len())
}

pub fn cmd_transform(cfg: &PipelineConfig) -> Result<pipeline::TransformOutcome, Failure> {
    let _lock = lock(cfg)?;
    transform_stage(cfg)
}

fn transform_stage(cfg: &PipelineConfig) -> Result<pipeline::TransformOutcome, Failure> {
    let out = run_stage(
        cfg,
        "transform",
        |o: &pipeline::TransformOutcome| {
            json!({"records": o.records, "triples": o.triples, "per_rule": o.per_rule, "failed_records": o.failed_records.len()})
        },
        || pipeline::transform(cfg),
    )
    .map_err(stage_err)?;
    let w = out.per_rule.keys().map(String::len).max().unwrap_or(0);
    for (rule, n) in &out.per_rule {
        println!("{rule:<w$}  {n:>8}");
    }
    println!("transformed {} records into {} quads", out.records, out.triples);
    if !out.failed_records.is_empty() {
        warn!("{} record(s) failed to transform", out.failed_records.len());
    }
    Ok(out)
}

pub fn cmd_load(cfg: &PipelineConfig, fresh: bool) -> Result<pipeline::LoadOutcome, Failure> {
    let _lock = lock(cfg)?;
    load_stage(cfg, fresh)
}

fn load_stage(cfg: &PipelineConfig, fresh: bool) -> Result<pipeline::LoadOutcome, Failure> {
    let out = run_stage(cfg, "load", |o| serde_json::to_value(o).unwrap_or_default(), || pipeline::load(cfg, fresh))
        .map_err(stage_err)?;
    println!("inserted {} new quads ({} total in {} graphs)", out.inserted, out.total_quads, out.graphs);
    Ok(out)
}

/// Exits with [`Failure::Violations`] when the report has any.
pub fn cmd_validate(cfg: &PipelineConfig) -> Result<kgforge_core::validator::ValidationReport, Failure> {
    let report = run_stage(
        cfg,
        "validate",
        |r: &kgforge_core::validator::ValidationReport| json!({"violations": r.violations(), "warnings": r.warnings()}),
        || pipeline::validate(cfg),
    )
    .map_err(stage_err)?;
    print!("{}", report.table());
    println!("{} violation(s), {} warning(s)", report.violations(), report.warnings());
    if report.has_violations() {
        return Err(Failure::Violations(report.violations()));
    }
    Ok(report)
}

pub fn cmd_stats(cfg: &PipelineConfig) -> Result<kgforge_core::store::StoreStats, Failure> {
    let stats = run_stage(cfg, "stats", |s| serde_json::to_value(s).unwrap_or_default(), || pipeline::stats(cfg))
        .map_err(stage_err)?;
    print!("{}", stats.table());
    println!("{}", serde_json::to_string_pretty(&stats).unwrap_or_default());
    Ok(stats)
}

/// The full sequence under one store lock; stops at the first failing stage. Violations still
/// let `stats` run, then set the exit code.
pub fn cmd_run(cfg: &PipelineConfig, resume: bool) -> Result<RunSummary, Failure> {
    std::fs::create_dir_all(&cfg.work_dir).map_err(|e| stage_err(e.into()))?;
    let _lock = lock(cfg)?;
    RunSummary::default().write(&cfg.work_dir).map_err(stage_err)?;
    harvest_stage(cfg, resume)?;
    transform_stage(cfg)?;
    load_stage(cfg, false)?;
    let validated = cmd_validate(cfg);
    if let Err(Failure::Stage(e)) = validated {
        return Err(Failure::Stage(e));
    }
    cmd_stats(cfg)?;
    validated?;
    let summary = RunSummary::read(&cfg.work_dir);
    info!("run summary written to {}", RunSummary::path(&cfg.work_dir).display());
    Ok(summary)
}

fn manifest_mtime(cfg: &PipelineConfig) -> Option<SystemTime> {
    std::fs::metadata(cfg.store_dir.join("manifest.json")).and_then(|m| m.modified()).ok()
}

fn snapshot(cfg: &PipelineConfig) -> Result<Snapshot> {
    let classes: Vec<Iri> = pipeline::vocabulary(cfg)?.classes().cloned().collect();
    Ok(Snapshot::new(pipeline::load_store(cfg)?, &classes))
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    {
        let term = async {
            match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
                Ok(mut s) => {
                    s.recv().await;
                }
                Err(_) => std::future::pending::<()>().await,
            }
        };
        tokio::select! { _ = ctrl_c => {}, _ = term => {} }
    }
    #[cfg(not(unix))]
    ctrl_c.await;
    info!("shutdown requested, draining requests");
}

/// Serves the store; a newer persisted store replaces the snapshot after it
/// has been loaded in full.
pub fn cmd_serve(cfg: &PipelineConfig, bind: Option<String>) -> Result<(), Failure> {
    let addr = bind.unwrap_or_else(|| cfg.bind.clone());
    let handle = SnapshotHandle::new(snapshot(cfg).map_err(stage_err)?);
    let rt = tokio::runtime::Runtime::new().map_err(|e| stage_err(e.into()))?;
    rt.block_on(async {
        let listener = kgforge_endpoint::bind(&addr).await.map_err(|e| stage_err(e.into()))?;
        if cfg.reload_secs > 0 {
            let (cfg, handle) = (cfg.clone(), handle.clone());
            tokio::spawn(async move {
                let mut seen = manifest_mtime(&cfg);
                let mut tick = tokio::time::interval(Duration::from_secs(cfg.reload_secs));
                loop {
                    tick.tick().await;
                    let now = manifest_mtime(&cfg);
                    if now == seen {
                        continue;
                    }
                    let c = cfg.clone();
                    match tokio::task::spawn_blocking(move || snapshot(&c)).await {
                        Ok(Ok(s)) => {
                            handle.install(s);
                            seen = now;
                            info!("installed a new store snapshot");
                        }
                        Ok(Err(e)) => warn!("keeping the current snapshot: {e:#}"),
                        Err(e) => warn!("snapshot reload panicked: {e}"),
                    }
                }
            });
        }
        kgforge_endpoint::serve(listener, handle, shutdown_signal()).await.map_err(|e| stage_err(e.into()))
    })
}

pub fn execute(cli: Cli) -> Result<(), Failure> {
    let cfg = PipelineConfig::load(&cli.config).map_err(Failure::Usage)?;
    match cli.command {
        Command::Harvest { resume } => cmd_harvest(&cfg, resume).map(drop),
        Command::Transform => cmd_transform(&cfg).map(drop),
        Command::Load { fresh } => cmd_load(&cfg, fresh).map(drop),
        Command::Validate => cmd_validate(&cfg).map(drop),
        Command::Stats => cmd_stats(&cfg).map(drop),
        Command::Serve { bind } => cmd_serve(&cfg, bind),
        Command::Run { resume } => cmd_run(&cfg, resume).map(drop),
    }
}

/// Parses `args` and runs the command, mapping outcomes to exit codes.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = if cli.quiet { "warn" } else { "info" };
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or("KGFORGE_LOG", level)).try_init();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            error!("{f}");
            ExitCode::from(f.exit_code())
        }
    }
}
