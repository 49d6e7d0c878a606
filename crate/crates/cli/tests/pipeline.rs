//! The commands over the fixture corpus, in-process and through the binary.

mod common;

use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Command, Stdio};

use kgforge_cli::pipeline::{self, RunSummary};
use kgforge_cli::{cmd_harvest, cmd_load, cmd_run, cmd_stats, cmd_transform, cmd_validate, Failure};
use kgforge_core::rdf::{parse_ntriples, Quad};
use kgforge_core::store::QuadStore;

use common::*;

fn kgforge(config: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_kgforge"))
        .arg("--config")
        .arg(config)
        .args(args)
        .env("KGFORGE_LOG", "warn")
        .output()
        .unwrap()
}

#[test]
fn run_produces_the_golden_counts_and_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, _) = fixture_config(dir.path());
    let s = cmd_run(&cfg, false).unwrap();
    let quads = counts()["quads"].as_u64().unwrap() as usize;
    assert_eq!(
        (s.harvested, s.transformed_triples, s.inserted, s.violations, s.status.as_str()),
        (Some(50), Some(quads), Some(quads), Some(0), "ok")
    );
    let stages: Vec<&str> = s.stages.iter().map(|r| r.stage.as_str()).collect();
    assert_eq!(stages, ["harvest", "transform", "load", "validate", "stats"]);
    assert_eq!(
        std::fs::read_to_string(cfg.work_dir.join(pipeline::STAGED_FILE)).unwrap(),
        read("fixtures/expected/corpus.nq")
    );

    let before = snapshot_dir(&cfg.store_dir);
    let s2 = cmd_run(&cfg, false).unwrap();
    assert_eq!((s2.harvested, s2.inserted), (Some(50), Some(0)));
    assert_eq!(snapshot_dir(&cfg.store_dir), before);
}

#[test]
fn run_equals_the_individual_commands() {
    let a = tempfile::tempdir().unwrap();
    let (cfg_a, _) = fixture_config(a.path());
    let run = cmd_run(&cfg_a, false).unwrap();

    let b = tempfile::tempdir().unwrap();
    let (cfg_b, _) = fixture_config(b.path());
    cmd_harvest(&cfg_b, false).unwrap();
    cmd_transform(&cfg_b).unwrap();
    cmd_load(&cfg_b, false).unwrap();
    cmd_validate(&cfg_b).unwrap();
    cmd_stats(&cfg_b).unwrap();
    let seq = RunSummary::read(&cfg_b.work_dir);

    let headline = |s: &RunSummary| (s.status.clone(), s.harvested, s.transformed_triples, s.inserted, s.violations, s.warnings);
    assert_eq!(headline(&run), headline(&seq));
    let counts = |s: &RunSummary| s.stages.iter().map(|r| (r.stage.clone(), r.counts.clone())).collect::<Vec<_>>();
    assert_eq!(counts(&run), counts(&seq));

    // graph files match exactly; the manifests differ only in load timestamps
    let (sa, sb) = (snapshot_dir(&cfg_a.store_dir), snapshot_dir(&cfg_b.store_dir));
    assert_eq!(sa.keys().collect::<Vec<_>>(), sb.keys().collect::<Vec<_>>());
    for (k, v) in &sa {
        if k != "manifest.json" {
            assert_eq!(v, &sb[k], "{k}");
        }
    }
    for f in [pipeline::STAGED_FILE, pipeline::TRANSFORM_FILE, pipeline::REPORT_FILE, pipeline::STATS_FILE] {
        assert_eq!(std::fs::read(cfg_a.work_dir.join(f)).unwrap(), std::fs::read(cfg_b.work_dir.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn load_fresh_rebuilds_and_plain_load_keeps() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, _) = fixture_config(dir.path());
    cmd_run(&cfg, false).unwrap();
    assert_eq!(cmd_load(&cfg, false).unwrap().inserted, 0);
    let fresh = cmd_load(&cfg, true).unwrap();
    assert_eq!(fresh.inserted, fresh.total_quads);
    assert_eq!(fresh.graphs, counts()["graphs"].as_u64().unwrap() as usize);
}

/// A store holding one seeded-fault graph in a single named graph.
fn fault_store(cfg: &kgforge_cli::PipelineConfig, fixture: &str) {
    let g = parse_ntriples(&read(&format!("fixtures/faults/{fixture}.nt"))).unwrap();
    let name = kgforge_core::rdf::Iri::new(counts()["sample_graph"].as_str().unwrap()).unwrap();
    let mut store = QuadStore::new();
    store.load_quads(g.into_iter().map(|t| Quad::new(t, Some(name.clone()))));
    store.persist(&cfg.store_dir).unwrap();
}

#[test]
fn validate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, path) = fixture_config(dir.path());
    fault_store(&cfg, "measurement_unit");
    let out = kgforge(&path, &["validate"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("MeasurementUnit"));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(cfg.work_dir.join(pipeline::REPORT_FILE)).unwrap()).unwrap();
    assert_eq!(report["conforms"], false);
    assert!(matches!(cmd_validate(&cfg), Err(Failure::Violations(1))));

    let ok = tempfile::tempdir().unwrap();
    let (_, ok_path) = fixture_config(ok.path());
    assert_eq!(kgforge(&ok_path, &["run"]).status.code(), Some(0));
    assert_eq!(kgforge(&ok_path, &["validate"]).status.code(), Some(0));
}

#[test]
fn usage_and_stage_failures() {
    let dir = tempfile::tempdir().unwrap();
    let (_, path) = fixture_config(dir.path());
    assert_eq!(kgforge(&dir.path().join("missing.json"), &["stats"]).status.code(), Some(1));
    assert_eq!(kgforge(&path, &["frobnicate"]).status.code(), Some(1));
    assert_eq!(kgforge(&path, &["--help"]).status.code(), Some(0));
    let bad_env = Command::new(env!("CARGO_BIN_EXE_kgforge"))
        .args(["--config", path.to_str().unwrap(), "stats"])
        .env("KGFORGE_SOURCE_MODE", "carrier-pigeon")
        .output()
        .unwrap();
    assert_eq!(bad_env.status.code(), Some(1));

    // transform before any harvest names the missing artifact
    let out = kgforge(&path, &["transform"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("run harvest first"));
    let s = RunSummary::read(&dir.path().join("work"));
    assert_eq!((s.status.as_str(), s.failed_stage.as_deref()), ("failed", Some("transform")));
}

#[test]
fn concurrent_runs_are_locked_out() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, path) = fixture_config(dir.path());
    let _held = kgforge_cli::lock::StoreLock::acquire(&cfg.store_dir).unwrap();
    let out = kgforge(&path, &["run"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("locked"));
}

#[test]
fn env_overrides_reach_the_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let (_, path) = fixture_config(dir.path());
    let out = Command::new(env!("CARGO_BIN_EXE_kgforge"))
        .args(["--config", path.to_str().unwrap(), "harvest"])
        .env("KGFORGE_SOURCE_SINCE", "2014-06")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("harvested 49 records"), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn serve_binary_answers_and_stops_on_sigterm() {
    let dir = tempfile::tempdir().unwrap();
    let (_, path) = fixture_config(dir.path());
    assert_eq!(kgforge(&path, &["run"]).status.code(), Some(0));
    let mut child = Command::new(env!("CARGO_BIN_EXE_kgforge"))
        .args(["--config", path.to_str().unwrap(), "serve"])
        .env("KGFORGE_LOG", "info")
        .stderr(Stdio::piped())
        .stdout(Stdio::null())
        .spawn()
        .unwrap();
    let mut lines = BufReader::new(child.stderr.take().unwrap()).lines();
    let addr = loop {
        let line = lines.next().expect("server exited early").unwrap();
        if let Some(i) = line.find("serving on ") {
            break line[i + "serving on ".len()..].trim().to_string();
        }
    };
    let body = ureq::get(&format!("{addr}/stats")).call().unwrap().body_mut().read_to_string().unwrap();
    let stats: serde_json::Value = serde_json::from_str(&body).unwrap();
    assert_eq!(stats["total_triples"].as_u64(), counts()["quads"].as_u64());
    Command::new("kill").args(["-TERM", &child.id().to_string()]).status().unwrap();
    assert!(child.wait().unwrap().success());
}
