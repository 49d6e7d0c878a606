//! Temporary pipeline configurations over the repository's rules, shapes
//! and fixture corpus.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use kgforge_cli::PipelineConfig;
use kgforge_harvest::SourceConfig;

pub fn repo(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

pub fn read(rel: &str) -> String {
    std::fs::read_to_string(repo(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

pub fn counts() -> serde_json::Value {
    serde_json::from_str(&read("fixtures/expected/counts.json")).unwrap()
}

/// A config rooted at `dir` (store and work below it) plus its file.
pub fn fixture_config(dir: &Path) -> (PipelineConfig, PathBuf) {
    let cfg = PipelineConfig {
        source: SourceConfig::directory(repo("fixtures/corpus")),
        mint: Default::default(),
        rules_dir: repo("rules"),
        shapes_dir: repo("shapes"),
        vocab: None,
        store_dir: dir.join("store"),
        work_dir: dir.join("work"),
        bind: "127.0.0.1:0".into(),
        reload_secs: 0,
    };
    let path = dir.join("kgforge.json");
    std::fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    (cfg, path)
}

/// Relative path → file bytes for every file under `dir`.
pub fn snapshot_dir(dir: &Path) -> std::collections::BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut std::collections::BTreeMap<String, Vec<u8>>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = Default::default();
    walk(dir, dir, &mut out);
    out
}
