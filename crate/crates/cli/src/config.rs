//! Pipeline configuration: one JSON file, overridable per field through
//! `KGFORGE_*` environment variables.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use kgforge_core::mint::MintConfig;
use kgforge_harvest::{parse_since, SourceConfig, SourceMode};

fn default_bind() -> String {
    "127.0.0.1:7878".into()
}

fn default_reload() -> u64 {
    60
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub source: SourceConfig,
    #[serde(default)]
    pub mint: MintConfig,
    pub rules_dir: PathBuf,
    pub shapes_dir: PathBuf,
    /// Vocabulary table; defaults to `rules_dir/vocab.ttl`, then the built-in one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vocab: Option<PathBuf>,
    pub store_dir: PathBuf,
    /// Cache, checkpoint, staged quads, reports and the run summary.
    pub work_dir: PathBuf,
    #[serde(default = "default_bind")]
    pub bind: String,
    /// How often `serve` checks the store for a newer snapshot; 0 disables.
    #[serde(default = "default_reload")]
    pub reload_secs: u64,
}

/// Every recognised override, with the field it sets.
pub const ENV_VARS: [&str; 12] = [
    "KGFORGE_SOURCE_MODE",
    "KGFORGE_SOURCE_DIRECTORY",
    "KGFORGE_SOURCE_BASE_URL",
    "KGFORGE_SOURCE_SINCE",
    "KGFORGE_SOURCE_RATE_LIMIT",
    "KGFORGE_MINT_BASE",
    "KGFORGE_RULES_DIR",
    "KGFORGE_SHAPES_DIR",
    "KGFORGE_STORE_DIR",
    "KGFORGE_WORK_DIR",
    "KGFORGE_BIND",
    "KGFORGE_RELOAD_SECS",
];

impl PipelineConfig {
    /// Reads `path`, applies overrides from the process environment and
    /// resolves relative paths from the file against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: PipelineConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_against(base);
        cfg.apply_env(std::env::vars())?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_against(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.rules_dir);
        fix(&mut self.shapes_dir);
        fix(&mut self.store_dir);
        fix(&mut self.work_dir);
        if let Some(v) = &mut self.vocab {
            fix(v);
        }
        if let Some(d) = &mut self.source.directory {
            fix(d);
        }
    }

    /// Applies `KGFORGE_*` pairs from `vars`; other names are ignored and an
    /// unknown `KGFORGE_` name is an error.
    pub fn apply_env(&mut self, vars: impl IntoIterator<Item = (String, String)>) -> Result<()> {
        for (k, v) in vars {
            if !k.starts_with("KGFORGE_") || k == "KGFORGE_CONFIG" || k == "KGFORGE_LOG" {
                continue;
            }
            match k.as_str() {
                "KGFORGE_SOURCE_MODE" => {
                    self.source.mode = match v.as_str() {
                        "http" => SourceMode::Http,
                        "directory" => SourceMode::Directory,
                        _ => bail!("{k}: expected http or directory, got {v:?}"),
                    }
                }
                "KGFORGE_SOURCE_DIRECTORY" => self.source.directory = Some(v.into()),
                "KGFORGE_SOURCE_BASE_URL" => self.source.base_url = Some(v),
                "KGFORGE_SOURCE_SINCE" => {
                    self.source.since = if v.is_empty() { None } else { Some(parse_since(&v).map_err(anyhow::Error::msg)?) }
                }
                "KGFORGE_SOURCE_RATE_LIMIT" => self.source.rate_limit = v.parse().with_context(|| format!("{k}={v}"))?,
                "KGFORGE_MINT_BASE" => self.mint.base = v,
                "KGFORGE_RULES_DIR" => self.rules_dir = v.into(),
                "KGFORGE_SHAPES_DIR" => self.shapes_dir = v.into(),
                "KGFORGE_STORE_DIR" => self.store_dir = v.into(),
                "KGFORGE_WORK_DIR" => self.work_dir = v.into(),
                "KGFORGE_BIND" => self.bind = v,
                "KGFORGE_RELOAD_SECS" => self.reload_secs = v.parse().with_context(|| format!("{k}={v}"))?,
                _ => bail!("unknown environment override {k} (known: {})", ENV_VARS.join(", ")),
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.source.validate()?;
        self.mint.validate()?;
        let abs = |p: &Path| std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf());
        let (store, work) = (abs(&self.store_dir), abs(&self.work_dir));
        if store.starts_with(&work) || work.starts_with(&store) {
            bail!("store_dir and work_dir must not contain each other");
        }
        Ok(())
    }

    pub fn vocab_path(&self) -> Option<PathBuf> {
        self.vocab.clone().or_else(|| Some(self.rules_dir.join("vocab.ttl")).filter(|p| p.exists()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> PipelineConfig {
        serde_json::from_str(
            r#"{"source": {"mode": "directory", "directory": "corpus"},
                "rules_dir": "rules", "shapes_dir": "shapes",
                "store_dir": "out/store", "work_dir": "out/work"}"#,
        )
        .unwrap()
    }

    #[test]
    fn defaults_and_round_trip() {
        let cfg = sample();
        assert_eq!(cfg.bind, "127.0.0.1:7878");
        assert_eq!(cfg.mint, MintConfig::default());
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<PipelineConfig>(&text).unwrap(), cfg);
    }

    #[test]
    fn env_overrides() {
        let mut cfg = sample();
        cfg.apply_env([
            ("KGFORGE_STORE_DIR".into(), "/tmp/s".into()),
            ("KGFORGE_SOURCE_SINCE".into(), "2014-06".into()),
            ("PATH".into(), "/bin".into()),
        ])
        .unwrap();
        assert_eq!(cfg.store_dir, PathBuf::from("/tmp/s"));
        assert_eq!(cfg.source.since, chrono::NaiveDate::from_ymd_opt(2014, 6, 1));
        assert!(cfg.apply_env([("KGFORGE_COLOUR".into(), "x".into())]).is_err());
        assert!(cfg.apply_env([("KGFORGE_SOURCE_MODE".into(), "ftp".into())]).is_err());
    }

    #[test]
    fn relative_paths_follow_the_file() {
        let mut cfg = sample();
        cfg.resolve_against(Path::new("/etc/kg"));
        assert_eq!(cfg.store_dir, PathBuf::from("/etc/kg/out/store"));
        assert_eq!(cfg.source.directory, Some(PathBuf::from("/etc/kg/corpus")));
    }

    #[test]
    fn nested_store_and_work_rejected() {
        let mut cfg = sample();
        cfg.work_dir = cfg.store_dir.join("work");
        assert!(cfg.validate().is_err());
    }
}
