//! IRI policies: literal-derived node IRIs, date-encoded resource IRIs and
//! date-keyed named-graph IRIs.

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use uuid::Uuid;

use crate::mapping::encode_for_uri;
use crate::rdf::{Graph, Iri, Subject, Term, Triple};

pub const DEFAULT_BASE: &str = "https://ditrare.ise.fiz-karlsruhe.de/chemotion-kg/";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MintError {
    #[error("cannot mint a node IRI from an empty lexical form")]
    EmptyLexical,
    #[error("invalid month {0}")]
    InvalidMonth(u32),
    #[error("empty source identifier")]
    EmptySourceId,
    #[error("base IRI {0} must be absolute and end with '/'")]
    InvalidBase(String),
    #[error("minted IRI {iri} is not valid: {reason}")]
    InvalidIri { iri: String, reason: String },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MintStrategy {
    #[default]
    LiteralEncoded,
    Uuid,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraphGranularity {
    #[default]
    Month,
    Day,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MintConfig {
    pub base: String,
    #[serde(default)]
    pub strategy: MintStrategy,
    #[serde(default = "default_namespace")]
    pub uuid_namespace: Uuid,
    #[serde(default)]
    pub granularity: GraphGranularity,
}

fn default_namespace() -> Uuid {
    Uuid::NAMESPACE_URL
}

impl Default for MintConfig {
    fn default() -> Self {
        MintConfig {
            base: DEFAULT_BASE.to_string(),
            strategy: MintStrategy::default(),
            uuid_namespace: default_namespace(),
            granularity: GraphGranularity::default(),
        }
    }
}

fn make_iri(s: String) -> Result<Iri, MintError> {
    Iri::new(s.as_str()).map_err(|e| MintError::InvalidIri { iri: s, reason: e.to_string() })
}

impl MintConfig {
    pub fn validate(&self) -> Result<(), MintError> {
        if !self.base.ends_with('/') || Iri::new(self.base.as_str()).is_err() {
            return Err(MintError::InvalidBase(self.base.clone()));
        }
        Ok(())
    }

    pub fn nodes_prefix(&self) -> String {
        format!("{}nodes/", self.base)
    }
}

pub fn mint_node_iri(cfg: &MintConfig, lexical: &str) -> Result<Iri, MintError> {
    if lexical.is_empty() {
        return Err(MintError::EmptyLexical);
    }
    let local = match cfg.strategy {
        MintStrategy::LiteralEncoded => encode_for_uri(lexical),
        MintStrategy::Uuid => Uuid::new_v5(&cfg.uuid_namespace, lexical.as_bytes()).to_string(),
    };
    make_iri(format!("{}{local}", cfg.nodes_prefix()))
}

/// `{base}resources/{YYYY}/{MM}/{source_id}/{suffix}`; the source id is kept
/// verbatim and the suffix is percent-encoded. An empty suffix ends the IRI
/// at the source id.
pub fn mint_resource_iri(
    cfg: &MintConfig,
    year: i32,
    month: u32,
    source_id: &str,
    suffix: &str,
) -> Result<Iri, MintError> {
    if !(1..=12).contains(&month) {
        return Err(MintError::InvalidMonth(month));
    }
    if source_id.is_empty() {
        return Err(MintError::EmptySourceId);
    }
    let mut s = format!("{}resources/{year:04}/{month:02}/{source_id}", cfg.base);
    if !suffix.is_empty() {
        s.push('/');
        s.push_str(&encode_for_uri(suffix));
    }
    make_iri(s)
}

/// `{base}graphs/{YYYY}/{MM}`, or `…/{DD}` at day granularity.
pub fn mint_graph_iri(cfg: &MintConfig, date: NaiveDate) -> Result<Iri, MintError> {
    let mut s = format!("{}graphs/{:04}/{:02}", cfg.base, date.year(), date.month());
    if cfg.granularity == GraphGranularity::Day {
        s += &format!("/{:02}", date.day());
    }
    make_iri(s)
}

/// Resource IRI for a record: the source id is split at its last '/' into
/// the identifier and the suffix (`10.14272/KEY/Raman` → `10.14272/KEY` + `Raman`).
pub fn mint_record_iri(cfg: &MintConfig, date: NaiveDate, source_id: &str) -> Result<Iri, MintError> {
    let (stem, suffix) = match source_id.rsplit_once('/') {
        Some((stem, suffix)) if !stem.is_empty() => (stem, suffix),
        _ => (source_id, ""),
    };
    mint_resource_iri(cfg, date.year(), date.month(), stem, suffix)
}

fn decode_percent(s: &str) -> Option<String> {
    let bytes = s.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' {
            let hex = s.get(i + 1..i + 3)?;
            out.push(u8::from_str_radix(hex, 16).ok()?);
            i += 3;
        } else {
            out.push(bytes[i]);
            i += 1;
        }
    }
    String::from_utf8(out).ok()
}

/// Under the UUID strategy, rewrites every literal-encoded node IRI
/// (`{base}nodes/{encoded}`) produced by the rules into its name-based UUID
/// form. Under the literal strategy the graph is returned unchanged.
pub fn remint_nodes(cfg: &MintConfig, g: Graph) -> Graph {
    if cfg.strategy == MintStrategy::LiteralEncoded {
        return g;
    }
    let prefix = cfg.nodes_prefix();
    let remap = |iri: &Iri| -> Iri {
        iri.as_str()
            .strip_prefix(&prefix)
            .and_then(decode_percent)
            .and_then(|lex| mint_node_iri(cfg, &lex).ok())
            .unwrap_or_else(|| iri.clone())
    };
    g.into_iter()
        .map(|t| {
            let subject = match &t.subject {
                Subject::Iri(i) => Subject::Iri(remap(i)),
                other => other.clone(),
            };
            let object = match &t.object {
                Term::Iri(i) => Term::Iri(remap(i)),
                other => other.clone(),
            };
            Triple::new(subject, t.predicate, object)
        })
        .collect()
}
