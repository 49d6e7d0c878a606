//! The vocabulary table: short names (`nfdicore:NFDI_0000009`, `obo:CHEBI_59999`,
//! `schema:Dataset`, …) mapped to their IRIs, loaded from `rules/vocab.ttl`.
//!
//! `bfo:has_participant`, `bfo:realizes` and `bfo:bearer_of` are aliases of
//! `obo:BFO_0000057`, `obo:BFO_0000055` and `obo:BFO_0000053`.

use std::collections::BTreeMap;

use crate::rdf::{parse_turtle_subset, Iri, RdfError, Subject, Term, RDFS_NS, RDF_NS, XSD_NS};

pub const SCHEMA: &str = "http://schema.org/";
pub const NFDICORE: &str = "https://nfdi.fiz-karlsruhe.de/ontology/";
pub const OBO: &str = "http://purl.obolibrary.org/obo/";
const ALIAS: &str = "urn:kgforge:vocab:alias";

/// The table shipped in the repository.
pub const SHIPPED_VOCAB: &str = include_str!("../../../rules/vocab.ttl");

/// Prefixes under which every entry must expand.
pub const PREFIXES: [(&str, &str); 3] = [("schema", SCHEMA), ("nfdicore", NFDICORE), ("obo", OBO)];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum VocabError {
    #[error("unknown vocabulary name {0}")]
    UnknownName(String),
    #[error("IRI <{0}> is not in the vocabulary table")]
    NotInTable(String),
    #[error("vocabulary entry <{0}> is outside the schema/nfdicore/obo namespaces")]
    OutsideNamespaces(String),
    #[error("vocabulary entry <{0}> has no rdfs:Class or rdf:Property type")]
    Untyped(String),
    #[error("invalid vocabulary file: {0}")]
    Parse(#[from] RdfError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntryKind {
    Class,
    Property,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VocabEntry {
    pub iri: Iri,
    pub kind: EntryKind,
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VocabTable {
    entries: BTreeMap<String, VocabEntry>,
    aliases: BTreeMap<String, String>,
}

/// `http://schema.org/Dataset` → `schema:Dataset`, if under a known prefix.
pub fn compact(iri: &str) -> Option<String> {
    PREFIXES.iter().find_map(|(p, ns)| {
        iri.strip_prefix(ns)
            .filter(|local| !local.is_empty())
            .map(|local| format!("{p}:{local}"))
    })
}

impl VocabTable {
    pub fn shipped() -> Self {
        Self::from_turtle(SHIPPED_VOCAB).expect("shipped vocabulary is valid")
    }

    pub fn load(path: &std::path::Path) -> Result<Self, VocabError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| VocabError::Parse(RdfError::Syntax { line: 0, column: 0, message: e.to_string() }))?;
        Self::from_turtle(&text)
    }

    pub fn from_turtle(text: &str) -> Result<Self, VocabError> {
        let g = parse_turtle_subset(text)?;
        let ty = Iri::rdf_type();
        let label = Iri::new_unchecked(format!("{RDFS_NS}label"));
        let alias = Iri::new_unchecked(ALIAS);
        let class = Iri::new_unchecked(format!("{RDFS_NS}Class"));
        let property = Iri::new_unchecked(format!("{RDF_NS}Property"));

        let mut entries = BTreeMap::new();
        let mut aliases = BTreeMap::new();
        let subjects: std::collections::BTreeSet<&Subject> = g.iter().map(|t| &t.subject).collect();
        for s in subjects {
            let Some(iri) = s.as_iri() else { continue };
            let types: Vec<&Term> = g.objects(s, &ty).collect();
            let kind = if types.iter().any(|t| t.as_iri() == Some(&class)) {
                EntryKind::Class
            } else if types.iter().any(|t| t.as_iri() == Some(&property)) {
                EntryKind::Property
            } else {
                return Err(VocabError::Untyped(iri.to_string()));
            };
            let short = compact(iri.as_str()).ok_or_else(|| VocabError::OutsideNamespaces(iri.as_str().into()))?;
            for a in g.objects(s, &alias).filter_map(Term::as_literal) {
                aliases.insert(a.lexical().to_string(), short.clone());
            }
            let label = g
                .objects(s, &label)
                .filter_map(Term::as_literal)
                .map(|l| l.lexical().to_string())
                .next();
            entries.insert(short, VocabEntry { iri: iri.clone(), kind, label });
        }
        Ok(VocabTable { entries, aliases })
    }

    pub fn resolve(&self, short_name: &str) -> Result<Iri, VocabError> {
        let key = self.aliases.get(short_name).map(String::as_str).unwrap_or(short_name);
        self.entries
            .get(key)
            .map(|e| e.iri.clone())
            .ok_or_else(|| VocabError::UnknownName(short_name.to_string()))
    }

    pub fn entry(&self, short_name: &str) -> Option<&VocabEntry> {
        let key = self.aliases.get(short_name).map(String::as_str).unwrap_or(short_name);
        self.entries.get(key)
    }

    pub fn contains_iri(&self, iri: &str) -> bool {
        compact(iri).is_some_and(|s| self.entries.contains_key(&s))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &VocabEntry)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn classes(&self) -> impl Iterator<Item = &Iri> {
        self.entries
            .values()
            .filter(|e| e.kind == EntryKind::Class)
            .map(|e| &e.iri)
    }

    /// Fails on the first IRI that is neither in the table nor in the
    /// rdf/rdfs/xsd namespaces.
    pub fn check_closed<'a>(&self, iris: impl IntoIterator<Item = &'a Iri>) -> Result<(), VocabError> {
        for iri in iris {
            let s = iri.as_str();
            if [RDF_NS, RDFS_NS, XSD_NS].iter().any(|ns| s.starts_with(ns)) {
                continue;
            }
            if !self.contains_iri(s) {
                return Err(VocabError::NotInTable(s.to_string()));
            }
        }
        Ok(())
    }
}
