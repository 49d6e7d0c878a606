//! JSON-LD records to RDF for the subset the repository API emits: inline
//! term/prefix contexts, `@id`, `@type`, `@value`, `@language`, nested
//! objects and arrays.
//!
//! Anonymous objects become blank nodes labelled by their JSON path from the
//! record root (`b_creator_0`, `b_isPartOf_about`), so conversion is a pure
//! function of the payload.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::rdf::{BlankNode, Graph, Iri, Literal, Subject, Term, Triple, XSD_BOOLEAN, XSD_DECIMAL, XSD_INTEGER};
use crate::sha256_hex;

/// The schema.org term map shipped with the repository.
pub const SHIPPED_SCHEMA_CONTEXT: &str = include_str!("../../../rules/schema_context.json");

const SCHEMA_ORG_CONTEXTS: &[&str] = &[
    "http://schema.org",
    "http://schema.org/",
    "https://schema.org",
    "https://schema.org/",
];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum JsonLdError {
    #[error("unsupported JSON-LD keyword {0}")]
    UnsupportedKeyword(String),
    #[error("term {0:?} has no context mapping and there is no @vocab")]
    UnmappedTerm(String),
    #[error("remote context {0} cannot be fetched")]
    RemoteContext(String),
    #[error("invalid IRI {value:?}: {reason}")]
    InvalidIri { value: String, reason: String },
    #[error("invalid context: {0}")]
    InvalidContext(String),
    #[error("invalid value at {path}: {message}")]
    InvalidValue { path: String, message: String },
    #[error("invalid record: {0}")]
    InvalidRecord(String),
}

/// How a term's string values are interpreted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Coercion {
    None,
    Id,
    Datatype(Iri),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TermDefinition {
    pub iri: Iri,
    pub coercion: Coercion,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct JsonLdContext {
    pub terms: BTreeMap<String, TermDefinition>,
    pub prefixes: BTreeMap<String, String>,
    pub vocab: Option<String>,
}

/// A harvested payload with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub source_id: String,
    pub submission_date: NaiveDate,
    pub payload: Value,
    pub fetched_at: DateTime<Utc>,
}

impl RawRecord {
    pub fn new(
        source_id: impl Into<String>,
        submission_date: NaiveDate,
        payload: Value,
        fetched_at: DateTime<Utc>,
    ) -> Result<Self, JsonLdError> {
        let source_id = source_id.into();
        if source_id.is_empty() {
            return Err(JsonLdError::InvalidRecord("empty source_id".into()));
        }
        Ok(RawRecord { source_id, submission_date, payload, fetched_at })
    }
}

fn is_absolute(s: &str) -> bool {
    Iri::new(s).is_ok()
}

impl JsonLdContext {
    pub fn shipped_schema() -> Self {
        let v: Value = serde_json::from_str(SHIPPED_SCHEMA_CONTEXT).expect("shipped context is JSON");
        Self::from_value(&v).expect("shipped context is valid")
    }

    /// Accepts either a context object or a document with an `@context` key.
    pub fn from_value(v: &Value) -> Result<Self, JsonLdError> {
        let mut ctx = JsonLdContext::default();
        match v.get("@context") {
            Some(inner) => ctx.merge(inner)?,
            None => ctx.merge(v)?,
        }
        Ok(ctx)
    }

    /// Applies a local context (object, string or array) on top of `self`.
    pub fn merge(&mut self, v: &Value) -> Result<(), JsonLdError> {
        match v {
            Value::Null => Ok(()),
            Value::String(s) if SCHEMA_ORG_CONTEXTS.contains(&s.as_str()) => {
                let shipped = Self::shipped_schema();
                self.terms.extend(shipped.terms);
                self.prefixes.extend(shipped.prefixes);
                if shipped.vocab.is_some() {
                    self.vocab = shipped.vocab;
                }
                Ok(())
            }
            Value::String(s) => Err(JsonLdError::RemoteContext(s.clone())),
            Value::Array(items) => items.iter().try_for_each(|i| self.merge(i)),
            Value::Object(map) => self.merge_object(map),
            other => Err(JsonLdError::InvalidContext(format!("unexpected {other}"))),
        }
    }

    fn merge_object(&mut self, map: &Map<String, Value>) -> Result<(), JsonLdError> {
        // prefixes first so term definitions may use them in any order
        for (k, v) in map {
            if k.starts_with('@') {
                continue;
            }
            if let Value::String(ns) = v {
                if !k.contains(':') && (ns.ends_with('/') || ns.ends_with('#')) && is_absolute(ns) {
                    self.prefixes.insert(k.clone(), ns.clone());
                }
            }
        }
        for (k, v) in map {
            match k.as_str() {
                "@vocab" => match v {
                    Value::String(s) if is_absolute(s) => self.vocab = Some(s.clone()),
                    Value::Null => self.vocab = None,
                    _ => return Err(JsonLdError::InvalidContext("@vocab must be an absolute IRI".into())),
                },
                kw if kw.starts_with('@') => return Err(JsonLdError::UnsupportedKeyword(kw.to_string())),
                _ if self.prefixes.contains_key(k) => {}
                _ => {
                    let def = self.term_definition(k, v)?;
                    self.terms.insert(k.clone(), def);
                }
            }
        }
        Ok(())
    }

    fn term_definition(&self, term: &str, v: &Value) -> Result<TermDefinition, JsonLdError> {
        match v {
            Value::String(s) => Ok(TermDefinition {
                iri: self.expand_iri(s)?,
                coercion: Coercion::None,
            }),
            Value::Object(def) => {
                for k in def.keys() {
                    if k != "@id" && k != "@type" {
                        return Err(JsonLdError::UnsupportedKeyword(k.clone()));
                    }
                }
                let iri = match def.get("@id") {
                    Some(Value::String(s)) => self.expand_iri(s)?,
                    None => self.expand_vocab(term)?,
                    Some(_) => return Err(JsonLdError::InvalidContext(format!("@id of {term} must be a string"))),
                };
                let coercion = match def.get("@type") {
                    None => Coercion::None,
                    Some(Value::String(t)) if t == "@id" || t == "@vocab" => Coercion::Id,
                    Some(Value::String(t)) => Coercion::Datatype(self.expand_iri(t)?),
                    Some(_) => return Err(JsonLdError::InvalidContext(format!("@type of {term} must be a string"))),
                };
                Ok(TermDefinition { iri, coercion })
            }
            _ => Err(JsonLdError::InvalidContext(format!("definition of {term} must be a string or object"))),
        }
    }

    /// Compact IRI (`schema:name`) or absolute IRI; relative references fail.
    pub fn expand_iri(&self, s: &str) -> Result<Iri, JsonLdError> {
        if let Some((prefix, local)) = s.split_once(':') {
            if let Some(ns) = self.prefixes.get(prefix) {
                if !local.starts_with("//") {
                    return self.make_iri(format!("{ns}{local}"));
                }
            }
        }
        if let Some(def) = self.terms.get(s) {
            return Ok(def.iri.clone());
        }
        self.make_iri(s.to_string())
    }

    fn make_iri(&self, s: String) -> Result<Iri, JsonLdError> {
        Iri::new(s.as_str()).map_err(|e| JsonLdError::InvalidIri { value: s, reason: e.to_string() })
    }

    fn expand_vocab(&self, term: &str) -> Result<Iri, JsonLdError> {
        match &self.vocab {
            Some(v) => self.make_iri(format!("{v}{term}")),
            None => Err(JsonLdError::UnmappedTerm(term.to_string())),
        }
    }

    /// Property keys and `@type` values: term, compact IRI, absolute IRI,
    /// then `@vocab`.
    fn expand_term(&self, key: &str) -> Result<(Iri, Coercion), JsonLdError> {
        if let Some(def) = self.terms.get(key) {
            return Ok((def.iri.clone(), def.coercion.clone()));
        }
        if key.contains(':') {
            if key.starts_with("_:") {
                return Err(JsonLdError::InvalidIri {
                    value: key.to_string(),
                    reason: "blank node as property".into(),
                });
            }
            return Ok((self.expand_iri(key)?, Coercion::None));
        }
        Ok((self.expand_vocab(key)?, Coercion::None))
    }
}

struct Converter {
    ctx: JsonLdContext,
    graph: Graph,
    labels: BTreeSet<String>,
}

fn sanitize(key: &str) -> String {
    key.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect()
}

fn literal(lexical: impl Into<String>, datatype: &str) -> Literal {
    Literal::typed(lexical, Iri::new(datatype).expect("constant datatype")).expect("not langString")
}

fn number_literal(n: &serde_json::Number) -> Literal {
    if n.is_i64() || n.is_u64() {
        return literal(n.to_string(), XSD_INTEGER);
    }
    let f = n.as_f64().unwrap_or(0.0);
    if f.fract() == 0.0 && f.abs() < 1e15 {
        literal(format!("{}", f as i64), XSD_INTEGER)
    } else {
        literal(format!("{f}"), XSD_DECIMAL)
    }
}

impl Converter {
    fn check_keywords(obj: &Map<String, Value>, allowed: &[&str]) -> Result<(), JsonLdError> {
        for k in obj.keys() {
            if k.starts_with('@') && !allowed.contains(&k.as_str()) {
                return Err(JsonLdError::UnsupportedKeyword(k.clone()));
            }
        }
        Ok(())
    }

    fn blank(&mut self, path: &str) -> Result<BlankNode, JsonLdError> {
        if !self.labels.insert(path.to_string()) {
            return Err(JsonLdError::InvalidValue {
                path: path.to_string(),
                message: "two objects map to the same blank node label".into(),
            });
        }
        Ok(BlankNode::new(path).expect("sanitized label"))
    }

    fn node(&mut self, obj: &Map<String, Value>, path: &str, forced: Option<&Iri>) -> Result<Subject, JsonLdError> {
        Self::check_keywords(obj, &["@id", "@type", "@context"])?;
        if obj.contains_key("@context") && path != "b" && forced.is_none() {
            return Err(JsonLdError::UnsupportedKeyword("@context (nested)".into()));
        }
        let subject: Subject = match (obj.get("@id"), forced) {
            (Some(Value::String(id)), _) => self.id_subject(id, path)?,
            (Some(_), _) => {
                return Err(JsonLdError::InvalidValue { path: path.into(), message: "@id must be a string".into() })
            }
            (None, Some(iri)) => Subject::Iri(iri.clone()),
            (None, None) => Subject::BlankNode(self.blank(path)?),
        };
        match obj.get("@type") {
            None | Some(Value::Null) => {}
            Some(Value::String(t)) => self.emit_type(&subject, t)?,
            Some(Value::Array(ts)) => {
                for t in ts {
                    match t {
                        Value::String(t) => self.emit_type(&subject, t)?,
                        _ => {
                            return Err(JsonLdError::InvalidValue {
                                path: path.into(),
                                message: "@type entries must be strings".into(),
                            })
                        }
                    }
                }
            }
            Some(_) => {
                return Err(JsonLdError::InvalidValue { path: path.into(), message: "@type must be a string".into() })
            }
        }
        for (key, value) in obj {
            if key.starts_with('@') {
                continue;
            }
            let (predicate, coercion) = self.ctx.expand_term(key)?;
            let child = format!("{path}_{}", sanitize(key));
            self.values(&subject, &predicate, &coercion, value, &child)?;
        }
        Ok(subject)
    }

    fn id_subject(&mut self, id: &str, path: &str) -> Result<Subject, JsonLdError> {
        if let Some(label) = id.strip_prefix("_:") {
            let label = format!("{path}_{}", sanitize(label));
            return Ok(Subject::BlankNode(BlankNode::new(label).expect("sanitized label")));
        }
        Ok(Subject::Iri(self.ctx.expand_iri(id)?))
    }

    fn emit_type(&mut self, subject: &Subject, t: &str) -> Result<(), JsonLdError> {
        let (class, _) = self.ctx.expand_term(t)?;
        self.graph.insert(Triple::new(subject.clone(), Iri::rdf_type(), class));
        Ok(())
    }

    fn values(
        &mut self,
        subject: &Subject,
        predicate: &Iri,
        coercion: &Coercion,
        value: &Value,
        path: &str,
    ) -> Result<(), JsonLdError> {
        let object: Term = match value {
            Value::Null => return Ok(()),
            Value::Array(items) => {
                for (i, item) in items.iter().enumerate() {
                    self.values(subject, predicate, coercion, item, &format!("{path}_{i}"))?;
                }
                return Ok(());
            }
            Value::Object(obj) if obj.contains_key("@value") => self.value_object(obj, path)?,
            Value::Object(obj) => self.node(obj, path, None)?.to_term(),
            Value::String(s) => match coercion {
                Coercion::Id => self.id_subject(s, path)?.to_term(),
                Coercion::Datatype(dt) => Literal::typed(s.clone(), dt.clone())
                    .map_err(|e| JsonLdError::InvalidValue { path: path.into(), message: e.to_string() })?
                    .into(),
                Coercion::None => Literal::string(s.clone()).into(),
            },
            Value::Number(n) => number_literal(n).into(),
            Value::Bool(b) => literal(b.to_string(), XSD_BOOLEAN).into(),
        };
        self.graph.insert(Triple::new(subject.clone(), predicate.clone(), object));
        Ok(())
    }

    fn value_object(&mut self, obj: &Map<String, Value>, path: &str) -> Result<Term, JsonLdError> {
        Self::check_keywords(obj, &["@value", "@type", "@language"])?;
        let bad = |m: &str| JsonLdError::InvalidValue { path: path.into(), message: m.into() };
        if let Some(k) = obj.keys().find(|k| !k.starts_with('@')) {
            return Err(bad(&format!("value object has extra key {k}")));
        }
        let lang = obj.get("@language");
        let ty = obj.get("@type");
        if lang.is_some() && ty.is_some() {
            return Err(bad("@value with both @type and @language"));
        }
        let lexical = match &obj["@value"] {
            Value::String(s) => s.clone(),
            Value::Number(n) if ty.is_none() && lang.is_none() => return Ok(number_literal(n).into()),
            Value::Bool(b) if ty.is_none() && lang.is_none() => return Ok(literal(b.to_string(), XSD_BOOLEAN).into()),
            Value::Number(n) => n.to_string(),
            Value::Bool(b) => b.to_string(),
            _ => return Err(bad("@value must be a scalar")),
        };
        match (lang, ty) {
            (Some(Value::String(l)), None) => Literal::lang(lexical, l.clone())
                .map(Term::from)
                .map_err(|e| bad(&e.to_string())),
            (None, Some(Value::String(t))) => {
                let (dt, _) = self.ctx.expand_term(t)?;
                Literal::typed(lexical, dt).map(Term::from).map_err(|e| bad(&e.to_string()))
            }
            (None, None) => Ok(Literal::string(lexical).into()),
            _ => Err(bad("@type and @language must be strings")),
        }
    }
}

/// Converts `record.payload`; an anonymous root becomes the blank node `b`.
pub fn to_rdf(record: &RawRecord, context: &JsonLdContext) -> Result<Graph, JsonLdError> {
    payload_to_rdf(&record.payload, context, None)
}

/// Like [`to_rdf`], but a root object without `@id` is given `root` as its
/// subject.
pub fn to_rdf_rooted(record: &RawRecord, context: &JsonLdContext, root: &Iri) -> Result<Graph, JsonLdError> {
    payload_to_rdf(&record.payload, context, Some(root))
}

pub fn payload_to_rdf(payload: &Value, context: &JsonLdContext, root: Option<&Iri>) -> Result<Graph, JsonLdError> {
    let ctx = context;
    let roots: Vec<&Map<String, Value>> = match payload {
        Value::Object(o) => vec![o],
        Value::Array(items) => items
            .iter()
            .map(|i| i.as_object().ok_or_else(|| JsonLdError::InvalidRecord("array items must be objects".into())))
            .collect::<Result<_, _>>()?,
        _ => return Err(JsonLdError::InvalidRecord("payload must be an object or an array of objects".into())),
    };
    let single = roots.len() == 1 && payload.is_object();
    let mut conv = Converter {
        ctx: JsonLdContext::default(),
        graph: Graph::new(),
        labels: BTreeSet::new(),
    };
    for (i, obj) in roots.into_iter().enumerate() {
        let mut local = ctx.clone();
        if let Some(c) = obj.get("@context") {
            local.merge(c)?;
        }
        conv.ctx = local;
        let path = if single { "b".to_string() } else { format!("b_{i}") };
        if obj.is_empty() {
            continue;
        }
        conv.node(obj, &path, if single { root } else { None })?;
    }
    Ok(conv.graph)
}

/// Prefixes every blank node label with the first 12 hex digits of
/// SHA-256(`record_scope`), so graphs from different records never share a
/// blank node.
pub fn relabel_blank_nodes(g: &Graph, record_scope: &str) -> Graph {
    let digest = &sha256_hex(record_scope.as_bytes())[..12];
    let relabel = |b: &BlankNode| BlankNode::new(format!("r{digest}_{}", b.label())).expect("valid label");
    g.iter()
        .map(|t| {
            let subject = match &t.subject {
                Subject::BlankNode(b) => Subject::BlankNode(relabel(b)),
                s => s.clone(),
            };
            let object = match &t.object {
                Term::BlankNode(b) => Term::BlankNode(relabel(b)),
                o => o.clone(),
            };
            Triple::new(subject, t.predicate.clone(), object)
        })
        .collect()
}
