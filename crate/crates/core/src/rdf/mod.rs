//! RDF 1.1 data model: IRIs, blank nodes, literals, triples, quads and
//! set-semantics graphs, plus N-Triples / N-Quads / Turtle-subset I/O.
//!
//! Every term type derives `Ord`; the derived order is the canonical order
//! used for deterministic serialization (blank nodes, then IRIs, then
//! literals; lexicographic within a kind).

use std::cmp::Ordering;
use std::collections::btree_set;
use std::collections::BTreeSet;
use std::fmt;
use std::ops::Bound;

mod ntriples;
pub(crate) mod syntax;
mod turtle;

pub use ntriples::{parse_nquads, parse_ntriples, serialize_nquads, serialize_ntriples};
pub use turtle::parse_turtle_subset;

pub const RDF_NS: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#";
pub const RDFS_NS: &str = "http://www.w3.org/2000/01/rdf-schema#";
pub const XSD_NS: &str = "http://www.w3.org/2001/XMLSchema#";

pub const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";
pub const RDF_LANG_STRING: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#langString";
pub const XSD_STRING: &str = "http://www.w3.org/2001/XMLSchema#string";
pub const XSD_INTEGER: &str = "http://www.w3.org/2001/XMLSchema#integer";
pub const XSD_DECIMAL: &str = "http://www.w3.org/2001/XMLSchema#decimal";
pub const XSD_DOUBLE: &str = "http://www.w3.org/2001/XMLSchema#double";
pub const XSD_BOOLEAN: &str = "http://www.w3.org/2001/XMLSchema#boolean";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RdfError {
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown prefix '{prefix}' at {line}:{column}")]
    UnknownPrefix {
        prefix: String,
        line: usize,
        column: usize,
    },
    #[error("unsupported {feature} at {line}:{column}")]
    Unsupported {
        feature: String,
        line: usize,
        column: usize,
    },
    #[error("invalid IRI <{iri}>: {reason}")]
    InvalidIri { iri: String, reason: &'static str },
    #[error("invalid blank node label '{0}'")]
    InvalidBlankNode(String),
    #[error("invalid literal: {0}")]
    InvalidLiteral(String),
}

impl RdfError {
    /// Line number for positioned errors.
    pub fn line(&self) -> Option<usize> {
        match self {
            RdfError::Syntax { line, .. }
            | RdfError::UnknownPrefix { line, .. }
            | RdfError::Unsupported { line, .. } => Some(*line),
            _ => None,
        }
    }
}

/// An absolute IRI.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Iri(String);

impl Iri {
    pub fn new(value: impl Into<String>) -> Result<Self, RdfError> {
        let value = value.into();
        validate_iri(&value)?;
        Ok(Iri(value))
    }

    /// Bypasses validation. Only for compile-time constants and search bounds.
    pub(crate) fn new_unchecked(value: impl Into<String>) -> Self {
        Iri(value.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }

    pub fn rdf_type() -> Self {
        Iri::new_unchecked(RDF_TYPE)
    }

    pub fn xsd_string() -> Self {
        Iri::new_unchecked(XSD_STRING)
    }
}

impl fmt::Display for Iri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}>", self.0)
    }
}

impl AsRef<str> for Iri {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

fn validate_iri(value: &str) -> Result<(), RdfError> {
    let err = |reason| {
        Err(RdfError::InvalidIri {
            iri: value.to_string(),
            reason,
        })
    };
    let Some(colon) = value.find(':') else {
        return err("relative IRI (no scheme)");
    };
    let scheme = &value[..colon];
    let mut chars = scheme.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() => {}
        _ => return err("relative IRI (no scheme)"),
    }
    if !chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '+' | '-' | '.')) {
        return err("relative IRI (no scheme)");
    }
    for c in value.chars() {
        if c <= ' ' || matches!(c, '<' | '>' | '"' | '{' | '}' | '|' | '^' | '`' | '\\') {
            return err("contains a character that must be percent-encoded");
        }
    }
    Ok(())
}

/// A blank node; labels match `[A-Za-z0-9_]+`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BlankNode(String);

impl BlankNode {
    pub fn new(label: impl Into<String>) -> Result<Self, RdfError> {
        let label = label.into();
        if label.is_empty() || !label.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_') {
            return Err(RdfError::InvalidBlankNode(label));
        }
        Ok(BlankNode(label))
    }

    pub fn label(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for BlankNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "_:{}", self.0)
    }
}

/// An RDF literal. The lexical form is kept verbatim.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    lexical: String,
    datatype: Iri,
    language: Option<String>,
}

impl Literal {
    /// An `xsd:string` literal.
    pub fn string(lexical: impl Into<String>) -> Self {
        Literal {
            lexical: lexical.into(),
            datatype: Iri::xsd_string(),
            language: None,
        }
    }

    pub fn typed(lexical: impl Into<String>, datatype: Iri) -> Result<Self, RdfError> {
        if datatype.as_str() == RDF_LANG_STRING {
            return Err(RdfError::InvalidLiteral(
                "rdf:langString requires a language tag".into(),
            ));
        }
        Ok(Literal {
            lexical: lexical.into(),
            datatype,
            language: None,
        })
    }

    pub fn lang(lexical: impl Into<String>, language: impl Into<String>) -> Result<Self, RdfError> {
        let language = language.into();
        if !is_valid_lang_tag(&language) {
            return Err(RdfError::InvalidLiteral(format!(
                "invalid language tag '{language}'"
            )));
        }
        Ok(Literal {
            lexical: lexical.into(),
            datatype: Iri::new_unchecked(RDF_LANG_STRING),
            language: Some(language),
        })
    }

    pub fn lexical(&self) -> &str {
        &self.lexical
    }

    pub fn datatype(&self) -> &Iri {
        &self.datatype
    }

    pub fn language(&self) -> Option<&str> {
        self.language.as_deref()
    }

    /// `xsd:string` or `rdf:langString`.
    pub fn is_string_like(&self) -> bool {
        self.language.is_some() || self.datatype.as_str() == XSD_STRING
    }
}

pub(crate) fn is_valid_lang_tag(tag: &str) -> bool {
    let mut parts = tag.split('-');
    let first = parts.next().unwrap_or("");
    !first.is_empty()
        && first.bytes().all(|b| b.is_ascii_alphabetic())
        && parts.all(|p| !p.is_empty() && p.bytes().all(|b| b.is_ascii_alphanumeric()))
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("\"")?;
        f.write_str(&escape_literal(&self.lexical))?;
        f.write_str("\"")?;
        if let Some(lang) = &self.language {
            write!(f, "@{lang}")
        } else if self.datatype.as_str() != XSD_STRING {
            write!(f, "^^{}", self.datatype)
        } else {
            Ok(())
        }
    }
}

/// N-Triples string escaping: the five short escapes, `\uXXXX` for the
/// remaining control characters, everything else verbatim.
pub(crate) fn escape_literal(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 || c as u32 == 0x7f => {
                out.push_str(&format!("\\u{:04X}", c as u32))
            }
            c => out.push(c),
        }
    }
    out
}

/// Any RDF term. Variant order defines the canonical kind order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    BlankNode(BlankNode),
    Iri(Iri),
    Literal(Literal),
}

impl Term {
    pub fn as_iri(&self) -> Option<&Iri> {
        match self {
            Term::Iri(i) => Some(i),
            _ => None,
        }
    }

    pub fn as_literal(&self) -> Option<&Literal> {
        match self {
            Term::Literal(l) => Some(l),
            _ => None,
        }
    }

    pub fn is_literal(&self) -> bool {
        matches!(self, Term::Literal(_))
    }

    /// The subject form of this term, if it may appear in subject position.
    pub fn to_subject(&self) -> Option<Subject> {
        match self {
            Term::BlankNode(b) => Some(Subject::BlankNode(b.clone())),
            Term::Iri(i) => Some(Subject::Iri(i.clone())),
            Term::Literal(_) => None,
        }
    }
}

/// Total order over terms: blank nodes < IRIs < literals, then lexicographic
/// on label / IRI / (lexical, datatype, language).
pub fn compare_terms(a: &Term, b: &Term) -> Ordering {
    a.cmp(b)
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::BlankNode(b) => b.fmt(f),
            Term::Iri(i) => i.fmt(f),
            Term::Literal(l) => l.fmt(f),
        }
    }
}

impl From<Iri> for Term {
    fn from(i: Iri) -> Self {
        Term::Iri(i)
    }
}

impl From<BlankNode> for Term {
    fn from(b: BlankNode) -> Self {
        Term::BlankNode(b)
    }
}

impl From<Literal> for Term {
    fn from(l: Literal) -> Self {
        Term::Literal(l)
    }
}

impl From<Subject> for Term {
    fn from(s: Subject) -> Self {
        match s {
            Subject::BlankNode(b) => Term::BlankNode(b),
            Subject::Iri(i) => Term::Iri(i),
        }
    }
}

/// Subject position: an IRI or a blank node. Same kind order as [`Term`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Subject {
    BlankNode(BlankNode),
    Iri(Iri),
}

impl Subject {
    pub fn as_iri(&self) -> Option<&Iri> {
        match self {
            Subject::Iri(i) => Some(i),
            Subject::BlankNode(_) => None,
        }
    }

    pub fn to_term(&self) -> Term {
        self.clone().into()
    }
}

impl fmt::Display for Subject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Subject::BlankNode(b) => b.fmt(f),
            Subject::Iri(i) => i.fmt(f),
        }
    }
}

impl From<Iri> for Subject {
    fn from(i: Iri) -> Self {
        Subject::Iri(i)
    }
}

impl From<BlankNode> for Subject {
    fn from(b: BlankNode) -> Self {
        Subject::BlankNode(b)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    pub subject: Subject,
    pub predicate: Iri,
    pub object: Term,
}

impl Triple {
    pub fn new(subject: impl Into<Subject>, predicate: Iri, object: impl Into<Term>) -> Self {
        Triple {
            subject: subject.into(),
            predicate,
            object: object.into(),
        }
    }

    pub fn in_graph(self, graph: Option<Iri>) -> Quad {
        Quad {
            graph,
            triple: self,
        }
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} .", self.subject, self.predicate, self.object)
    }
}

/// A triple in a graph; `graph == None` is the default graph.
/// Ordered by (graph, subject, predicate, object).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Quad {
    pub graph: Option<Iri>,
    pub triple: Triple,
}

impl Quad {
    pub fn new(triple: Triple, graph: Option<Iri>) -> Self {
        Quad { graph, triple }
    }
}

impl fmt::Display for Quad {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = &self.triple;
        match &self.graph {
            Some(g) => write!(f, "{} {} {} {} .", t.subject, t.predicate, t.object, g),
            None => write!(f, "{} {} {} .", t.subject, t.predicate, t.object),
        }
    }
}

/// Access to triples by (optional) subject, predicate and object.
/// Implemented by [`Graph`] and by quad-store views.
pub trait TripleSource {
    fn triples_matching<'a>(
        &'a self,
        subject: Option<&'a Subject>,
        predicate: Option<&'a Iri>,
        object: Option<&'a Term>,
    ) -> Box<dyn Iterator<Item = Triple> + 'a>;
}

/// A set of triples.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Graph {
    triples: BTreeSet<Triple>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns `true` if the triple was not already present.
    pub fn insert(&mut self, triple: Triple) -> bool {
        self.triples.insert(triple)
    }

    pub fn contains(&self, triple: &Triple) -> bool {
        self.triples.contains(triple)
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// Triples in canonical order.
    pub fn iter(&self) -> btree_set::Iter<'_, Triple> {
        self.triples.iter()
    }

    pub fn union_with(&mut self, other: &Graph) {
        self.triples.extend(other.triples.iter().cloned());
    }

    /// Distinct subjects carrying `rdf:type class`.
    pub fn instances_of<'a>(&'a self, class: &'a Iri) -> impl Iterator<Item = &'a Subject> + 'a {
        let ty = Iri::rdf_type();
        let mut seen: BTreeSet<&Subject> = BTreeSet::new();
        self.triples
            .iter()
            .filter(move |t| t.predicate == ty && t.object.as_iri() == Some(class))
            .filter_map(move |t| seen.insert(&t.subject).then_some(&t.subject))
    }

    /// All objects of `(subject, predicate, ?)`.
    pub fn objects<'a>(
        &'a self,
        subject: &'a Subject,
        predicate: &'a Iri,
    ) -> impl Iterator<Item = &'a Term> + 'a {
        self.subject_range(subject, Some(predicate))
            .map(|t| &t.object)
    }

    /// Every term (subject, predicate or object) that occurs in the graph.
    pub fn terms(&self) -> BTreeSet<Term> {
        let mut out = BTreeSet::new();
        for t in &self.triples {
            out.insert(t.subject.to_term());
            out.insert(Term::Iri(t.predicate.clone()));
            out.insert(t.object.clone());
        }
        out
    }

    pub(crate) fn subject_range<'a>(
        &'a self,
        subject: &'a Subject,
        predicate: Option<&'a Iri>,
    ) -> impl Iterator<Item = &'a Triple> + 'a {
        let lower = Triple {
            subject: subject.clone(),
            predicate: predicate
                .cloned()
                .unwrap_or_else(|| Iri::new_unchecked(String::new())),
            object: Term::BlankNode(BlankNode(String::new())),
        };
        self.triples
            .range((Bound::Included(lower), Bound::Unbounded))
            .take_while(move |t| {
                &t.subject == subject && predicate.is_none_or(|p| &t.predicate == p)
            })
    }
}

impl TripleSource for Graph {
    fn triples_matching<'a>(
        &'a self,
        subject: Option<&'a Subject>,
        predicate: Option<&'a Iri>,
        object: Option<&'a Term>,
    ) -> Box<dyn Iterator<Item = Triple> + 'a> {
        match subject {
            Some(s) => Box::new(
                self.subject_range(s, predicate)
                    .filter(move |t| object.is_none_or(|o| &t.object == o))
                    .cloned(),
            ),
            None => Box::new(
                self.triples
                    .iter()
                    .filter(move |t| {
                        predicate.is_none_or(|p| &t.predicate == p)
                            && object.is_none_or(|o| &t.object == o)
                    })
                    .cloned(),
            ),
        }
    }
}

impl FromIterator<Triple> for Graph {
    fn from_iter<I: IntoIterator<Item = Triple>>(iter: I) -> Self {
        Graph {
            triples: iter.into_iter().collect(),
        }
    }
}

impl Extend<Triple> for Graph {
    fn extend<I: IntoIterator<Item = Triple>>(&mut self, iter: I) {
        self.triples.extend(iter)
    }
}

impl IntoIterator for Graph {
    type Item = Triple;
    type IntoIter = btree_set::IntoIter<Triple>;

    fn into_iter(self) -> Self::IntoIter {
        self.triples.into_iter()
    }
}

impl<'a> IntoIterator for &'a Graph {
    type Item = &'a Triple;
    type IntoIter = btree_set::Iter<'a, Triple>;

    fn into_iter(self) -> Self::IntoIter {
        self.triples.iter()
    }
}
