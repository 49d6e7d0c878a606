//! Shape-lite validation: cardinality/kind/class constraints on instances of
//! a target class, and pattern-implication rules ("whenever the `when`
//! patterns match, the `then` patterns must match too").
//!
//! Shape files (`*.shapes`) look like:
//!
//! ```text
//! prefix obo: <http://purl.obolibrary.org/obo/>
//!
//! shape MoleculeShape
//!   target obo:CHEBI_23367
//!   property obo:IAO_0000235 min 1 class nfdicore:NFDI_0000223 severity warning
//! end
//!
//! pattern MeasurementUnit
//!   when { ?datum a obo:IAO_0000109 }
//!   then { ?datum obo:IAO_0000039 ?unit . ?unit a obo:IAO_0000003 }
//!   focus ?datum
//! end
//! ```
//!
//! With `class C`, `min`/`max` count only the values typed `C`. `kind` is one
//! of `iri`, `literal`, `any`. Variables in `then` that are absent from `when`
//! are existential.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::mapping::parser::{parse_prologue, parse_template, unsupported};
use crate::mapping::{eval_bgp, BindingSet, PatternTerm, RuleError, TriplePattern, Variable};
use crate::rdf::syntax::{iri_from_token, Prefixes, Tok, Token, TokenStream};
use crate::rdf::{Graph, Iri, Subject, Term};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ShapeError {
    #[error(transparent)]
    Syntax(#[from] RuleError),
    #[error("{message} at {line}:{column}")]
    Invalid { message: String, line: usize, column: usize },
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}: {source}")]
    InFile { path: String, source: Box<ShapeError> },
}

impl From<crate::rdf::RdfError> for ShapeError {
    fn from(e: crate::rdf::RdfError) -> Self {
        ShapeError::Syntax(e.into())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    #[default]
    Violation,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Violation => "violation",
            Severity::Warning => "warning",
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum ValueKind {
    Iri,
    Literal,
    #[default]
    Any,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropertyConstraint {
    pub path: Iri,
    pub min_count: usize,
    pub max_count: Option<usize>,
    pub value_kind: ValueKind,
    pub value_class: Option<Iri>,
    pub severity: Severity,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Shape {
    pub name: String,
    pub target_class: Iri,
    pub property_constraints: Vec<PropertyConstraint>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternRule {
    pub name: String,
    pub antecedent: Vec<TriplePattern>,
    pub consequent: Vec<TriplePattern>,
    pub focus: Variable,
    pub severity: Severity,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Finding {
    pub rule: String,
    #[serde(with = "term_string")]
    pub focus: Term,
    pub severity: Severity,
    pub message: String,
}

mod term_string {
    use super::Term;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &Term, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&t.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Term, D::Error> {
        let s = String::deserialize(d)?;
        let line = format!("<urn:x:s> <urn:x:p> {s} .");
        crate::rdf::parse_ntriples(&line)
            .map_err(serde::de::Error::custom)?
            .into_iter()
            .next()
            .map(|t| t.object)
            .ok_or_else(|| serde::de::Error::custom("empty term"))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    /// Sorted by rule name, then focus node.
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    fn from_findings(findings: impl IntoIterator<Item = Finding>) -> Self {
        let set: BTreeSet<Finding> = findings.into_iter().collect();
        ValidationReport { findings: set.into_iter().collect() }
    }

    pub fn conforms(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn violations(&self) -> usize {
        self.findings.iter().filter(|f| f.severity == Severity::Violation).count()
    }

    pub fn warnings(&self) -> usize {
        self.findings.iter().filter(|f| f.severity == Severity::Warning).count()
    }

    pub fn has_violations(&self) -> bool {
        self.violations() > 0
    }

    pub fn merge(self, other: ValidationReport) -> Self {
        Self::from_findings(self.findings.into_iter().chain(other.findings))
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "conforms": self.conforms(),
            "violations": self.violations(),
            "warnings": self.warnings(),
            "findings": self.findings,
        })
    }

    pub fn table(&self) -> String {
        if self.findings.is_empty() {
            return "no findings\n".into();
        }
        let header = ("severity", "rule", "focus", "message");
        let rows: Vec<(String, String, String, String)> = self
            .findings
            .iter()
            .map(|f| (f.severity.to_string(), f.rule.clone(), f.focus.to_string(), f.message.clone()))
            .collect();
        let w0 = rows.iter().map(|r| r.0.len()).max().unwrap_or(0).max(header.0.len());
        let w1 = rows.iter().map(|r| r.1.len()).max().unwrap_or(0).max(header.1.len());
        let w2 = rows.iter().map(|r| r.2.chars().count()).max().unwrap_or(0).max(header.2.len());
        let mut out = format!("{:<w0$}  {:<w1$}  {:<w2$}  {}\n", header.0, header.1, header.2, header.3);
        for r in rows {
            out += &format!("{:<w0$}  {:<w1$}  {:<w2$}  {}\n", r.0, r.1, r.2, r.3);
        }
        out
    }
}

/// Shapes and pattern rules, usually loaded from a `shapes/` directory.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ShapeSet {
    pub shapes: Vec<Shape>,
    pub patterns: Vec<PatternRule>,
}

impl ShapeSet {
    pub fn parse(text: &str) -> Result<Self, ShapeError> {
        parse_shapes(text)
    }

    /// Loads every `*.shapes` file in `dir`, in file-name order.
    pub fn load_dir(dir: &Path) -> Result<Self, ShapeError> {
        let io = |p: &Path, e: std::io::Error| ShapeError::Io { path: p.display().to_string(), message: e.to_string() };
        let mut paths: Vec<_> = std::fs::read_dir(dir)
            .map_err(|e| io(dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "shapes"))
            .collect();
        paths.sort();
        let mut out = ShapeSet::default();
        for p in paths {
            let text = std::fs::read_to_string(&p).map_err(|e| io(&p, e))?;
            let set = parse_shapes(&text).map_err(|e| ShapeError::InFile {
                path: p.display().to_string(),
                source: Box::new(e),
            })?;
            out.shapes.extend(set.shapes);
            out.patterns.extend(set.patterns);
        }
        Ok(out)
    }

    /// Every IRI the shapes and patterns mention.
    pub fn iris(&self) -> Vec<&Iri> {
        let mut out: Vec<&Iri> = Vec::new();
        for s in &self.shapes {
            out.push(&s.target_class);
            for c in &s.property_constraints {
                out.push(&c.path);
                out.extend(&c.value_class);
            }
        }
        for p in &self.patterns {
            for t in p.antecedent.iter().chain(&p.consequent) {
                for pos in t.positions() {
                    if let PatternTerm::Term(Term::Iri(i)) = pos {
                        out.push(i);
                    }
                }
            }
        }
        out
    }

    pub fn validate(&self, g: &Graph) -> ValidationReport {
        validate_shapes(g, &self.shapes).merge(validate_patterns(g, &self.patterns))
    }
}

fn invalid(t: &Token, message: impl Into<String>) -> ShapeError {
    ShapeError::Invalid { message: message.into(), line: t.line, column: t.col }
}

fn parse_iri(ts: &mut TokenStream, prefixes: &Prefixes) -> Result<Iri, ShapeError> {
    let t = ts.next()?;
    Ok(match &t.tok {
        Tok::IriRef(i) => iri_from_token(&t, i)?,
        Tok::PName { prefix, local } => prefixes.expand(&t, prefix, local)?,
        _ => return Err(t.unexpected("IRI").into()),
    })
}

fn parse_name(ts: &mut TokenStream) -> Result<String, ShapeError> {
    let t = ts.next()?;
    match &t.tok {
        Tok::Word(w) => Ok(w.clone()),
        _ => Err(t.unexpected("name").into()),
    }
}

fn parse_usize(ts: &mut TokenStream) -> Result<usize, ShapeError> {
    let t = ts.next()?;
    match &t.tok {
        Tok::Integer(n) if !n.starts_with(['-', '+']) => n.parse().map_err(|_| invalid(&t, "count out of range")),
        _ => Err(t.unexpected("non-negative integer").into()),
    }
}

fn parse_severity(ts: &mut TokenStream) -> Result<Severity, ShapeError> {
    let t = ts.next()?;
    if t.tok.is_word("violation") {
        Ok(Severity::Violation)
    } else if t.tok.is_word("warning") {
        Ok(Severity::Warning)
    } else {
        Err(t.unexpected("violation or warning").into())
    }
}

pub fn parse_shapes(text: &str) -> Result<ShapeSet, ShapeError> {
    let mut ts = TokenStream::new(text);
    let prefixes = parse_prologue(&mut ts)?;
    let mut set = ShapeSet::default();
    loop {
        let t = ts.next()?;
        if t.tok == Tok::Eof {
            return Ok(set);
        } else if t.tok.is_word("shape") {
            set.shapes.push(parse_shape(&mut ts, &prefixes)?);
        } else if t.tok.is_word("pattern") {
            set.patterns.push(parse_pattern(&mut ts, &prefixes)?);
        } else if t.tok.is_word("prefix") {
            return Err(invalid(&t, "prefix declarations must precede shapes"));
        } else {
            return Err(t.unexpected("shape or pattern").into());
        }
    }
}

fn parse_shape(ts: &mut TokenStream, prefixes: &Prefixes) -> Result<Shape, ShapeError> {
    let name = parse_name(ts)?;
    ts.expect_word("target")?;
    let target_class = parse_iri(ts, prefixes)?;
    let mut property_constraints = Vec::new();
    loop {
        let t = ts.next()?;
        if t.tok.is_word("end") {
            break;
        }
        if !t.tok.is_word("property") {
            return Err(t.unexpected("property or end").into());
        }
        let path = parse_iri(ts, prefixes)?;
        let mut c = PropertyConstraint {
            path,
            min_count: 0,
            max_count: None,
            value_kind: ValueKind::Any,
            value_class: None,
            severity: Severity::Violation,
        };
        loop {
            let opt = ts.peek()?.clone();
            if opt.tok.is_word("min") {
                ts.next()?;
                c.min_count = parse_usize(ts)?;
            } else if opt.tok.is_word("max") {
                ts.next()?;
                c.max_count = Some(parse_usize(ts)?);
            } else if opt.tok.is_word("kind") {
                ts.next()?;
                let k = ts.next()?;
                c.value_kind = if k.tok.is_word("iri") {
                    ValueKind::Iri
                } else if k.tok.is_word("literal") {
                    ValueKind::Literal
                } else if k.tok.is_word("any") {
                    ValueKind::Any
                } else {
                    return Err(k.unexpected("iri, literal or any").into());
                };
            } else if opt.tok.is_word("class") {
                ts.next()?;
                c.value_class = Some(parse_iri(ts, prefixes)?);
            } else if opt.tok.is_word("severity") {
                ts.next()?;
                c.severity = parse_severity(ts)?;
            } else {
                break;
            }
        }
        if c.max_count.is_some_and(|m| m < c.min_count) {
            return Err(invalid(&t, "max is smaller than min"));
        }
        property_constraints.push(c);
    }
    Ok(Shape { name, target_class, property_constraints })
}

fn parse_pattern(ts: &mut TokenStream, prefixes: &Prefixes) -> Result<PatternRule, ShapeError> {
    let name = parse_name(ts)?;
    let when = ts.expect_word("when")?;
    let antecedent = parse_template(ts, prefixes)?;
    ts.expect_word("then")?;
    let consequent = parse_template(ts, prefixes)?;
    if antecedent.is_empty() {
        return Err(invalid(&when, "empty when block"));
    }
    let mut focus = None;
    let mut severity = Severity::Violation;
    loop {
        let t = ts.next()?;
        if t.tok.is_word("end") {
            break;
        } else if t.tok.is_word("focus") {
            let v = ts.next()?;
            let Tok::Var(name) = &v.tok else { return Err(v.unexpected("variable").into()) };
            let var = Variable::new(name.clone());
            if !antecedent.iter().any(|p| p.variables().any(|x| *x == var)) {
                return Err(invalid(&v, format!("focus {var} does not occur in the when block")));
            }
            focus = Some(var);
        } else if t.tok.is_word("severity") {
            severity = parse_severity(ts)?;
        } else if matches!(t.tok, Tok::Word(ref w) if w.eq_ignore_ascii_case("FILTER") || w.eq_ignore_ascii_case("OPTIONAL")) {
            return Err(unsupported(&t, &t.tok.describe()).into());
        } else {
            return Err(t.unexpected("focus, severity or end").into());
        }
    }
    let focus = match focus {
        Some(f) => f,
        None => antecedent
            .iter()
            .flat_map(|p| p.variables())
            .next()
            .cloned()
            .ok_or_else(|| invalid(&when, "when block has no variables"))?,
    };
    Ok(PatternRule { name, antecedent, consequent, focus, severity })
}

fn kind_ok(kind: ValueKind, t: &Term) -> bool {
    match kind {
        ValueKind::Any => true,
        ValueKind::Iri => matches!(t, Term::Iri(_)),
        ValueKind::Literal => t.is_literal(),
    }
}

fn has_type(g: &Graph, t: &Term, class: &Iri) -> bool {
    let Some(s) = t.to_subject() else { return false };
    let ty = Iri::rdf_type();
    let class = Term::Iri(class.clone());
    let found = g.objects(&s, &ty).any(|o| *o == class);
    found
}

fn compact(iri: &Iri) -> String {
    crate::vocab::compact(iri.as_str()).unwrap_or_else(|| iri.to_string())
}

pub fn validate_shapes(g: &Graph, shapes: &[Shape]) -> ValidationReport {
    let mut findings = Vec::new();
    for shape in shapes {
        let focus_nodes: Vec<&Subject> = g.instances_of(&shape.target_class).collect();
        for focus in focus_nodes {
            for c in &shape.property_constraints {
                let values: Vec<&Term> = g.objects(focus, &c.path).collect();
                let finding = |message: String| Finding {
                    rule: shape.name.clone(),
                    focus: focus.to_term(),
                    severity: c.severity,
                    message,
                };
                for v in values.iter().filter(|v| !kind_ok(c.value_kind, v)) {
                    findings.push(finding(format!("{} value {v} has the wrong kind", compact(&c.path))));
                }
                let (count, what) = match &c.value_class {
                    Some(class) => (
                        values.iter().filter(|v| has_type(g, v, class)).count(),
                        format!("{} value(s) of class {}", compact(&c.path), compact(class)),
                    ),
                    None => (values.len(), format!("{} value(s)", compact(&c.path))),
                };
                if count < c.min_count {
                    findings.push(finding(format!("expected at least {} {what}, found {count}", c.min_count)));
                }
                if let Some(max) = c.max_count.filter(|m| count > *m) {
                    findings.push(finding(format!("expected at most {max} {what}, found {count}")));
                }
            }
        }
    }
    ValidationReport::from_findings(findings)
}

fn substitute(p: &TriplePattern, b: &BindingSet) -> TriplePattern {
    let sub = |t: &PatternTerm| match t {
        PatternTerm::Var(v) => b.get(v).map(|t| PatternTerm::Term(t.clone())).unwrap_or_else(|| t.clone()),
        other => other.clone(),
    };
    TriplePattern::new(sub(&p.subject), sub(&p.predicate), sub(&p.object))
}

pub fn validate_patterns(g: &Graph, rules: &[PatternRule]) -> ValidationReport {
    let mut findings = Vec::new();
    for rule in rules {
        for solution in eval_bgp(g, &rule.antecedent) {
            let grounded: Vec<TriplePattern> = rule.consequent.iter().map(|p| substitute(p, &solution)).collect();
            if !eval_bgp(g, &grounded).is_empty() {
                continue;
            }
            let Some(focus) = solution.get(&rule.focus) else { continue };
            let missing: Vec<String> = grounded.iter().map(ToString::to_string).collect();
            findings.push(Finding {
                rule: rule.name.clone(),
                focus: focus.clone(),
                severity: rule.severity,
                message: format!("no match for {{ {} }}", missing.join(" ")),
            });
        }
    }
    ValidationReport::from_findings(findings)
}
