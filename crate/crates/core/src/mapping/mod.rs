//! CONSTRUCT-style mapping rules: basic graph patterns, `BIND` with
//! `IRI` / `CONCAT` / `ENCODE_FOR_URI` / `STR`, and a construct template.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use crate::rdf::{Graph, RdfError, Term, TripleSource};

mod encode;
mod eval;
pub(crate) mod parser;
pub mod query;

pub use encode::encode_for_uri;
pub use eval::{apply_rule, apply_rule_pack, eval_bgp, eval_expression};
pub use parser::parse_rule;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RuleError {
    #[error(transparent)]
    Syntax(#[from] RdfError),
    #[error("unsupported feature: {feature} at {line}:{column}")]
    UnsupportedFeature {
        feature: String,
        line: usize,
        column: usize,
    },
    #[error("unknown function {name} at {line}:{column}")]
    UnknownFunction {
        name: String,
        line: usize,
        column: usize,
    },
    #[error("{function} expects {expected} argument(s), found {found} at {line}:{column}")]
    Arity {
        function: &'static str,
        expected: &'static str,
        found: usize,
        line: usize,
        column: usize,
    },
    #[error("template variable {0} is not bound by the WHERE clause or a BIND")]
    UnboundTemplateVariable(Variable),
    #[error("BIND target {0} is already bound")]
    BindTargetBound(Variable),
    #[error("BIND expression uses {0} before it is bound")]
    BindUsesUnbound(Variable),
    #[error("cannot read rule {path}: {message}")]
    Io { path: String, message: String },
    #[error("rule {name}: {source}")]
    InRule {
        name: String,
        #[source]
        source: Box<RuleError>,
    },
}

/// A query variable, stored without its `?` sigil.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Variable(String);

impl Variable {
    pub fn new(name: impl Into<String>) -> Self {
        let name = name.into();
        Variable(name.trim_start_matches(['?', '$']).to_string())
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "?{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PatternTerm {
    Var(Variable),
    Term(Term),
}

impl PatternTerm {
    pub fn as_var(&self) -> Option<&Variable> {
        match self {
            PatternTerm::Var(v) => Some(v),
            PatternTerm::Term(_) => None,
        }
    }
}

impl From<Term> for PatternTerm {
    fn from(t: Term) -> Self {
        PatternTerm::Term(t)
    }
}

impl From<Variable> for PatternTerm {
    fn from(v: Variable) -> Self {
        PatternTerm::Var(v)
    }
}

impl fmt::Display for PatternTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PatternTerm::Var(v) => v.fmt(f),
            PatternTerm::Term(t) => t.fmt(f),
        }
    }
}

/// A triple whose positions may be variables. The predicate is an IRI or a
/// variable.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TriplePattern {
    pub subject: PatternTerm,
    pub predicate: PatternTerm,
    pub object: PatternTerm,
}

impl TriplePattern {
    pub fn new(
        subject: impl Into<PatternTerm>,
        predicate: impl Into<PatternTerm>,
        object: impl Into<PatternTerm>,
    ) -> Self {
        TriplePattern {
            subject: subject.into(),
            predicate: predicate.into(),
            object: object.into(),
        }
    }

    pub fn positions(&self) -> [&PatternTerm; 3] {
        [&self.subject, &self.predicate, &self.object]
    }

    pub fn variables(&self) -> impl Iterator<Item = &Variable> {
        self.positions().into_iter().filter_map(PatternTerm::as_var)
    }
}

impl fmt::Display for TriplePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} .", self.subject, self.predicate, self.object)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Function {
    Iri,
    Concat,
    EncodeForUri,
    Str,
}

impl Function {
    pub fn name(self) -> &'static str {
        match self {
            Function::Iri => "IRI",
            Function::Concat => "CONCAT",
            Function::EncodeForUri => "ENCODE_FOR_URI",
            Function::Str => "STR",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name.to_ascii_uppercase().as_str() {
            "IRI" | "URI" => Some(Function::Iri),
            "CONCAT" => Some(Function::Concat),
            "ENCODE_FOR_URI" => Some(Function::EncodeForUri),
            "STR" => Some(Function::Str),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expression {
    Constant(Term),
    Var(Variable),
    Call(Function, Vec<Expression>),
}

impl Expression {
    pub fn variables(&self) -> Vec<&Variable> {
        match self {
            Expression::Constant(_) => Vec::new(),
            Expression::Var(v) => vec![v],
            Expression::Call(_, args) => args.iter().flat_map(Expression::variables).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BindClause {
    pub variable: Variable,
    pub expression: Expression,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MappingRule {
    pub name: String,
    pub prefixes: BTreeMap<String, String>,
    pub template: Vec<TriplePattern>,
    pub where_patterns: Vec<TriplePattern>,
    pub binds: Vec<BindClause>,
}

impl MappingRule {
    pub fn parse(name: impl Into<String>, text: &str) -> Result<Self, RuleError> {
        let name = name.into();
        let mut rule = parse_rule(text).map_err(|e| RuleError::InRule {
            name: name.clone(),
            source: Box::new(e),
        })?;
        rule.name = name;
        Ok(rule)
    }

    /// Every IRI mentioned by the template or the WHERE patterns.
    pub fn iris(&self) -> Vec<&crate::rdf::Iri> {
        self.template
            .iter()
            .chain(&self.where_patterns)
            .flat_map(|p| p.positions())
            .filter_map(|t| match t {
                PatternTerm::Term(Term::Iri(i)) => Some(i),
                _ => None,
            })
            .collect()
    }
}

/// One solution: variable → term, each variable bound at most once.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BindingSet(BTreeMap<Variable, Term>);

impl BindingSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, v: &Variable) -> Option<&Term> {
        self.0.get(v)
    }

    /// Binds `v` unless it is already bound; returns whether it was inserted.
    pub fn bind(&mut self, v: Variable, t: Term) -> bool {
        match self.0.entry(v) {
            std::collections::btree_map::Entry::Occupied(_) => false,
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(t);
                true
            }
        }
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Variable, &Term)> {
        self.0.iter()
    }

    pub fn project(&self, vars: &[Variable]) -> BindingSet {
        BindingSet(
            vars.iter()
                .filter_map(|v| self.0.get(v).map(|t| (v.clone(), t.clone())))
                .collect(),
        )
    }
}

impl FromIterator<(Variable, Term)> for BindingSet {
    fn from_iter<I: IntoIterator<Item = (Variable, Term)>>(iter: I) -> Self {
        BindingSet(iter.into_iter().collect())
    }
}

/// An ordered set of independent rules.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RulePack {
    pub rules: Vec<MappingRule>,
}

impl RulePack {
    /// Loads every `*.rq` file in `dir`, ordered by file name; the rule name is
    /// the file stem.
    pub fn load_dir(dir: &Path) -> Result<Self, RuleError> {
        let io = |e: std::io::Error| RuleError::Io {
            path: dir.display().to_string(),
            message: e.to_string(),
        };
        let mut paths: Vec<_> = std::fs::read_dir(dir)
            .map_err(io)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "rq"))
            .collect();
        paths.sort();
        let mut rules = Vec::with_capacity(paths.len());
        for path in paths {
            let text = std::fs::read_to_string(&path).map_err(|e| RuleError::Io {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            let name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            rules.push(MappingRule::parse(name, &text)?);
        }
        Ok(RulePack { rules })
    }

    pub fn apply<S: TripleSource + ?Sized>(&self, source: &S) -> Graph {
        apply_rule_pack(source, &self.rules)
    }

    /// Output of each rule, by rule name, in pack order.
    pub fn apply_each<S: TripleSource + ?Sized>(&self, source: &S) -> Vec<(String, Graph)> {
        self.rules
            .iter()
            .map(|r| (r.name.clone(), apply_rule(source, r)))
            .collect()
    }
}
