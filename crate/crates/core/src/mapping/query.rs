//! The read-only query subset served by the endpoint: SELECT, ASK and
//! CONSTRUCT over one basic graph pattern with BINDs, an optional top-level
//! `GRAPH <iri>` scope, ORDER BY, LIMIT and OFFSET.

use std::cmp::Ordering;

use serde_json::{json, Map, Value};

use super::parser::{
    check_scoping, check_template, expect_end, parse_group_body, parse_prologue, parse_template,
    reject_keyword, unsupported,
};
use super::{eval_bgp, eval_expression, BindClause, BindingSet, PatternTerm, RuleError, TriplePattern, Variable};
use crate::rdf::syntax::{iri_from_token, Tok, TokenStream};
use crate::rdf::{compare_terms, Graph, Iri, Literal, Subject, Term, Triple, TripleSource, XSD_INTEGER, XSD_STRING};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Projection {
    All,
    Vars(Vec<Variable>),
    /// `(COUNT(*) AS ?v)`
    Count(Variable),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QueryForm {
    Select { distinct: bool, projection: Projection },
    Construct { template: Vec<TriplePattern> },
    Ask,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderKey {
    pub variable: Variable,
    pub descending: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub form: QueryForm,
    /// Set by a top-level `GRAPH <iri> { … }`.
    pub graph: Option<Iri>,
    pub patterns: Vec<TriplePattern>,
    pub binds: Vec<BindClause>,
    pub order_by: Vec<OrderKey>,
    pub limit: Option<usize>,
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QueryResult {
    Solutions {
        variables: Vec<Variable>,
        rows: Vec<BindingSet>,
    },
    Boolean(bool),
    Graph(Graph),
}

pub fn parse_query(text: &str) -> Result<Query, RuleError> {
    let mut ts = TokenStream::new(text);
    let prefixes = parse_prologue(&mut ts)?;
    let t = ts.next()?;
    let form = if t.tok.is_word("SELECT") {
        let distinct = ts.eat_word("DISTINCT")?;
        if ts.peek_is_word("REDUCED")? {
            return Err(unsupported(ts.peek()?, "REDUCED"));
        }
        QueryForm::Select {
            distinct,
            projection: parse_projection(&mut ts)?,
        }
    } else if t.tok.is_word("CONSTRUCT") {
        if ts.peek_is_word("WHERE")? {
            return Err(unsupported(ts.peek()?, "CONSTRUCT WHERE shorthand"));
        }
        QueryForm::Construct {
            template: parse_template(&mut ts, &prefixes)?,
        }
    } else if t.tok.is_word("ASK") {
        QueryForm::Ask
    } else {
        if t.tok.is_word("DESCRIBE") {
            return Err(unsupported(&t, "DESCRIBE"));
        }
        reject_keyword(&t)?;
        return Err(t.unexpected("SELECT, CONSTRUCT or ASK").into());
    };

    if ts.peek_is_word("FROM")? {
        return Err(unsupported(ts.peek()?, "FROM"));
    }
    ts.eat_word("WHERE")?;
    ts.expect_punct('{')?;
    let mut patterns = Vec::new();
    let mut binds = Vec::new();
    let mut graph = None;
    if ts.peek_is_word("GRAPH")? {
        let kw = ts.next()?;
        let t = ts.next()?;
        graph = Some(match &t.tok {
            Tok::IriRef(i) => iri_from_token(&t, i)?,
            Tok::PName { prefix, local } => prefixes.expand(&t, prefix, local)?,
            Tok::Var(_) => return Err(unsupported(&t, "GRAPH with a variable")),
            _ => return Err(t.unexpected("graph IRI").into()),
        });
        ts.expect_punct('{')?;
        parse_group_body(&mut ts, &prefixes, &mut patterns, &mut binds)?;
        ts.eat_punct('.')?;
        if !ts.eat_punct('}')? {
            return Err(unsupported(&kw, "GRAPH mixed with other patterns"));
        }
    } else {
        parse_group_body(&mut ts, &prefixes, &mut patterns, &mut binds)?;
    }

    let mut order_by = Vec::new();
    if ts.eat_word("ORDER")? {
        ts.expect_word("BY")?;
        loop {
            match parse_order_key(&mut ts)? {
                Some(k) => order_by.push(k),
                None => break,
            }
        }
        if order_by.is_empty() {
            return Err(ts.peek()?.unexpected("ORDER BY variable").into());
        }
    }
    let mut limit = None;
    let mut offset = 0;
    loop {
        if ts.eat_word("LIMIT")? {
            limit = Some(parse_count(&mut ts)?);
        } else if ts.eat_word("OFFSET")? {
            offset = parse_count(&mut ts)?;
        } else {
            break;
        }
    }
    expect_end(&mut ts)?;

    let bound = check_scoping(&patterns, &binds)?;
    match &form {
        QueryForm::Construct { template } => check_template(template, &bound)?,
        QueryForm::Select { projection: Projection::Count(v), .. } if bound.contains(v) => {
            return Err(RuleError::BindTargetBound(v.clone()))
        }
        _ => {}
    }
    Ok(Query {
        form,
        graph,
        patterns,
        binds,
        order_by,
        limit,
        offset,
    })
}

fn parse_projection(ts: &mut TokenStream) -> Result<Projection, RuleError> {
    if ts.eat_punct('*')? {
        return Ok(Projection::All);
    }
    if ts.peek_is_punct('(')? {
        let open = ts.next()?;
        let f = ts.next()?;
        if !f.tok.is_word("COUNT") {
            return Err(unsupported(&open, "projection expression"));
        }
        ts.expect_punct('(')?;
        if ts.peek_is_word("DISTINCT")? {
            return Err(unsupported(ts.peek()?, "COUNT(DISTINCT …)"));
        }
        ts.expect_punct('*')?;
        ts.expect_punct(')')?;
        ts.expect_word("AS")?;
        let v = ts.next()?;
        let Tok::Var(name) = &v.tok else {
            return Err(v.unexpected("variable").into());
        };
        ts.expect_punct(')')?;
        return Ok(Projection::Count(Variable::new(name.clone())));
    }
    let mut vars = Vec::new();
    while let Tok::Var(name) = &ts.peek()?.tok {
        vars.push(Variable::new(name.clone()));
        ts.next()?;
    }
    if vars.is_empty() {
        return Err(ts.peek()?.unexpected("projection").into());
    }
    Ok(Projection::Vars(vars))
}

fn parse_order_key(ts: &mut TokenStream) -> Result<Option<OrderKey>, RuleError> {
    let t = ts.peek()?.clone();
    match &t.tok {
        Tok::Var(name) => {
            ts.next()?;
            Ok(Some(OrderKey {
                variable: Variable::new(name.clone()),
                descending: false,
            }))
        }
        Tok::Word(w) if w.eq_ignore_ascii_case("ASC") || w.eq_ignore_ascii_case("DESC") => {
            ts.next()?;
            ts.expect_punct('(')?;
            let v = ts.next()?;
            let Tok::Var(name) = &v.tok else {
                return Err(unsupported(&v, "ORDER BY expression"));
            };
            ts.expect_punct(')')?;
            Ok(Some(OrderKey {
                variable: Variable::new(name.clone()),
                descending: w.eq_ignore_ascii_case("DESC"),
            }))
        }
        Tok::Punct('(') => Err(unsupported(&t, "ORDER BY expression")),
        _ => Ok(None),
    }
}

fn parse_count(ts: &mut TokenStream) -> Result<usize, RuleError> {
    let t = ts.next()?;
    match &t.tok {
        Tok::Integer(n) if !n.starts_with(['-', '+']) => {
            n.parse().map_err(|_| t.syntax("integer out of range").into())
        }
        _ => Err(t.unexpected("non-negative integer").into()),
    }
}

impl Query {
    pub fn parse(text: &str) -> Result<Self, RuleError> {
        parse_query(text)
    }

    /// Variables in order of first appearance in the pattern, then the BINDs.
    pub fn in_scope_variables(&self) -> Vec<Variable> {
        let mut out: Vec<Variable> = Vec::new();
        let all = self
            .patterns
            .iter()
            .flat_map(|p| p.variables())
            .chain(self.binds.iter().map(|b| &b.variable));
        for v in all {
            if !out.contains(v) {
                out.push(v.clone());
            }
        }
        out
    }

    /// Pattern solutions extended by the BINDs, in canonical order.
    pub fn solutions<S: TripleSource + ?Sized>(&self, source: &S) -> Vec<BindingSet> {
        eval_bgp(source, &self.patterns)
            .into_iter()
            .map(|mut b| {
                for bind in &self.binds {
                    if let Some(t) = eval_expression(&bind.expression, &b) {
                        b.bind(bind.variable.clone(), t);
                    }
                }
                b
            })
            .collect()
    }

    /// Evaluates against `source`; graph selection is the caller's job.
    pub fn execute<S: TripleSource + ?Sized>(&self, source: &S) -> QueryResult {
        let mut rows = self.solutions(source);
        match &self.form {
            QueryForm::Ask => QueryResult::Boolean(!rows.is_empty()),
            QueryForm::Construct { template } => {
                let rows = self.slice(rows);
                let mut g = Graph::new();
                for row in &rows {
                    g.extend(template.iter().filter_map(|p| instantiate(p, row)));
                }
                QueryResult::Graph(g)
            }
            QueryForm::Select { distinct, projection } => {
                if let Projection::Count(v) = projection {
                    let n = if *distinct {
                        rows.iter().collect::<std::collections::BTreeSet<_>>().len()
                    } else {
                        rows.len()
                    };
                    let lit = Literal::typed(n.to_string(), Iri::new_unchecked(XSD_INTEGER))
                        .expect("integer literal");
                    let row: BindingSet = [(v.clone(), Term::Literal(lit))].into_iter().collect();
                    return QueryResult::Solutions {
                        variables: vec![v.clone()],
                        rows: self.slice(vec![row]),
                    };
                }
                self.sort(&mut rows);
                let variables = match projection {
                    Projection::All => self.in_scope_variables(),
                    Projection::Vars(vs) => vs.clone(),
                    Projection::Count(_) => unreachable!(),
                };
                let mut projected: Vec<BindingSet> = rows.iter().map(|r| r.project(&variables)).collect();
                if *distinct {
                    let mut seen = std::collections::BTreeSet::new();
                    projected.retain(|r| seen.insert(r.clone()));
                }
                QueryResult::Solutions {
                    variables,
                    rows: self.slice(projected),
                }
            }
        }
    }

    fn sort(&self, rows: &mut [BindingSet]) {
        if self.order_by.is_empty() {
            return;
        }
        rows.sort_by(|a, b| {
            for key in &self.order_by {
                let ord = match (a.get(&key.variable), b.get(&key.variable)) {
                    (None, None) => Ordering::Equal,
                    (None, Some(_)) => Ordering::Less,
                    (Some(_), None) => Ordering::Greater,
                    (Some(x), Some(y)) => compare_terms(x, y),
                };
                let ord = if key.descending { ord.reverse() } else { ord };
                if ord != Ordering::Equal {
                    return ord;
                }
            }
            Ordering::Equal
        });
    }

    fn slice<T>(&self, rows: Vec<T>) -> Vec<T> {
        let it = rows.into_iter().skip(self.offset);
        match self.limit {
            Some(n) => it.take(n).collect(),
            None => it.collect(),
        }
    }
}

fn instantiate(p: &TriplePattern, b: &BindingSet) -> Option<Triple> {
    let get = |t: &PatternTerm| match t {
        PatternTerm::Term(t) => Some(t.clone()),
        PatternTerm::Var(v) => b.get(v).cloned(),
    };
    let subject: Subject = get(&p.subject)?.to_subject()?;
    let Term::Iri(predicate) = get(&p.predicate)? else {
        return None;
    };
    Some(Triple::new(subject, predicate, get(&p.object)?))
}

fn term_json(t: &Term) -> Value {
    match t {
        Term::Iri(i) => json!({"type": "uri", "value": i.as_str()}),
        Term::BlankNode(b) => json!({"type": "bnode", "value": b.label()}),
        Term::Literal(l) => {
            let mut m = Map::new();
            m.insert("type".into(), "literal".into());
            m.insert("value".into(), l.lexical().into());
            if let Some(lang) = l.language() {
                m.insert("xml:lang".into(), lang.into());
            } else if l.datatype().as_str() != XSD_STRING {
                m.insert("datatype".into(), l.datatype().as_str().into());
            }
            Value::Object(m)
        }
    }
}

/// SPARQL 1.1 Query Results JSON for SELECT and ASK results.
pub fn results_to_json(result: &QueryResult) -> Option<Value> {
    match result {
        QueryResult::Solutions { variables, rows } => {
            let bindings: Vec<Value> = rows
                .iter()
                .map(|r| {
                    Value::Object(
                        r.iter()
                            .map(|(v, t)| (v.name().to_string(), term_json(t)))
                            .collect(),
                    )
                })
                .collect();
            Some(json!({
                "head": {"vars": variables.iter().map(Variable::name).collect::<Vec<_>>()},
                "results": {"bindings": bindings},
            }))
        }
        QueryResult::Boolean(b) => Some(json!({"head": {}, "boolean": b})),
        QueryResult::Graph(_) => None,
    }
}
