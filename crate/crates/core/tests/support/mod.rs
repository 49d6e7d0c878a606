//! Generators and brute-force oracles shared by the property tests and the
//! acceptance suite.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use kgforge_core::mapping::{BindingSet, PatternTerm, TriplePattern, Variable};
use kgforge_core::rdf::{BlankNode, Graph, Iri, Literal, Quad, Subject, Term, Triple};

pub type Solution = BTreeMap<String, Term>;

fn iri(s: &str) -> Iri {
    Iri::new(format!("http://t.example/{s}")).unwrap()
}

/// A deliberately small universe so random graphs share terms and joins
/// have solutions.
pub fn subjects() -> Vec<Subject> {
    let mut out: Vec<Subject> = (0..4).map(|i| Subject::Iri(iri(&format!("s{i}")))).collect();
    out.push(Subject::BlankNode(BlankNode::new("b0").unwrap()));
    out.push(Subject::BlankNode(BlankNode::new("b1").unwrap()));
    out
}

pub fn predicates() -> Vec<Iri> {
    (0..3).map(|i| iri(&format!("p{i}"))).collect()
}

pub fn objects() -> Vec<Term> {
    let mut out: Vec<Term> = subjects().into_iter().map(Term::from).collect();
    out.push(Term::Literal(Literal::string("x")));
    out.push(Term::Literal(Literal::lang("x", "en").unwrap()));
    out
}

pub fn arb_triple() -> impl Strategy<Value = Triple> {
    (
        prop::sample::select(subjects()),
        prop::sample::select(predicates()),
        prop::sample::select(objects()),
    )
        .prop_map(|(s, p, o)| Triple::new(s, p, o))
}

pub fn arb_graph(max: usize) -> impl Strategy<Value = Graph> {
    prop::collection::vec(arb_triple(), 0..=max).prop_map(|v| v.into_iter().collect())
}

fn var_names() -> Vec<&'static str> {
    vec!["a", "b", "c", "d"]
}

fn arb_position(terms: Vec<Term>) -> impl Strategy<Value = PatternTerm> {
    prop_oneof![
        prop::sample::select(var_names()).prop_map(|v| PatternTerm::Var(Variable::new(v))),
        prop::sample::select(terms).prop_map(PatternTerm::Term),
    ]
}

pub fn arb_pattern() -> impl Strategy<Value = TriplePattern> {
    let subj: Vec<Term> = subjects().into_iter().map(Term::from).collect();
    let pred: Vec<Term> = predicates().into_iter().map(Term::Iri).collect();
    (arb_position(subj), arb_position(pred), arb_position(objects()))
        .prop_map(|(s, p, o)| TriplePattern::new(s, p, o))
}

pub fn arb_bgp(max: usize) -> impl Strategy<Value = Vec<TriplePattern>> {
    prop::collection::vec(arb_pattern(), 0..=max)
}

pub fn as_solutions(v: Vec<BindingSet>) -> BTreeSet<Solution> {
    v.iter()
        .map(|b| b.iter().map(|(k, t)| (k.name().to_string(), t.clone())).collect())
        .collect()
}

fn ground(p: &PatternTerm, a: &Solution) -> Term {
    match p {
        PatternTerm::Term(t) => t.clone(),
        PatternTerm::Var(v) => a[v.name()].clone(),
    }
}

/// Every assignment of the pattern variables to terms of `g` under which all
/// instantiated patterns are triples of `g`. No join order, no indexes.
pub fn brute_force_bgp(g: &Graph, patterns: &[TriplePattern]) -> BTreeSet<Solution> {
    let vars: Vec<String> = patterns
        .iter()
        .flat_map(|p| p.variables())
        .map(|v| v.name().to_string())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut domain: BTreeSet<Term> = BTreeSet::new();
    for t in g.iter() {
        domain.insert(t.subject.clone().into());
        domain.insert(Term::Iri(t.predicate.clone()));
        domain.insert(t.object.clone());
    }
    let domain: Vec<Term> = domain.into_iter().collect();
    let mut out = BTreeSet::new();
    if !vars.is_empty() && domain.is_empty() {
        return out;
    }
    let total = domain.len().pow(vars.len() as u32);
    for mut n in 0..total {
        let mut a = Solution::new();
        for v in &vars {
            a.insert(v.clone(), domain[n % domain.len()].clone());
            n /= domain.len();
        }
        let all_match = patterns.iter().all(|p| {
            let s = ground(&p.subject, &a);
            let pr = ground(&p.predicate, &a);
            let o = ground(&p.object, &a);
            match (s.to_subject(), pr.as_iri()) {
                (Some(s), Some(pr)) => g.contains(&Triple::new(s, pr.clone(), o)),
                _ => false,
            }
        });
        if all_match {
            out.insert(a);
        }
    }
    out
}

pub fn arb_quad() -> impl Strategy<Value = Quad> {
    let graphs = vec![None, Some(iri("g0")), Some(iri("g1")), Some(iri("g2"))];
    (arb_triple(), prop::sample::select(graphs)).prop_map(|(t, g)| Quad::new(t, g))
}

/// Percent-decoder used as the reference for `encode_for_uri` round trips.
pub fn percent_decode(s: &str) -> Option<String> {
    let bytes = s.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' {
            let hex = std::str::from_utf8(bytes.get(i + 1..i + 3)?).ok()?;
            out.push(u8::from_str_radix(hex, 16).ok()?);
            i += 3;
        } else {
            out.push(bytes[i]);
            i += 1;
        }
    }
    String::from_utf8(out).ok()
}
