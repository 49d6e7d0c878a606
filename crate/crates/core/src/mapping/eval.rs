//! BGP evaluation, BIND expressions and template instantiation.

use std::collections::BTreeSet;

use super::{encode_for_uri, BindingSet, Expression, Function, MappingRule, PatternTerm, TriplePattern};
use crate::rdf::{Graph, Iri, Literal, Subject, Term, Triple, TripleSource};

/// All solutions of `patterns` over `source`, duplicate-free and in
/// canonical order. The empty pattern list has exactly one (empty) solution.
///
/// Left-deep nested-loop join: at each step the remaining pattern with the
/// most positions fixed (constants or already-bound variables) is matched
/// next, and its bindings propagate into the rest.
pub fn eval_bgp<S: TripleSource + ?Sized>(source: &S, patterns: &[TriplePattern]) -> Vec<BindingSet> {
    let mut results = BTreeSet::new();
    let mut remaining: Vec<&TriplePattern> = patterns.iter().collect();
    join(source, &mut remaining, BindingSet::new(), &mut results);
    results.into_iter().collect()
}

fn bound_count(p: &TriplePattern, b: &BindingSet) -> usize {
    p.positions()
        .into_iter()
        .filter(|t| match t {
            PatternTerm::Term(_) => true,
            PatternTerm::Var(v) => b.get(v).is_some(),
        })
        .count()
}

fn join<S: TripleSource + ?Sized>(
    source: &S,
    remaining: &mut Vec<&TriplePattern>,
    binding: BindingSet,
    out: &mut BTreeSet<BindingSet>,
) {
    if remaining.is_empty() {
        out.insert(binding);
        return;
    }
    let (idx, _) = remaining
        .iter()
        .enumerate()
        .max_by_key(|(i, p)| (bound_count(p, &binding), std::cmp::Reverse(*i)))
        .unwrap();
    let pattern = remaining.remove(idx);

    let resolve = |t: &PatternTerm| -> Option<Term> {
        match t {
            PatternTerm::Term(t) => Some(t.clone()),
            PatternTerm::Var(v) => binding.get(v).cloned(),
        }
    };
    let s = resolve(&pattern.subject);
    let p = resolve(&pattern.predicate);
    let o = resolve(&pattern.object);

    // a bound literal subject or non-IRI predicate can never match
    let s = match s {
        Some(t) => match t.to_subject() {
            Some(s) => Some(s),
            None => {
                remaining.insert(idx, pattern);
                return;
            }
        },
        None => None,
    };
    let p = match p {
        Some(Term::Iri(i)) => Some(i),
        Some(_) => {
            remaining.insert(idx, pattern);
            return;
        }
        None => None,
    };

    let matches: Vec<Triple> = source
        .triples_matching(s.as_ref(), p.as_ref(), o.as_ref())
        .collect();
    for triple in matches {
        if let Some(extended) = extend(&binding, pattern, &triple) {
            join(source, remaining, extended, out);
        }
    }
    remaining.insert(idx, pattern);
}

fn extend(binding: &BindingSet, pattern: &TriplePattern, triple: &Triple) -> Option<BindingSet> {
    let mut b = binding.clone();
    let values = [
        triple.subject.to_term(),
        Term::Iri(triple.predicate.clone()),
        triple.object.clone(),
    ];
    for (pos, value) in pattern.positions().into_iter().zip(values) {
        match pos {
            PatternTerm::Term(t) => {
                if *t != value {
                    return None;
                }
            }
            PatternTerm::Var(v) => match b.get(v) {
                Some(existing) if *existing != value => return None,
                Some(_) => {}
                None => {
                    b.bind(v.clone(), value);
                }
            },
        }
    }
    Some(b)
}

/// Evaluates a BIND expression. `None` is the unbound marker: any reference to
/// an unbound variable or any type error yields it.
pub fn eval_expression(expr: &Expression, binding: &BindingSet) -> Option<Term> {
    match expr {
        Expression::Constant(t) => Some(t.clone()),
        Expression::Var(v) => binding.get(v).cloned(),
        Expression::Call(f, args) => {
            let values: Vec<Term> = args
                .iter()
                .map(|a| eval_expression(a, binding))
                .collect::<Option<_>>()?;
            call(*f, &values)
        }
    }
}

fn string_arg(t: &Term) -> Option<&Literal> {
    t.as_literal().filter(|l| l.is_string_like())
}

fn call(f: Function, args: &[Term]) -> Option<Term> {
    match f {
        Function::Str => match &args[0] {
            Term::Iri(i) => Some(Literal::string(i.as_str()).into()),
            Term::Literal(l) => Some(Literal::string(l.lexical()).into()),
            Term::BlankNode(_) => None,
        },
        Function::EncodeForUri => {
            let l = string_arg(&args[0])?;
            Some(Literal::string(encode_for_uri(l.lexical())).into())
        }
        Function::Concat => {
            let lits: Vec<&Literal> = args.iter().map(string_arg).collect::<Option<_>>()?;
            let joined: String = lits.iter().map(|l| l.lexical()).collect();
            // shared language tag survives, otherwise a simple literal
            let lang = lits[0].language();
            match lang {
                Some(tag) if lits.iter().all(|l| l.language() == Some(tag)) => {
                    Literal::lang(joined, tag).ok().map(Term::from)
                }
                _ => Some(Literal::string(joined).into()),
            }
        }
        Function::Iri => match &args[0] {
            Term::Iri(i) => Some(Term::Iri(i.clone())),
            Term::Literal(l) if l.language().is_none() && l.is_string_like() => {
                Iri::new(l.lexical()).ok().map(Term::Iri)
            }
            _ => None,
        },
    }
}

fn instantiate(p: &TriplePattern, b: &BindingSet) -> Option<Triple> {
    let get = |t: &PatternTerm| -> Option<Term> {
        match t {
            PatternTerm::Term(t) => Some(t.clone()),
            PatternTerm::Var(v) => b.get(v).cloned(),
        }
    };
    let subject: Subject = get(&p.subject)?.to_subject()?;
    let predicate = match get(&p.predicate)? {
        Term::Iri(i) => i,
        _ => return None,
    };
    let object = get(&p.object)?;
    Some(Triple::new(subject, predicate, object))
}

/// CONSTRUCT semantics: solutions of the WHERE patterns, extended by the
/// BINDs in order, instantiate the template; triples with an unbound variable
/// or an ill-typed position are dropped.
pub fn apply_rule<S: TripleSource + ?Sized>(source: &S, rule: &MappingRule) -> Graph {
    let mut out = Graph::new();
    for mut solution in eval_bgp(source, &rule.where_patterns) {
        for bind in &rule.binds {
            if let Some(value) = eval_expression(&bind.expression, &solution) {
                solution.bind(bind.variable.clone(), value);
            }
        }
        out.extend(rule.template.iter().filter_map(|p| instantiate(p, &solution)));
    }
    out
}

/// Union of every rule's output. Rules read only `source`, never each
/// other's output.
pub fn apply_rule_pack<S: TripleSource + ?Sized>(source: &S, rules: &[MappingRule]) -> Graph {
    let mut out = Graph::new();
    for rule in rules {
        out.union_with(&apply_rule(source, rule));
    }
    out
}
