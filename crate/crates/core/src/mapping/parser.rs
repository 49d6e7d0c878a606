//! Parser for the CONSTRUCT rule language; the group-body parsing is shared
//! with the query parser.

use std::collections::BTreeSet;

use super::{BindClause, Expression, Function, MappingRule, RuleError, TriplePattern, Variable};
use crate::rdf::syntax::{
    iri_from_token, parse_literal_suffix, parse_triples_same_subject, Prefixes, TermRules, Tok,
    Token, TokenStream,
};
use crate::rdf::{Iri, Literal, Term, XSD_BOOLEAN, XSD_DECIMAL, XSD_DOUBLE, XSD_INTEGER};

pub(crate) const PATTERN_TERMS: TermRules = TermRules {
    allow_vars: true,
    allow_blank_nodes: false,
};

/// Keywords we recognise but deliberately do not evaluate.
const UNSUPPORTED: &[&str] = &[
    "OPTIONAL", "FILTER", "UNION", "MINUS", "GRAPH", "SERVICE", "VALUES", "SELECT", "EXISTS",
    "NOT", "FROM", "GROUP", "HAVING", "ORDER", "LIMIT", "OFFSET", "DESCRIBE", "ASK", "INSERT",
    "DELETE", "LOAD", "CLEAR", "BASE",
];

pub(crate) fn unsupported(token: &Token, feature: &str) -> RuleError {
    RuleError::UnsupportedFeature {
        feature: feature.to_string(),
        line: token.line,
        column: token.col,
    }
}

pub(crate) fn reject_keyword(token: &Token) -> Result<(), RuleError> {
    if let Tok::Word(w) = &token.tok {
        let upper = w.to_ascii_uppercase();
        if UNSUPPORTED.contains(&upper.as_str()) {
            return Err(unsupported(token, &upper));
        }
    }
    Ok(())
}

/// Parses `PREFIX` declarations until the first other token.
pub(crate) fn parse_prologue(ts: &mut TokenStream) -> Result<Prefixes, RuleError> {
    let mut prefixes = Prefixes::default();
    loop {
        let tok = ts.peek()?.clone();
        if tok.tok.is_word("PREFIX") {
            ts.next()?;
            prefixes.parse_declaration(ts)?;
        } else if matches!(&tok.tok, Tok::LangTag(k) if k == "prefix") {
            ts.next()?;
            prefixes.parse_declaration(ts)?;
            ts.eat_punct('.')?;
        } else if tok.tok.is_word("BASE") {
            return Err(unsupported(&tok, "BASE"));
        } else {
            return Ok(prefixes);
        }
    }
}

/// `{ triples }` with no BINDs (construct templates).
pub(crate) fn parse_template(
    ts: &mut TokenStream,
    prefixes: &Prefixes,
) -> Result<Vec<TriplePattern>, RuleError> {
    ts.expect_punct('{')?;
    let mut out = Vec::new();
    loop {
        let tok = ts.peek()?.clone();
        match &tok.tok {
            Tok::Punct('}') => {
                ts.next()?;
                return Ok(out);
            }
            Tok::Punct('.') => {
                ts.next()?;
            }
            Tok::Blank(_) => return Err(unsupported(&tok, "blank node in template")),
            _ => {
                reject_keyword(&tok)?;
                parse_triples_same_subject(ts, prefixes, PATTERN_TERMS, &mut out)?;
            }
        }
    }
}

/// Body of a group after its opening `{`: triple blocks and BINDs, up to and
/// including the closing `}`.
pub(crate) fn parse_group_body(
    ts: &mut TokenStream,
    prefixes: &Prefixes,
    patterns: &mut Vec<TriplePattern>,
    binds: &mut Vec<BindClause>,
) -> Result<(), RuleError> {
    loop {
        let tok = ts.peek()?.clone();
        match &tok.tok {
            Tok::Punct('}') => {
                ts.next()?;
                return Ok(());
            }
            Tok::Punct('.') => {
                ts.next()?;
            }
            Tok::Punct('{') => return Err(unsupported(&tok, "nested group")),
            Tok::Eof => return Err(tok.unexpected("'}'").into()),
            Tok::Word(w) if w.eq_ignore_ascii_case("BIND") => {
                ts.next()?;
                binds.push(parse_bind(ts, prefixes)?);
            }
            _ => {
                reject_keyword(&tok)?;
                parse_triples_same_subject(ts, prefixes, PATTERN_TERMS, patterns)?;
            }
        }
    }
}

fn parse_bind(ts: &mut TokenStream, prefixes: &Prefixes) -> Result<BindClause, RuleError> {
    ts.expect_punct('(')?;
    let expression = parse_expression(ts, prefixes)?;
    ts.expect_word("AS")?;
    let t = ts.next()?;
    let Tok::Var(v) = &t.tok else {
        return Err(t.unexpected("variable").into());
    };
    ts.expect_punct(')')?;
    Ok(BindClause {
        variable: Variable::new(v.clone()),
        expression,
    })
}

fn parse_expression(ts: &mut TokenStream, prefixes: &Prefixes) -> Result<Expression, RuleError> {
    let t = ts.next()?;
    let expr = match &t.tok {
        Tok::Var(v) => Expression::Var(Variable::new(v.clone())),
        Tok::Str(s) => Expression::Constant(Term::Literal(parse_literal_suffix(ts, prefixes, s.clone())?)),
        Tok::IriRef(i) => Expression::Constant(Term::Iri(iri_from_token(&t, i)?)),
        Tok::PName { prefix, local } => Expression::Constant(Term::Iri(prefixes.expand(&t, prefix, local)?)),
        Tok::Integer(n) => numeric(n, XSD_INTEGER),
        Tok::Decimal(n) => numeric(n, XSD_DECIMAL),
        Tok::Double(n) => numeric(n, XSD_DOUBLE),
        Tok::Word(w) if w == "true" || w == "false" => numeric(w, XSD_BOOLEAN),
        Tok::Word(w) if ts.peek_is_punct('(')? => {
            let Some(function) = Function::from_name(w) else {
                reject_keyword(&t)?;
                return Err(RuleError::UnknownFunction {
                    name: w.clone(),
                    line: t.line,
                    column: t.col,
                });
            };
            ts.next()?;
            let mut args = Vec::new();
            if !ts.eat_punct(')')? {
                loop {
                    args.push(parse_expression(ts, prefixes)?);
                    if ts.eat_punct(')')? {
                        break;
                    }
                    ts.expect_punct(',')?;
                }
            }
            check_arity(&t, function, args.len())?;
            Expression::Call(function, args)
        }
        _ => return Err(t.unexpected("expression").into()),
    };
    Ok(expr)
}

fn numeric(lexical: &str, datatype: &str) -> Expression {
    Expression::Constant(Term::Literal(
        Literal::typed(lexical, Iri::new_unchecked(datatype)).expect("not langString"),
    ))
}

fn check_arity(t: &Token, function: Function, found: usize) -> Result<(), RuleError> {
    let (ok, expected) = match function {
        Function::Concat => (found >= 1, "at least 1"),
        _ => (found == 1, "exactly 1"),
    };
    if ok {
        Ok(())
    } else {
        Err(RuleError::Arity {
            function: function.name(),
            expected,
            found,
            line: t.line,
            column: t.col,
        })
    }
}

/// Variables bound by `where_patterns` followed by `binds`, checking the BIND
/// scoping rules on the way.
pub(crate) fn check_scoping(
    where_patterns: &[TriplePattern],
    binds: &[BindClause],
) -> Result<BTreeSet<Variable>, RuleError> {
    let mut bound: BTreeSet<Variable> = where_patterns
        .iter()
        .flat_map(|p| p.variables().cloned())
        .collect();
    for b in binds {
        if let Some(v) = b.expression.variables().into_iter().find(|v| !bound.contains(*v)) {
            return Err(RuleError::BindUsesUnbound(v.clone()));
        }
        if !bound.insert(b.variable.clone()) {
            return Err(RuleError::BindTargetBound(b.variable.clone()));
        }
    }
    Ok(bound)
}

pub(crate) fn check_template(
    template: &[TriplePattern],
    bound: &BTreeSet<Variable>,
) -> Result<(), RuleError> {
    for v in template.iter().flat_map(TriplePattern::variables) {
        if !bound.contains(v) {
            return Err(RuleError::UnboundTemplateVariable(v.clone()));
        }
    }
    Ok(())
}

pub(crate) fn expect_end(ts: &mut TokenStream) -> Result<(), RuleError> {
    let t = ts.next()?;
    if t.tok == Tok::Eof {
        return Ok(());
    }
    reject_keyword(&t)?;
    Err(t.unexpected("end of input").into())
}

/// Parses one `CONSTRUCT { … } WHERE { … }` rule. Prefixed names are expanded.
pub fn parse_rule(text: &str) -> Result<MappingRule, RuleError> {
    let mut ts = TokenStream::new(text);
    let prefixes = parse_prologue(&mut ts)?;
    let t = ts.next()?;
    if !t.tok.is_word("CONSTRUCT") {
        reject_keyword(&t)?;
        return Err(t.unexpected("CONSTRUCT").into());
    }
    if ts.peek_is_word("WHERE")? {
        let t = ts.next()?;
        return Err(unsupported(&t, "CONSTRUCT WHERE shorthand"));
    }
    let template = parse_template(&mut ts, &prefixes)?;
    ts.eat_word("WHERE")?;
    ts.expect_punct('{')?;
    let mut where_patterns = Vec::new();
    let mut binds = Vec::new();
    parse_group_body(&mut ts, &prefixes, &mut where_patterns, &mut binds)?;
    expect_end(&mut ts)?;

    let bound = check_scoping(&where_patterns, &binds)?;
    check_template(&template, &bound)?;
    Ok(MappingRule {
        name: "rule".into(),
        prefixes: prefixes.into_map(),
        template,
        where_patterns,
        binds,
    })
}
