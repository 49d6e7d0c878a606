//! The Turtle subset used by vocabulary and fixture files: `@prefix` /
//! `PREFIX`, prefixed names, `a`, IRIs, plain/typed/language literals,
//! numeric and boolean shorthands, and the `;` / `,` abbreviations.
//! Collections and blank-node property lists are rejected.

use super::syntax::{parse_triples_same_subject, Prefixes, TermRules, Tok, TokenStream};
use super::{Graph, RdfError, Triple};
use crate::mapping::PatternTerm;

const RULES: TermRules = TermRules {
    allow_vars: false,
    allow_blank_nodes: true,
};

pub fn parse_turtle_subset(text: &str) -> Result<Graph, RdfError> {
    parse_turtle_with_prefixes(text).map(|(g, _)| g)
}

/// Also returns the prefix map declared by the document.
pub(crate) fn parse_turtle_with_prefixes(
    text: &str,
) -> Result<(Graph, std::collections::BTreeMap<String, String>), RdfError> {
    let mut ts = TokenStream::new(text);
    let mut prefixes = Prefixes::default();
    let mut graph = Graph::new();
    let mut patterns = Vec::new();
    loop {
        let tok = ts.peek()?.clone();
        match &tok.tok {
            Tok::Eof => break,
            Tok::LangTag(kw) if kw == "prefix" => {
                ts.next()?;
                prefixes.parse_declaration(&mut ts)?;
                ts.expect_punct('.')?;
            }
            Tok::LangTag(kw) if kw == "base" => return Err(tok.unsupported("@base")),
            Tok::Word(w) if w.eq_ignore_ascii_case("prefix") => {
                ts.next()?;
                prefixes.parse_declaration(&mut ts)?;
            }
            Tok::Word(w) if w.eq_ignore_ascii_case("base") => return Err(tok.unsupported("BASE")),
            _ => {
                patterns.clear();
                parse_triples_same_subject(&mut ts, &prefixes, RULES, &mut patterns)?;
                ts.expect_punct('.')?;
                for p in patterns.drain(..) {
                    graph.insert(ground(p));
                }
            }
        }
    }
    Ok((graph, prefixes.into_map()))
}

fn ground(p: crate::mapping::TriplePattern) -> Triple {
    let PatternTerm::Term(s) = p.subject else { unreachable!("variables disabled") };
    let PatternTerm::Term(pred) = p.predicate else { unreachable!("variables disabled") };
    let PatternTerm::Term(o) = p.object else { unreachable!("variables disabled") };
    Triple::new(
        s.to_subject().expect("subject position checked by parser"),
        pred.as_iri().cloned().expect("predicate position checked by parser"),
        o,
    )
}
