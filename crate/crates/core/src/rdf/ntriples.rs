//! N-Triples and N-Quads, line by line.

use std::collections::BTreeSet;
use std::fmt::Write;

use super::syntax::{iri_from_token, parse_literal_suffix, Lexer, Prefixes, Tok, TokenStream};
use super::{BlankNode, Graph, Iri, Quad, RdfError, Subject, Term, Triple};

pub fn parse_ntriples(text: &str) -> Result<Graph, RdfError> {
    let mut g = Graph::new();
    for (n, line) in text.lines().enumerate() {
        if let Some(q) = parse_line(line, n + 1, false)? {
            g.insert(q.triple);
        }
    }
    Ok(g)
}

/// Quads in document order; duplicates are kept.
pub fn parse_nquads(text: &str) -> Result<Vec<Quad>, RdfError> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if let Some(q) = parse_line(line, n + 1, true)? {
            out.push(q);
        }
    }
    Ok(out)
}

/// One line per triple, in canonical order.
pub fn serialize_ntriples(graph: &Graph) -> String {
    let mut out = String::new();
    for t in graph {
        writeln!(out, "{t}").unwrap();
    }
    out
}

/// One line per distinct quad, sorted by (graph, subject, predicate, object).
pub fn serialize_nquads<'a>(quads: impl IntoIterator<Item = &'a Quad>) -> String {
    let sorted: BTreeSet<&Quad> = quads.into_iter().collect();
    let mut out = String::new();
    for q in sorted {
        writeln!(out, "{q}").unwrap();
    }
    out
}

fn parse_line(line: &str, lineno: usize, allow_graph: bool) -> Result<Option<Quad>, RdfError> {
    let mut ts = TokenStream::from_lexer(Lexer::starting_at(line, lineno));
    if ts.peek()?.tok == Tok::Eof {
        return Ok(None);
    }
    let no_prefixes = Prefixes::default();

    let t = ts.next()?;
    let subject = match &t.tok {
        Tok::IriRef(i) => Subject::Iri(iri_from_token(&t, i)?),
        Tok::Blank(b) => Subject::BlankNode(blank(&t, b)?),
        _ => return Err(t.unexpected("subject IRI or blank node")),
    };

    let t = ts.next()?;
    let predicate = match &t.tok {
        Tok::IriRef(i) => iri_from_token(&t, i)?,
        _ => return Err(t.unexpected("predicate IRI")),
    };

    let t = ts.next()?;
    let object = match &t.tok {
        Tok::IriRef(i) => Term::Iri(iri_from_token(&t, i)?),
        Tok::Blank(b) => Term::BlankNode(blank(&t, b)?),
        Tok::Str(s) => Term::Literal(parse_literal_suffix(&mut ts, &no_prefixes, s.clone())?),
        _ => return Err(t.unexpected("object")),
    };

    let mut graph: Option<Iri> = None;
    if allow_graph {
        if let Tok::IriRef(_) = ts.peek()?.tok {
            let t = ts.next()?;
            let Tok::IriRef(g) = &t.tok else { unreachable!() };
            graph = Some(iri_from_token(&t, g)?);
        }
    }
    ts.expect_punct('.')?;
    let end = ts.next()?;
    if end.tok != Tok::Eof {
        return Err(end.unexpected("end of line"));
    }
    Ok(Some(Quad::new(Triple::new(subject, predicate, object), graph)))
}

fn blank(t: &super::syntax::Token, label: &str) -> Result<BlankNode, RdfError> {
    BlankNode::new(label).map_err(|e| t.syntax(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rdf::{Literal, XSD_INTEGER};

    #[test]
    fn single_line() {
        let g = parse_ntriples("<http://a/s> <http://a/p> \"x\" .").unwrap();
        assert_eq!(g.len(), 1);
        let t = g.iter().next().unwrap();
        assert_eq!(t.object, Term::Literal(Literal::string("x")));
    }

    #[test]
    fn empty_and_comments() {
        assert!(parse_ntriples("").unwrap().is_empty());
        assert!(parse_ntriples("# only a comment\n\n   \n").unwrap().is_empty());
    }

    #[test]
    fn duplicate_lines_collapse() {
        let line = "<http://a/s> <http://a/p> \"x\" .\n";
        assert_eq!(parse_ntriples(&line.repeat(2)).unwrap().len(), 1);
    }

    #[test]
    fn typed_and_lang_literals() {
        let g = parse_ntriples(concat!(
            "<http://a/s> <http://a/p> \"5\"^^<http://www.w3.org/2001/XMLSchema#integer> .\n",
            "<http://a/s> <http://a/p> \"chat\"@fr .\n",
            "_:b0 <http://a/p> <http://a/o> . # trailing comment\n",
        ))
        .unwrap();
        assert_eq!(g.len(), 3);
        assert!(g.iter().any(|t| t.object.as_literal().is_some_and(|l| l.datatype().as_str() == XSD_INTEGER)));
        assert!(g.iter().any(|t| t.object.as_literal().is_some_and(|l| l.language() == Some("fr"))));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = parse_ntriples("<http://a/s> <http://a/p> \"x\" .\n<http://a/s> <http://a/p> \"x .\n").unwrap_err();
        assert_eq!(err.line(), Some(2));
        let err = parse_ntriples("<s> <http://a/p> \"x\" .").unwrap_err();
        assert!(err.to_string().contains("relative IRI"), "{err}");
        let err = parse_ntriples("<http://a/s> \"p\" \"x\" .").unwrap_err();
        assert_eq!(err.line(), Some(1));
        assert!(parse_ntriples("<http://a/s> <http://a/p> \"x\"").is_err());
        assert!(parse_ntriples("<http://a/s> <http://a/p> \"x\" . extra").is_err());
    }

    #[test]
    fn nquads_graph_term() {
        let qs = parse_nquads("<http://a/s> <http://a/p> \"x\" <http://g/2014-05> .\n<http://a/s> <http://a/p> \"x\" .").unwrap();
        assert_eq!(qs[0].graph.as_ref().unwrap().as_str(), "http://g/2014-05");
        assert!(qs[1].graph.is_none());
        assert!(parse_ntriples("<http://a/s> <http://a/p> \"x\" <http://g/1> .").is_err());
    }

    #[test]
    fn serialization_escapes_and_round_trips() {
        let text = "<http://a/s> <http://a/p> \"tab\\there \\\"q\\\" \\\\ \\u0001 é\" .\n";
        let g = parse_ntriples(text).unwrap();
        assert_eq!(g.iter().next().unwrap().object.as_literal().unwrap().lexical(), "tab\there \"q\" \\ \u{1} é");
        assert_eq!(serialize_ntriples(&g), text);
    }

    #[test]
    fn unicode_escapes_decoded() {
        let g = parse_ntriples("<http://a/\\u00E9> <http://a/p> \"\\U0001F600\" .").unwrap();
        let t = g.iter().next().unwrap();
        assert_eq!(t.subject.as_iri().unwrap().as_str(), "http://a/é");
        assert_eq!(t.object.as_literal().unwrap().lexical(), "😀");
        assert_eq!(serialize_ntriples(&g), "<http://a/é> <http://a/p> \"😀\" .\n");
    }

    #[test]
    fn serialize_orders_canonically() {
        let g = parse_ntriples("<http://a/z> <http://a/p> \"1\" .\n_:b <http://a/p> \"2\" .\n<http://a/a> <http://a/p> \"3\" .").unwrap();
        let out = serialize_ntriples(&g);
        let lines: Vec<&str> = out.lines().collect();
        assert!(lines[0].starts_with("_:b"));
        assert!(lines[1].starts_with("<http://a/a>"));
        assert!(lines[2].starts_with("<http://a/z>"));
    }
}
