//! Lexer and term-level parsing shared by the Turtle subset, N-Triples,
//! the CONSTRUCT rule language, the query language and the shape format.
//!
//! The lexer is pull-based so a parser can reject an unsupported keyword
//! before the lexer ever sees the syntax that follows it.

use std::collections::BTreeMap;

use super::{
    BlankNode, Iri, Literal, RdfError, Term, RDF_LANG_STRING, XSD_BOOLEAN, XSD_DECIMAL,
    XSD_DOUBLE, XSD_INTEGER,
};
use crate::mapping::{PatternTerm, TriplePattern, Variable};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    IriRef(String),
    PName { prefix: String, local: String },
    Blank(String),
    Var(String),
    Str(String),
    LangTag(String),
    Integer(String),
    Decimal(String),
    Double(String),
    Word(String),
    Punct(char),
    DoubleCaret,
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::IriRef(i) => format!("<{i}>"),
            Tok::PName { prefix, local } => format!("{prefix}:{local}"),
            Tok::Blank(b) => format!("_:{b}"),
            Tok::Var(v) => format!("?{v}"),
            Tok::Str(_) => "string literal".into(),
            Tok::LangTag(t) => format!("@{t}"),
            Tok::Integer(n) | Tok::Decimal(n) | Tok::Double(n) => n.clone(),
            Tok::Word(w) => w.clone(),
            Tok::Punct(c) => format!("'{c}'"),
            Tok::DoubleCaret => "'^^'".into(),
            Tok::Eof => "end of input".into(),
        }
    }

    pub(crate) fn is_word(&self, kw: &str) -> bool {
        matches!(self, Tok::Word(w) if w.eq_ignore_ascii_case(kw))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

impl Token {
    pub(crate) fn syntax(&self, message: impl Into<String>) -> RdfError {
        RdfError::Syntax {
            line: self.line,
            column: self.col,
            message: message.into(),
        }
    }

    pub(crate) fn unsupported(&self, feature: impl Into<String>) -> RdfError {
        RdfError::Unsupported {
            feature: feature.into(),
            line: self.line,
            column: self.col,
        }
    }

    pub(crate) fn unexpected(&self, expected: &str) -> RdfError {
        self.syntax(format!("expected {expected}, found {}", self.tok.describe()))
    }
}

pub(crate) struct Lexer {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    col: usize,
}

impl Lexer {
    pub(crate) fn new(text: &str) -> Self {
        Self::starting_at(text, 1)
    }

    pub(crate) fn starting_at(text: &str, line: usize) -> Self {
        Lexer {
            chars: text.chars().collect(),
            pos: 0,
            line,
            col: 1,
        }
    }

    fn peek_char(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek_at(&self, offset: usize) -> Option<char> {
        self.chars.get(self.pos + offset).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.get(self.pos).copied()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn err(&self, line: usize, col: usize, message: impl Into<String>) -> RdfError {
        RdfError::Syntax {
            line,
            column: col,
            message: message.into(),
        }
    }

    fn skip_trivia(&mut self) {
        while let Some(c) = self.peek_char() {
            if c.is_whitespace() {
                self.bump();
            } else if c == '#' {
                while let Some(c) = self.peek_char() {
                    if c == '\n' {
                        break;
                    }
                    self.bump();
                }
            } else {
                break;
            }
        }
    }

    pub(crate) fn next_token(&mut self) -> Result<Token, RdfError> {
        self.skip_trivia();
        let (line, col) = (self.line, self.col);
        let tok = match self.peek_char() {
            None => Tok::Eof,
            Some(c) => match c {
                '<' => self.lex_iri(line, col)?,
                '"' | '\'' => Tok::Str(self.lex_string(line, col)?),
                '_' if self.peek_at(1) == Some(':') => {
                    self.bump();
                    self.bump();
                    let mut label = String::new();
                    while let Some(c) = self.peek_char() {
                        if c.is_alphanumeric() || c == '_' || c == '-' {
                            label.push(c);
                            self.bump();
                        } else if c == '.' && self.peek_at(1).is_some_and(|n| n.is_alphanumeric() || n == '_') {
                            label.push(c);
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    if label.is_empty() {
                        return Err(self.err(line, col, "empty blank node label"));
                    }
                    Tok::Blank(label)
                }
                '?' | '$' if self.peek_at(1).is_some_and(is_name_char) => {
                    self.bump();
                    let mut name = String::new();
                    while let Some(c) = self.peek_char().filter(|c| is_name_char(*c)) {
                        name.push(c);
                        self.bump();
                    }
                    Tok::Var(name)
                }
                '@' => {
                    self.bump();
                    let mut tag = String::new();
                    while let Some(c) = self.peek_char() {
                        if c.is_ascii_alphanumeric() || (c == '-' && !tag.is_empty()) {
                            tag.push(c);
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    if tag.is_empty() {
                        return Err(self.err(line, col, "empty language tag"));
                    }
                    Tok::LangTag(tag)
                }
                '^' => {
                    self.bump();
                    if self.peek_char() == Some('^') {
                        self.bump();
                        Tok::DoubleCaret
                    } else {
                        Tok::Punct('^')
                    }
                }
                '0'..='9' => self.lex_number(),
                '+' | '-'
                    if self.peek_at(1).is_some_and(|n| n.is_ascii_digit())
                        || (self.peek_at(1) == Some('.')
                            && self.peek_at(2).is_some_and(|n| n.is_ascii_digit())) =>
                {
                    self.lex_number()
                }
                '.' if self.peek_at(1).is_some_and(|n| n.is_ascii_digit()) => self.lex_number(),
                ':' => {
                    self.bump();
                    Tok::PName {
                        prefix: String::new(),
                        local: self.lex_local(line, col)?,
                    }
                }
                c if c.is_alphabetic() => {
                    let mut word = String::new();
                    while let Some(c) = self
                        .peek_char()
                        .filter(|c| c.is_alphanumeric() || *c == '_' || *c == '-')
                    {
                        word.push(c);
                        self.bump();
                    }
                    if self.peek_char() == Some(':') {
                        self.bump();
                        Tok::PName {
                            prefix: word,
                            local: self.lex_local(line, col)?,
                        }
                    } else {
                        Tok::Word(word)
                    }
                }
                other => {
                    self.bump();
                    Tok::Punct(other)
                }
            },
        };
        Ok(Token { tok, line, col })
    }

    fn lex_iri(&mut self, line: usize, col: usize) -> Result<Tok, RdfError> {
        self.bump();
        let mut out = String::new();
        loop {
            match self.bump() {
                None => return Err(self.err(line, col, "unterminated IRI")),
                Some('>') => return Ok(Tok::IriRef(out)),
                Some('\\') => {
                    let c = self.lex_unicode_escape(line, col)?;
                    out.push(c);
                }
                Some(c) if c <= ' ' || matches!(c, '<' | '"' | '{' | '}' | '|' | '^' | '`') => {
                    return Err(self.err(line, col, format!("invalid character {c:?} in IRI")));
                }
                Some(c) => out.push(c),
            }
        }
    }

    /// After a backslash: `uXXXX` or `UXXXXXXXX`.
    fn lex_unicode_escape(&mut self, line: usize, col: usize) -> Result<char, RdfError> {
        let width = match self.bump() {
            Some('u') => 4,
            Some('U') => 8,
            _ => return Err(self.err(line, col, "invalid escape sequence")),
        };
        let mut hex = String::new();
        for _ in 0..width {
            match self.bump() {
                Some(c) if c.is_ascii_hexdigit() => hex.push(c),
                _ => return Err(self.err(line, col, "invalid unicode escape")),
            }
        }
        u32::from_str_radix(&hex, 16)
            .ok()
            .and_then(char::from_u32)
            .ok_or_else(|| self.err(line, col, format!("invalid code point U+{hex}")))
    }

    fn lex_string(&mut self, line: usize, col: usize) -> Result<String, RdfError> {
        let quote = self.bump().unwrap();
        let long = self.peek_char() == Some(quote) && self.peek_at(1) == Some(quote);
        if long {
            self.bump();
            self.bump();
        }
        let mut out = String::new();
        loop {
            let Some(c) = self.bump() else {
                return Err(self.err(line, col, "unterminated string literal"));
            };
            match c {
                c if c == quote && !long => return Ok(out),
                c if c == quote
                    && self.peek_char() == Some(quote)
                    && self.peek_at(1) == Some(quote) =>
                {
                    self.bump();
                    self.bump();
                    // """a"""" ends with the last three quotes
                    while self.peek_char() == Some(quote) {
                        out.push(quote);
                        self.bump();
                    }
                    return Ok(out);
                }
                '\n' | '\r' if !long => {
                    return Err(self.err(line, col, "unterminated string literal"))
                }
                '\\' => {
                    let esc = match self.peek_char() {
                        Some('t') => '\t',
                        Some('b') => '\u{8}',
                        Some('n') => '\n',
                        Some('r') => '\r',
                        Some('f') => '\u{c}',
                        Some('"') => '"',
                        Some('\'') => '\'',
                        Some('\\') => '\\',
                        Some('u') | Some('U') => {
                            let c = self.lex_unicode_escape(line, col)?;
                            out.push(c);
                            continue;
                        }
                        _ => return Err(self.err(self.line, self.col, "invalid escape sequence")),
                    };
                    self.bump();
                    out.push(esc);
                }
                c => out.push(c),
            }
        }
    }

    fn lex_number(&mut self) -> Tok {
        let mut s = String::new();
        if let Some(c @ ('+' | '-')) = self.peek_char() {
            s.push(c);
            self.bump();
        }
        while let Some(c) = self.peek_char().filter(char::is_ascii_digit) {
            s.push(c);
            self.bump();
        }
        let mut decimal = false;
        if self.peek_char() == Some('.') && self.peek_at(1).is_some_and(|c| c.is_ascii_digit()) {
            decimal = true;
            s.push('.');
            self.bump();
            while let Some(c) = self.peek_char().filter(char::is_ascii_digit) {
                s.push(c);
                self.bump();
            }
        }
        if matches!(self.peek_char(), Some('e' | 'E')) {
            let sign = matches!(self.peek_at(1), Some('+' | '-'));
            let digit_at = if sign { 2 } else { 1 };
            if self.peek_at(digit_at).is_some_and(|c| c.is_ascii_digit()) {
                for _ in 0..digit_at {
                    s.push(self.bump().unwrap());
                }
                while let Some(c) = self.peek_char().filter(char::is_ascii_digit) {
                    s.push(c);
                    self.bump();
                }
                return Tok::Double(s);
            }
        }
        if decimal {
            Tok::Decimal(s)
        } else {
            Tok::Integer(s)
        }
    }

    fn lex_local(&mut self, line: usize, col: usize) -> Result<String, RdfError> {
        let mut local = String::new();
        let mut trailing_dots = 0usize;
        while let Some(c) = self.peek_char() {
            if c.is_alphanumeric() || matches!(c, '_' | '-' | ':') {
                local.push(c);
                trailing_dots = 0;
                self.bump();
            } else if c == '.' {
                local.push(c);
                trailing_dots += 1;
                self.bump();
            } else if c == '%' {
                let (a, b) = (self.peek_at(1), self.peek_at(2));
                if !(a.is_some_and(|c| c.is_ascii_hexdigit()) && b.is_some_and(|c| c.is_ascii_hexdigit())) {
                    return Err(self.err(line, col, "invalid percent escape in prefixed name"));
                }
                for _ in 0..3 {
                    local.push(self.bump().unwrap());
                }
                trailing_dots = 0;
            } else if c == '\\' {
                match self.peek_at(1) {
                    Some(e) if "_~.-!$&'()*+,;=/?#@%".contains(e) => {
                        self.bump();
                        self.bump();
                        local.push(e);
                        trailing_dots = 0;
                    }
                    _ => return Err(self.err(line, col, "invalid escape in prefixed name")),
                }
            } else {
                break;
            }
        }
        // a trailing '.' terminates the statement
        if trailing_dots > 0 {
            local.truncate(local.len() - trailing_dots);
            self.pos -= trailing_dots;
            self.col -= trailing_dots;
        }
        Ok(local)
    }
}

fn is_name_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// One-token lookahead over a [`Lexer`].
pub(crate) struct TokenStream {
    lexer: Lexer,
    peeked: Option<Token>,
}

impl TokenStream {
    pub(crate) fn new(text: &str) -> Self {
        TokenStream {
            lexer: Lexer::new(text),
            peeked: None,
        }
    }

    pub(crate) fn from_lexer(lexer: Lexer) -> Self {
        TokenStream {
            lexer,
            peeked: None,
        }
    }

    pub(crate) fn peek(&mut self) -> Result<&Token, RdfError> {
        if self.peeked.is_none() {
            self.peeked = Some(self.lexer.next_token()?);
        }
        Ok(self.peeked.as_ref().unwrap())
    }

    pub(crate) fn next(&mut self) -> Result<Token, RdfError> {
        match self.peeked.take() {
            Some(t) => Ok(t),
            None => self.lexer.next_token(),
        }
    }

    pub(crate) fn peek_is_punct(&mut self, c: char) -> Result<bool, RdfError> {
        Ok(self.peek()?.tok == Tok::Punct(c))
    }

    pub(crate) fn eat_punct(&mut self, c: char) -> Result<bool, RdfError> {
        if self.peek_is_punct(c)? {
            self.next()?;
            Ok(true)
        } else {
            Ok(false)
        }
    }

    pub(crate) fn expect_punct(&mut self, c: char) -> Result<Token, RdfError> {
        let t = self.next()?;
        if t.tok == Tok::Punct(c) {
            Ok(t)
        } else {
            Err(t.unexpected(&format!("'{c}'")))
        }
    }

    pub(crate) fn peek_is_word(&mut self, kw: &str) -> Result<bool, RdfError> {
        Ok(self.peek()?.tok.is_word(kw))
    }

    pub(crate) fn eat_word(&mut self, kw: &str) -> Result<bool, RdfError> {
        if self.peek_is_word(kw)? {
            self.next()?;
            Ok(true)
        } else {
            Ok(false)
        }
    }

    pub(crate) fn expect_word(&mut self, kw: &str) -> Result<Token, RdfError> {
        let t = self.next()?;
        if t.tok.is_word(kw) {
            Ok(t)
        } else {
            Err(t.unexpected(kw))
        }
    }
}

/// Prefix declarations in scope for a document.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub(crate) struct Prefixes {
    map: BTreeMap<String, String>,
}

impl Prefixes {
    pub(crate) fn insert(&mut self, prefix: String, namespace: String) {
        self.map.insert(prefix, namespace);
    }

    pub(crate) fn into_map(self) -> BTreeMap<String, String> {
        self.map
    }

    pub(crate) fn expand(&self, token: &Token, prefix: &str, local: &str) -> Result<Iri, RdfError> {
        let Some(ns) = self.map.get(prefix) else {
            return Err(RdfError::UnknownPrefix {
                prefix: prefix.to_string(),
                line: token.line,
                column: token.col,
            });
        };
        Iri::new(format!("{ns}{local}")).map_err(|e| token.syntax(e.to_string()))
    }

    /// `PNAME_NS IRIREF` after the `@prefix` / `PREFIX` keyword.
    pub(crate) fn parse_declaration(&mut self, ts: &mut TokenStream) -> Result<(), RdfError> {
        let name = ts.next()?;
        let Tok::PName { prefix, local } = &name.tok else {
            return Err(name.unexpected("prefix name"));
        };
        if !local.is_empty() {
            return Err(name.unexpected("prefix name ending in ':'"));
        }
        let iri = ts.next()?;
        let Tok::IriRef(ns) = &iri.tok else {
            return Err(iri.unexpected("IRI"));
        };
        let ns = Iri::new(ns.clone()).map_err(|e| iri.syntax(e.to_string()))?;
        self.insert(prefix.clone(), ns.into_string());
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Position {
    Subject,
    Predicate,
    Object,
}

/// Options for term parsing.
#[derive(Debug, Clone, Copy)]
pub(crate) struct TermRules {
    pub allow_vars: bool,
    pub allow_blank_nodes: bool,
}

pub(crate) fn iri_from_token(token: &Token, value: &str) -> Result<Iri, RdfError> {
    Iri::new(value).map_err(|e| token.syntax(e.to_string()))
}

pub(crate) fn parse_term(
    ts: &mut TokenStream,
    prefixes: &Prefixes,
    position: Position,
    rules: TermRules,
) -> Result<PatternTerm, RdfError> {
    let token = ts.next()?;
    let term: PatternTerm = match &token.tok {
        Tok::IriRef(i) => Term::Iri(iri_from_token(&token, i)?).into(),
        Tok::PName { prefix, local } => Term::Iri(prefixes.expand(&token, prefix, local)?).into(),
        Tok::Var(v) if rules.allow_vars => PatternTerm::Var(Variable::new(v.clone())),
        Tok::Var(_) => return Err(token.syntax("variables are not allowed here")),
        Tok::Word(w) if w == "a" && position == Position::Predicate => Term::Iri(Iri::rdf_type()).into(),
        Tok::Punct('^') if position == Position::Predicate => {
            return Err(token.unsupported("property path"))
        }
        Tok::Punct('[') => return Err(token.unsupported("blank node property list")),
        Tok::Punct('(') => return Err(token.unsupported("collection")),
        _ if position == Position::Predicate => return Err(token.unexpected("predicate")),
        Tok::Blank(label) if rules.allow_blank_nodes => Term::BlankNode(
            BlankNode::new(label.clone()).map_err(|e| token.syntax(e.to_string()))?,
        )
        .into(),
        Tok::Blank(_) => return Err(token.unsupported("blank node in pattern")),
        Tok::Str(s) => Term::Literal(parse_literal_suffix(ts, prefixes, s.clone())?).into(),
        Tok::Integer(n) => Term::Literal(Literal::typed(n.clone(), Iri::new_unchecked(XSD_INTEGER))?).into(),
        Tok::Decimal(n) => Term::Literal(Literal::typed(n.clone(), Iri::new_unchecked(XSD_DECIMAL))?).into(),
        Tok::Double(n) => Term::Literal(Literal::typed(n.clone(), Iri::new_unchecked(XSD_DOUBLE))?).into(),
        Tok::Word(w) if w == "true" || w == "false" => {
            Term::Literal(Literal::typed(w.clone(), Iri::new_unchecked(XSD_BOOLEAN))?).into()
        }
        _ => return Err(token.unexpected("RDF term")),
    };
    if position == Position::Subject && matches!(term, PatternTerm::Term(Term::Literal(_))) {
        return Err(token.syntax("literal in subject position"));
    }
    if position == Position::Predicate
        && matches!(ts.peek()?.tok, Tok::Punct('/' | '|' | '*' | '+' | '?'))
    {
        return Err(ts.peek()?.unsupported("property path"));
    }
    Ok(term)
}

/// Optional `@lang` or `^^datatype` after a string.
pub(crate) fn parse_literal_suffix(
    ts: &mut TokenStream,
    prefixes: &Prefixes,
    lexical: String,
) -> Result<Literal, RdfError> {
    match &ts.peek()?.tok {
        Tok::LangTag(_) => {
            let t = ts.next()?;
            let Tok::LangTag(lang) = &t.tok else { unreachable!() };
            Literal::lang(lexical, lang.clone()).map_err(|e| t.syntax(e.to_string()))
        }
        Tok::DoubleCaret => {
            ts.next()?;
            let t = ts.next()?;
            let dt = match &t.tok {
                Tok::IriRef(i) => iri_from_token(&t, i)?,
                Tok::PName { prefix, local } => prefixes.expand(&t, prefix, local)?,
                _ => return Err(t.unexpected("datatype IRI")),
            };
            if dt.as_str() == RDF_LANG_STRING {
                return Err(t.syntax("rdf:langString literal without language tag"));
            }
            Literal::typed(lexical, dt).map_err(|e| t.syntax(e.to_string()))
        }
        _ => Ok(Literal::string(lexical)),
    }
}

fn starts_verb(tok: &Tok, rules: TermRules) -> bool {
    match tok {
        Tok::IriRef(_) | Tok::PName { .. } | Tok::Punct('^') => true,
        Tok::Var(_) => rules.allow_vars,
        Tok::Word(w) => w == "a",
        _ => false,
    }
}

/// `subject predicateObjectList`, with `;` and `,` abbreviations.
/// Does not consume the terminating `.`.
pub(crate) fn parse_triples_same_subject(
    ts: &mut TokenStream,
    prefixes: &Prefixes,
    rules: TermRules,
    out: &mut Vec<TriplePattern>,
) -> Result<(), RdfError> {
    let subject = parse_term(ts, prefixes, Position::Subject, rules)?;
    loop {
        let predicate = parse_term(ts, prefixes, Position::Predicate, rules)?;
        loop {
            let object = parse_term(ts, prefixes, Position::Object, rules)?;
            out.push(TriplePattern {
                subject: subject.clone(),
                predicate: predicate.clone(),
                object,
            });
            if !ts.eat_punct(',')? {
                break;
            }
        }
        if !ts.eat_punct(';')? {
            return Ok(());
        }
        while ts.eat_punct(';')? {}
        if !starts_verb(&ts.peek()?.tok, rules) {
            return Ok(());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(text: &str) -> Vec<Tok> {
        let mut lx = Lexer::new(text);
        let mut out = Vec::new();
        loop {
            let t = lx.next_token().unwrap();
            if t.tok == Tok::Eof {
                return out;
            }
            out.push(t.tok);
        }
    }

    #[test]
    fn lexes_prefixed_names_and_trailing_dot() {
        assert_eq!(
            toks("s:a a s:B."),
            vec![
                Tok::PName { prefix: "s".into(), local: "a".into() },
                Tok::Word("a".into()),
                Tok::PName { prefix: "s".into(), local: "B".into() },
                Tok::Punct('.'),
            ]
        );
    }

    #[test]
    fn lexes_numbers() {
        assert_eq!(toks("1 -2.5 3e4 4."), vec![
            Tok::Integer("1".into()),
            Tok::Decimal("-2.5".into()),
            Tok::Double("3e4".into()),
            Tok::Integer("4".into()),
            Tok::Punct('.'),
        ]);
    }

    #[test]
    fn lexes_strings_with_escapes() {
        assert_eq!(toks(r#""a\"bé\n""#), vec![Tok::Str("a\"bé\n".into())]);
        assert_eq!(toks("'''x\ny'''"), vec![Tok::Str("x\ny".into())]);
        assert!(Lexer::new("\"abc").next_token().is_err());
        assert!(Lexer::new("\"a\nb\"").next_token().is_err());
    }

    #[test]
    fn tracks_positions() {
        let mut lx = Lexer::new("# c\n  <http://a>");
        let t = lx.next_token().unwrap();
        assert_eq!((t.line, t.col), (2, 3));
    }

    #[test]
    fn comments_do_not_break_iris() {
        assert_eq!(toks("<http://a/#frag> # c"), vec![Tok::IriRef("http://a/#frag".into())]);
    }
}
