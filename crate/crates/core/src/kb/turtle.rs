//! Turtle subset: `@prefix`/`PREFIX`, IRIs, prefixed names, `a`, string,
//! integer, decimal and boolean literals, `;` and `,` continuations, comments.
//! Blank nodes, collections and language tags are rejected.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use super::graph::TripleGraph;
use super::term::{Iri, Literal, Term, Triple};
use crate::vocab::{rdf, xsd, WELL_KNOWN_PREFIXES};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("E_TURTLE_SYNTAX at {line}:{column}: {message}")]
pub struct TurtleError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    IriRef(String),
    PrefixedName { prefix: String, local: String },
    A,
    PrefixKeyword,
    AtPrefix,
    Str(String),
    Integer(String),
    Decimal(String),
    Boolean(bool),
    DoubleCaret,
    Dot,
    Semicolon,
    Comma,
}

#[derive(Debug, Clone, Copy)]
struct Pos {
    line: usize,
    column: usize,
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    column: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Self {
            chars: src.chars().peekable(),
            line: 1,
            column: 1,
        }
    }

    fn pos(&self) -> Pos {
        Pos {
            line: self.line,
            column: self.column,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn peek2(&self) -> Option<char> {
        let mut it = self.chars.clone();
        it.next();
        it.next()
    }

    fn err<T>(&self, at: Pos, message: impl Into<String>) -> Result<T, TurtleError> {
        Err(TurtleError {
            line: at.line,
            column: at.column,
            message: message.into(),
        })
    }

    fn skip_trivia(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.bump();
            } else if c == '#' {
                while let Some(c) = self.bump() {
                    if c == '\n' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn next_token(&mut self) -> Result<Option<(Token, Pos)>, TurtleError> {
        self.skip_trivia();
        let start = self.pos();
        let Some(c) = self.peek() else {
            return Ok(None);
        };
        let token = match c {
            '<' => {
                self.bump();
                let mut iri = String::new();
                loop {
                    match self.bump() {
                        Some('>') => break,
                        Some(c) if c.is_whitespace() => return self.err(start, "whitespace inside IRI"),
                        Some(c) => iri.push(c),
                        None => return self.err(start, "unterminated IRI"),
                    }
                }
                Token::IriRef(iri)
            }
            '"' | '\'' => Token::Str(self.string(c, start)?),
            '.' => {
                self.bump();
                Token::Dot
            }
            ';' => {
                self.bump();
                Token::Semicolon
            }
            ',' => {
                self.bump();
                Token::Comma
            }
            '^' => {
                self.bump();
                if self.bump() != Some('^') {
                    return self.err(start, "expected `^^`");
                }
                Token::DoubleCaret
            }
            '@' => {
                self.bump();
                let word = self.word();
                if word == "prefix" {
                    Token::AtPrefix
                } else if word == "base" {
                    return self.err(start, "@base is not supported");
                } else {
                    return self.err(start, "language tags are not supported");
                }
            }
            '[' | '(' => return self.err(start, "blank nodes and collections are not supported"),
            '_' if self.peek2() == Some(':') => return self.err(start, "blank nodes are not supported"),
            c if c.is_ascii_digit() || ((c == '+' || c == '-') && self.peek2().is_some_and(|d| d.is_ascii_digit())) => {
                self.number()
            }
            c if is_name_char(c) || c == ':' => {
                let word = self.word();
                self.classify_word(word, start)?
            }
            other => return self.err(start, format!("unexpected character `{other}`")),
        };
        Ok(Some((token, start)))
    }

    fn word(&mut self) -> String {
        let mut word = String::new();
        while let Some(c) = self.peek() {
            if is_name_char(c) || c == ':' {
                word.push(c);
                self.bump();
            } else if c == '.' && self.peek2().is_some_and(|n| is_name_char(n) || n == ':') {
                // inner dots belong to the local name; a trailing dot ends the statement
                word.push(c);
                self.bump();
            } else {
                break;
            }
        }
        word
    }

    fn classify_word(&self, word: String, at: Pos) -> Result<Token, TurtleError> {
        if let Some(idx) = word.find(':') {
            let prefix = word[..idx].to_owned();
            let local = word[idx + 1..].to_owned();
            return Ok(Token::PrefixedName { prefix, local });
        }
        match word.as_str() {
            "a" => Ok(Token::A),
            "true" => Ok(Token::Boolean(true)),
            "false" => Ok(Token::Boolean(false)),
            w if w.eq_ignore_ascii_case("prefix") => Ok(Token::PrefixKeyword),
            w if w.eq_ignore_ascii_case("base") => self.err(at, "BASE is not supported"),
            w => self.err(at, format!("unexpected bare word `{w}`")),
        }
    }

    fn number(&mut self) -> Token {
        let mut text = String::new();
        if let Some(c @ ('+' | '-')) = self.peek() {
            text.push(c);
            self.bump();
        }
        while let Some(c) = self.peek().filter(|c| c.is_ascii_digit()) {
            text.push(c);
            self.bump();
        }
        if self.peek() == Some('.') && self.peek2().is_some_and(|c| c.is_ascii_digit()) {
            text.push('.');
            self.bump();
            while let Some(c) = self.peek().filter(|c| c.is_ascii_digit()) {
                text.push(c);
                self.bump();
            }
            return Token::Decimal(text);
        }
        Token::Integer(text)
    }

    fn string(&mut self, quote: char, start: Pos) -> Result<String, TurtleError> {
        self.bump();
        let long = self.peek() == Some(quote) && self.peek2() == Some(quote);
        if long {
            self.bump();
            self.bump();
        } else if self.peek() == Some(quote) {
            self.bump();
            return Ok(String::new());
        }
        let mut out = String::new();
        loop {
            let Some(c) = self.bump() else {
                return self.err(start, "unterminated string literal");
            };
            match c {
                '\\' => {
                    let esc_at = self.pos();
                    let unescaped = match self.bump() {
                        Some('t') => '\t',
                        Some('b') => '\u{8}',
                        Some('n') => '\n',
                        Some('r') => '\r',
                        Some('f') => '\u{c}',
                        Some('"') => '"',
                        Some('\'') => '\'',
                        Some('\\') => '\\',
                        Some('u') => self.hex_escape(4, esc_at)?,
                        Some('U') => self.hex_escape(8, esc_at)?,
                        _ => return self.err(esc_at, "invalid escape sequence"),
                    };
                    out.push(unescaped);
                }
                c if c == quote => {
                    if !long {
                        return Ok(out);
                    }
                    if self.peek() == Some(quote) && self.peek2() == Some(quote) {
                        self.bump();
                        self.bump();
                        return Ok(out);
                    }
                    out.push(c);
                }
                '\n' | '\r' if !long => return self.err(start, "newline in short string literal"),
                c => out.push(c),
            }
        }
    }

    fn hex_escape(&mut self, digits: usize, at: Pos) -> Result<char, TurtleError> {
        let mut value = 0u32;
        for _ in 0..digits {
            let d = self.bump().and_then(|c| c.to_digit(16));
            match d {
                Some(d) => value = value * 16 + d,
                None => return self.err(at, "invalid unicode escape"),
            }
        }
        char::from_u32(value).map_or_else(|| self.err(at, "invalid code point"), Ok)
    }
}

fn is_name_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | '-' | '%')
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    lookahead: Option<(Token, Pos)>,
    prefixes: BTreeMap<String, String>,
    graph: TripleGraph,
}

impl<'a> Parser<'a> {
    fn peek(&mut self) -> Result<Option<&(Token, Pos)>, TurtleError> {
        if self.lookahead.is_none() {
            self.lookahead = self.lexer.next_token()?;
        }
        Ok(self.lookahead.as_ref())
    }

    fn next(&mut self) -> Result<Option<(Token, Pos)>, TurtleError> {
        self.peek()?;
        Ok(self.lookahead.take())
    }

    fn eof_error<T>(&self, expected: &str) -> Result<T, TurtleError> {
        self.lexer.err(
            self.lexer.pos(),
            format!("unexpected end of input, expected {expected}"),
        )
    }

    fn expect(&mut self, want: Token, what: &str) -> Result<(), TurtleError> {
        match self.next()? {
            Some((t, _)) if t == want => Ok(()),
            Some((t, pos)) => self.lexer.err(pos, format!("expected {what}, found {t:?}")),
            None => self.eof_error(what),
        }
    }

    fn document(mut self) -> Result<TripleGraph, TurtleError> {
        while let Some((token, _)) = self.peek()? {
            match token {
                Token::AtPrefix => {
                    self.next()?;
                    self.prefix_decl()?;
                    self.expect(Token::Dot, "`.` after @prefix")?;
                }
                Token::PrefixKeyword => {
                    self.next()?;
                    self.prefix_decl()?;
                }
                _ => self.statement()?,
            }
        }
        Ok(self.graph)
    }

    fn prefix_decl(&mut self) -> Result<(), TurtleError> {
        let prefix = match self.next()? {
            Some((Token::PrefixedName { prefix, local }, _)) if local.is_empty() => prefix,
            Some((t, pos)) => return self.lexer.err(pos, format!("expected prefix name, found {t:?}")),
            None => return self.eof_error("prefix name"),
        };
        let (ns, pos) = match self.next()? {
            Some((Token::IriRef(ns), pos)) => (ns, pos),
            Some((t, pos)) => return self.lexer.err(pos, format!("expected namespace IRI, found {t:?}")),
            None => return self.eof_error("namespace IRI"),
        };
        let iri = Iri::new(&ns).or_else(|e| self.lexer.err(pos, e.to_string()))?;
        self.graph.add_prefix(prefix.clone(), iri);
        self.prefixes.insert(prefix, ns);
        Ok(())
    }

    fn resolve(&self, token: Token, pos: Pos) -> Result<Iri, TurtleError> {
        let raw = match token {
            Token::IriRef(iri) => iri,
            Token::PrefixedName { prefix, local } => {
                let ns = self.prefixes.get(&prefix).map(String::as_str).or_else(|| {
                    WELL_KNOWN_PREFIXES
                        .iter()
                        .find(|(p, _)| *p == prefix)
                        .map(|(_, ns)| *ns)
                });
                match ns {
                    Some(ns) => format!("{ns}{local}"),
                    None => return self.lexer.err(pos, format!("undeclared prefix `{prefix}:`")),
                }
            }
            Token::A => return Ok(rdf::type_()),
            other => return self.lexer.err(pos, format!("expected IRI, found {other:?}")),
        };
        Iri::new(raw).or_else(|e| self.lexer.err(pos, e.to_string()))
    }

    fn statement(&mut self) -> Result<(), TurtleError> {
        let (token, pos) = self.next()?.expect("peeked");
        if matches!(token, Token::A) {
            return self.lexer.err(pos, "`a` cannot be a subject");
        }
        if matches!(
            token,
            Token::Str(_) | Token::Integer(_) | Token::Decimal(_) | Token::Boolean(_)
        ) {
            return self.lexer.err(pos, "literal in subject position");
        }
        let subject = self.resolve(token, pos)?;
        loop {
            let predicate = match self.next()? {
                Some((t, pos)) => self.resolve(t, pos)?,
                None => return self.eof_error("predicate"),
            };
            loop {
                let object = self.object()?;
                self.graph
                    .insert(Triple::new(subject.clone(), predicate.clone(), object));
                match self.peek()? {
                    Some((Token::Comma, _)) => {
                        self.next()?;
                    }
                    _ => break,
                }
            }
            match self.next()? {
                Some((Token::Dot, _)) => return Ok(()),
                Some((Token::Semicolon, _)) => {
                    // `;` may be repeated or directly followed by `.`
                    loop {
                        match self.peek()? {
                            Some((Token::Semicolon, _)) => {
                                self.next()?;
                            }
                            Some((Token::Dot, _)) => {
                                self.next()?;
                                return Ok(());
                            }
                            _ => break,
                        }
                    }
                }
                Some((t, pos)) => return self.lexer.err(pos, format!("expected `.`, `;` or `,`, found {t:?}")),
                None => return self.eof_error("`.`"),
            }
        }
    }

    fn object(&mut self) -> Result<Term, TurtleError> {
        let Some((token, pos)) = self.next()? else {
            return self.eof_error("object");
        };
        Ok(match token {
            Token::Str(lexical) => {
                if let Some((Token::DoubleCaret, _)) = self.peek()? {
                    self.next()?;
                    let datatype = match self.next()? {
                        Some((t, pos)) => self.resolve(t, pos)?,
                        None => return self.eof_error("datatype IRI"),
                    };
                    Term::Literal(Literal::new(lexical, datatype))
                } else {
                    Term::Literal(Literal::string(lexical))
                }
            }
            Token::Integer(text) => Term::Literal(Literal::new(text, xsd::integer())),
            Token::Decimal(text) => Term::Literal(Literal::new(text, xsd::decimal())),
            Token::Boolean(b) => Term::Literal(Literal::new(b.to_string(), xsd::boolean())),
            other => Term::Iri(self.resolve(other, pos)?),
        })
    }
}

/// Parses a Turtle-subset document.
pub fn parse_turtle(raw: &[u8]) -> Result<TripleGraph, TurtleError> {
    let text = std::str::from_utf8(raw).map_err(|e| {
        let before = &raw[..e.valid_up_to()];
        let line = before.iter().filter(|b| **b == b'\n').count() + 1;
        let column = before.iter().rev().take_while(|b| **b != b'\n').count() + 1;
        TurtleError {
            line,
            column,
            message: "invalid UTF-8".into(),
        }
    })?;
    Parser {
        lexer: Lexer::new(text),
        lookahead: None,
        prefixes: BTreeMap::new(),
        graph: TripleGraph::new(),
    }
    .document()
}

/// Canonical serialization: prefix lines sorted by name, then one triple per
/// line sorted by (subject, predicate, object).
pub fn serialize_turtle(graph: &TripleGraph) -> String {
    let mut prefixes: BTreeMap<String, String> = WELL_KNOWN_PREFIXES
        .iter()
        .map(|(p, ns)| (p.to_string(), ns.to_string()))
        .collect();
    for (p, ns) in graph.prefixes() {
        prefixes.insert(p.clone(), ns.as_str().to_owned());
    }
    let mut out = String::new();
    for (p, ns) in &prefixes {
        let _ = writeln!(out, "@prefix {p}: <{ns}> .");
    }
    if !prefixes.is_empty() {
        out.push('\n');
    }
    let compact = |iri: &Iri| -> String {
        let best = prefixes
            .iter()
            .filter(|(_, ns)| iri.as_str().starts_with(ns.as_str()))
            .filter(|(_, ns)| is_safe_local(&iri.as_str()[ns.len()..]))
            .max_by_key(|(_, ns)| ns.len());
        match best {
            Some((p, ns)) => format!("{p}:{}", &iri.as_str()[ns.len()..]),
            None => format!("<{iri}>"),
        }
    };
    for t in graph.iter() {
        let object = match &t.object {
            Term::Iri(iri) => compact(iri),
            Term::Literal(lit) => {
                let mut s = String::from("\"");
                for c in lit.lexical().chars() {
                    match c {
                        '"' => s.push_str("\\\""),
                        '\\' => s.push_str("\\\\"),
                        '\n' => s.push_str("\\n"),
                        '\r' => s.push_str("\\r"),
                        '\t' => s.push_str("\\t"),
                        c if c.is_control() => {
                            let _ = write!(s, "\\u{:04X}", c as u32);
                        }
                        c => s.push(c),
                    }
                }
                s.push('"');
                if *lit.datatype() != xsd::string() {
                    s.push_str("^^");
                    s.push_str(&compact(lit.datatype()));
                }
                s
            }
        };
        let _ = writeln!(out, "{} {} {} .", compact(&t.subject), compact(&t.predicate), object);
    }
    out
}

fn is_safe_local(local: &str) -> bool {
    let mut chars = local.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && local.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vocab::owl;
    use proptest::prelude::*;

    #[test]
    fn single_statement_with_builtin_owl_prefix() {
        let g = parse_turtle(b"@prefix sf: <http://example.org/smartflow#> . sf:ActionNode a owl:Class .").unwrap();
        assert_eq!(g.len(), 1);
        let t = g.iter().next().unwrap();
        assert_eq!(t.subject.as_str(), "http://example.org/smartflow#ActionNode");
        assert_eq!(t.predicate, rdf::type_());
        assert_eq!(t.object, Term::Iri(owl::class()));
    }

    #[test]
    fn truncated_statement_is_a_syntax_error() {
        let err = parse_turtle(b"@prefix sf: <http://example.org/smartflow#> .\nsf:Node rdfs:subClassOf").unwrap_err();
        assert_eq!(err.line, 2);
        assert!(err.message.contains("end of input"), "{err}");
    }

    #[test]
    fn reports_line_and_column() {
        let err = parse_turtle(b"@prefix x: <http://x/> .\n\nx:a x:b [ ] .").unwrap_err();
        assert_eq!((err.line, err.column), (3, 9));
        let err = parse_turtle(b"y:a y:b y:c .").unwrap_err();
        assert_eq!((err.line, err.column), (1, 1));
    }

    #[test]
    fn continuations_literals_and_comments() {
        let src = r#"
            PREFIX ex: <http://ex.org/>
            # comment with "quotes" and <brackets>
            ex:s ex:p ex:o1 , ex:o2 ; # trailing comment
                 ex:q "a \"quoted\" #not-comment" , 42 , -3.5 , true ;
                 ex:r """multi
line""" ;
                 ex:t "7"^^xsd:integer ; .
            ex:dotted.name ex:p ex:o .
        "#;
        let g = parse_turtle(src.as_bytes()).unwrap();
        assert_eq!(g.len(), 9);
        let s = Iri::new("http://ex.org/s").unwrap();
        let q = Iri::new("http://ex.org/q").unwrap();
        let objs: Vec<_> = g.objects(&s, &q).cloned().collect();
        assert!(objs.contains(&Term::literal("a \"quoted\" #not-comment")));
        assert!(objs.contains(&Term::Literal(Literal::new("42", xsd::integer()))));
        assert!(objs.contains(&Term::Literal(Literal::new("-3.5", xsd::decimal()))));
        assert!(objs.contains(&Term::Literal(Literal::new("true", xsd::boolean()))));
        assert!(g
            .about(&Iri::new("http://ex.org/dotted.name").unwrap())
            .next()
            .is_some());
    }

    #[test]
    fn rejects_unsupported_constructs() {
        for src in [
            "<http://a> <http://b> _:x .",
            "<http://a> <http://b> \"x\"@en .",
            "<http://a> <http://b> ( <http://c> ) .",
            "\"lit\" <http://b> <http://c> .",
            "<http://a> <http://b> <http://c>",
        ] {
            assert!(parse_turtle(src.as_bytes()).is_err(), "{src}");
        }
    }

    fn arb_term_text() -> impl Strategy<Value = String> {
        prop_oneof![
            "[a-z]{1,6}",
            any::<String>().prop_map(|s| s.chars().take(12).collect()),
            Just("with \"quote\" and \\ backslash\nnewline".to_owned()),
        ]
    }

    proptest! {
        #[test]
        fn serialize_then_parse_is_identity(
            triples in prop::collection::vec((0..5u8, 0..4u8, prop_oneof![
                (0..5u8).prop_map(|i| (true, i.to_string())),
                arb_term_text().prop_map(|s| (false, s)),
            ]), 0..30)
        ) {
            let mut g = TripleGraph::new();
            g.add_prefix("ex", Iri::new("http://ex.org/ns#").unwrap());
            for (s, p, (is_iri, o)) in triples {
                let subject = Iri::new(format!("http://ex.org/ns#s{s}")).unwrap();
                let predicate = if p == 0 { rdf::type_() } else { Iri::new(format!("http://other.org/p/{p}")).unwrap() };
                let object = if is_iri {
                    Term::Iri(Iri::new(format!("http://ex.org/ns#o{o}")).unwrap())
                } else if p == 3 {
                    Term::Literal(Literal::new(o, xsd::integer()))
                } else {
                    Term::literal(o)
                };
                g.insert(Triple::new(subject, predicate, object));
            }
            let text = serialize_turtle(&g);
            let back = parse_turtle(text.as_bytes()).unwrap();
            prop_assert_eq!(&back, &g);
            prop_assert_eq!(serialize_turtle(&back), text);
        }
    }
}
