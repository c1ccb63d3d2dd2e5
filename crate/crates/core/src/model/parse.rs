//! Query text format: `name(V1, ..., Vk) :- t(a, b, c), t(d, e, f) .`
//!
//! Variables start with an uppercase letter or `?`; every other term is a
//! constant (bare name, `<iri>`, or double-quoted literal). Lines whose first
//! non-blank character is `#` are comments.

use super::{ConjunctiveQuery, Term, TripleAtom};
use crate::error::{Error, Result};
use crate::symbol::normalize_vocabulary;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    LParen,
    RParen,
    Comma,
    Turnstile,
    Dot,
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    src: &'a str,
    line: usize,
    at_line_start: bool,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            chars: src.char_indices().peekable(),
            src,
            line: 1,
            at_line_start: true,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let (_, c) = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.at_line_start = true;
        } else if !c.is_whitespace() {
            self.at_line_start = false;
        }
        Some(c)
    }

    fn next_tok(&mut self) -> Result<Option<(Tok, usize)>> {
        loop {
            let Some(&(start, c)) = self.chars.peek() else {
                return Ok(None);
            };
            if c == '#' && self.at_line_start {
                while let Some(c) = self.bump() {
                    if c == '\n' {
                        break;
                    }
                }
                continue;
            }
            if c.is_whitespace() {
                self.bump();
                continue;
            }
            let line = self.line;
            let tok = match c {
                '(' => {
                    self.bump();
                    Tok::LParen
                }
                ')' => {
                    self.bump();
                    Tok::RParen
                }
                ',' => {
                    self.bump();
                    Tok::Comma
                }
                '.' => {
                    self.bump();
                    Tok::Dot
                }
                ':' if self.src[start..].starts_with(":-") => {
                    self.bump();
                    self.bump();
                    Tok::Turnstile
                }
                '<' => {
                    let mut end = None;
                    while let Some(c) = self.bump() {
                        if c == '>' {
                            end = Some(());
                            break;
                        }
                    }
                    if end.is_none() {
                        return Err(Error::parse(line, "unterminated <iri>"));
                    }
                    let stop = self.chars.peek().map_or(self.src.len(), |&(i, _)| i);
                    Tok::Word(self.src[start..stop].to_string())
                }
                '"' => {
                    self.bump();
                    let mut closed = false;
                    while let Some(c) = self.bump() {
                        match c {
                            '\\' => {
                                self.bump();
                            }
                            '"' => {
                                closed = true;
                                break;
                            }
                            _ => {}
                        }
                    }
                    if !closed {
                        return Err(Error::parse(line, "unterminated literal"));
                    }
                    // language tag or datatype suffix
                    while let Some(&(_, c)) = self.chars.peek() {
                        if c.is_whitespace() || matches!(c, ',' | '(' | ')') {
                            break;
                        }
                        self.bump();
                    }
                    let stop = self.chars.peek().map_or(self.src.len(), |&(i, _)| i);
                    Tok::Word(self.src[start..stop].to_string())
                }
                _ => {
                    while let Some(&(_, c)) = self.chars.peek() {
                        if c.is_whitespace() || matches!(c, ',' | '(' | ')') {
                            break;
                        }
                        self.bump();
                    }
                    let stop = self.chars.peek().map_or(self.src.len(), |&(i, _)| i);
                    let word = &self.src[start..stop];
                    // A trailing '.' glued to a word terminates the query only
                    // when the word is the query terminator itself.
                    if word == ":-" {
                        Tok::Turnstile
                    } else {
                        Tok::Word(word.to_string())
                    }
                }
            };
            return Ok(Some((tok, line)));
        }
    }
}

fn term_of(word: &str) -> Term {
    let first = word.chars().next().unwrap_or('a');
    if first == '?' || first.is_uppercase() {
        Term::var(word)
    } else {
        Term::constant(normalize_vocabulary(word))
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    peeked: Option<(Tok, usize)>,
}

impl<'a> Parser<'a> {
    fn peek(&mut self) -> Result<Option<&(Tok, usize)>> {
        if self.peeked.is_none() {
            self.peeked = self.lexer.next_tok()?;
        }
        Ok(self.peeked.as_ref())
    }

    fn next(&mut self) -> Result<(Tok, usize)> {
        self.peek()?;
        match self.peeked.take() {
            Some((tok, line)) => Ok((tok, line)),
            None => Err(Error::parse(self.lexer.line, "unexpected end of input")),
        }
    }

    fn expect(&mut self, want: Tok) -> Result<()> {
        let (tok, line) = self.next()?;
        if tok == want {
            Ok(())
        } else {
            Err(Error::parse(line, format!("expected {want:?}, found {tok:?}")))
        }
    }

    fn word(&mut self) -> Result<(String, usize)> {
        match self.next()? {
            (Tok::Word(w), line) => Ok((w, line)),
            (tok, line) => Err(Error::parse(line, format!("expected a term, found {tok:?}"))),
        }
    }

    fn query(&mut self) -> Result<ConjunctiveQuery> {
        let (name, line) = self.word()?;
        self.expect(Tok::LParen)?;
        let mut head = Vec::new();
        if !matches!(self.peek()?, Some((Tok::RParen, _))) {
            loop {
                head.push(term_of(&self.word()?.0));
                match self.next()? {
                    (Tok::Comma, _) => continue,
                    (Tok::RParen, _) => break,
                    (tok, l) => return Err(Error::parse(l, format!("unexpected {tok:?} in head"))),
                }
            }
        } else {
            self.next()?;
        }
        self.expect(Tok::Turnstile)?;
        let mut body = Vec::new();
        loop {
            let (pred, l) = self.word()?;
            if pred != "t" {
                return Err(Error::parse(l, format!("unknown relation `{pred}`, expected `t`")));
            }
            self.expect(Tok::LParen)?;
            let s = term_of(&self.word()?.0);
            self.expect(Tok::Comma)?;
            let p = term_of(&self.word()?.0);
            self.expect(Tok::Comma)?;
            let o = term_of(&self.word()?.0);
            self.expect(Tok::RParen)?;
            body.push(TripleAtom::new(s, p, o));
            match self.next()? {
                (Tok::Comma, _) => continue,
                (Tok::Dot, _) => break,
                (tok, l) => return Err(Error::parse(l, format!("expected ',' or '.', found {tok:?}"))),
            }
        }
        ConjunctiveQuery::new(name, head, body).map_err(|e| Error::parse(line, e.to_string()))
    }
}

/// Parses every query of a workload file. Queries with Cartesian products
/// are split into their independent sub-queries.
pub fn parse_queries(src: &str) -> Result<Vec<ConjunctiveQuery>> {
    let mut parser = Parser {
        lexer: Lexer::new(src),
        peeked: None,
    };
    let mut out = Vec::new();
    while parser.peek()?.is_some() {
        let q = parser.query()?;
        out.extend(q.split_components());
    }
    Ok(out)
}

/// Parses exactly one query, without splitting.
pub fn parse_query(src: &str) -> Result<ConjunctiveQuery> {
    let mut parser = Parser {
        lexer: Lexer::new(src),
        peeked: None,
    };
    let q = parser.query()?;
    if let Some((tok, line)) = parser.peek()?.cloned() {
        return Err(Error::parse(line, format!("trailing input {tok:?}")));
    }
    Ok(q)
}
