//! Dictionary-encoded in-memory triple table.

mod eval;
mod stats;

pub(crate) use eval::column_names;
pub use eval::{evaluate, evaluate_union, has_answer, materialize, Relation};
pub use stats::{
    collect_statistics, estimate_cardinality, ColumnStats, PatternKey, PatternTerm,
    WorkloadStatistics,
};

use std::collections::{BTreeSet, HashMap, HashSet};
use std::sync::Arc;
use std::io::BufRead;
use std::ops::Range;

use crate::error::{Error, Result};
use crate::symbol::{normalize_vocabulary, Symbol};

/// Bijection between symbols and dense integer codes.
#[derive(Debug, Clone, Default)]
pub struct Dictionary {
    codes: HashMap<Symbol, u32>,
    symbols: Vec<Symbol>,
}

impl Dictionary {
    pub fn encode(&mut self, sym: Symbol) -> u32 {
        if let Some(&c) = self.codes.get(&sym) {
            return c;
        }
        let c = self.symbols.len() as u32;
        self.codes.insert(sym, c);
        self.symbols.push(sym);
        c
    }

    pub fn code(&self, sym: Symbol) -> Option<u32> {
        self.codes.get(&sym).copied()
    }

    pub fn decode(&self, code: u32) -> Symbol {
        self.symbols[code as usize]
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

pub type Triple = [Symbol; 3];

/// A set of triples with SPO, POS and OSP sorted indexes.
#[derive(Debug, Clone, Default)]
pub struct TripleStore {
    dict: Dictionary,
    spo: Vec<[u32; 3]>,
    pos: Vec<[u32; 3]>,
    osp: Vec<[u32; 3]>,
}

impl TripleStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a store from triples in any order. Codes follow the text
    /// order of the symbols, so equal triple sets give identical stores.
    pub fn from_triples<I: IntoIterator<Item = Triple>>(triples: I) -> Self {
        let triples: Vec<Triple> = triples.into_iter().collect();
        let mut symbols: Vec<(Arc<str>, Symbol)> = triples
            .iter()
            .flatten()
            .copied()
            .collect::<HashSet<Symbol>>()
            .into_iter()
            .map(|s| (s.as_str(), s))
            .collect();
        symbols.sort_unstable();
        let mut dict = Dictionary::default();
        for (_, s) in symbols {
            dict.encode(s);
        }
        let set: BTreeSet<[u32; 3]> = triples
            .into_iter()
            .map(|[s, p, o]| [dict.encode(s), dict.encode(p), dict.encode(o)])
            .collect();
        let spo: Vec<[u32; 3]> = set.into_iter().collect();
        let mut pos: Vec<[u32; 3]> = spo.iter().map(|&[s, p, o]| [p, o, s]).collect();
        pos.sort_unstable();
        let mut osp: Vec<[u32; 3]> = spo.iter().map(|&[s, p, o]| [o, s, p]).collect();
        osp.sort_unstable();
        TripleStore { dict, spo, pos, osp }
    }

    /// Parses the line-oriented triple format: three whitespace-separated
    /// tokens per line, an optional trailing `.`, `#` comments.
    pub fn load<R: BufRead>(reader: R) -> Result<Self> {
        let mut triples = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            if let Some(t) = parse_triple_line(&line, n + 1)? {
                triples.push(t);
            }
        }
        Ok(Self::from_triples(triples))
    }

    pub fn load_str(src: &str) -> Result<Self> {
        Self::load(src.as_bytes())
    }

    pub fn load_path(path: &std::path::Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::at_path(path, e))?;
        Self::load(std::io::BufReader::new(file))
    }

    pub fn len(&self) -> usize {
        self.spo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spo.is_empty()
    }

    pub fn dictionary(&self) -> &Dictionary {
        &self.dict
    }

    pub fn contains(&self, t: &Triple) -> bool {
        match (self.dict.code(t[0]), self.dict.code(t[1]), self.dict.code(t[2])) {
            (Some(s), Some(p), Some(o)) => self.spo.binary_search(&[s, p, o]).is_ok(),
            _ => false,
        }
    }

    /// All triples in SPO order.
    pub fn triples(&self) -> impl Iterator<Item = Triple> + '_ {
        self.spo.iter().map(|t| self.decode(*t))
    }

    fn decode(&self, [s, p, o]: [u32; 3]) -> Triple {
        [self.dict.decode(s), self.dict.decode(p), self.dict.decode(o)]
    }

    /// Triples (as codes, SPO order) matching the bound positions.
    pub(crate) fn matching_codes(&self, pattern: [Option<u32>; 3]) -> Box<dyn Iterator<Item = [u32; 3]> + '_> {
        fn range(index: &[[u32; 3]], prefix: &[u32]) -> Range<usize> {
            let lo = index.partition_point(|t| t[..prefix.len()] < *prefix);
            let hi = index.partition_point(|t| t[..prefix.len()] <= *prefix);
            lo..hi
        }
        match pattern {
            [Some(s), Some(p), Some(o)] => {
                let hit = self.spo.binary_search(&[s, p, o]).is_ok();
                Box::new(hit.then_some([s, p, o]).into_iter())
            }
            [Some(s), Some(p), None] => Box::new(self.spo[range(&self.spo, &[s, p])].iter().copied()),
            [Some(s), None, None] => Box::new(self.spo[range(&self.spo, &[s])].iter().copied()),
            [None, Some(p), Some(o)] => Box::new(
                self.pos[range(&self.pos, &[p, o])]
                    .iter()
                    .map(|&[p, o, s]| [s, p, o]),
            ),
            [None, Some(p), None] => Box::new(
                self.pos[range(&self.pos, &[p])]
                    .iter()
                    .map(|&[p, o, s]| [s, p, o]),
            ),
            [Some(s), None, Some(o)] => Box::new(
                self.osp[range(&self.osp, &[o, s])]
                    .iter()
                    .map(|&[o, s, p]| [s, p, o]),
            ),
            [None, None, Some(o)] => Box::new(
                self.osp[range(&self.osp, &[o])]
                    .iter()
                    .map(|&[o, s, p]| [s, p, o]),
            ),
            [None, None, None] => Box::new(self.spo.iter().copied()),
        }
    }

    /// Triples matching a pattern of optional constants.
    pub fn matching(&self, pattern: [Option<Symbol>; 3]) -> Vec<Triple> {
        let mut codes = [None; 3];
        for k in 0..3 {
            if let Some(sym) = pattern[k] {
                match self.dict.code(sym) {
                    Some(c) => codes[k] = Some(c),
                    None => return Vec::new(),
                }
            }
        }
        self.matching_codes(codes).map(|t| self.decode(t)).collect()
    }

    /// Writes the store in the line format read by [`TripleStore::load`].
    pub fn write<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        let mut lines: Vec<String> = self
            .triples()
            .map(|[s, p, o]| format!("{s} {p} {o} ."))
            .collect();
        lines.sort();
        for l in lines {
            writeln!(out, "{l}")?;
        }
        Ok(())
    }
}

pub(crate) fn parse_triple_line(line: &str, n: usize) -> Result<Option<Triple>> {
    let mut tokens: Vec<&str> = Vec::with_capacity(3);
    let mut rest = line.trim_start();
    while !rest.is_empty() {
        if rest.starts_with('#') && tokens.is_empty() {
            break;
        }
        let end = if rest.starts_with('<') {
            rest.find('>')
                .map(|i| i + 1)
                .ok_or_else(|| Error::parse(n, "unterminated <iri>"))?
        } else if rest.starts_with('"') {
            let bytes = rest.as_bytes();
            let mut i = 1;
            let mut closed = None;
            while i < bytes.len() {
                match bytes[i] {
                    b'\\' => i += 2,
                    b'"' => {
                        closed = Some(i);
                        break;
                    }
                    _ => i += 1,
                }
            }
            let close = closed.ok_or_else(|| Error::parse(n, "unterminated literal"))?;
            close + 1 + rest[close + 1..].find(char::is_whitespace).unwrap_or(rest.len() - close - 1)
        } else {
            rest.find(char::is_whitespace).unwrap_or(rest.len())
        };
        tokens.push(&rest[..end]);
        rest = rest[end..].trim_start();
    }
    if tokens.last() == Some(&".") {
        tokens.pop();
    } else if tokens.len() == 3 {
        // a terminator glued to the object
        if let Some(last) = tokens[2].strip_suffix('.') {
            if !last.is_empty() && !tokens[2].starts_with('"') && !tokens[2].starts_with('<') {
                tokens[2] = last;
            }
        }
    }
    match tokens.len() {
        0 => Ok(None),
        3 => Ok(Some([
            Symbol::new(normalize_vocabulary(tokens[0])),
            Symbol::new(normalize_vocabulary(tokens[1])),
            Symbol::new(normalize_vocabulary(tokens[2])),
        ])),
        k => Err(Error::parse(n, format!("expected 3 terms, found {k}"))),
    }
}
