//! RDFS schemas, saturation and query reformulation.

mod reformulate;
mod saturate;

pub use reformulate::{reformulate, reformulate_views};
pub use saturate::{saturate, saturate_with_schema};

use std::collections::BTreeSet;
use std::fmt;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::parse_triple_line;
use crate::symbol::{Symbol, RDFS_DOMAIN, RDFS_RANGE, RDFS_SUBCLASSOF, RDFS_SUBPROPERTYOF, RDF_TYPE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum StatementKind {
    SubClassOf,
    SubPropertyOf,
    Domain,
    Range,
}

impl StatementKind {
    pub fn property(self) -> &'static str {
        match self {
            StatementKind::SubClassOf => RDFS_SUBCLASSOF,
            StatementKind::SubPropertyOf => RDFS_SUBPROPERTYOF,
            StatementKind::Domain => RDFS_DOMAIN,
            StatementKind::Range => RDFS_RANGE,
        }
    }

    fn from_property(p: &str) -> Option<Self> {
        match p {
            RDFS_SUBCLASSOF => Some(StatementKind::SubClassOf),
            RDFS_SUBPROPERTYOF => Some(StatementKind::SubPropertyOf),
            RDFS_DOMAIN => Some(StatementKind::Domain),
            RDFS_RANGE => Some(StatementKind::Range),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Statement {
    pub kind: StatementKind,
    pub lhs: Symbol,
    pub rhs: Symbol,
}

impl Statement {
    pub fn new(kind: StatementKind, lhs: &str, rhs: &str) -> Self {
        Statement {
            kind,
            lhs: Symbol::new(lhs),
            rhs: Symbol::new(rhs),
        }
    }

    pub fn as_triple(&self) -> [Symbol; 3] {
        [self.lhs, Symbol::new(self.kind.property()), self.rhs]
    }
}

impl fmt::Display for Statement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.lhs, self.kind.property(), self.rhs)
    }
}

/// An RDFS made of class/property inclusions and domain/range typings.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Schema {
    statements: Vec<Statement>,
    classes: BTreeSet<Symbol>,
    properties: BTreeSet<Symbol>,
}

impl Schema {
    pub fn new(statements: impl IntoIterator<Item = Statement>) -> Self {
        let mut s = Schema::default();
        for st in statements {
            s.add(st);
        }
        s
    }

    pub fn add(&mut self, st: Statement) {
        if self.statements.contains(&st) {
            return;
        }
        match st.kind {
            StatementKind::SubClassOf => {
                self.classes.insert(st.lhs);
                self.classes.insert(st.rhs);
            }
            StatementKind::SubPropertyOf => {
                self.properties.insert(st.lhs);
                self.properties.insert(st.rhs);
            }
            StatementKind::Domain | StatementKind::Range => {
                self.properties.insert(st.lhs);
                self.classes.insert(st.rhs);
            }
        }
        self.statements.push(st);
    }

    pub fn declare_class(&mut self, c: Symbol) {
        self.classes.insert(c);
    }

    pub fn declare_property(&mut self, p: Symbol) {
        self.properties.insert(p);
    }

    /// Parses one statement per line (`lhs rdfs:subClassOf rhs`, ...).
    /// `x rdf:type rdfs:Class` and `p rdf:type rdf:Property` declare symbols.
    pub fn load<R: BufRead>(reader: R) -> Result<Self> {
        let mut schema = Schema::default();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            let Some([l, p, r]) = parse_triple_line(&line, n + 1)? else {
                continue;
            };
            let (ps, rs) = (p.as_str(), r.as_str());
            if let Some(kind) = StatementKind::from_property(&ps) {
                schema.add(Statement { kind, lhs: l, rhs: r });
            } else if &*ps == RDF_TYPE && matches!(&*rs, "rdfs:Class" | "<http://www.w3.org/2000/01/rdf-schema#Class>") {
                schema.declare_class(l);
            } else if &*ps == RDF_TYPE
                && matches!(&*rs, "rdf:Property" | "<http://www.w3.org/1999/02/22-rdf-syntax-ns#Property>")
            {
                schema.declare_property(l);
            } else {
                return Err(Error::parse(n + 1, format!("`{ps}` is not an RDFS statement property")));
            }
        }
        Ok(schema)
    }

    pub fn load_str(src: &str) -> Result<Self> {
        Self::load(src.as_bytes())
    }

    pub fn load_path(path: &std::path::Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::at_path(path, e))?;
        Self::load(std::io::BufReader::new(file))
    }

    pub fn statements(&self) -> &[Statement] {
        &self.statements
    }

    pub fn len(&self) -> usize {
        self.statements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.statements.is_empty()
    }

    pub fn classes(&self) -> &BTreeSet<Symbol> {
        &self.classes
    }

    pub fn properties(&self) -> &BTreeSet<Symbol> {
        &self.properties
    }

    pub(crate) fn with_kind(&self, kind: StatementKind) -> impl Iterator<Item = &Statement> {
        self.statements.iter().filter(move |s| s.kind == kind)
    }

    /// The schema closed under transitivity of class and property inclusion
    /// and under inheritance of domain and range typing.
    pub fn closure(&self) -> Schema {
        use StatementKind::*;
        let mut out = self.clone();
        loop {
            let mut added = Vec::new();
            for a in &out.statements {
                for b in &out.statements {
                    let derived = match (a.kind, b.kind) {
                        (SubClassOf, SubClassOf) | (SubPropertyOf, SubPropertyOf) if a.rhs == b.lhs => {
                            Some((a.kind, a.lhs, b.rhs))
                        }
                        (Domain | Range, SubClassOf) if a.rhs == b.lhs => Some((a.kind, a.lhs, b.rhs)),
                        (SubPropertyOf, Domain | Range) if a.rhs == b.lhs => Some((b.kind, a.lhs, b.rhs)),
                        _ => None,
                    };
                    if let Some((kind, lhs, rhs)) = derived {
                        let st = Statement { kind, lhs, rhs };
                        let trivial = matches!(kind, SubClassOf | SubPropertyOf) && lhs == rhs;
                        if !trivial && !out.statements.contains(&st) && !added.contains(&st) {
                            added.push(st);
                        }
                    }
                }
            }
            if added.is_empty() {
                return out;
            }
            for st in added {
                out.add(st);
            }
        }
    }

    pub fn to_text(&self) -> String {
        self.statements.iter().map(|s| format!("{s} .\n")).collect()
    }
}
