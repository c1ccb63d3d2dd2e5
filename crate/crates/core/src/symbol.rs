//! Process-wide string interning for constants and variable names.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use once_cell::sync::Lazy;
use parking_lot::RwLock;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Default)]
struct Interner {
    ids: HashMap<Arc<str>, u32>,
    names: Vec<Arc<str>>,
}

static INTERNER: Lazy<RwLock<Interner>> = Lazy::new(Default::default);

/// An interned string. Two symbols are equal iff their text is equal.
///
/// The ordering follows interning order, which is stable within a process
/// but not across processes; use [`Symbol::as_str`] for anything persisted.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Symbol(u32);

impl Symbol {
    pub fn new(text: &str) -> Self {
        if let Some(&id) = INTERNER.read().ids.get(text) {
            return Symbol(id);
        }
        let mut interner = INTERNER.write();
        if let Some(&id) = interner.ids.get(text) {
            return Symbol(id);
        }
        let id = interner.names.len() as u32;
        let text: Arc<str> = Arc::from(text);
        interner.names.push(text.clone());
        interner.ids.insert(text, id);
        Symbol(id)
    }

    pub fn as_str(&self) -> Arc<str> {
        INTERNER.read().names[self.0 as usize].clone()
    }

    pub fn len(&self) -> usize {
        INTERNER.read().names[self.0 as usize].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn id(&self) -> u32 {
        self.0
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.as_str())
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.as_str())
    }
}

impl From<&str> for Symbol {
    fn from(s: &str) -> Self {
        Symbol::new(s)
    }
}

impl Serialize for Symbol {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.as_str())
    }
}

impl<'de> Deserialize<'de> for Symbol {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Ok(Symbol::new(&s))
    }
}

pub const RDF_TYPE: &str = "rdf:type";
pub const RDFS_SUBCLASSOF: &str = "rdfs:subClassOf";
pub const RDFS_SUBPROPERTYOF: &str = "rdfs:subPropertyOf";
pub const RDFS_DOMAIN: &str = "rdfs:domain";
pub const RDFS_RANGE: &str = "rdfs:range";

/// Maps the full IRIs of the RDF/RDFS vocabulary onto their prefixed forms.
pub fn normalize_vocabulary(token: &str) -> &str {
    match token {
        "<http://www.w3.org/1999/02/22-rdf-syntax-ns#type>" => RDF_TYPE,
        "<http://www.w3.org/2000/01/rdf-schema#subClassOf>" => RDFS_SUBCLASSOF,
        "<http://www.w3.org/2000/01/rdf-schema#subPropertyOf>" => RDFS_SUBPROPERTYOF,
        "<http://www.w3.org/2000/01/rdf-schema#domain>" => RDFS_DOMAIN,
        "<http://www.w3.org/2000/01/rdf-schema#range>" => RDFS_RANGE,
        other => other,
    }
}

pub fn rdf_type() -> Symbol {
    static TYPE: Lazy<Symbol> = Lazy::new(|| Symbol::new(RDF_TYPE));
    *TYPE
}
