//! Triple atoms, conjunctive queries over the triple table `t(s, p, o)`,
//! containment mappings, minimization and canonical forms.

mod canonical;
mod containment;
mod parse;

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::symbol::Symbol;

pub use canonical::{canonical_form, CanonicalForm, HeadMode};
pub use containment::{are_equivalent, body_isomorphism, find_containment_mapping, minimize, ContainmentMapping};
pub use parse::{parse_queries, parse_query};

/// A constant (URI or literal) or a variable.
///
/// Variable names always carry a leading `?`; constants never do.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(Symbol),
    Const(Symbol),
}

impl Term {
    /// Builds a variable, adding the `?` sigil when missing.
    pub fn var(name: &str) -> Term {
        if name.starts_with('?') {
            Term::Var(Symbol::new(name))
        } else {
            Term::Var(Symbol::new(&format!("?{name}")))
        }
    }

    pub fn constant(text: &str) -> Term {
        Term::Const(Symbol::new(text))
    }

    /// Reads the serialized form: `?name` is a variable, anything else a constant.
    pub fn from_text(text: &str) -> Term {
        if text.starts_with('?') {
            Term::Var(Symbol::new(text))
        } else {
            Term::Const(Symbol::new(text))
        }
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }

    pub fn is_const(&self) -> bool {
        matches!(self, Term::Const(_))
    }

    pub fn as_var(&self) -> Option<Symbol> {
        match self {
            Term::Var(v) => Some(*v),
            Term::Const(_) => None,
        }
    }

    pub fn as_const(&self) -> Option<Symbol> {
        match self {
            Term::Const(c) => Some(*c),
            Term::Var(_) => None,
        }
    }

    pub fn symbol(&self) -> Symbol {
        match self {
            Term::Var(s) | Term::Const(s) => *s,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

impl Serialize for Term {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.symbol().as_str())
    }
}

impl<'de> Deserialize<'de> for Term {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Ok(Term::from_text(&s))
    }
}

/// Column of the triple table.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pos {
    S,
    P,
    O,
}

impl Pos {
    pub const ALL: [Pos; 3] = [Pos::S, Pos::P, Pos::O];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pos::S => "s",
            Pos::P => "p",
            Pos::O => "o",
        })
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TripleAtom(pub [Term; 3]);

impl TripleAtom {
    pub fn new(s: Term, p: Term, o: Term) -> Self {
        TripleAtom([s, p, o])
    }

    pub fn s(&self) -> Term {
        self.0[0]
    }

    pub fn p(&self) -> Term {
        self.0[1]
    }

    pub fn o(&self) -> Term {
        self.0[2]
    }

    pub fn get(&self, pos: Pos) -> Term {
        self.0[pos.index()]
    }

    pub fn with(&self, pos: Pos, term: Term) -> Self {
        let mut terms = self.0;
        terms[pos.index()] = term;
        TripleAtom(terms)
    }

    pub fn vars(&self) -> impl Iterator<Item = Symbol> + '_ {
        self.0.iter().filter_map(Term::as_var)
    }

    pub fn constant_count(&self) -> usize {
        self.0.iter().filter(|t| t.is_const()).count()
    }

    pub fn substitute(&self, map: &HashMap<Symbol, Term>) -> Self {
        TripleAtom(self.0.map(|t| match t {
            Term::Var(v) => map.get(&v).copied().unwrap_or(t),
            c => c,
        }))
    }
}

impl fmt::Display for TripleAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t({}, {}, {})", self.0[0], self.0[1], self.0[2])
    }
}

impl fmt::Debug for TripleAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// A conjunctive query (or view) `name(head) :- body` over the triple table.
///
/// The head is an ordered list of terms. Parsed queries only have variables
/// in the head; reformulation may bind head variables to constants.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConjunctiveQuery {
    pub name: String,
    pub head: Vec<Term>,
    pub body: Vec<TripleAtom>,
}

impl ConjunctiveQuery {
    /// Builds a query, dropping duplicate body atoms. Every head variable must
    /// occur in the body.
    pub fn new(name: impl Into<String>, head: Vec<Term>, body: Vec<TripleAtom>) -> Result<Self> {
        let name = name.into();
        if body.is_empty() {
            return Err(Error::invalid_query(&name, "empty body"));
        }
        let body = dedup_atoms(body);
        let body_vars: HashSet<Symbol> = body.iter().flat_map(|a| a.vars()).collect();
        for t in &head {
            if let Term::Var(v) = t {
                if !body_vars.contains(v) {
                    return Err(Error::invalid_query(
                        &name,
                        format!("head variable {v} does not occur in the body"),
                    ));
                }
            }
        }
        Ok(ConjunctiveQuery { name, head, body })
    }

    pub fn len(&self) -> usize {
        self.body.len()
    }

    pub fn is_empty(&self) -> bool {
        self.body.is_empty()
    }

    /// Variables in order of first occurrence in the body.
    pub fn vars(&self) -> Vec<Symbol> {
        let mut seen = HashSet::new();
        self.body
            .iter()
            .flat_map(|a| a.vars())
            .filter(|v| seen.insert(*v))
            .collect()
    }

    pub fn head_vars(&self) -> Vec<Symbol> {
        self.head.iter().filter_map(Term::as_var).collect()
    }

    pub fn constant_count(&self) -> usize {
        self.body.iter().map(TripleAtom::constant_count).sum()
    }

    /// Applies a variable substitution to head and body.
    pub fn substitute(&self, map: &HashMap<Symbol, Term>) -> ConjunctiveQuery {
        let head = self
            .head
            .iter()
            .map(|t| match t {
                Term::Var(v) => map.get(v).copied().unwrap_or(*t),
                c => *c,
            })
            .collect();
        let body = dedup_atoms(self.body.iter().map(|a| a.substitute(map)).collect());
        ConjunctiveQuery {
            name: self.name.clone(),
            head,
            body,
        }
    }

    /// Partition of body atom indexes into join-connected components.
    pub fn components(&self) -> Vec<Vec<usize>> {
        components_of(&self.body, &(0..self.body.len()).collect::<Vec<_>>())
    }

    pub fn is_connected(&self) -> bool {
        self.components().len() <= 1
    }

    /// Splits a query with a Cartesian product into its independent
    /// sub-queries, named `name_1`, `name_2`, ...
    pub fn split_components(&self) -> Vec<ConjunctiveQuery> {
        let comps = self.components();
        if comps.len() <= 1 {
            return vec![self.clone()];
        }
        comps
            .iter()
            .enumerate()
            .map(|(k, comp)| {
                let body: Vec<TripleAtom> = comp.iter().map(|&i| self.body[i]).collect();
                let vars: HashSet<Symbol> = body.iter().flat_map(|a| a.vars()).collect();
                let head = self
                    .head
                    .iter()
                    .filter(|t| match t {
                        Term::Var(v) => vars.contains(v),
                        Term::Const(_) => k == 0,
                    })
                    .copied()
                    .collect();
                ConjunctiveQuery {
                    name: format!("{}_{}", self.name, k + 1),
                    head,
                    body,
                }
            })
            .collect()
    }

    /// Renders the query in the text format accepted by [`parse_queries`].
    pub fn to_text(&self) -> String {
        let head: Vec<String> = self.head.iter().map(|t| t.to_string()).collect();
        let body: Vec<String> = self.body.iter().map(|a| a.to_string()).collect();
        format!("{}({}) :- {} .", self.name, head.join(", "), body.join(", "))
    }
}

impl fmt::Display for ConjunctiveQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

impl fmt::Debug for ConjunctiveQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// A union of conjunctive queries sharing one head arity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnionQuery {
    pub name: String,
    pub members: Vec<ConjunctiveQuery>,
}

impl UnionQuery {
    pub fn single(q: ConjunctiveQuery) -> Self {
        UnionQuery {
            name: q.name.clone(),
            members: vec![q],
        }
    }

    pub fn arity(&self) -> usize {
        self.members.first().map_or(0, |m| m.head.len())
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn to_text(&self) -> String {
        self.members
            .iter()
            .map(|m| m.to_text())
            .collect::<Vec<_>>()
            .join("\n")
    }
}

pub fn dedup_atoms(atoms: Vec<TripleAtom>) -> Vec<TripleAtom> {
    let mut seen = HashSet::new();
    atoms.into_iter().filter(|a| seen.insert(*a)).collect()
}

/// Connected components (by shared variables) of the selected atoms.
pub fn components_of(atoms: &[TripleAtom], selected: &[usize]) -> Vec<Vec<usize>> {
    let mut comps: Vec<Vec<usize>> = Vec::new();
    let mut assigned: HashSet<usize> = HashSet::new();
    for &start in selected {
        if !assigned.insert(start) {
            continue;
        }
        let mut comp = vec![start];
        let mut vars: BTreeSet<Symbol> = atoms[start].vars().collect();
        let mut grew = true;
        while grew {
            grew = false;
            for &j in selected {
                if !assigned.contains(&j) && atoms[j].vars().any(|v| vars.contains(&v)) {
                    assigned.insert(j);
                    comp.push(j);
                    vars.extend(atoms[j].vars());
                    grew = true;
                }
            }
        }
        comp.sort_unstable();
        comps.push(comp);
    }
    comps
}

/// Generator of variables that cannot clash with parsed ones.
#[derive(Debug, Clone, Default)]
pub struct VarGen {
    prefix: &'static str,
    next: u64,
}

impl VarGen {
    pub fn new(prefix: &'static str) -> Self {
        VarGen { prefix, next: 0 }
    }

    /// A generator that skips every name already taken by `vars`.
    pub fn avoiding(prefix: &'static str, vars: impl IntoIterator<Item = Symbol>) -> Self {
        let stem = format!("?_{prefix}");
        let next = vars
            .into_iter()
            .filter_map(|v| v.as_str().strip_prefix(stem.as_str()).and_then(|n| n.parse::<u64>().ok()))
            .max()
            .unwrap_or(0);
        VarGen { prefix, next }
    }

    pub fn fresh(&mut self) -> Term {
        self.next += 1;
        Term::Var(Symbol::new(&format!("?_{}{}", self.prefix, self.next)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn head_variable_must_occur_in_body() {
        let err = ConjunctiveQuery::new(
            "q",
            vec![Term::var("Z")],
            vec![TripleAtom::new(Term::var("X"), Term::constant("p"), Term::var("Y"))],
        );
        assert!(err.is_err());
    }

    #[test]
    fn split_cartesian_product() {
        let q = parse_query("q(X, Y) :- t(X, p, a), t(Y, p, b) .").unwrap();
        let parts = q.split_components();
        assert_eq!(parts.len(), 2);
        assert_eq!(parts[0].head, vec![Term::var("X")]);
        assert_eq!(parts[1].head, vec![Term::var("Y")]);
        assert_eq!(parts[1].name, "q_2");
    }

    #[test]
    fn term_text_round_trip() {
        assert_eq!(Term::from_text("?X"), Term::var("X"));
        assert!(Term::from_text("rdf:type").is_const());
    }
}
