use std::collections::{BTreeSet, HashMap};

use super::TripleStore;
use crate::model::{ConjunctiveQuery, Term, UnionQuery};
use crate::symbol::Symbol;

/// A set of tuples with named columns.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Relation {
    pub columns: Vec<String>,
    pub rows: BTreeSet<Vec<Symbol>>,
}

impl Relation {
    pub fn new(columns: Vec<String>) -> Self {
        Relation {
            columns,
            rows: BTreeSet::new(),
        }
    }

    pub fn arity(&self) -> usize {
        self.columns.len()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rows rendered as strings, sorted; independent of interning order.
    pub fn sorted_rows(&self) -> Vec<Vec<String>> {
        let mut rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| r.iter().map(|s| s.as_str().to_string()).collect())
            .collect();
        rows.sort();
        rows
    }

    /// Tab-separated rendering with a header line of column names.
    pub fn to_tsv(&self) -> String {
        let mut out = self.columns.join("\t");
        out.push('\n');
        for row in self.sorted_rows() {
            out.push_str(&row.join("\t"));
            out.push('\n');
        }
        out
    }

    pub fn from_tsv(src: &str) -> crate::Result<Self> {
        let mut lines = src.lines();
        let header = lines.next().unwrap_or("");
        let columns: Vec<String> = if header.is_empty() {
            Vec::new()
        } else {
            header.split('\t').map(str::to_string).collect()
        };
        let mut rel = Relation::new(columns);
        for (n, line) in lines.enumerate() {
            let row: Vec<Symbol> = if rel.columns.is_empty() {
                Vec::new()
            } else {
                line.split('\t').map(Symbol::new).collect()
            };
            if row.len() != rel.arity() {
                return Err(crate::Error::parse(
                    n + 2,
                    format!("expected {} columns, found {}", rel.arity(), row.len()),
                ));
            }
            rel.rows.insert(row);
        }
        Ok(rel)
    }
}

pub(crate) fn column_names(head: &[Term]) -> Vec<String> {
    head.iter().map(|t| t.to_string()).collect()
}

struct Evaluator<'a> {
    store: &'a TripleStore,
    /// per atom, per position: constant code or variable slot
    atoms: Vec<[Slot; 3]>,
    order: Vec<usize>,
    binding: Vec<Option<u32>>,
    head: Vec<Slot>,
    head_consts: Vec<Option<Symbol>>,
    out: BTreeSet<Vec<Symbol>>,
    limit: usize,
}

#[derive(Clone, Copy)]
enum Slot {
    Const(u32),
    Var(usize),
}

impl Evaluator<'_> {
    fn run(&mut self, depth: usize) {
        if self.out.len() >= self.limit {
            return;
        }
        if depth == self.order.len() {
            let row = self
                .head
                .iter()
                .zip(&self.head_consts)
                .map(|(slot, c)| match (slot, c) {
                    (_, Some(c)) => *c,
                    (Slot::Var(v), None) => self.store.dict.decode(self.binding[*v].unwrap()),
                    (Slot::Const(c), None) => self.store.dict.decode(*c),
                })
                .collect();
            self.out.insert(row);
            return;
        }
        let atom = self.atoms[self.order[depth]];
        let mut pattern = [None; 3];
        for k in 0..3 {
            pattern[k] = match atom[k] {
                Slot::Const(c) => Some(c),
                Slot::Var(v) => self.binding[v],
            };
        }
        let free: Vec<(usize, usize)> = (0..3)
            .filter_map(|k| match atom[k] {
                Slot::Var(v) if pattern[k].is_none() => Some((k, v)),
                _ => None,
            })
            .collect();
        let store = self.store;
        for t in store.matching_codes(pattern) {
            let mut ok = true;
            let mut newly = Vec::with_capacity(free.len());
            for &(k, v) in &free {
                match self.binding[v] {
                    Some(b) if b != t[k] => {
                        ok = false;
                        break;
                    }
                    Some(_) => {}
                    None => {
                        self.binding[v] = Some(t[k]);
                        newly.push(v);
                    }
                }
            }
            if ok {
                self.run(depth + 1);
            }
            for v in newly {
                self.binding[v] = None;
            }
        }
    }
}

/// All head tuples of `q` over `store` (set semantics).
pub fn evaluate(q: &ConjunctiveQuery, store: &TripleStore) -> Relation {
    evaluate_limited(q, store, usize::MAX)
}

/// Whether `q` has at least one answer, stopping at the first one.
pub fn has_answer(q: &ConjunctiveQuery, store: &TripleStore) -> bool {
    !evaluate_limited(q, store, 1).is_empty()
}

fn evaluate_limited(q: &ConjunctiveQuery, store: &TripleStore, limit: usize) -> Relation {
    let mut rel = Relation::new(column_names(&q.head));
    let mut slots: HashMap<Symbol, usize> = HashMap::new();
    let mut atoms = Vec::with_capacity(q.body.len());
    for atom in &q.body {
        let mut enc = [Slot::Var(0); 3];
        for k in 0..3 {
            enc[k] = match atom.0[k] {
                Term::Const(c) => match store.dict.code(c) {
                    Some(code) => Slot::Const(code),
                    None => return rel,
                },
                Term::Var(v) => {
                    let n = slots.len();
                    Slot::Var(*slots.entry(v).or_insert(n))
                }
            };
        }
        atoms.push(enc);
    }
    if store.is_empty() {
        return rel;
    }
    // greedy order: most bound positions first, then connected
    let mut order = Vec::with_capacity(atoms.len());
    let mut bound = vec![false; slots.len()];
    let mut used = vec![false; atoms.len()];
    for _ in 0..atoms.len() {
        let best = (0..atoms.len())
            .filter(|&i| !used[i])
            .max_by_key(|&i| {
                let score: usize = atoms[i]
                    .iter()
                    .map(|s| match s {
                        Slot::Const(_) => 2,
                        Slot::Var(v) => 3 * usize::from(bound[*v]),
                    })
                    .sum();
                (score, usize::MAX - i)
            })
            .unwrap();
        used[best] = true;
        for s in atoms[best] {
            if let Slot::Var(v) = s {
                bound[v] = true;
            }
        }
        order.push(best);
    }
    let head: Vec<Slot> = q
        .head
        .iter()
        .map(|t| match t {
            Term::Var(v) => Slot::Var(slots[v]),
            Term::Const(_) => Slot::Const(0),
        })
        .collect();
    let head_consts = q.head.iter().map(Term::as_const).collect();
    let mut ev = Evaluator {
        store,
        binding: vec![None; slots.len()],
        atoms,
        order,
        head,
        head_consts,
        out: BTreeSet::new(),
        limit,
    };
    ev.run(0);
    rel.rows = ev.out;
    rel
}

/// Set union of the member evaluations.
pub fn evaluate_union(u: &UnionQuery, store: &TripleStore) -> Relation {
    let mut rel = match u.members.first() {
        Some(m) => Relation::new(column_names(&m.head)),
        None => Relation::default(),
    };
    for m in &u.members {
        rel.rows.extend(evaluate(m, store).rows);
    }
    rel
}

/// Materializes a (union) view: columns follow the head of the first member.
pub fn materialize(u: &UnionQuery, store: &TripleStore) -> Relation {
    evaluate_union(u, store)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_query;

    #[test]
    fn single_atom() {
        let st = TripleStore::load_str("vanGogh hasPainted starryNight\n").unwrap();
        let q = parse_query("q(X) :- t(X, hasPainted, starryNight) .").unwrap();
        let r = evaluate(&q, &st);
        assert_eq!(r.sorted_rows(), vec![vec!["vanGogh".to_string()]]);
    }

    #[test]
    fn running_example() {
        let st = TripleStore::load_str(
            "vanGogh hasPainted starryNight\nvanGogh isParentOf vincentJr\nvincentJr hasPainted sunflowers2\nmonet hasPainted waterLilies\n",
        )
        .unwrap();
        let q = parse_query(
            "q1(X, Z) :- t(X, hasPainted, starryNight), t(X, isParentOf, Y), t(Y, hasPainted, Z) .",
        )
        .unwrap();
        assert_eq!(
            evaluate(&q, &st).sorted_rows(),
            vec![vec!["vanGogh".to_string(), "sunflowers2".to_string()]]
        );
    }

    #[test]
    fn empty_store_and_unknown_constant() {
        let q = parse_query("q(X) :- t(X, p, Y) .").unwrap();
        assert!(evaluate(&q, &TripleStore::new()).is_empty());
        let st = TripleStore::load_str("a q b\n").unwrap();
        assert!(evaluate(&q, &st).is_empty());
        assert_eq!(evaluate(&q, &st).arity(), 1);
    }

    #[test]
    fn repeated_variable_in_atom() {
        let st = TripleStore::load_str("a p a\na p b\n").unwrap();
        let q = parse_query("q(X) :- t(X, p, X) .").unwrap();
        assert_eq!(evaluate(&q, &st).len(), 1);
    }

    #[test]
    fn tsv_round_trip() {
        let st = TripleStore::load_str("a p b\nc p d\n").unwrap();
        let q = parse_query("q(X, Y) :- t(X, p, Y) .").unwrap();
        let r = evaluate(&q, &st);
        assert_eq!(Relation::from_tsv(&r.to_tsv()).unwrap(), r);
    }
}
