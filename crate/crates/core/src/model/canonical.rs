//! Canonical labeling of conjunctive queries by color refinement with
//! individualization. Two bodies get the same key iff they are equal up to
//! variable renaming and atom reordering (and head, depending on the mode).

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};

use super::{Term, TripleAtom};
use crate::symbol::Symbol;

/// How the head participates in the canonical form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadMode {
    /// Head positions are significant.
    Ordered,
    /// The head is treated as a set of distinguished terms.
    Unordered,
    /// Only the body counts.
    Ignored,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonicalForm {
    pub key: Vec<u64>,
    /// Body atom indexes in canonical order.
    pub atom_order: Vec<usize>,
    /// Variables in canonical numbering order.
    pub var_order: Vec<Symbol>,
}

impl CanonicalForm {
    pub fn hash64(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.key.hash(&mut h);
        h.finish()
    }
}

const CONST_TAG: u64 = 1 << 40;
const VAR_TAG: u64 = 2 << 40;

struct Labeler<'a> {
    body: &'a [TripleAtom],
    head: &'a [Term],
    mode: HeadMode,
    var_index: HashMap<Symbol, usize>,
    vars: Vec<Symbol>,
    /// (atom, position) occurrences per variable
    occurrences: Vec<Vec<(usize, usize)>>,
    best: Option<(Vec<u64>, Vec<usize>, Vec<Symbol>)>,
}

fn rank(keys: &[Vec<u64>]) -> Vec<usize> {
    let mut sorted: Vec<&Vec<u64>> = keys.iter().collect();
    sorted.sort();
    sorted.dedup();
    keys.iter()
        .map(|k| sorted.binary_search(&k).unwrap())
        .collect()
}

fn distinct(colors: &[usize]) -> usize {
    let mut c = colors.to_vec();
    c.sort_unstable();
    c.dedup();
    c.len()
}

impl<'a> Labeler<'a> {
    fn new(head: &'a [Term], body: &'a [TripleAtom], mode: HeadMode) -> Self {
        let mut var_index = HashMap::new();
        let mut vars = Vec::new();
        let mut occurrences: Vec<Vec<(usize, usize)>> = Vec::new();
        for (a, atom) in body.iter().enumerate() {
            for (k, t) in atom.0.iter().enumerate() {
                if let Term::Var(v) = t {
                    let idx = *var_index.entry(*v).or_insert_with(|| {
                        vars.push(*v);
                        occurrences.push(Vec::new());
                        vars.len() - 1
                    });
                    occurrences[idx].push((a, k));
                }
            }
        }
        Labeler {
            body,
            head,
            mode,
            var_index,
            vars,
            occurrences,
            best: None,
        }
    }

    fn initial_colors(&self) -> (Vec<usize>, Vec<usize>) {
        let var_keys: Vec<Vec<u64>> = self
            .vars
            .iter()
            .map(|v| match self.mode {
                HeadMode::Ordered => self
                    .head
                    .iter()
                    .enumerate()
                    .filter(|(_, t)| **t == Term::Var(*v))
                    .map(|(i, _)| i as u64 + 1)
                    .collect(),
                HeadMode::Unordered => vec![self.head.contains(&Term::Var(*v)) as u64],
                HeadMode::Ignored => vec![0],
            })
            .collect();
        let atom_keys: Vec<Vec<u64>> = self
            .body
            .iter()
            .map(|atom| {
                let mut key = Vec::with_capacity(6);
                for t in &atom.0 {
                    match t {
                        Term::Const(c) => key.extend([0, c.id() as u64]),
                        Term::Var(_) => {
                            let first = atom.0.iter().position(|u| u == t).unwrap();
                            key.extend([1, first as u64]);
                        }
                    }
                }
                key
            })
            .collect();
        (rank(&atom_keys), rank(&var_keys))
    }

    fn refine(&self, atom_col: &mut Vec<usize>, var_col: &mut Vec<usize>) {
        loop {
            let before = (distinct(atom_col), distinct(var_col));
            let var_keys: Vec<Vec<u64>> = (0..self.vars.len())
                .map(|v| {
                    let mut occ: Vec<u64> = self.occurrences[v]
                        .iter()
                        .map(|&(a, k)| (atom_col[a] as u64) * 4 + k as u64)
                        .collect();
                    occ.sort_unstable();
                    let mut key = vec![var_col[v] as u64];
                    key.extend(occ);
                    key
                })
                .collect();
            *var_col = rank(&var_keys);
            let atom_keys: Vec<Vec<u64>> = self
                .body
                .iter()
                .enumerate()
                .map(|(a, atom)| {
                    let mut key = vec![atom_col[a] as u64];
                    for t in &atom.0 {
                        match t {
                            Term::Const(c) => key.extend([0, c.id() as u64]),
                            Term::Var(v) => key.extend([1, var_col[self.var_index[v]] as u64]),
                        }
                    }
                    key
                })
                .collect();
            *atom_col = rank(&atom_keys);
            if (distinct(atom_col), distinct(var_col)) == before {
                break;
            }
        }
    }

    fn leaf(&mut self, atom_col: &[usize]) {
        let mut order: Vec<usize> = (0..self.body.len()).collect();
        order.sort_by_key(|&a| atom_col[a]);
        let mut numbering: HashMap<Symbol, u64> = HashMap::new();
        let mut var_order = Vec::new();
        let mut key = Vec::with_capacity(1 + 3 * order.len() + self.head.len() + 1);
        key.push(order.len() as u64);
        for &a in &order {
            for t in &self.body[a].0 {
                key.push(match t {
                    Term::Const(c) => CONST_TAG | c.id() as u64,
                    Term::Var(v) => {
                        let n = *numbering.entry(*v).or_insert_with(|| {
                            var_order.push(*v);
                            var_order.len() as u64 - 1
                        });
                        VAR_TAG | n
                    }
                });
            }
        }
        let head_token = |t: &Term| match t {
            Term::Const(c) => CONST_TAG | c.id() as u64,
            Term::Var(v) => VAR_TAG | numbering[v],
        };
        match self.mode {
            HeadMode::Ordered => {
                key.push(self.head.len() as u64);
                key.extend(self.head.iter().map(head_token));
            }
            HeadMode::Unordered => {
                let mut h: Vec<u64> = self.head.iter().map(head_token).collect();
                h.sort_unstable();
                h.dedup();
                key.push(h.len() as u64);
                key.extend(h);
            }
            HeadMode::Ignored => {}
        }
        let better = match &self.best {
            None => true,
            Some((best, _, _)) => key < *best,
        };
        if better {
            self.best = Some((key, order, var_order));
        }
    }

    fn search(&mut self, mut atom_col: Vec<usize>, mut var_col: Vec<usize>) {
        self.refine(&mut atom_col, &mut var_col);
        if distinct(&atom_col) == atom_col.len() {
            self.leaf(&atom_col);
            return;
        }
        // individualize each member of the first non-singleton cell
        let mut counts: HashMap<usize, usize> = HashMap::new();
        for &c in &atom_col {
            *counts.entry(c).or_default() += 1;
        }
        let cell = counts
            .iter()
            .filter(|(_, &n)| n > 1)
            .map(|(&c, _)| c)
            .min()
            .unwrap();
        let members: Vec<usize> = (0..atom_col.len()).filter(|&a| atom_col[a] == cell).collect();
        for chosen in members {
            let split: Vec<usize> = atom_col
                .iter()
                .enumerate()
                .map(|(a, &c)| 2 * c + usize::from(a != chosen))
                .collect();
            self.search(split, var_col.clone());
        }
    }
}

/// Canonical form of a query body with the given head treatment.
pub fn canonical_form(head: &[Term], body: &[TripleAtom], mode: HeadMode) -> CanonicalForm {
    let mut labeler = Labeler::new(head, body, mode);
    let (atom_col, var_col) = labeler.initial_colors();
    labeler.search(atom_col, var_col);
    let (mut key, atom_order, var_order) = labeler.best.take().unwrap_or_default();
    if body.is_empty() {
        key = vec![0];
        if mode != HeadMode::Ignored {
            key.push(head.len() as u64);
            key.extend(head.iter().map(|t| CONST_TAG | t.symbol().id() as u64));
        }
    }
    CanonicalForm {
        key,
        atom_order,
        var_order,
    }
}
