use std::collections::HashMap;

use super::canonical::{canonical_form, HeadMode};
use super::{ConjunctiveQuery, Term, TripleAtom};
use crate::symbol::Symbol;

/// A substitution of the source query's variables such that every source
/// atom lands on a target atom and the source head lands on the target head.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContainmentMapping {
    pub source: String,
    pub target: String,
    pub map: HashMap<Symbol, Term>,
}

impl ContainmentMapping {
    pub fn apply(&self, atom: &TripleAtom) -> TripleAtom {
        atom.substitute(&self.map)
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().all(|(v, t)| *t == Term::Var(*v))
    }
}

fn bind(map: &mut HashMap<Symbol, Term>, from: Term, to: Term, trail: &mut Vec<Symbol>) -> bool {
    match from {
        Term::Const(c) => to == Term::Const(c),
        Term::Var(v) => match map.get(&v) {
            Some(t) => *t == to,
            None => {
                map.insert(v, to);
                trail.push(v);
                true
            }
        },
    }
}

/// Orders atoms so that each one shares as many variables as possible with
/// the atoms before it, constants first.
fn search_order(atoms: &[TripleAtom]) -> Vec<usize> {
    let mut order = Vec::with_capacity(atoms.len());
    let mut used = vec![false; atoms.len()];
    let mut bound: Vec<Symbol> = Vec::new();
    for _ in 0..atoms.len() {
        let best = (0..atoms.len())
            .filter(|&i| !used[i])
            .max_by_key(|&i| {
                let a = &atoms[i];
                let shared = a.vars().filter(|v| bound.contains(v)).count();
                (shared + a.constant_count(), usize::MAX - i)
            })
            .unwrap();
        used[best] = true;
        bound.extend(atoms[best].vars());
        order.push(best);
    }
    order
}

fn extend(
    src: &[TripleAtom],
    order: &[usize],
    depth: usize,
    dst: &[TripleAtom],
    map: &mut HashMap<Symbol, Term>,
) -> bool {
    if depth == order.len() {
        return true;
    }
    let atom = &src[order[depth]];
    for target in dst {
        let mut trail = Vec::new();
        let ok = (0..3).all(|k| bind(map, atom.0[k], target.0[k], &mut trail));
        if ok && extend(src, order, depth + 1, dst, map) {
            return true;
        }
        for v in trail {
            map.remove(&v);
        }
    }
    false
}

pub(crate) fn mapping_between(
    src_head: &[Term],
    src_body: &[TripleAtom],
    dst_head: &[Term],
    dst_body: &[TripleAtom],
) -> Option<HashMap<Symbol, Term>> {
    if src_head.len() != dst_head.len() {
        return None;
    }
    let mut map = HashMap::new();
    let mut trail = Vec::new();
    for (s, d) in src_head.iter().zip(dst_head) {
        if !bind(&mut map, *s, *d, &mut trail) {
            return None;
        }
    }
    let order = search_order(src_body);
    extend(src_body, &order, 0, dst_body, &mut map).then_some(map)
}

/// Exhaustive backtracking search for a containment mapping `src -> dst`.
/// Its existence means `dst` is contained in `src`.
pub fn find_containment_mapping(src: &ConjunctiveQuery, dst: &ConjunctiveQuery) -> Option<ContainmentMapping> {
    mapping_between(&src.head, &src.body, &dst.head, &dst.body).map(|map| ContainmentMapping {
        source: src.name.clone(),
        target: dst.name.clone(),
        map,
    })
}

/// Equivalence with positional heads: mappings exist in both directions.
pub fn are_equivalent(a: &ConjunctiveQuery, b: &ConjunctiveQuery) -> bool {
    a.head.len() == b.head.len()
        && mapping_between(&a.head, &a.body, &b.head, &b.body).is_some()
        && mapping_between(&b.head, &b.body, &a.head, &a.body).is_some()
}

/// Removes redundant atoms until the only endomorphism is the identity.
pub fn minimize(q: &ConjunctiveQuery) -> ConjunctiveQuery {
    let mut body = q.body.clone();
    'outer: loop {
        for i in 0..body.len() {
            let mut reduced = body.clone();
            reduced.remove(i);
            if reduced.is_empty() {
                continue;
            }
            let head_ok = q.head.iter().all(|t| match t {
                Term::Var(v) => reduced.iter().any(|a| a.vars().any(|w| w == *v)),
                Term::Const(_) => true,
            });
            if head_ok && mapping_between(&q.head, &body, &q.head, &reduced).is_some() {
                body = reduced;
                continue 'outer;
            }
        }
        break;
    }
    ConjunctiveQuery {
        name: q.name.clone(),
        head: q.head.clone(),
        body,
    }
}

/// A bijective renaming of `b`'s variables onto `a`'s that maps `b`'s body
/// onto `a`'s body (heads ignored), if the bodies are isomorphic.
pub fn body_isomorphism(a: &[TripleAtom], b: &[TripleAtom]) -> Option<HashMap<Symbol, Symbol>> {
    if a.len() != b.len() {
        return None;
    }
    let ca = canonical_form(&[], a, HeadMode::Ignored);
    let cb = canonical_form(&[], b, HeadMode::Ignored);
    if ca.key != cb.key {
        return None;
    }
    Some(cb.var_order.iter().copied().zip(ca.var_order.iter().copied()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_query;

    fn q(s: &str) -> ConjunctiveQuery {
        parse_query(s).unwrap()
    }

    const Q1: &str =
        "q1(X, Z) :- t(X, hasPainted, starryNight), t(X, isParentOf, Y), t(Y, hasPainted, Z) .";

    #[test]
    fn constant_specializes_variable() {
        let src = q("q(X) :- t(X, p, Y) .");
        let dst = q("q(X) :- t(X, p, c) .");
        let m = find_containment_mapping(&src, &dst).unwrap();
        assert_eq!(m.map[&Symbol::new("?Y")], Term::constant("c"));
    }

    #[test]
    fn constants_clash() {
        let src = q("q(X) :- t(X, p, c1) .");
        let dst = q("q(X) :- t(X, p, c2) .");
        assert!(find_containment_mapping(&src, &dst).is_none());
    }

    #[test]
    fn running_example_has_only_identity() {
        let q1 = q(Q1);
        let m = find_containment_mapping(&q1, &q1).unwrap();
        assert!(m.is_identity());
    }

    #[test]
    fn equivalence_examples() {
        let a = q("q(X) :- t(X, p, Y) .");
        let renamed = q("q(A) :- t(A, p, B) .");
        let redundant = q("q(X) :- t(X, p, Y), t(X, p, Z) .");
        assert!(are_equivalent(&a, &renamed));
        assert!(are_equivalent(&a, &redundant));
        assert!(are_equivalent(&a, &minimize(&redundant)));
        let star = q("q(X) :- t(X, p, A), t(X, p2, B), t(X, p3, C) .");
        let chain = q("q(X) :- t(X, p, A), t(A, p2, B), t(B, p3, C) .");
        assert!(!are_equivalent(&star, &chain));
    }

    #[test]
    fn minimize_examples() {
        let m = minimize(&q("q(X) :- t(X, p, Y), t(X, p, Z) ."));
        assert_eq!(m.body.len(), 1);
        let q1 = q(Q1);
        assert_eq!(minimize(&q1), q1);
        let cycle = q("q(X) :- t(X, p, Y), t(Y, p, X) .");
        assert_eq!(minimize(&cycle), cycle);
    }

    #[test]
    fn isomorphism_maps_bodies() {
        let a = q("v(X, F) :- t(X, hasPainted, F) .");
        let b = q("w(Y, Z) :- t(Y, hasPainted, Z) .");
        let iso = body_isomorphism(&a.body, &b.body).unwrap();
        assert_eq!(iso[&Symbol::new("?Y")], Symbol::new("?X"));
        assert_eq!(iso[&Symbol::new("?Z")], Symbol::new("?F"));
        let c = q("w(Y, Z) :- t(Y, isParentOf, Z) .");
        assert!(body_isomorphism(&a.body, &c.body).is_none());
    }
}
