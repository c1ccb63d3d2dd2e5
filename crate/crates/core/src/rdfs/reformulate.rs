use std::collections::{HashMap, HashSet, VecDeque};

use super::{Schema, StatementKind};
use crate::model::{
    canonical_form, minimize, ConjunctiveQuery, HeadMode, Term, TripleAtom, UnionQuery, VarGen,
};
use crate::symbol::{rdf_type, Symbol};

fn replace(q: &ConjunctiveQuery, i: usize, atom: TripleAtom) -> ConjunctiveQuery {
    let mut body = q.body.clone();
    body[i] = atom;
    ConjunctiveQuery {
        name: q.name.clone(),
        head: q.head.clone(),
        body: crate::model::dedup_atoms(body),
    }
}

fn bind(q: &ConjunctiveQuery, var: Symbol, value: Symbol) -> ConjunctiveQuery {
    q.substitute(&HashMap::from([(var, Term::Const(value))]))
}

/// Unfolds `q` backwards through the RDFS rules until no new query appears.
///
/// The result, evaluated on a store, returns the answers of `q` on the
/// saturation of that store. Members are minimized and pairwise
/// non-equivalent; the first member is `q` itself (minimized).
pub fn reformulate(q: &ConjunctiveQuery, schema: &Schema) -> UnionQuery {
    let ty = rdf_type();
    let mut fresh = VarGen::new("r");
    let mut seen: HashSet<Vec<u64>> = HashSet::new();
    let mut members: Vec<ConjunctiveQuery> = Vec::new();
    let mut queue: VecDeque<ConjunctiveQuery> = VecDeque::new();

    let mut admit = |cand: ConjunctiveQuery,
                     members: &mut Vec<ConjunctiveQuery>,
                     queue: &mut VecDeque<ConjunctiveQuery>| {
        let cand = minimize(&cand);
        let key = canonical_form(&cand.head, &cand.body, HeadMode::Ordered).key;
        if seen.insert(key) {
            members.push(cand.clone());
            queue.push_back(cand);
        }
    };
    admit(q.clone(), &mut members, &mut queue);

    let mut properties: Vec<Symbol> = schema.properties().iter().copied().collect();
    properties.push(ty);
    while let Some(cur) = queue.pop_front() {
        let mut produced = Vec::new();
        for (i, g) in cur.body.iter().enumerate() {
            let TripleAtom([s, p, o]) = *g;
            let is_type = p == Term::Const(ty);
            // rule 1
            if let (true, Term::Const(c2)) = (is_type, o) {
                for st in schema.with_kind(StatementKind::SubClassOf).filter(|st| st.rhs == c2) {
                    produced.push(replace(&cur, i, TripleAtom::new(s, p, Term::Const(st.lhs))));
                }
            }
            // rule 2
            if let Term::Const(p2) = p {
                for st in schema.with_kind(StatementKind::SubPropertyOf).filter(|st| st.rhs == p2) {
                    produced.push(replace(&cur, i, TripleAtom::new(s, Term::Const(st.lhs), o)));
                }
            }
            // rules 3 and 4
            if let (true, Term::Const(c)) = (is_type, o) {
                for st in schema.with_kind(StatementKind::Domain).filter(|st| st.rhs == c) {
                    let x = fresh.fresh();
                    produced.push(replace(&cur, i, TripleAtom::new(s, Term::Const(st.lhs), x)));
                }
                for st in schema.with_kind(StatementKind::Range).filter(|st| st.rhs == c) {
                    let x = fresh.fresh();
                    produced.push(replace(&cur, i, TripleAtom::new(x, Term::Const(st.lhs), s)));
                }
            }
            // rule 5
            if let (true, Term::Var(x)) = (is_type, o) {
                for &c in schema.classes() {
                    produced.push(bind(&cur, x, c));
                }
            }
            // rule 6
            if let Term::Var(x) = p {
                for &pi in &properties {
                    produced.push(bind(&cur, x, pi));
                }
            }
        }
        for cand in produced {
            admit(cand, &mut members, &mut queue);
        }
    }
    UnionQuery {
        name: q.name.clone(),
        members,
    }
}

/// Replaces each view by its reformulation.
pub fn reformulate_views(views: &[ConjunctiveQuery], schema: &Schema) -> Vec<UnionQuery> {
    views.iter().map(|v| reformulate(v, schema)).collect()
}
