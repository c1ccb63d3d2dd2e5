//! Candidate view sets as states, their graphs, and the transitions between
//! them: view break (VB), selection cut (SC), join cut (JC), view fusion (VF).

mod exec;
mod view;

pub use exec::{execute, materialize_views};
pub use view::{flatten, Cond, Expr, Occurrence, Rewriting, SpjForm, View};

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    body_isomorphism, components_of, ConjunctiveQuery, Pos, Term, TripleAtom, UnionQuery, VarGen,
};
use crate::symbol::Symbol;

/// Transition kinds in stratum order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TransitionKind {
    VB,
    SC,
    JC,
    VF,
}

impl TransitionKind {
    pub const ALL: [TransitionKind; 4] = [
        TransitionKind::VB,
        TransitionKind::SC,
        TransitionKind::JC,
        TransitionKind::VF,
    ];

    pub fn stratum(self) -> usize {
        self as usize
    }
}

impl fmt::Display for TransitionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// A concrete transition. Atom indexes refer to the view's body order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Transition {
    /// Break `view` into the atoms of `left` and `right` (bit masks).
    VB { view: u32, left: u64, right: u64 },
    /// Replace the constant at `atom`.`pos` by a fresh head variable.
    SC { view: u32, atom: usize, pos: Pos },
    /// Detach the variable occurrence at `atom`.`pos` from its join partners.
    JC { view: u32, atom: usize, pos: Pos },
    /// Fuse two views with isomorphic bodies.
    VF { first: u32, second: u32 },
}

impl Transition {
    pub fn kind(&self) -> TransitionKind {
        match self {
            Transition::VB { .. } => TransitionKind::VB,
            Transition::SC { .. } => TransitionKind::SC,
            Transition::JC { .. } => TransitionKind::JC,
            Transition::VF { .. } => TransitionKind::VF,
        }
    }
}

/// Source of fresh view ids and variables for one search run.
#[derive(Debug, Clone)]
pub struct Fresh {
    next_view: u32,
    vars: VarGen,
}

impl Default for Fresh {
    fn default() -> Self {
        Fresh {
            next_view: 1,
            vars: VarGen::new("f"),
        }
    }
}

impl Fresh {
    /// A generator whose ids and variables do not collide with `s`.
    pub fn after(s: &State) -> Fresh {
        Fresh {
            next_view: s.views.iter().map(|v| v.id).max().unwrap_or(0) + 1,
            vars: VarGen::avoiding("f", s.views.iter().flat_map(|v| v.vars())),
        }
    }

    pub fn view_id(&mut self) -> u32 {
        let id = self.next_view;
        self.next_view += 1;
        id
    }

    pub fn var(&mut self) -> Term {
        self.vars.fresh()
    }
}

pub type Signature = Arc<[Arc<[u64]>]>;

/// A candidate view set: views plus one rewriting per workload query.
#[derive(Debug, Clone)]
pub struct State {
    pub views: Vec<Arc<View>>,
    pub rewritings: Vec<Rewriting>,
    signature: Signature,
}

fn signature_of(views: &[Arc<View>]) -> Signature {
    let mut keys: Vec<Arc<[u64]>> = views.iter().map(|v| v.key.clone()).collect();
    keys.sort();
    keys.into()
}

fn check_atoms(q: &ConjunctiveQuery) -> Result<()> {
    if q.body.iter().any(|a| a.constant_count() == 3) {
        return Err(Error::invalid_query(&q.name, "atoms with three constants are not allowed"));
    }
    Ok(())
}

impl State {
    pub fn new(views: Vec<Arc<View>>, rewritings: Vec<Rewriting>) -> State {
        let mut views = views;
        views.sort_by_key(|v| v.id);
        let signature = signature_of(&views);
        State {
            views,
            rewritings,
            signature,
        }
    }

    /// One view per query, each rewriting a plain scan.
    pub fn initial(workload: &[ConjunctiveQuery], fresh: &mut Fresh) -> Result<State> {
        if workload.is_empty() {
            return Err(Error::EmptyWorkload);
        }
        let mut views = Vec::new();
        let mut rewritings = Vec::new();
        for q in workload {
            check_atoms(q)?;
            if !q.is_connected() {
                return Err(Error::invalid_query(&q.name, "the body is not connected"));
            }
            let v = View::new(fresh.view_id(), q.head.clone(), q.body.clone());
            let expr = scan_as(&v, &q.head);
            rewritings.push(Rewriting {
                query: q.name.clone(),
                expr,
            });
            views.push(Arc::new(v));
        }
        Ok(State::new(views, rewritings))
    }

    /// One view per reformulation member; each query is rewritten as the
    /// union of its members. Members with a Cartesian product contribute one
    /// view per component, joined back together.
    pub fn initial_reformulated(workload: &[UnionQuery], fresh: &mut Fresh) -> Result<State> {
        if workload.is_empty() {
            return Err(Error::EmptyWorkload);
        }
        let mut views = Vec::new();
        let mut rewritings = Vec::new();
        for u in workload {
            let mut branches = Vec::new();
            for m in &u.members {
                check_atoms(m)?;
                let parts = m.split_components();
                let mut expr: Option<(Expr, Vec<Term>)> = None;
                for part in parts {
                    if part.body.iter().all(|a| a.vars().next().is_none()) {
                        return Err(Error::invalid_query(
                            &u.name,
                            "a reformulation member has a variable-free component; use another reasoning mode",
                        ));
                    }
                    let v = View::new(fresh.view_id(), part.head.clone(), part.body.clone());
                    let cols = v.head.clone();
                    let scan = Expr::scan(v.id);
                    views.push(Arc::new(v));
                    expr = Some(match expr {
                        None => (scan, cols),
                        Some((e, mut ecols)) => {
                            ecols.extend(cols);
                            (Expr::join(Vec::new(), true, e, scan), ecols)
                        }
                    });
                }
                let (e, cols) = expr.expect("members have a non-empty body");
                let columns = m.head.iter().map(|t| position(&cols, t)).collect();
                branches.push(Expr::project(columns, cols.len(), e));
            }
            let expr = if branches.len() == 1 {
                branches.pop().unwrap()
            } else {
                Expr::Union { inputs: branches }
            };
            rewritings.push(Rewriting {
                query: u.name.clone(),
                expr,
            });
        }
        Ok(State::new(views, rewritings))
    }

    /// Sorted multiset of view keys; equal for states with the same views.
    pub fn signature(&self) -> &Signature {
        &self.signature
    }

    pub fn view(&self, id: u32) -> Option<&Arc<View>> {
        self.views
            .binary_search_by_key(&id, |v| v.id)
            .ok()
            .map(|i| &self.views[i])
    }

    pub fn view_head(&self, id: u32) -> Vec<Term> {
        self.view(id).map(|v| v.head.clone()).unwrap_or_default()
    }

    pub fn graph(&self) -> StateGraph {
        StateGraph::of(self)
    }

    /// All transitions of the given kinds applicable to this state.
    pub fn transitions(&self, kinds: &[TransitionKind]) -> Vec<Transition> {
        let mut out = Vec::new();
        for kind in kinds {
            match kind {
                TransitionKind::VB => {
                    for v in &self.views {
                        for (left, right) in view_breaks(&v.body) {
                            out.push(Transition::VB {
                                view: v.id,
                                left,
                                right,
                            });
                        }
                    }
                }
                TransitionKind::SC => {
                    for v in &self.views {
                        for (i, a) in v.body.iter().enumerate() {
                            for pos in Pos::ALL {
                                if a.get(pos).is_const() {
                                    out.push(Transition::SC {
                                        view: v.id,
                                        atom: i,
                                        pos,
                                    });
                                }
                            }
                        }
                    }
                }
                TransitionKind::JC => {
                    for v in &self.views {
                        for (atom, pos) in join_cuts(&v.body) {
                            out.push(Transition::JC { view: v.id, atom, pos });
                        }
                    }
                }
                TransitionKind::VF => {
                    for (i, a) in self.views.iter().enumerate() {
                        for b in &self.views[i + 1..] {
                            if a.body_key == b.body_key {
                                out.push(Transition::VF {
                                    first: a.id,
                                    second: b.id,
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Applies a transition produced by [`State::transitions`].
    pub fn apply(&self, t: &Transition, fresh: &mut Fresh) -> Result<State> {
        let missing = |id: u32| Error::Invariant(format!("transition refers to unknown view v{id}"));
        match *t {
            Transition::SC { view, atom, pos } => {
                let v = self.view(view).ok_or_else(|| missing(view))?;
                let Term::Const(c) = v.body[atom].get(pos) else {
                    return Err(Error::Invariant("selection cut on a variable".into()));
                };
                let f = fresh.var();
                let mut body = v.body.clone();
                body[atom] = body[atom].with(pos, f);
                let mut head = v.head.clone();
                head.push(f);
                let nv = View::new(fresh.view_id(), head, body);
                let h = v.head.len();
                let repl = Expr::project(
                    (0..h).collect(),
                    h + 1,
                    Expr::select(Cond::ColumnEqualsConstant { column: h, value: c }, Expr::scan(nv.id)),
                );
                Ok(self.replace_view(view, vec![nv], &repl))
            }
            Transition::JC { view, atom, pos } => {
                let v = self.view(view).ok_or_else(|| missing(view))?;
                let Term::Var(x) = v.body[atom].get(pos) else {
                    return Err(Error::Invariant("join cut on a constant".into()));
                };
                let x = Term::Var(x);
                let f = fresh.var();
                let mut body = v.body.clone();
                body[atom] = body[atom].with(pos, f);
                let all: Vec<usize> = (0..body.len()).collect();
                let comps = components_of(&body, &all);
                let h = v.head.len();
                if comps.len() == 1 {
                    let mut head = v.head.clone();
                    if !head.contains(&x) {
                        head.push(x);
                    }
                    head.push(f);
                    let xi = position(&head, &x);
                    let fi = head.len() - 1;
                    let arity = head.len();
                    let nv = View::new(fresh.view_id(), head, body);
                    let repl = Expr::project(
                        (0..h).collect(),
                        arity,
                        Expr::select(Cond::ColumnsEqual { left: xi, right: fi }, Expr::scan(nv.id)),
                    );
                    Ok(self.replace_view(view, vec![nv], &repl))
                } else {
                    let (mut cf, mut cx) = (None, None);
                    for c in &comps {
                        let atoms: Vec<TripleAtom> = c.iter().map(|&i| body[i]).collect();
                        if atoms.iter().any(|a| a.0.contains(&f)) {
                            cf = Some(atoms);
                        } else {
                            cx = Some(atoms);
                        }
                    }
                    let (Some(bf), Some(bx)) = (cf, cx) else {
                        return Err(Error::Invariant("join cut split without the cut variable".into()));
                    };
                    if comps.len() != 2 || !bx.iter().any(|a| a.0.contains(&x)) {
                        return Err(Error::Invariant("join cut produced an unexpected split".into()));
                    }
                    let mut hf = sub_head(&v.head, &bf, true);
                    hf.push(f);
                    let mut hx = sub_head(&v.head, &bx, false);
                    if !hx.contains(&x) {
                        hx.push(x);
                    }
                    let on = vec![(hf.len() - 1, position(&hx, &x))];
                    let mut cols = hf.clone();
                    cols.extend(hx.iter().copied());
                    let vf = View::new(fresh.view_id(), hf, bf);
                    let vx = View::new(fresh.view_id(), hx, bx);
                    let join = Expr::join(on, false, Expr::scan(vf.id), Expr::scan(vx.id));
                    let columns = v.head.iter().map(|t| position(&cols, t)).collect();
                    let repl = Expr::project(columns, cols.len(), join);
                    Ok(self.replace_view(view, vec![vf, vx], &repl))
                }
            }
            Transition::VB { view, left, right } => {
                let v = self.view(view).ok_or_else(|| missing(view))?;
                let pick = |mask: u64| -> Vec<TripleAtom> {
                    (0..v.body.len()).filter(|i| mask & (1 << i) != 0).map(|i| v.body[i]).collect()
                };
                let (b1, b2) = (pick(left), pick(right));
                let vars1: Vec<Symbol> = ordered_vars(&b1);
                let vars2: HashSet<Symbol> = b2.iter().flat_map(|a| a.vars()).collect();
                let vars1_set: HashSet<Symbol> = vars1.iter().copied().collect();
                let shared: Vec<Term> = ordered_vars(&v.body)
                    .into_iter()
                    .filter(|s| vars1_set.contains(s) && vars2.contains(s))
                    .map(Term::Var)
                    .collect();
                let mut h1 = sub_head(&v.head, &b1, true);
                let mut h2 = sub_head(&v.head, &b2, false);
                for s in &shared {
                    if !h1.contains(s) {
                        h1.push(*s);
                    }
                    if !h2.contains(s) {
                        h2.push(*s);
                    }
                }
                let on: Vec<(usize, usize)> = h1
                    .iter()
                    .enumerate()
                    .filter(|(_, t)| t.is_var())
                    .filter_map(|(i, t)| h2.iter().position(|u| u == t).map(|j| (i, j)))
                    .collect();
                let mut cols = h1.clone();
                cols.extend(h2.iter().copied());
                let v1 = View::new(fresh.view_id(), h1, b1);
                let v2 = View::new(fresh.view_id(), h2, b2);
                let join = Expr::join(on, true, Expr::scan(v1.id), Expr::scan(v2.id));
                let columns = v.head.iter().map(|t| position(&cols, t)).collect();
                let repl = Expr::project(columns, cols.len(), join);
                Ok(self.replace_view(view, vec![v1, v2], &repl))
            }
            Transition::VF { first, second } => {
                let v1 = self.view(first).ok_or_else(|| missing(first))?;
                let v2 = self.view(second).ok_or_else(|| missing(second))?;
                let rho = body_isomorphism(&v1.body, &v2.body)
                    .ok_or_else(|| Error::Invariant(format!("v{first} and v{second} are not isomorphic")))?;
                let rename = |t: &Term| match t {
                    Term::Var(v) => Term::Var(rho[v]),
                    c => *c,
                };
                let h2: Vec<Term> = v2.head.iter().map(rename).collect();
                let mut h3 = v1.head.clone();
                for t in &h2 {
                    if !h3.contains(t) {
                        h3.push(*t);
                    }
                }
                let cols2: Vec<usize> = h2.iter().map(|t| position(&h3, t)).collect();
                if h3.len() == v1.head.len() {
                    // same columns: keep the first view and re-point the second
                    let repl = Expr::project(cols2, h3.len(), Expr::scan(v1.id));
                    Ok(self.replace_view(second, Vec::new(), &repl))
                } else {
                    let arity = h3.len();
                    let v3 = View::new(fresh.view_id(), h3, v1.body.clone());
                    let id3 = v3.id;
                    let r1 = Expr::project((0..v1.head.len()).collect(), arity, Expr::scan(id3));
                    let r2 = Expr::project(cols2, arity, Expr::scan(id3));
                    let s = self.replace_view(first, vec![v3], &r1);
                    Ok(s.replace_view(second, Vec::new(), &r2))
                }
            }
        }
    }

    fn replace_view(&self, id: u32, new_views: Vec<View>, with: &Expr) -> State {
        let mut views: Vec<Arc<View>> = self.views.iter().filter(|v| v.id != id).cloned().collect();
        views.extend(new_views.into_iter().map(Arc::new));
        let rewritings = self
            .rewritings
            .iter()
            .map(|r| {
                if r.expr.uses(id) {
                    Rewriting {
                        query: r.query.clone(),
                        expr: r.expr.replace(id, with),
                    }
                } else {
                    r.clone()
                }
            })
            .collect();
        State::new(views, rewritings)
    }

    /// Checks the structural invariants: rewritings reference only present
    /// views, every view is used, and no view has a Cartesian product.
    pub fn validate(&self) -> Result<()> {
        let ids: HashSet<u32> = self.views.iter().map(|v| v.id).collect();
        let mut used = HashSet::new();
        for r in &self.rewritings {
            for id in r.expr.views() {
                if !ids.contains(&id) {
                    return Err(Error::Invariant(format!("rewriting of {} uses missing view v{id}", r.query)));
                }
                used.insert(id);
            }
        }
        if let Some(v) = self.views.iter().find(|v| !used.contains(&v.id)) {
            return Err(Error::Invariant(format!("view v{} is not used", v.id)));
        }
        if let Some(v) = self.views.iter().find(|v| !v.as_query().is_connected()) {
            return Err(Error::Invariant(format!("view v{} has a Cartesian product", v.id)));
        }
        Ok(())
    }

    /// True when some view is the whole triple table.
    pub fn has_triple_table_view(&self) -> bool {
        self.views.iter().any(|v| v.is_triple_table())
    }

    /// True when some view has no constant.
    pub fn has_constant_free_view(&self) -> bool {
        self.views.iter().any(|v| v.constant_count() == 0)
    }
}

/// Scan of `v` reordered to produce `head`.
fn scan_as(v: &View, head: &[Term]) -> Expr {
    let cols = head.iter().map(|t| position(&v.head, t)).collect();
    Expr::project(cols, v.head.len(), Expr::scan(v.id))
}

fn position(cols: &[Term], t: &Term) -> usize {
    cols.iter()
        .position(|c| c == t)
        .unwrap_or_else(|| panic!("column {t} missing from {cols:?}"))
}

fn ordered_vars(atoms: &[TripleAtom]) -> Vec<Symbol> {
    let mut seen = HashSet::new();
    atoms.iter().flat_map(|a| a.vars()).filter(|v| seen.insert(*v)).collect()
}

/// Head terms of a parent view that survive into a sub-view: its variables
/// occurring in `atoms`, plus head constants when `constants` is set.
fn sub_head(head: &[Term], atoms: &[TripleAtom], constants: bool) -> Vec<Term> {
    let vars: HashSet<Symbol> = atoms.iter().flat_map(|a| a.vars()).collect();
    let mut out: Vec<Term> = Vec::new();
    for t in head {
        let keep = match t {
            Term::Var(v) => vars.contains(v),
            Term::Const(_) => constants,
        };
        if keep && !out.contains(t) {
            out.push(*t);
        }
    }
    out
}

fn connected(body: &[TripleAtom], mask: u64) -> bool {
    let sel: Vec<usize> = (0..body.len()).filter(|i| mask & (1 << i) != 0).collect();
    !sel.is_empty() && components_of(body, &sel).len() == 1
}

/// Unordered pairs of connected atom sets covering the body, neither
/// contained in the other.
fn view_breaks(body: &[TripleAtom]) -> Vec<(u64, u64)> {
    let n = body.len();
    if n <= 2 || n > 20 {
        return Vec::new();
    }
    let full: u64 = (1 << n) - 1;
    let conn: Vec<u64> = (1..full).filter(|&m| connected(body, m)).collect();
    let conn_set: HashSet<u64> = conn.iter().copied().collect();
    let mut out = Vec::new();
    for &a in &conn {
        let rest = full & !a;
        // b must contain the rest and may add any part of a except all of it
        let mut extra = a;
        loop {
            let b = rest | extra;
            if extra != a && a < b && conn_set.contains(&b) && a & !b != 0 && b & !a != 0 {
                out.push((a, b));
            }
            if extra == 0 {
                break;
            }
            extra = (extra - 1) & a;
        }
    }
    out.sort_unstable();
    out
}

/// Variable occurrences whose detachment is a join cut: the second
/// occurrence of a variable seen twice, every occurrence of a variable
/// seen three times or more.
fn join_cuts(body: &[TripleAtom]) -> Vec<(usize, Pos)> {
    let mut occ: HashMap<Symbol, Vec<(usize, Pos)>> = HashMap::new();
    let mut order = Vec::new();
    for (i, a) in body.iter().enumerate() {
        for pos in Pos::ALL {
            if let Term::Var(v) = a.get(pos) {
                let e = occ.entry(v).or_default();
                if e.is_empty() {
                    order.push(v);
                }
                e.push((i, pos));
            }
        }
    }
    let mut out = Vec::new();
    for v in order {
        let o = &occ[&v];
        match o.len() {
            0 | 1 => {}
            2 => out.push(o[1]),
            _ => out.extend(o.iter().copied()),
        }
    }
    out
}

/// Edge of a state graph.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Edge {
    /// `v: n_i.a = n_j.b`
    Join {
        view: u32,
        from: (usize, Pos),
        to: (usize, Pos),
    },
    /// `v: n_i.a = c`
    Selection { view: u32, node: (usize, Pos), value: Symbol },
}

/// Nodes are (view, atom index) pairs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateGraph {
    pub nodes: Vec<(u32, usize)>,
    pub edges: Vec<Edge>,
}

impl StateGraph {
    pub fn of(state: &State) -> StateGraph {
        let mut nodes = Vec::new();
        let mut edges = Vec::new();
        for v in &state.views {
            let mut occ: Vec<((usize, Pos), Term)> = Vec::new();
            for (i, a) in v.body.iter().enumerate() {
                nodes.push((v.id, i));
                for pos in Pos::ALL {
                    match a.get(pos) {
                        Term::Const(c) => edges.push(Edge::Selection {
                            view: v.id,
                            node: (i, pos),
                            value: c,
                        }),
                        t => occ.push(((i, pos), t)),
                    }
                }
            }
            for (k, (from, t)) in occ.iter().enumerate() {
                for (to, u) in &occ[k + 1..] {
                    if t == u {
                        edges.push(Edge::Join {
                            view: v.id,
                            from: *from,
                            to: *to,
                        });
                    }
                }
            }
        }
        StateGraph { nodes, edges }
    }

    /// Connected components of the nodes of one view, via its join edges.
    pub fn view_components(&self, view: u32) -> Vec<BTreeSet<usize>> {
        let nodes: Vec<usize> = self.nodes.iter().filter(|n| n.0 == view).map(|n| n.1).collect();
        let mut comp: HashMap<usize, usize> = nodes.iter().map(|&n| (n, n)).collect();
        fn root(comp: &HashMap<usize, usize>, mut n: usize) -> usize {
            while comp[&n] != n {
                n = comp[&n];
            }
            n
        }
        for e in &self.edges {
            if let Edge::Join { view: v, from, to } = e {
                if *v == view {
                    let (a, b) = (root(&comp, from.0), root(&comp, to.0));
                    comp.insert(a, b);
                }
            }
        }
        let mut groups: HashMap<usize, BTreeSet<usize>> = HashMap::new();
        for &n in &nodes {
            groups.entry(root(&comp, n)).or_default().insert(n);
        }
        groups.into_values().collect()
    }
}
