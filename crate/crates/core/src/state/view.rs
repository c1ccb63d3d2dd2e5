use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::model::{canonical_form, minimize, ConjunctiveQuery, HeadMode, Term, TripleAtom};
use crate::symbol::Symbol;

/// A materialization candidate. The body is minimal and kept in canonical
/// atom order; the head order fixes the column order of its relation.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct View {
    pub id: u32,
    pub head: Vec<Term>,
    pub body: Vec<TripleAtom>,
    /// Identity up to variable renaming, atom order and head order.
    #[serde(skip)]
    pub key: Arc<[u64]>,
    /// Identity of the body alone; equal keys mean fusable views.
    #[serde(skip)]
    pub body_key: Arc<[u64]>,
}

impl View {
    pub fn new(id: u32, head: Vec<Term>, body: Vec<TripleAtom>) -> View {
        let q = minimize(&ConjunctiveQuery {
            name: String::new(),
            head,
            body: crate::model::dedup_atoms(body),
        });
        let form = canonical_form(&q.head, &q.body, HeadMode::Unordered);
        let body: Vec<TripleAtom> = form.atom_order.iter().map(|&i| q.body[i]).collect();
        let body_key = canonical_form(&[], &body, HeadMode::Ignored).key;
        View {
            id,
            head: q.head,
            body,
            key: form.key.into(),
            body_key: body_key.into(),
        }
    }

    /// Recomputes the keys, e.g. after deserialization.
    pub fn rekeyed(&self) -> View {
        View::new(self.id, self.head.clone(), self.body.clone())
    }

    pub fn name(&self) -> String {
        format!("v{}", self.id)
    }

    pub fn len(&self) -> usize {
        self.body.len()
    }

    pub fn is_empty(&self) -> bool {
        self.body.is_empty()
    }

    pub fn as_query(&self) -> ConjunctiveQuery {
        ConjunctiveQuery {
            name: self.name(),
            head: self.head.clone(),
            body: self.body.clone(),
        }
    }

    pub fn vars(&self) -> Vec<Symbol> {
        self.as_query().vars()
    }

    pub fn constant_count(&self) -> usize {
        self.body.iter().map(TripleAtom::constant_count).sum()
    }

    /// The single all-variable atom `t(X, Y, Z)`.
    pub fn is_triple_table(&self) -> bool {
        self.body.len() == 1 && {
            let a = self.body[0];
            a.0.iter().all(Term::is_var) && a.s() != a.p() && a.p() != a.o() && a.s() != a.o()
        }
    }
}

impl fmt::Debug for View {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.as_query().to_text())
    }
}

/// Selection condition over the columns of an expression's output.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Cond {
    ColumnEqualsConstant { column: usize, value: Symbol },
    ColumnsEqual { left: usize, right: usize },
}

/// Relational algebra over view relations. Columns are positional: a scan
/// yields the view's head columns, a join yields the left columns followed
/// by the right ones.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Expr {
    Scan {
        view: u32,
    },
    Select {
        cond: Cond,
        input: Box<Expr>,
    },
    Project {
        columns: Vec<usize>,
        input: Box<Expr>,
    },
    /// Equi-join on column pairs (left column, right column). `natural`
    /// marks joins on identically named head variables.
    Join {
        on: Vec<(usize, usize)>,
        natural: bool,
        left: Box<Expr>,
        right: Box<Expr>,
    },
    Union {
        inputs: Vec<Expr>,
    },
}

impl Expr {
    pub fn scan(view: u32) -> Expr {
        Expr::Scan { view }
    }

    pub fn select(cond: Cond, input: Expr) -> Expr {
        Expr::Select {
            cond,
            input: Box::new(input),
        }
    }

    /// Projection; omitted when it keeps all `arity` columns in order.
    pub fn project(columns: Vec<usize>, arity: usize, input: Expr) -> Expr {
        if columns.len() == arity && columns.iter().enumerate().all(|(i, &c)| i == c) {
            input
        } else {
            Expr::Project {
                columns,
                input: Box::new(input),
            }
        }
    }

    pub fn join(on: Vec<(usize, usize)>, natural: bool, left: Expr, right: Expr) -> Expr {
        Expr::Join {
            on,
            natural,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    /// View ids in scan order, with repetitions.
    pub fn views(&self) -> Vec<u32> {
        let mut out = Vec::new();
        self.collect_views(&mut out);
        out
    }

    fn collect_views(&self, out: &mut Vec<u32>) {
        match self {
            Expr::Scan { view } => out.push(*view),
            Expr::Select { input, .. } | Expr::Project { input, .. } => input.collect_views(out),
            Expr::Join { left, right, .. } => {
                left.collect_views(out);
                right.collect_views(out);
            }
            Expr::Union { inputs } => inputs.iter().for_each(|e| e.collect_views(out)),
        }
    }

    pub fn uses(&self, id: u32) -> bool {
        match self {
            Expr::Scan { view } => *view == id,
            Expr::Select { input, .. } | Expr::Project { input, .. } => input.uses(id),
            Expr::Join { left, right, .. } => left.uses(id) || right.uses(id),
            Expr::Union { inputs } => inputs.iter().any(|e| e.uses(id)),
        }
    }

    /// Replaces every scan of `id` by `with`, which must produce the same
    /// columns as the view did.
    pub fn replace(&self, id: u32, with: &Expr) -> Expr {
        match self {
            Expr::Scan { view } if *view == id => with.clone(),
            Expr::Scan { .. } => self.clone(),
            Expr::Select { cond, input } => Expr::select(cond.clone(), input.replace(id, with)),
            Expr::Project { columns, input } => Expr::Project {
                columns: columns.clone(),
                input: Box::new(input.replace(id, with)),
            },
            Expr::Join {
                on,
                natural,
                left,
                right,
            } => Expr::join(on.clone(), *natural, left.replace(id, with), right.replace(id, with)),
            Expr::Union { inputs } => Expr::Union {
                inputs: inputs.iter().map(|e| e.replace(id, with)).collect(),
            },
        }
    }

    pub fn arity(&self, view_arity: &dyn Fn(u32) -> usize) -> usize {
        match self {
            Expr::Scan { view } => view_arity(*view),
            Expr::Select { input, .. } => input.arity(view_arity),
            Expr::Project { columns, .. } => columns.len(),
            Expr::Join { left, right, .. } => left.arity(view_arity) + right.arity(view_arity),
            Expr::Union { inputs } => inputs.first().map_or(0, |e| e.arity(view_arity)),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Scan { view } => write!(f, "v{view}"),
            Expr::Select { cond, input } => match cond {
                Cond::ColumnEqualsConstant { column, value } => write!(f, "σ[#{column}={value}]({input})"),
                Cond::ColumnsEqual { left, right } => write!(f, "σ[#{left}=#{right}]({input})"),
            },
            Expr::Project { columns, input } => {
                let cols: Vec<String> = columns.iter().map(|c| format!("#{c}")).collect();
                write!(f, "π[{}]({input})", cols.join(","))
            }
            Expr::Join {
                on,
                natural,
                left,
                right,
            } => {
                let conds: Vec<String> = on.iter().map(|(l, r)| format!("#{l}=#{r}")).collect();
                let sym = if *natural { "⋈" } else { "⋈θ" };
                write!(f, "({left} {sym}[{}] {right})", conds.join(","))
            }
            Expr::Union { inputs } => {
                let parts: Vec<String> = inputs.iter().map(|e| e.to_string()).collect();
                write!(f, "({})", parts.join(" ∪ "))
            }
        }
    }
}

/// The rewriting of one workload query.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rewriting {
    pub query: String,
    pub expr: Expr,
}

/// One view occurrence in a flattened rewriting: the view's columns bound
/// to rewriting-level terms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Occurrence {
    pub view: u32,
    pub columns: Vec<Term>,
}

/// A select-project-join expression flattened into a conjunctive query over
/// view relations: `output :- occ_1, ..., occ_n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpjForm {
    pub occurrences: Vec<Occurrence>,
    pub output: Vec<Term>,
}

/// Union-find over symbolic column terms.
struct Unifier {
    parent: HashMap<Symbol, Term>,
}

impl Unifier {
    fn find(&self, t: Term) -> Term {
        let mut t = t;
        while let Term::Var(v) = t {
            match self.parent.get(&v) {
                Some(&next) => t = next,
                None => break,
            }
        }
        t
    }

    /// False when two distinct constants are equated.
    fn union(&mut self, a: Term, b: Term) -> bool {
        let (a, b) = (self.find(a), self.find(b));
        match (a, b) {
            _ if a == b => true,
            (Term::Var(v), other) | (other, Term::Var(v)) => {
                self.parent.insert(v, other);
                true
            }
            _ => false,
        }
    }
}

/// Flattens each union branch of `expr` into SPJ form. `None` marks a branch
/// that can never produce a tuple (two different constants equated).
pub fn flatten(expr: &Expr, view_heads: &dyn Fn(u32) -> Vec<Term>) -> Vec<Option<SpjForm>> {
    let branches: Vec<&Expr> = match expr {
        Expr::Union { inputs } => inputs.iter().collect(),
        e => vec![e],
    };
    branches
        .into_iter()
        .map(|b| {
            let mut counter = 0usize;
            let mut occs = Vec::new();
            let mut uf = Unifier {
                parent: HashMap::new(),
            };
            let mut ok = true;
            let cols = walk(b, view_heads, &mut counter, &mut occs, &mut uf, &mut ok);
            ok.then(|| SpjForm {
                occurrences: occs
                    .into_iter()
                    .map(|(view, cols): (u32, Vec<Term>)| Occurrence {
                        view,
                        columns: cols.into_iter().map(|t| uf.find(t)).collect(),
                    })
                    .collect(),
                output: cols.into_iter().map(|t| uf.find(t)).collect(),
            })
        })
        .collect()
}

fn walk(
    e: &Expr,
    heads: &dyn Fn(u32) -> Vec<Term>,
    counter: &mut usize,
    occs: &mut Vec<(u32, Vec<Term>)>,
    uf: &mut Unifier,
    ok: &mut bool,
) -> Vec<Term> {
    match e {
        Expr::Scan { view } => {
            let cols: Vec<Term> = heads(*view)
                .into_iter()
                .map(|t| match t {
                    Term::Const(_) => t,
                    Term::Var(_) => {
                        *counter += 1;
                        Term::Var(Symbol::new(&format!("?_c{counter}")))
                    }
                })
                .collect();
            occs.push((*view, cols.clone()));
            cols
        }
        Expr::Select { cond, input } => {
            let cols = walk(input, heads, counter, occs, uf, ok);
            let fine = match cond {
                Cond::ColumnEqualsConstant { column, value } => uf.union(cols[*column], Term::Const(*value)),
                Cond::ColumnsEqual { left, right } => uf.union(cols[*left], cols[*right]),
            };
            *ok &= fine;
            cols
        }
        Expr::Project { columns, input } => {
            let cols = walk(input, heads, counter, occs, uf, ok);
            columns.iter().map(|&c| cols[c]).collect()
        }
        Expr::Join { on, left, right, .. } => {
            let mut l = walk(left, heads, counter, occs, uf, ok);
            let r = walk(right, heads, counter, occs, uf, ok);
            for &(a, b) in on {
                *ok &= uf.union(l[a], r[b]);
            }
            l.extend(r);
            l
        }
        Expr::Union { inputs } => {
            // nested unions do not occur; flatten the first branch
            inputs.first().map_or_else(Vec::new, |b| walk(b, heads, counter, occs, uf, ok))
        }
    }
}
