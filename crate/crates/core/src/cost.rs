//! State cost: weighted sum of view space occupancy (VSO), rewriting
//! evaluation cost (REC) and view maintenance cost (VMC).

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Term, TripleAtom};
use crate::state::{flatten, Expr, Rewriting, State, View};
use crate::store::{estimate_cardinality, WorkloadStatistics};
use crate::symbol::Symbol;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostWeights {
    pub cs: f64,
    pub cr: f64,
    pub cm: f64,
    pub c1: f64,
    pub c2: f64,
    pub f: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        CostWeights {
            cs: 1.0,
            cr: 1.0,
            cm: 0.5,
            c1: 1.0,
            c2: 1.0,
            f: 2.0,
        }
    }
}

impl CostWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.cs, self.cr, self.cm, self.c1, self.c2, self.f];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Config("cost weights must be finite and non-negative".into()));
        }
        if self.f <= 1.0 {
            return Err(Error::Config("the maintenance factor f must exceed 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub vso: f64,
    pub rec: f64,
    pub vmc: f64,
    pub total: f64,
}

/// I/O and CPU estimates of one rewriting.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RewritingCost {
    pub io: f64,
    pub cpu: f64,
}

/// Cost estimation against fixed statistics, memoizing cardinalities.
pub struct CostModel {
    stats: Arc<WorkloadStatistics>,
    weights: CostWeights,
    memo: RefCell<HashMap<Vec<u64>, f64>>,
    rewriting_memo: RefCell<HashMap<RewritingKey, RewritingCost>>,
    /// Cardinalities by literal atom list.
    literal_memo: RefCell<HashMap<Vec<TripleAtom>, f64>>,
}

/// A rewriting together with the head and body of every view it reads.
type RewritingKey = (Expr, Vec<(Vec<Term>, Vec<TripleAtom>)>);

/// Entry count at which the rewriting and literal memos are flushed.
const MEMO_LIMIT: usize = 1 << 18;

/// Largest occurrence count for which join orders are enumerated exactly.
const EXACT_JOIN_ORDER: usize = 12;

impl CostModel {
    pub fn new(stats: Arc<WorkloadStatistics>, weights: CostWeights) -> Self {
        CostModel {
            stats,
            weights,
            memo: RefCell::new(HashMap::new()),
            rewriting_memo: RefCell::new(HashMap::new()),
            literal_memo: RefCell::new(HashMap::new()),
        }
    }

    pub fn weights(&self) -> &CostWeights {
        &self.weights
    }

    pub fn stats(&self) -> &WorkloadStatistics {
        &self.stats
    }

    /// Estimated cardinality of a body, independent of atom order and
    /// variable names.
    pub fn body_cardinality(&self, body: &[TripleAtom]) -> Result<f64> {
        if let Some(&c) = self.literal_memo.borrow().get(body) {
            return Ok(c);
        }
        let c = estimate_cardinality(body, &self.stats)?;
        let mut memo = self.literal_memo.borrow_mut();
        if memo.len() >= MEMO_LIMIT {
            memo.clear();
        }
        memo.insert(body.to_vec(), c);
        Ok(c)
    }

    pub fn view_cardinality(&self, v: &View) -> Result<f64> {
        if let Some(&c) = self.memo.borrow().get(&*v.body_key) {
            return Ok(c);
        }
        let c = estimate_cardinality(&v.body, &self.stats)?;
        self.memo.borrow_mut().insert(v.body_key.to_vec(), c);
        Ok(c)
    }

    /// Estimated bytes per tuple: each variable column takes the largest
    /// average value size among the positions it occupies.
    pub fn row_width(&self, v: &View) -> f64 {
        v.head
            .iter()
            .map(|t| match t {
                Term::Const(c) => c.len() as f64,
                Term::Var(_) => v
                    .body
                    .iter()
                    .flat_map(|a| (0..3).filter(move |&k| a.0[k] == *t))
                    .map(|k| self.stats.avg_bytes(k))
                    .fold(0.0, f64::max),
            })
            .sum()
    }

    pub fn vso(&self, s: &State) -> Result<f64> {
        s.views
            .iter()
            .map(|v| Ok(self.view_cardinality(v)? * self.row_width(v)))
            .sum()
    }

    pub fn vmc(&self, s: &State) -> f64 {
        s.views.iter().map(|v| self.weights.f.powi(v.len() as i32)).sum()
    }

    /// I/O and CPU cost of a rewriting.
    ///
    /// The rewriting is first flattened into a select-project-join block per
    /// union branch, so the estimate depends on which views it reads and how
    /// their columns are bound, not on the shape of the expression tree.
    /// Scans count as I/O. A selection costs the size of the view it filters;
    /// joins are hash joins costing |left| + |right| + |output| and are
    /// ordered left-deep by exhaustive search; projections are pipelined and
    /// free; a union costs the sizes of its inputs.
    pub fn rewriting_cost(&self, s: &State, r: &Rewriting) -> Result<RewritingCost> {
        let views = r
            .expr
            .views()
            .into_iter()
            .map(|id| {
                s.view(id)
                    .map(|v| (v.head.clone(), v.body.clone()))
                    .ok_or_else(|| Error::Invariant(format!("missing view v{id}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let key = (r.expr.clone(), views);
        if let Some(&c) = self.rewriting_memo.borrow().get(&key) {
            return Ok(c);
        }
        let c = self.compute_rewriting_cost(s, r)?;
        let mut memo = self.rewriting_memo.borrow_mut();
        if memo.len() >= MEMO_LIMIT {
            memo.clear();
        }
        memo.insert(key, c);
        Ok(c)
    }

    fn compute_rewriting_cost(&self, s: &State, r: &Rewriting) -> Result<RewritingCost> {
        let heads = |id: u32| s.view_head(id);
        let branches = flatten(&r.expr, &heads);
        let mut cost = RewritingCost::default();
        let several = branches.len() > 1;
        for spj in branches.into_iter().flatten() {
            let mut bodies: Vec<Vec<TripleAtom>> = Vec::new();
            for (k, occ) in spj.occurrences.iter().enumerate() {
                let v = s
                    .view(occ.view)
                    .ok_or_else(|| Error::Invariant(format!("missing view v{}", occ.view)))?;
                let card = self.view_cardinality(v)?;
                cost.io += card;
                let mut bind: HashMap<Symbol, Term> = HashMap::new();
                let mut selective = false;
                for (h, c) in v.head.iter().zip(&occ.columns) {
                    if let Term::Var(x) = h {
                        if bind.insert(*x, *c).is_some() || c.is_const() {
                            selective = true;
                        }
                    }
                }
                let mut seen_cols = std::collections::HashSet::new();
                if occ.columns.iter().any(|c| c.is_var() && !seen_cols.insert(*c)) {
                    selective = true;
                }
                if selective {
                    cost.cpu += card;
                }
                for x in v.vars() {
                    bind.entry(x)
                        .or_insert_with(|| Term::Var(Symbol::new(&format!("?_o{k}{x}"))));
                }
                bodies.push(v.body.iter().map(|a| a.substitute(&bind)).collect());
            }
            let (join_cpu, out) = self.join_cost(&bodies)?;
            cost.cpu += join_cpu;
            if several {
                cost.cpu += out;
            }
        }
        Ok(RewritingCost {
            io: cost.io,
            cpu: cost.cpu,
        })
    }

    /// Cheapest left-deep join order over the occurrence bodies; returns the
    /// join CPU cost and the estimated output size.
    fn join_cost(&self, bodies: &[Vec<TripleAtom>]) -> Result<(f64, f64)> {
        let n = bodies.len();
        let card_of = |mask: usize| -> Result<f64> {
            let atoms: Vec<TripleAtom> = (0..n)
                .filter(|i| mask & (1 << i) != 0)
                .flat_map(|i| bodies[i].iter().copied())
                .collect();
            self.body_cardinality(&crate::model::dedup_atoms(atoms))
        };
        if n == 0 {
            return Ok((0.0, 0.0));
        }
        if n > EXACT_JOIN_ORDER {
            // greedy: always add the occurrence giving the smallest result
            let mut mask = 0usize;
            let mut cur = 0.0;
            let mut total = 0.0;
            for step in 0..n {
                let mut best: Option<(f64, usize)> = None;
                for i in (0..n).filter(|i| mask & (1 << i) == 0) {
                    let c = card_of(mask | (1 << i))?;
                    if best.is_none_or(|(b, _)| c < b) {
                        best = Some((c, i));
                    }
                }
                let (c, i) = best.unwrap();
                if step > 0 {
                    total += cur + card_of(1 << i)? + c;
                }
                mask |= 1 << i;
                cur = c;
            }
            return Ok((total, cur));
        }
        let full = (1usize << n) - 1;
        let mut card = vec![0.0; full + 1];
        let mut best = vec![f64::INFINITY; full + 1];
        for mask in 1..=full {
            card[mask] = card_of(mask)?;
            if mask.count_ones() == 1 {
                best[mask] = 0.0;
            }
        }
        for mask in 1..=full {
            if mask.count_ones() < 2 {
                continue;
            }
            for i in 0..n {
                let bit = 1 << i;
                if mask & bit == 0 {
                    continue;
                }
                let rest = mask & !bit;
                let c = best[rest] + card[rest] + card[bit] + card[mask];
                if c < best[mask] {
                    best[mask] = c;
                }
            }
        }
        Ok((best[full], card[full]))
    }

    pub fn rec(&self, s: &State) -> Result<f64> {
        s.rewritings
            .iter()
            .map(|r| self.rewriting_cost(s, r).map(|c| self.combine(&c)))
            .sum()
    }

    pub fn combine(&self, c: &RewritingCost) -> f64 {
        self.weights.c1 * c.io + self.weights.c2 * c.cpu
    }

    pub fn breakdown(&self, vso: f64, rec: f64, vmc: f64) -> CostBreakdown {
        let w = &self.weights;
        CostBreakdown {
            vso,
            rec,
            vmc,
            total: w.cs * vso + w.cr * rec + w.cm * vmc,
        }
    }

    pub fn total_cost(&self, s: &State) -> Result<CostBreakdown> {
        Ok(self.breakdown(self.vso(s)?, self.rec(s)?, self.vmc(s)))
    }
}
