use std::collections::{BTreeSet, HashMap};

use super::{Cond, Expr, State};
use crate::error::{Error, Result};
use crate::store::{evaluate, Relation, TripleStore};
use crate::symbol::Symbol;

type Rows = BTreeSet<Vec<Symbol>>;

/// Evaluates a rewriting over materialized view relations.
pub fn execute(expr: &Expr, views: &HashMap<u32, Relation>) -> Result<Rows> {
    match expr {
        Expr::Scan { view } => views
            .get(view)
            .map(|r| r.rows.clone())
            .ok_or_else(|| Error::Invariant(format!("view v{view} is not materialized"))),
        Expr::Select { cond, input } => {
            let rows = execute(input, views)?;
            Ok(rows
                .into_iter()
                .filter(|r| match cond {
                    Cond::ColumnEqualsConstant { column, value } => r[*column] == *value,
                    Cond::ColumnsEqual { left, right } => r[*left] == r[*right],
                })
                .collect())
        }
        Expr::Project { columns, input } => Ok(execute(input, views)?
            .into_iter()
            .map(|r| columns.iter().map(|&c| r[c]).collect())
            .collect()),
        Expr::Join { on, left, right, .. } => {
            let l = execute(left, views)?;
            let r = execute(right, views)?;
            let mut index: HashMap<Vec<Symbol>, Vec<&Vec<Symbol>>> = HashMap::new();
            for row in &r {
                let key: Vec<Symbol> = on.iter().map(|&(_, b)| row[b]).collect();
                index.entry(key).or_default().push(row);
            }
            let mut out = Rows::new();
            for row in &l {
                let key: Vec<Symbol> = on.iter().map(|&(a, _)| row[a]).collect();
                for other in index.get(&key).into_iter().flatten() {
                    let mut joined = row.clone();
                    joined.extend(other.iter().copied());
                    out.insert(joined);
                }
            }
            Ok(out)
        }
        Expr::Union { inputs } => {
            let mut out = Rows::new();
            for e in inputs {
                out.extend(execute(e, views)?);
            }
            Ok(out)
        }
    }
}

/// Evaluates every view of the state over the store.
pub fn materialize_views(state: &State, store: &TripleStore) -> HashMap<u32, Relation> {
    state
        .views
        .iter()
        .map(|v| (v.id, evaluate(&v.as_query(), store)))
        .collect()
}
