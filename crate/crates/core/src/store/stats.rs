//! Exact atom-pattern counts and uniformity-based cardinality estimation.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{evaluate_union, TripleStore};
use crate::error::{Error, Result};
use crate::model::{ConjunctiveQuery, Term, TripleAtom};
use crate::rdfs::{reformulate, Schema};
use crate::symbol::Symbol;

/// One position of an atom pattern. Variables are numbered by the first
/// position they occur at, so `t(X, p, X)` becomes `?0 p ?0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PatternTerm {
    Const(Symbol),
    Var(u8),
}

/// An atom up to variable renaming.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PatternKey(pub [PatternTerm; 3]);

impl PatternKey {
    pub fn of(atom: &TripleAtom) -> PatternKey {
        let mut out = [PatternTerm::Var(0); 3];
        for k in 0..3 {
            out[k] = match atom.0[k] {
                Term::Const(c) => PatternTerm::Const(c),
                t => PatternTerm::Var(atom.0.iter().position(|u| *u == t).unwrap() as u8),
            };
        }
        PatternKey(out)
    }

    /// The pattern as a one-atom query projecting its variables.
    pub fn to_query(&self) -> ConjunctiveQuery {
        let names = ["?S", "?P", "?O"];
        let terms: Vec<Term> = self
            .0
            .iter()
            .map(|t| match t {
                PatternTerm::Const(c) => Term::Const(*c),
                PatternTerm::Var(k) => Term::var(names[*k as usize]),
            })
            .collect();
        let atom = TripleAtom::new(terms[0], terms[1], terms[2]);
        let head = atom.vars().collect::<Vec<_>>();
        let mut seen = HashSet::new();
        let head = head
            .into_iter()
            .filter(|v| seen.insert(*v))
            .map(Term::Var)
            .collect();
        ConjunctiveQuery::new("pattern", head, vec![atom]).expect("pattern query is well formed")
    }

    /// Every pattern obtained by turning constants into variables and/or
    /// splitting repeated variables, including the pattern itself.
    pub fn relaxations(atom: &TripleAtom) -> Vec<PatternKey> {
        const PARTITIONS: [[u8; 3]; 5] = [[0, 0, 0], [0, 0, 1], [0, 1, 0], [0, 1, 1], [0, 1, 2]];
        let consts: Vec<usize> = (0..3).filter(|&k| atom.0[k].is_const()).collect();
        let mut out = BTreeSet::new();
        for keep in 0..(1u8 << consts.len()) {
            let kept: Vec<usize> = consts
                .iter()
                .enumerate()
                .filter(|(i, _)| keep & (1 << i) != 0)
                .map(|(_, &k)| k)
                .collect();
            for part in PARTITIONS {
                let free: Vec<usize> = (0..3).filter(|k| !kept.contains(k)).collect();
                let valid = free.iter().all(|&i| {
                    free.iter()
                        .all(|&j| part[i] != part[j] || atom.0[i] == atom.0[j])
                });
                if !valid {
                    continue;
                }
                let mut terms = [PatternTerm::Var(0); 3];
                for k in 0..3 {
                    terms[k] = if kept.contains(&k) {
                        PatternTerm::Const(atom.0[k].symbol())
                    } else {
                        let first = (0..3)
                            .find(|&j| !kept.contains(&j) && part[j] == part[k])
                            .unwrap();
                        PatternTerm::Var(first as u8)
                    };
                }
                out.insert(PatternKey(terms));
            }
        }
        out.into_iter().collect()
    }

    fn matches(&self, t: &[Symbol; 3]) -> bool {
        (0..3).all(|k| match self.0[k] {
            PatternTerm::Const(c) => t[k] == c,
            PatternTerm::Var(j) => t[k] == t[j as usize],
        })
    }

    fn count_in(&self, store: &TripleStore) -> u64 {
        let mut bound = [None; 3];
        for k in 0..3 {
            if let PatternTerm::Const(c) = self.0[k] {
                bound[k] = Some(c);
            }
        }
        store.matching(bound).iter().filter(|t| self.matches(t)).count() as u64
    }
}

impl fmt::Display for PatternKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .0
            .iter()
            .map(|t| match t {
                PatternTerm::Const(c) => c.to_string(),
                PatternTerm::Var(k) => format!("?{k}"),
            })
            .collect();
        f.write_str(&parts.join("\t"))
    }
}

impl FromStr for PatternKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split('\t').collect();
        if parts.len() != 3 {
            return Err(Error::parse(0, format!("bad pattern signature `{s}`")));
        }
        let mut out = [PatternTerm::Var(0); 3];
        for k in 0..3 {
            out[k] = match parts[k].strip_prefix('?').and_then(|d| d.parse::<u8>().ok()) {
                Some(j) if (j as usize) <= k => PatternTerm::Var(j),
                Some(_) => return Err(Error::parse(0, format!("bad pattern signature `{s}`"))),
                None => PatternTerm::Const(Symbol::new(parts[k])),
            };
        }
        Ok(PatternKey(out))
    }
}

impl Serialize for PatternKey {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for PatternKey {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub distinct: u64,
    pub min: Option<String>,
    pub max: Option<String>,
    /// Mean byte length of the values in this column, over all triples.
    pub avg_bytes: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WorkloadStatistics {
    pub total: u64,
    pub counts: BTreeMap<PatternKey, u64>,
    /// Subject, property and object column statistics.
    pub columns: [ColumnStats; 3],
}

fn column_stats<'a>(triples: impl Iterator<Item = [Symbol; 3]> + 'a) -> (u64, [ColumnStats; 3]) {
    let mut distinct: [HashSet<Symbol>; 3] = Default::default();
    let mut bytes = [0u64; 3];
    let mut n = 0u64;
    for t in triples {
        n += 1;
        for k in 0..3 {
            distinct[k].insert(t[k]);
            bytes[k] += t[k].len() as u64;
        }
    }
    let mut cols: [ColumnStats; 3] = Default::default();
    for k in 0..3 {
        let texts: Vec<std::sync::Arc<str>> = distinct[k].iter().map(|s| s.as_str()).collect();
        cols[k] = ColumnStats {
            distinct: distinct[k].len() as u64,
            min: texts.iter().min().map(|s| s.to_string()),
            max: texts.iter().max().map(|s| s.to_string()),
            avg_bytes: if n == 0 { 0.0 } else { bytes[k] as f64 / n as f64 },
        };
    }
    (n, cols)
}

/// Counts every workload atom pattern and all of its relaxations.
///
/// With a schema, counts are taken on the reformulated patterns over the raw
/// store, which yields the statistics of the saturated store without
/// saturating it.
pub fn collect_statistics(
    workload: &[ConjunctiveQuery],
    store: &TripleStore,
    schema: Option<&Schema>,
) -> WorkloadStatistics {
    let mut stats = match schema {
        None => {
            let (total, columns) = column_stats(store.triples());
            WorkloadStatistics {
                total,
                counts: BTreeMap::new(),
                columns,
            }
        }
        Some(s) => {
            let all = TripleAtom::new(Term::var("S"), Term::var("P"), Term::var("O"));
            let q = ConjunctiveQuery::new("all", all.0.to_vec(), vec![all]).unwrap();
            let rel = evaluate_union(&reformulate(&q, s), store);
            let (total, columns) = column_stats(rel.rows.iter().map(|r| [r[0], r[1], r[2]]));
            WorkloadStatistics {
                total,
                counts: BTreeMap::new(),
                columns,
            }
        }
    };
    stats.add_workload(workload, store, schema);
    stats
}

impl WorkloadStatistics {
    /// Records counts for atoms not seen so far.
    pub fn add_workload(
        &mut self,
        workload: &[ConjunctiveQuery],
        store: &TripleStore,
        schema: Option<&Schema>,
    ) {
        for q in workload {
            for atom in &q.body {
                for key in PatternKey::relaxations(atom) {
                    if self.counts.contains_key(&key) {
                        continue;
                    }
                    let n = match schema {
                        None => key.count_in(store),
                        Some(s) => evaluate_union(&reformulate(&key.to_query(), s), store).len() as u64,
                    };
                    self.counts.insert(key, n);
                }
            }
        }
    }

    pub fn count(&self, atom: &TripleAtom) -> Result<u64> {
        let key = PatternKey::of(atom);
        if key.0.iter().all(|t| matches!(t, PatternTerm::Var(_)))
            && key.0 == [PatternTerm::Var(0), PatternTerm::Var(1), PatternTerm::Var(2)]
        {
            return Ok(self.total);
        }
        self.counts
            .get(&key)
            .copied()
            .ok_or_else(|| Error::MissingStatistic(key.to_string().replace('\t', " ")))
    }

    /// Average byte size of a value at the given position.
    pub fn avg_bytes(&self, pos: usize) -> f64 {
        self.columns[pos].avg_bytes
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(src: &str) -> Result<Self> {
        Ok(serde_json::from_str(src)?)
    }
}

/// Estimated number of distinct body matches of a view body.
///
/// Single atoms use their exact recorded count. Larger bodies multiply the
/// atom counts and, for every variable shared by k atoms, divide by the k-1
/// largest distinct-value counts of the columns it occupies. The divisors
/// depend only on where variables occur, so the estimate ignores atom order
/// and never shrinks when a constant is relaxed to a fresh variable.
pub fn estimate_cardinality(body: &[TripleAtom], stats: &WorkloadStatistics) -> Result<f64> {
    let counts: Vec<u64> = body.iter().map(|a| stats.count(a)).collect::<Result<_>>()?;
    if counts.contains(&0) {
        return Ok(0.0);
    }
    if body.len() == 1 {
        return Ok(counts[0] as f64);
    }
    let mut columns: HashMap<Symbol, Vec<f64>> = HashMap::new();
    for atom in body {
        let mut own: HashMap<Symbol, f64> = HashMap::new();
        for k in 0..3 {
            if let Term::Var(v) = atom.0[k] {
                let d = (stats.columns[k].distinct as f64).max(1.0);
                let e = own.entry(v).or_insert(d);
                *e = e.max(d);
            }
        }
        for (v, d) in own {
            columns.entry(v).or_default().push(d);
        }
    }
    let mut card: f64 = counts.iter().map(|&c| c as f64).product();
    for mut ds in columns.into_values() {
        ds.sort_by(|a, b| b.total_cmp(a));
        for d in &ds[..ds.len() - 1] {
            card /= d;
        }
    }
    Ok(card.max(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_query;

    #[test]
    fn relaxations_of_two_constant_atom() {
        let q = parse_query("q(X) :- t(X, rdf:type, picture) .").unwrap();
        let r = PatternKey::relaxations(&q.body[0]);
        // itself, two single-constant relaxations, the all-variable atom
        assert_eq!(r.len(), 4);
    }

    #[test]
    fn relaxations_split_repeated_variables() {
        let q = parse_query("q(X) :- t(X, p, X) .").unwrap();
        let r: Vec<String> = PatternKey::relaxations(&q.body[0]).iter().map(|k| k.to_string()).collect();
        assert!(r.contains(&"?0\tp\t?0".to_string()));
        assert!(r.contains(&"?0\tp\t?2".to_string()));
        assert!(r.contains(&"?0\t?1\t?0".to_string()));
        assert!(r.contains(&"?0\t?1\t?2".to_string()));
        assert_eq!(r.len(), 4);
    }

    #[test]
    fn signature_round_trip() {
        let q = parse_query("q(X) :- t(X, \"a b\", X) .").unwrap();
        for k in PatternKey::relaxations(&q.body[0]) {
            assert_eq!(k.to_string().parse::<PatternKey>().unwrap(), k);
        }
    }

    #[test]
    fn subject_subject_join_formula() {
        let st = TripleStore::load_str(
            "a p x\nb p x\nc p y\na q 1\na q 2\nb q 3\nd q 4\ne r 5\nf r 6\ng r 7\n",
        )
        .unwrap();
        let q = parse_query("q(X) :- t(X, p, Y), t(X, q, Z) .").unwrap();
        let stats = collect_statistics(&[q.clone()], &st, None);
        // |A| = 3, |B| = 4, distinct subjects in the store = 7
        let est = estimate_cardinality(&q.body, &stats).unwrap();
        assert!((est - 3.0 * 4.0 / 7.0).abs() < 1e-12);
        assert_eq!(stats.count(&q.body[0]).unwrap(), 3);
    }

    #[test]
    fn all_variable_pattern_is_dataset_size() {
        let st = TripleStore::load_str("a p b\nc q d\ne r f\n").unwrap();
        let q = parse_query("q(X) :- t(X, Y, Z) .").unwrap();
        let stats = collect_statistics(&[q.clone()], &st, None);
        assert_eq!(stats.total, 3);
        assert_eq!(estimate_cardinality(&q.body, &stats).unwrap(), 3.0);
    }

    #[test]
    fn missing_statistic() {
        let stats = WorkloadStatistics::default();
        let q = parse_query("q(X) :- t(X, p, c) .").unwrap();
        assert!(matches!(
            estimate_cardinality(&q.body, &stats),
            Err(Error::MissingStatistic(_))
        ));
    }

    #[test]
    fn json_round_trip() {
        let st = TripleStore::load_str("a p b\nc p \"x y\"\n").unwrap();
        let q = parse_query("q(X) :- t(X, p, \"x y\") .").unwrap();
        let stats = collect_statistics(&[q], &st, None);
        let back = WorkloadStatistics::from_json(&stats.to_json().unwrap()).unwrap();
        assert_eq!(back, stats);
    }
}
