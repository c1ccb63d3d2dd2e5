//! Synthetic workloads, triple stores and schemas for benchmarks and tests.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{minimize, ConjunctiveQuery, Term, TripleAtom};
use crate::rdfs::{Schema, Statement, StatementKind};
use crate::store::{has_answer, Triple, TripleStore};
use crate::symbol::{rdf_type, Symbol};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shape {
    Star,
    Chain,
    Cycle,
    RandomSparse,
    RandomDense,
    Mixed,
}

impl Shape {
    const CONCRETE: [Shape; 5] = [
        Shape::Star,
        Shape::Chain,
        Shape::Cycle,
        Shape::RandomSparse,
        Shape::RandomDense,
    ];
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Shape::Star => "star",
            Shape::Chain => "chain",
            Shape::Cycle => "cycle",
            Shape::RandomSparse => "random-sparse",
            Shape::RandomDense => "random-dense",
            Shape::Mixed => "mixed",
        })
    }
}

impl FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "star" => Ok(Shape::Star),
            "chain" => Ok(Shape::Chain),
            "cycle" => Ok(Shape::Cycle),
            "random-sparse" | "sparse" => Ok(Shape::RandomSparse),
            "random-dense" | "dense" => Ok(Shape::RandomDense),
            "mixed" => Ok(Shape::Mixed),
            other => Err(Error::Config(format!("unknown query shape `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Commonality {
    Low,
    High,
}

impl FromStr for Commonality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "low" => Ok(Commonality::Low),
            "high" => Ok(Commonality::High),
            other => Err(Error::Config(format!("unknown commonality `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub shape: Shape,
    pub queries: usize,
    pub atoms: usize,
    pub commonality: Commonality,
    /// Probability that a non-join subject or object becomes a constant.
    pub constant_density: f64,
    pub seed: u64,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        WorkloadSpec {
            shape: Shape::Chain,
            queries: 5,
            atoms: 5,
            commonality: Commonality::Low,
            constant_density: 0.3,
            seed: 0,
        }
    }
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<()> {
        if self.queries == 0 {
            return Err(Error::Config("query count must be at least 1".into()));
        }
        if self.atoms == 0 {
            return Err(Error::Config("atoms per query must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.constant_density) {
            return Err(Error::Config("constant density must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Directed multigraph: node = variable, edge = atom from subject to object.
type Skeleton = Vec<(usize, usize)>;

const ATTEMPTS: usize = 200;
/// Share of possible join edges a dense query must reach.
const DENSE: f64 = 0.6;

fn skeleton(shape: Shape, k: usize, rng: &mut ChaCha8Rng) -> Skeleton {
    match shape {
        Shape::Star => (1..=k).map(|i| (0, i)).collect(),
        Shape::Chain => (0..k).map(|i| (i, i + 1)).collect(),
        Shape::Cycle => (0..k).map(|i| (i, (i + 1) % k)).collect(),
        Shape::RandomSparse => {
            if k == 1 {
                return vec![(0, 1)];
            }
            let mut edges = random_tree(k, rng);
            let (a, b) = (rng.gen_range(0..k), rng.gen_range(0..k));
            edges.push(if a == b { (a, (a + 1) % k) } else { (a, b) });
            edges
        }
        Shape::RandomDense => {
            let mut best = Vec::new();
            let mut best_density = -1.0;
            for _ in 0..ATTEMPTS {
                let n = (k / 3 + 2).min(k + 1);
                let mut edges = random_tree(n, rng);
                while edges.len() < k {
                    let a = rng.gen_range(0..n);
                    let mut b = rng.gen_range(0..n);
                    if a == b {
                        b = (a + 1) % n;
                    }
                    edges.push((a, b));
                }
                edges.truncate(k);
                let d = join_density(&edges);
                if d >= DENSE {
                    return edges;
                }
                if d > best_density {
                    best_density = d;
                    best = edges;
                }
            }
            best
        }
        Shape::Mixed => {
            let concrete = *Shape::CONCRETE.choose(rng).unwrap();
            skeleton(concrete, k, rng)
        }
    }
}

/// Random spanning tree over `n` nodes with random edge directions.
fn random_tree(n: usize, rng: &mut ChaCha8Rng) -> Skeleton {
    (1..n)
        .map(|i| {
            let j = rng.gen_range(0..i);
            if rng.gen_bool(0.5) {
                (j, i)
            } else {
                (i, j)
            }
        })
        .collect()
}

/// Fraction of atom pairs sharing a variable.
pub fn join_density(edges: &[(usize, usize)]) -> f64 {
    let k = edges.len();
    if k < 2 {
        return 1.0;
    }
    let mut joined = 0;
    for i in 0..k {
        for j in i + 1..k {
            let (a, b) = edges[i];
            let (c, d) = edges[j];
            if a == c || a == d || b == c || b == d {
                joined += 1;
            }
        }
    }
    joined as f64 / (k * (k - 1) / 2) as f64
}

/// Label choices for one query: property and, per endpoint, a constant
/// value used if that endpoint becomes a constant.
#[derive(Clone)]
struct Labels {
    props: Vec<Symbol>,
    values: HashMap<usize, Symbol>,
}

struct Vocabulary {
    properties: Vec<Symbol>,
    constants: Vec<Symbol>,
}

impl Vocabulary {
    fn synthetic() -> Self {
        Vocabulary {
            properties: (0..20).map(|i| Symbol::new(&format!("p{i}"))).collect(),
            constants: (0..50).map(|i| Symbol::new(&format!("c{i}"))).collect(),
        }
    }
}

/// Turns a labeled skeleton into a query. Endpoints used once become
/// constants with probability `density`, never both ends of one atom.
fn build_query(
    name: &str,
    edges: &Skeleton,
    labels: &Labels,
    density: f64,
    rng: &mut ChaCha8Rng,
) -> Option<ConjunctiveQuery> {
    let mut uses: HashMap<usize, usize> = HashMap::new();
    for &(a, b) in edges {
        *uses.entry(a).or_default() += 1;
        *uses.entry(b).or_default() += 1;
    }
    let mut nodes: Vec<usize> = uses.keys().copied().collect();
    nodes.sort_unstable();
    let mut constant: HashSet<usize> = HashSet::new();
    for &(a, b) in edges {
        let mut ends = [a, b];
        ends.shuffle(rng);
        for n in ends {
            if a == b || uses[&n] != 1 || constant.contains(&a) || constant.contains(&b) {
                continue;
            }
            if rng.gen_bool(density) {
                constant.insert(n);
            }
        }
    }
    let term = |n: usize| {
        if constant.contains(&n) {
            Term::Const(labels.values[&n])
        } else {
            Term::var(&format!("X{n}"))
        }
    };
    let body: Vec<TripleAtom> = edges
        .iter()
        .zip(&labels.props)
        .map(|(&(a, b), &p)| TripleAtom::new(term(a), Term::Const(p), term(b)))
        .collect();
    let vars: Vec<usize> = nodes.iter().copied().filter(|n| !constant.contains(n)).collect();
    let mut head: Vec<Term> = vars.iter().filter(|_| rng.gen_bool(0.5)).map(|&n| term(n)).collect();
    if head.is_empty() {
        head.push(term(*vars.choose(rng)?));
    }
    let q = ConjunctiveQuery::new(name, head, body).ok()?;
    let minimal = minimize(&q).body.len() == edges.len();
    (minimal && q.is_connected()).then_some(q)
}

fn synthetic_labels(
    edges: &Skeleton,
    vocab: &Vocabulary,
    pool: Option<&[Symbol]>,
    rng: &mut ChaCha8Rng,
) -> Labels {
    let props = (0..edges.len())
        .map(|i| match pool {
            Some(p) if rng.gen_bool(0.8) => p[i % p.len()],
            _ => *vocab.properties.choose(rng).unwrap(),
        })
        .collect();
    let values = edges
        .iter()
        .flat_map(|&(a, b)| [a, b])
        .map(|n| (n, *vocab.constants.choose(rng).unwrap()))
        .collect();
    Labels { props, values }
}

/// Backtracking search for store values of the skeleton's nodes, one
/// matching triple per edge, preferring the pool's properties where given.
struct Embedding<'a> {
    edges: &'a Skeleton,
    order: Vec<usize>,
    store: &'a TripleStore,
    pool: Option<&'a [Symbol]>,
    values: HashMap<usize, Symbol>,
    props: Vec<Symbol>,
    budget: usize,
}

impl Embedding<'_> {
    fn step(&mut self, d: usize, rng: &mut ChaCha8Rng) -> bool {
        if d == self.order.len() {
            return true;
        }
        let i = self.order[d];
        let (a, b) = self.edges[i];
        let mut cands: Vec<Triple> = if self.values.is_empty() {
            let all: Vec<Triple> = self.store.triples().collect();
            all.choose_multiple(rng, 64).copied().collect()
        } else {
            self.store
                .matching([self.values.get(&a).copied(), None, self.values.get(&b).copied()])
        };
        cands.shuffle(rng);
        if let Some(p) = self.pool {
            let want = p[i % p.len()];
            if rng.gen_bool(0.8) {
                cands.sort_by_key(|t| t[1] != want);
            }
        }
        for t in cands.into_iter().take(16) {
            if self.budget == 0 {
                return false;
            }
            self.budget -= 1;
            if a == b && t[0] != t[2] {
                continue;
            }
            let fresh_a = !self.values.contains_key(&a);
            let fresh_b = !self.values.contains_key(&b);
            self.values.insert(a, t[0]);
            self.values.insert(b, t[2]);
            self.props[i] = t[1];
            if self.step(d + 1, rng) {
                return true;
            }
            if fresh_a {
                self.values.remove(&a);
            }
            if fresh_b {
                self.values.remove(&b);
            }
        }
        false
    }
}

fn embed(edges: &Skeleton, store: &TripleStore, pool: Option<&[Symbol]>, rng: &mut ChaCha8Rng) -> Option<Labels> {
    // Visit edges so that each one after the first touches a bound node.
    let mut order = Vec::with_capacity(edges.len());
    let mut bound: HashSet<usize> = HashSet::new();
    let mut left: Vec<usize> = (0..edges.len()).collect();
    while !left.is_empty() {
        let pos = left
            .iter()
            .position(|&i| bound.is_empty() || bound.contains(&edges[i].0) || bound.contains(&edges[i].1))?;
        let i = left.remove(pos);
        bound.insert(edges[i].0);
        bound.insert(edges[i].1);
        order.push(i);
    }
    let mut e = Embedding {
        edges,
        order,
        store,
        pool,
        values: HashMap::new(),
        props: vec![Symbol::new(""); edges.len()],
        budget: 2000,
    };
    e.step(0, rng).then_some(Labels {
        props: e.props,
        values: e.values,
    })
}

/// Generates a workload. With a store, every query is non-empty on it and
/// constants come from the store; otherwise labels come from a synthetic
/// vocabulary.
pub fn generate(spec: &WorkloadSpec, store: Option<&TripleStore>) -> Result<Vec<ConjunctiveQuery>> {
    spec.validate()?;
    if store.is_some_and(|s| s.is_empty()) {
        return Err(Error::Generation("cannot generate satisfiable queries on an empty store".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let vocab = match store {
        Some(s) => frequent_vocabulary(s),
        None => Vocabulary::synthetic(),
    };
    let pool: Vec<Vec<Symbol>> = match spec.commonality {
        Commonality::Low => Vec::new(),
        Commonality::High => (0..(spec.queries / 2).max(1))
            .map(|_| (0..spec.atoms).map(|_| *vocab.properties.choose(&mut rng).unwrap()).collect())
            .collect(),
    };
    let mut out = Vec::with_capacity(spec.queries);
    let mut seen = HashSet::new();
    for qi in 1..=spec.queries {
        let name = format!("q{qi}");
        let mut made = None;
        for _ in 0..ATTEMPTS {
            let edges = skeleton(spec.shape, spec.atoms, &mut rng);
            let shared = (!pool.is_empty()).then(|| pool.choose(&mut rng).unwrap().as_slice());
            let labels = match store {
                Some(s) => match embed(&edges, s, shared, &mut rng) {
                    Some(l) => l,
                    None => continue,
                },
                None => synthetic_labels(&edges, &vocab, shared, &mut rng),
            };
            let Some(q) = build_query(&name, &edges, &labels, spec.constant_density, &mut rng) else {
                continue;
            };
            if store.is_some_and(|s| !has_answer(&q, s)) {
                continue;
            }
            if seen.insert(q.to_text()) {
                made = Some(q);
                break;
            }
        }
        match made {
            Some(q) => out.push(q),
            None => {
                return Err(Error::Generation(format!(
                    "no valid {} query of {} atoms after {ATTEMPTS} attempts",
                    spec.shape, spec.atoms
                )))
            }
        }
    }
    Ok(out)
}

fn frequent_vocabulary(store: &TripleStore) -> Vocabulary {
    let mut props: HashMap<Symbol, usize> = HashMap::new();
    let mut values: HashMap<Symbol, usize> = HashMap::new();
    for t in store.triples() {
        *props.entry(t[1]).or_default() += 1;
        *values.entry(t[0]).or_default() += 1;
        *values.entry(t[2]).or_default() += 1;
    }
    let top = |m: HashMap<Symbol, usize>, n: usize| {
        let mut v: Vec<(Symbol, usize)> = m.into_iter().collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.as_str().cmp(&b.0.as_str())));
        v.into_iter().take(n).map(|(s, _)| s).collect()
    };
    Vocabulary {
        properties: top(props, 20),
        constants: top(values, 50),
    }
}

/// Parameters of a synthetic triple store with skewed value frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreSpec {
    pub triples: usize,
    pub resources: usize,
    pub properties: usize,
    pub classes: usize,
    /// Share of `rdf:type` triples.
    pub typing: f64,
    pub seed: u64,
}

impl StoreSpec {
    pub fn new(triples: usize, seed: u64) -> Self {
        StoreSpec {
            triples,
            // About 50 triples per resource, so that joins fan out.
            resources: (triples / 50).max(8),
            properties: 12,
            classes: 8,
            typing: 0.15,
            seed,
        }
    }

    pub fn property_names(&self) -> Vec<Symbol> {
        (0..self.properties).map(|i| Symbol::new(&format!("p{i}"))).collect()
    }

    pub fn class_names(&self) -> Vec<Symbol> {
        (0..self.classes).map(|i| Symbol::new(&format!("C{i}"))).collect()
    }
}

fn zipf(n: usize) -> WeightedIndex<f64> {
    WeightedIndex::new((1..=n).map(|i| 1.0 / i as f64)).expect("non-empty weights")
}

pub fn generate_store(spec: &StoreSpec) -> Result<TripleStore> {
    if spec.resources == 0 || spec.properties == 0 || spec.classes == 0 {
        return Err(Error::Config("store vocabulary sizes must be positive".into()));
    }
    let capacity = spec.resources * spec.resources * spec.properties + spec.resources * spec.classes;
    if spec.triples > capacity / 2 {
        return Err(Error::Config("too many triples for the vocabulary".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let resources: Vec<Symbol> = (0..spec.resources).map(|i| Symbol::new(&format!("r{i}"))).collect();
    let props = spec.property_names();
    let classes = spec.class_names();
    let (rz, pz, cz) = (zipf(resources.len()), zipf(props.len()), zipf(classes.len()));
    let mut set: BTreeSet<Triple> = BTreeSet::new();
    while set.len() < spec.triples {
        let s = resources[rz.sample(&mut rng)];
        let t = if rng.gen_bool(spec.typing) {
            [s, rdf_type(), classes[cz.sample(&mut rng)]]
        } else {
            // Objects are drawn uniformly so joins do not all collapse on
            // the most frequent resources.
            [s, props[pz.sample(&mut rng)], *resources.choose(&mut rng).unwrap()]
        };
        set.insert(t);
    }
    Ok(TripleStore::from_triples(set))
}

/// A random acyclic schema over the given vocabulary with `statements`
/// distinct statements.
pub fn generate_schema(statements: usize, properties: &[Symbol], classes: &[Symbol], seed: u64) -> Result<Schema> {
    let (np, nc) = (properties.len(), classes.len());
    let max = nc * nc.saturating_sub(1) / 2 + np * np.saturating_sub(1) / 2 + 2 * np * nc;
    if statements > max {
        return Err(Error::Config(format!("at most {max} statements fit the vocabulary")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut set = BTreeSet::new();
    while set.len() < statements {
        let kind = *[
            StatementKind::SubClassOf,
            StatementKind::SubPropertyOf,
            StatementKind::Domain,
            StatementKind::Range,
        ]
        .choose(&mut rng)
        .unwrap();
        let ordered = |n: usize, rng: &mut ChaCha8Rng| {
            let a = rng.gen_range(0..n);
            let b = rng.gen_range(0..n);
            (a.min(b), a.max(b))
        };
        let st = match kind {
            StatementKind::SubClassOf if nc > 1 => {
                let (a, b) = ordered(nc, &mut rng);
                if a == b {
                    continue;
                }
                (kind, classes[a], classes[b])
            }
            StatementKind::SubPropertyOf if np > 1 => {
                let (a, b) = ordered(np, &mut rng);
                if a == b {
                    continue;
                }
                (kind, properties[a], properties[b])
            }
            StatementKind::Domain | StatementKind::Range if np > 0 && nc > 0 => {
                (kind, *properties.choose(&mut rng).unwrap(), *classes.choose(&mut rng).unwrap())
            }
            _ => continue,
        };
        set.insert(Statement {
            kind: st.0,
            lhs: st.1,
            rhs: st.2,
        });
    }
    Ok(Schema::new(set))
}
