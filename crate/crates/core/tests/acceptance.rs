//! Acceptance suite: one PASS/FAIL line per criterion.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rdfvs_core::model::{canonical_form, parse_queries, parse_query, ConjunctiveQuery, HeadMode, Pos, Term, TripleAtom};
use rdfvs_core::pipeline::{Mode, RunManifest, TuneDocument};
use rdfvs_core::rdfs::{reformulate, saturate, Schema, Statement, StatementKind};
use rdfvs_core::search::{search_observed, Audit, Outcome, SearchConfig, SearchResult, Strategy, Termination};
use rdfvs_core::state::{execute, materialize_views, Expr, Fresh, Signature, State, Transition, TransitionKind};
use rdfvs_core::store::{collect_statistics, evaluate_union, TripleStore, WorkloadStatistics};
use rdfvs_core::symbol::Symbol;
use rdfvs_core::workload::{
    generate, generate_schema, generate_store, Commonality, Shape, StoreSpec, WorkloadSpec,
};

type Rows = BTreeSet<Vec<Symbol>>;

/// Monotonicity evidence gathered from every search the suite runs.
#[derive(Default)]
struct Ledger {
    audit: Audit,
    searches: usize,
    /// SC and VF steps re-checked from observed costs, outside the engine.
    observed_sc: u64,
    observed_vf: u64,
    observed_violations: Vec<String>,
    /// Names the workload in violation messages.
    label: String,
}

impl Ledger {
    fn search(
        &mut self,
        s0: State,
        stats: &Arc<WorkloadStatistics>,
        config: &SearchConfig,
        fresh: &mut Fresh,
        mut visit: impl FnMut(&rdfvs_core::search::Visit<'_>),
    ) -> SearchResult {
        let mut sc = 0;
        let mut vf = 0;
        let mut bad = Vec::new();
        let avf = config.avf;
        let label = &self.label;
        let result = search_observed(s0, stats, config, fresh, &mut |v| {
            // Under AVF a non-VF arrival already carries the fused cost.
            if let (Some(kind), Some(before)) = (v.via, v.parent_cost) {
                if v.outcome != Outcome::Intermediate && !(avf && kind != TransitionKind::VF) {
                    match kind {
                        TransitionKind::SC => {
                            sc += 1;
                            if v.cost < before {
                                bad.push(format!("{label}: SC {before} -> {}", v.cost));
                            }
                        }
                        TransitionKind::VF => {
                            vf += 1;
                            if v.cost > before {
                                bad.push(format!("{label}: VF {before} -> {}", v.cost));
                            }
                        }
                        _ => {}
                    }
                }
            }
            visit(v);
        })
        .expect("search");
        self.observed_sc += sc;
        self.observed_vf += vf;
        self.observed_violations.extend(bad);
        self.audit.merge(&result.report.audit);
        self.searches += 1;
        result
    }
}

// ---------------------------------------------------------------------------
// Independent oracles

/// Naive RDFS fixpoint over instance triples.
fn naive_saturate(triples: &[[Symbol; 3]], schema: &Schema) -> HashSet<[Symbol; 3]> {
    let ty = Symbol::new("rdf:type");
    let mut all: HashSet<[Symbol; 3]> = triples.iter().copied().collect();
    loop {
        let mut new = Vec::new();
        for t in &all {
            for st in schema.statements() {
                let derived = match st.kind {
                    StatementKind::SubClassOf if t[1] == ty && t[2] == st.lhs => Some([t[0], ty, st.rhs]),
                    StatementKind::SubPropertyOf if t[1] == st.lhs => Some([t[0], st.rhs, t[2]]),
                    StatementKind::Domain if t[1] == st.lhs => Some([t[0], ty, st.rhs]),
                    StatementKind::Range if t[1] == st.lhs => Some([t[2], ty, st.rhs]),
                    _ => None,
                };
                if let Some(d) = derived {
                    if !all.contains(&d) {
                        new.push(d);
                    }
                }
            }
        }
        if new.is_empty() {
            return all;
        }
        all.extend(new);
    }
}

/// Nested-loop evaluation of a conjunctive query.
fn naive_eval(q: &ConjunctiveQuery, triples: &[[Symbol; 3]]) -> Rows {
    fn go(q: &ConjunctiveQuery, i: usize, triples: &[[Symbol; 3]], env: &mut HashMap<Symbol, Symbol>, out: &mut Rows) {
        if i == q.body.len() {
            out.insert(
                q.head
                    .iter()
                    .map(|t| match t {
                        Term::Var(v) => env[v],
                        Term::Const(c) => *c,
                    })
                    .collect(),
            );
            return;
        }
        for t in triples {
            let mut bound = Vec::new();
            let mut ok = true;
            for k in 0..3 {
                match q.body[i].0[k] {
                    Term::Const(c) => ok = c == t[k],
                    Term::Var(v) => match env.get(&v) {
                        Some(&x) => ok = x == t[k],
                        None => {
                            env.insert(v, t[k]);
                            bound.push(v);
                        }
                    },
                }
                if !ok {
                    break;
                }
            }
            if ok {
                go(q, i + 1, triples, env, out);
            }
            for v in bound {
                env.remove(&v);
            }
        }
    }
    let mut out = Rows::new();
    go(q, 0, triples, &mut HashMap::new(), &mut out);
    out
}

fn body_key(v: &ConjunctiveQuery) -> Vec<u64> {
    canonical_form(&v.head, &v.body, HeadMode::Ignored).key
}

fn view_key(v: &ConjunctiveQuery) -> Vec<u64> {
    canonical_form(&v.head, &v.body, HeadMode::Unordered).key
}

// ---------------------------------------------------------------------------
// 1. Running example

const Q1: &str = "q1(X, Z) :- t(X, hasPainted, starryNight), t(X, isParentOf, Y), t(Y, hasPainted, Z) .";

fn find(s: &State, kind: TransitionKind, pick: impl Fn(&State, &Transition) -> bool) -> Transition {
    let all = s.transitions(&[kind]);
    all.iter()
        .find(|t| pick(s, t))
        .cloned()
        .unwrap_or_else(|| {
            let views: Vec<String> = s.views.iter().map(|v| format!("v{} {}", v.id, v.as_query().to_text())).collect();
            panic!("no matching {kind} transition among {all:?} over {views:?}")
        })
}

fn atom_of(s: &State, view: u32, atom: usize) -> TripleAtom {
    s.view(view).unwrap().body[atom]
}

fn has(a: &TripleAtom, p: &str) -> bool {
    a.p() == Term::constant(p)
}

/// Shape of a rewriting with projections dropped, scans labelled by the
/// expected view they match and join operands in sorted order.
fn skeleton(e: &Expr, s: &State, names: &[(&str, Vec<u64>)]) -> String {
    match e {
        Expr::Scan { view } => {
            let key = view_key(&s.view(*view).unwrap().as_query());
            names
                .iter()
                .find(|(_, k)| *k == key)
                .map_or_else(|| format!("?v{view}"), |(n, _)| n.to_string())
        }
        Expr::Project { input, .. } => skeleton(input, s, names),
        Expr::Select { input, .. } => format!("σ({})", skeleton(input, s, names)),
        Expr::Join { left, right, .. } => {
            let (a, b) = (skeleton(left, s, names), skeleton(right, s, names));
            format!("({} ⋈ {})", a.clone().min(b.clone()), a.max(b))
        }
        Expr::Union { inputs } => {
            let mut parts: Vec<String> = inputs.iter().map(|i| skeleton(i, s, names)).collect();
            parts.sort();
            format!("({})", parts.join(" ∪ "))
        }
    }
}

fn check_state(step: &str, s: &State, expected: &[(&str, &str)], shape: &str) -> Result<(), String> {
    let names: Vec<(&str, Vec<u64>)> = expected
        .iter()
        .map(|(n, text)| (*n, view_key(&parse_query(text).unwrap())))
        .collect();
    let got: Vec<Vec<u64>> = s.views.iter().map(|v| view_key(&v.as_query())).collect();
    let mut want: Vec<Vec<u64>> = names.iter().map(|(_, k)| k.clone()).collect();
    let mut have = got.clone();
    want.sort();
    have.sort();
    if want != have {
        let views: Vec<String> = s.views.iter().map(|v| v.as_query().to_text()).collect();
        return Err(format!("{step}: views {views:?}"));
    }
    let sk = skeleton(&s.rewritings[0].expr, s, &names);
    if sk != shape {
        return Err(format!("{step}: rewriting {sk}, expected {shape}"));
    }
    s.validate().map_err(|e| format!("{step}: {e}"))
}

fn criterion_1(_: &mut Ledger) -> Result<String, String> {
    let q = parse_query(Q1).unwrap();
    let mut fresh = Fresh::default();
    let s0 = State::initial(std::slice::from_ref(&q), &mut fresh).unwrap();
    let v1 = s0.views[0].id;

    // VB: {n1, n2} and {n2, n3}.
    let vb = find(&s0, TransitionKind::VB, |s, t| match t {
        Transition::VB { view, left, right } => {
            let side = |mask: u64| -> BTreeSet<String> {
                (0..3)
                    .filter(|i| mask & (1 << i) != 0)
                    .map(|i| atom_of(s, *view, i).to_string())
                    .collect()
            };
            let n1 = "t(?X, hasPainted, starryNight)";
            let n2 = "t(?X, isParentOf, ?Y)";
            let n3 = "t(?Y, hasPainted, ?Z)";
            let a: BTreeSet<String> = [n1, n2].iter().map(|s| s.to_string()).collect();
            let b: BTreeSet<String> = [n2, n3].iter().map(|s| s.to_string()).collect();
            *view == v1 && ((side(*left) == a && side(*right) == b) || (side(*left) == b && side(*right) == a))
        }
        _ => false,
    });
    let s1 = s0.apply(&vb, &mut fresh).unwrap();
    check_state(
        "S1",
        &s1,
        &[
            ("v2", "v2(X, Y) :- t(X, hasPainted, starryNight), t(X, isParentOf, Y) ."),
            ("v3", "v3(X, Y, Z) :- t(X, isParentOf, Y), t(Y, hasPainted, Z) ."),
        ],
        "(v2 ⋈ v3)",
    )?;

    // SC on v2:n1.o = starryNight.
    let sc = find(&s1, TransitionKind::SC, |s, t| match t {
        Transition::SC { view, atom, pos } => {
            *pos == Pos::O && atom_of(s, *view, *atom).o() == Term::constant("starryNight")
        }
        _ => false,
    });
    let s2 = s1.apply(&sc, &mut fresh).unwrap();
    let s2_views = [
        ("v4", "v4(X, Y, W) :- t(X, hasPainted, W), t(X, isParentOf, Y) ."),
        ("v3", "v3(X, Y, Z) :- t(X, isParentOf, Y), t(Y, hasPainted, Z) ."),
    ];
    check_state("S2", &s2, &s2_views, "(v3 ⋈ σ(v4))")?;

    // JC on v4:n1.s = n2.s, then on v3:n4.o = n3.s.
    let old: Vec<u32> = s1.views.iter().map(|v| v.id).collect();
    let v4 = s2.views.iter().find(|v| !old.contains(&v.id)).unwrap().id;
    let jc = find(&s2, TransitionKind::JC, |s, t| match t {
        // The n1.s = n2.s edge: the only join of v4, on its subject column.
        Transition::JC { view, atom, pos } => {
            *view == v4 && *pos == Pos::S && atom_of(s, *view, *atom).s() == Term::var("X")
        }
        _ => false,
    });
    let s2b = s2.apply(&jc, &mut fresh).unwrap();
    let v3 = s2b
        .views
        .iter()
        .find(|v| old.contains(&v.id))
        .ok_or("v3 vanished after the first join cut")?
        .id;
    let jc = find(&s2b, TransitionKind::JC, |s, t| match t {
        // The n4.o = n3.s edge, on the shared Y.
        Transition::JC { view, atom, pos } => {
            *view == v3 && matches!(pos, Pos::S | Pos::O) && atom_of(s, *view, *atom).get(*pos) == Term::var("Y")
        }
        _ => false,
    });
    let s3 = s2b.apply(&jc, &mut fresh).unwrap();
    check_state(
        "S3",
        &s3,
        &[
            ("v5", "v5(X, W) :- t(X, hasPainted, W) ."),
            ("v6", "v6(X, Y) :- t(X, isParentOf, Y) ."),
            ("v7", "v7(X, Y) :- t(X, isParentOf, Y) ."),
            ("v8", "v8(Y, Z) :- t(Y, hasPainted, Z) ."),
        ],
        "((v5 ⋈ v6) ⋈ σ((v5 ⋈ v6)))",
    )?;

    // VF(v5, v8) and VF(v6, v7).
    let mut s4 = s3.clone();
    for p in ["hasPainted", "isParentOf"] {
        let vf = find(&s4, TransitionKind::VF, |s, t| match t {
            Transition::VF { first, .. } => has(&s.view(*first).unwrap().body[0], p),
            _ => false,
        });
        s4 = s4.apply(&vf, &mut fresh).unwrap();
    }
    check_state(
        "S4",
        &s4,
        &[
            ("v9", "v9(A, B) :- t(A, hasPainted, B) ."),
            ("v10", "v10(A, B) :- t(A, isParentOf, B) ."),
        ],
        "((v10 ⋈ v9) ⋈ σ((v10 ⋈ v9)))",
    )?;
    if !s4.transitions(&[TransitionKind::VF]).is_empty() {
        return Err("S4 still has fusable views".into());
    }
    Ok("S1-S4 views and rewriting shapes match".into())
}

// ---------------------------------------------------------------------------
// 2. Table 2

fn table_schema() -> Schema {
    Schema::new([
        Statement::new(StatementKind::SubClassOf, "painting", "picture"),
        Statement::new(StatementKind::SubPropertyOf, "isExpIn", "isLocatIn"),
    ])
}

fn criterion_2(_: &mut Ledger) -> Result<String, String> {
    let keys = |texts: &str| -> BTreeSet<Vec<u64>> {
        parse_queries(texts)
            .unwrap()
            .iter()
            .map(|q| canonical_form(&q.head, &q.body, HeadMode::Ordered).key)
            .collect()
    };
    let got = |q: &str| -> (usize, BTreeSet<Vec<u64>>) {
        let u = reformulate(&parse_query(q).unwrap(), &table_schema());
        let k = u
            .members
            .iter()
            .map(|m| canonical_form(&m.head, &m.body, HeadMode::Ordered).key)
            .collect();
        (u.len(), k)
    };
    let q1 = got("q1(X1) :- t(X1, rdf:type, picture) .");
    let want1 = keys("q1(X1) :- t(X1, rdf:type, picture) .\nq1(X1) :- t(X1, rdf:type, painting) .");
    let q4 = got("q4(X1, X2) :- t(X1, X2, picture) .");
    let want4 = keys(
        "q4(X1, X2) :- t(X1, X2, picture) .\n\
         q4(X1, isLocatIn) :- t(X1, isLocatIn, picture) .\n\
         q4(X1, isExpIn) :- t(X1, isExpIn, picture) .\n\
         q4(X1, rdf:type) :- t(X1, rdf:type, picture) .\n\
         q4(X1, isLocatIn) :- t(X1, isExpIn, picture) .\n\
         q4(X1, rdf:type) :- t(X1, rdf:type, painting) .",
    );
    if q1.0 != 2 || q1.1 != want1 {
        return Err(format!("q1 has {} members", q1.0));
    }
    if q4.0 != 6 || q4.1 != want4 {
        return Err(format!("q4 has {} members", q4.0));
    }
    Ok("q1: 2 members, q4: 6 members".into())
}

// ---------------------------------------------------------------------------
// 3 and 4. Reformulation against saturation, and the member bound

const RES: [&str; 8] = ["a0", "a1", "a2", "a3", "a4", "a5", "a6", "a7"];
const CLASSES: [&str; 5] = ["c0", "c1", "c2", "c3", "c4"];
const PROPS: [&str; 5] = ["p0", "p1", "p2", "p3", "p4"];

struct Instance {
    store: Vec<[Symbol; 3]>,
    schema: Schema,
    query: ConjunctiveQuery,
}

fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    let pick = |rng: &mut ChaCha8Rng, xs: &[&str]| Symbol::new(xs.choose(rng).unwrap());
    let ty = Symbol::new("rdf:type");
    let n = rng.gen_range(0..=200);
    let store: Vec<[Symbol; 3]> = (0..n)
        .map(|_| {
            let s = pick(rng, &RES);
            if rng.gen_bool(0.3) {
                [s, ty, pick(rng, &CLASSES)]
            } else {
                [s, pick(rng, &PROPS), pick(rng, &RES)]
            }
        })
        .collect();
    let k = rng.gen_range(0..=10);
    let schema = Schema::new((0..k).map(|_| match rng.gen_range(0..4) {
        0 => Statement::new(StatementKind::SubClassOf, CLASSES.choose(rng).unwrap(), CLASSES.choose(rng).unwrap()),
        1 => Statement::new(StatementKind::SubPropertyOf, PROPS.choose(rng).unwrap(), PROPS.choose(rng).unwrap()),
        2 => Statement::new(StatementKind::Domain, PROPS.choose(rng).unwrap(), CLASSES.choose(rng).unwrap()),
        _ => Statement::new(StatementKind::Range, PROPS.choose(rng).unwrap(), CLASSES.choose(rng).unwrap()),
    }));
    let vars = ["X", "Y", "Z", "W"];
    let query = loop {
        let m = rng.gen_range(1..=3);
        let term = |rng: &mut ChaCha8Rng, consts: &[&str]| {
            if rng.gen_bool(0.55) {
                Term::var(vars.choose(rng).unwrap())
            } else {
                Term::constant(consts.choose(rng).unwrap())
            }
        };
        let body: Vec<TripleAtom> = (0..m)
            .map(|_| {
                let s = term(rng, &RES);
                let p_consts: Vec<&str> = PROPS.iter().copied().chain(["rdf:type"]).collect();
                let p = term(rng, &p_consts);
                let o = if p == Term::constant("rdf:type") {
                    term(rng, &CLASSES)
                } else {
                    let all: Vec<&str> = RES.iter().chain(CLASSES.iter()).copied().collect();
                    term(rng, &all)
                };
                TripleAtom::new(s, p, o)
            })
            .collect();
        if body.iter().any(|a| a.constant_count() == 3) {
            continue;
        }
        let mut head: Vec<Term> = Vec::new();
        for a in &body {
            for v in a.vars() {
                let t = Term::Var(v);
                if !head.contains(&t) && rng.gen_bool(0.6) {
                    head.push(t);
                }
            }
        }
        if let Ok(q) = ConjunctiveQuery::new("q", head, body) {
            break q;
        }
    };
    Instance { store, schema, query }
}

struct ReformulationRun {
    mismatches: Vec<String>,
    bound_violations: Vec<String>,
    instances: usize,
}

fn reformulation_instances() -> &'static ReformulationRun {
    static RUN: std::sync::OnceLock<ReformulationRun> = std::sync::OnceLock::new();
    RUN.get_or_init(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let mut run = ReformulationRun {
            mismatches: Vec::new(),
            bound_violations: Vec::new(),
            instances: 500,
        };
        for i in 0..run.instances {
            let inst = random_instance(&mut rng);
            let u = reformulate(&inst.query, &inst.schema);
            let db = TripleStore::from_triples(inst.store.iter().copied());
            let saturated: Vec<[Symbol; 3]> = naive_saturate(&inst.store, &inst.schema).into_iter().collect();
            let want = naive_eval(&inst.query, &saturated);
            let got = evaluate_union(&u, &db).rows;
            if want != got {
                run.mismatches.push(format!("#{i} {}", inst.query.to_text()));
            }
            let s = inst.schema.statements().len() as f64;
            let bound = (2.0 * s * s).powi(inst.query.body.len() as i32);
            if u.len() as f64 > bound {
                run.bound_violations.push(format!(
                    "#{i} |S|={} m={} members={} bound={bound}",
                    inst.schema.statements().len(),
                    inst.query.body.len(),
                    u.len()
                ));
            }
        }
        run
    })
}

fn criterion_3(_: &mut Ledger) -> Result<String, String> {
    let run = reformulation_instances();
    if run.mismatches.is_empty() {
        Ok(format!("{} instances agree", run.instances))
    } else {
        Err(format!("{} mismatches, first {}", run.mismatches.len(), run.mismatches[0]))
    }
}

fn criterion_4(_: &mut Ledger) -> Result<String, String> {
    let run = reformulation_instances();
    if run.bound_violations.is_empty() {
        Ok(format!("{} instances within the bound", run.instances))
    } else {
        let small = run.bound_violations.iter().filter(|v| v.contains("|S|=0 ") || v.contains("|S|=1 ")).count();
        Err(format!(
            "{} of {} instances exceed (2|S|^2)^m ({} with |S| <= 1); first {}",
            run.bound_violations.len(),
            run.instances,
            small,
            run.bound_violations[0]
        ))
    }
}

// ---------------------------------------------------------------------------
// 5. Rewriting equivalence along exhaustive searches

const GALLERY: &str = "\
vanGogh hasPainted starryNight .
vanGogh hasPainted irises .
vanGogh hasPainted sunflowers .
vanGogh isParentOf theo .
theo hasPainted wheatfield .
theo isParentOf vincentWillem .
monet hasPainted waterLilies .
monet hasPainted haystacks .
monet isParentOf jean .
jean hasPainted bridge .
rembrandt hasPainted nightWatch .
rembrandt hasPainted starryNight .
rembrandt isParentOf titus .
titus isParentOf vanGogh .
titus hasPainted portrait .
starryNight isExpIn moma .
irises isExpIn getty .
sunflowers isExpIn nationalGallery .
waterLilies isExpIn orangerie .
nightWatch isExpIn rijksmuseum .
wheatfield isExpIn moma .
bridge isExpIn moma .
starryNight rdf:type painting .
irises rdf:type painting .
sunflowers rdf:type painting .
waterLilies rdf:type painting .
nightWatch rdf:type painting .
portrait rdf:type drawing .
moma rdf:type museum .
getty rdf:type museum .
";

const FIXTURES: [&str; 3] = [
    Q1,
    "q(X, Z) :- t(X, hasPainted, Y), t(Y, isExpIn, Z) .\n\
     r(X) :- t(X, hasPainted, Y), t(Y, rdf:type, painting) .",
    "q(X, W) :- t(X, isParentOf, Y), t(Y, hasPainted, Z), t(Z, isExpIn, moma), t(X, hasPainted, W) .",
];

fn criterion_5(ledger: &mut Ledger) -> Result<String, String> {
    let store = TripleStore::load_str(GALLERY).unwrap();
    let triples: Vec<[Symbol; 3]> = store.triples().collect();
    let mut checked = 0usize;
    for text in FIXTURES {
        let qs = parse_queries(text).unwrap();
        ledger.label = text.to_string();
        let direct: Vec<Rows> = qs.iter().map(|q| naive_eval(q, &triples)).collect();
        let stats = Arc::new(collect_statistics(&qs, &store, None));
        let mut fresh = Fresh::default();
        let s0 = State::initial(&qs, &mut fresh).unwrap();
        let mut failure: Option<String> = None;
        let result = ledger.search(s0, &stats, &SearchConfig::new(Strategy::Dfs), &mut fresh, |v| {
            if failure.is_some() {
                return;
            }
            checked += 1;
            let mats = materialize_views(v.state, &store);
            for (r, want) in v.state.rewritings.iter().zip(&direct) {
                match execute(&r.expr, &mats) {
                    Ok(rows) if &rows == want => {}
                    Ok(_) => failure = Some(format!("{}: {} differs", r.query, r.expr)),
                    Err(e) => failure = Some(e.to_string()),
                }
            }
        });
        if let Some(f) = failure {
            return Err(f);
        }
        if result.report.termination != Termination::Exhausted {
            return Err("search did not finish".into());
        }
    }
    Ok(format!("{checked} visited states checked on {} workloads", FIXTURES.len()))
}

// ---------------------------------------------------------------------------
// 7 and 8. Stratification and AVF

const SMALL: [&str; 5] = [
    "q(X) :- t(X, p1, Y), t(Y, p1, Z), t(Z, p1, X) .",
    "q(X, Y) :- t(X, p1, Y), t(Y, p2, a), t(X, p3, Z) .",
    "q(X, Z) :- t(X, p1, Y), t(Y, p1, Z), t(Z, p2, a) .",
    "q(X) :- t(X, p1, Y), t(X, p2, a), t(Y, p1, b) .",
    Q1,
];

fn small_store() -> TripleStore {
    TripleStore::load_str(
        "a p1 b\na p1 c\nb p2 d\nc p2 d\nc p2 e\nd p1 a\ne p3 a\nb p3 c\nf p1 b\nf p2 a\n\
         b p1 b\nc p1 b\nd p2 a\n\
         vanGogh hasPainted starryNight\nvanGogh isParentOf theo\ntheo hasPainted irises\n",
    )
    .unwrap()
}

struct Explored {
    states: BTreeSet<Signature>,
    result: SearchResult,
}

fn explore(ledger: &mut Ledger, text: &str, config: &SearchConfig) -> Explored {
    ledger.label = text.to_string();
    let qs = parse_queries(text).unwrap();
    let stats = Arc::new(collect_statistics(&qs, &small_store(), None));
    let mut fresh = Fresh::default();
    let s0 = State::initial(&qs, &mut fresh).unwrap();
    let mut states = BTreeSet::new();
    let result = ledger.search(s0, &stats, config, &mut fresh, |v| {
        if matches!(v.outcome, Outcome::Initial | Outcome::New | Outcome::Stopped) {
            states.insert(v.state.signature().clone());
        }
    });
    Explored { states, result }
}

/// Every state reachable from `s0`; with `stratified`, only along paths in
/// VB* SC* JC* VF*.
fn reachable(s0: &State, stratified: bool) -> BTreeSet<Signature> {
    let mut fresh = Fresh::after(s0);
    let mut lowest: HashMap<Signature, usize> = HashMap::new();
    let mut work = vec![(s0.clone(), 0usize)];
    while let Some((s, from)) = work.pop() {
        match lowest.get(s.signature()) {
            Some(&k) if k <= from => continue,
            _ => {
                lowest.insert(s.signature().clone(), from);
            }
        }
        for t in s.transitions(&TransitionKind::ALL[from..]) {
            let next = if stratified { t.kind().stratum() } else { 0 };
            work.push((s.apply(&t, &mut fresh).unwrap(), next));
        }
    }
    lowest.into_keys().collect()
}

fn criterion_7(ledger: &mut Ledger) -> Result<String, String> {
    let mut sizes = Vec::new();
    for text in SMALL {
        let naive = explore(ledger, text, &SearchConfig::new(Strategy::Exnaive));
        let exstr = explore(ledger, text, &SearchConfig::new(Strategy::Exstr));
        let dfs = explore(ledger, text, &SearchConfig::new(Strategy::Dfs));
        if naive.states != exstr.states || naive.states != dfs.states {
            return Err(format!(
                "{text}: state sets differ ({} / {} / {})",
                naive.states.len(),
                exstr.states.len(),
                dfs.states.len()
            ));
        }
        let cost = |e: &Explored| e.result.report.best_cost.total;
        if cost(&naive) != cost(&exstr) || cost(&naive) != cost(&dfs) {
            return Err(format!("{text}: best costs differ"));
        }
        let (tn, ts) = (
            naive.result.report.counters.transitions,
            exstr.result.report.counters.transitions,
        );
        if ts > tn {
            return Err(format!("{text}: EXSTR made {ts} transitions, EXNAIVE {tn}"));
        }
        let q = parse_queries(text).unwrap();
        let s0 = State::initial(&q, &mut Fresh::default()).unwrap();
        let free = reachable(&s0, false);
        let strat = reachable(&s0, true);
        if free != strat {
            return Err(format!("{text}: {} reachable, {} along stratified paths", free.len(), strat.len()));
        }
        if free != naive.states {
            return Err(format!("{text}: search reached {} of {} states", naive.states.len(), free.len()));
        }
        sizes.push(format!("{}({ts}<={tn})", free.len()));
    }
    Ok(format!("states(transitions exstr<=exnaive): {}", sizes.join(" ")))
}

fn criterion_8(ledger: &mut Ledger) -> Result<String, String> {
    let mut out = Vec::new();
    let mut bad = Vec::new();
    for text in SMALL {
        let plain = explore(ledger, text, &SearchConfig::new(Strategy::Dfs));
        let avf = explore(
            ledger,
            text,
            &SearchConfig {
                avf: true,
                ..SearchConfig::new(Strategy::Dfs)
            },
        );
        let (a, b) = (plain.result.report.best_cost.total, avf.result.report.best_cost.total);
        if a != b {
            return Err(format!("{text}: best cost {a} without AVF, {b} with"));
        }
        let (ca, cb) = (plain.result.report.counters.created, avf.result.report.counters.created);
        if cb >= ca {
            bad.push(text);
        }
        out.push(format!("{cb}/{ca}"));
    }
    let summary = format!("created with/without AVF: {}", out.join(" "));
    if bad.is_empty() {
        Ok(summary)
    } else {
        Err(format!("AVF did not create fewer states on {bad:?}; {summary}"))
    }
}

// ---------------------------------------------------------------------------
// 9. Saturation and post-reformulation agree

fn criterion_9(ledger: &mut Ledger) -> Result<String, String> {
    let spec = StoreSpec::new(1000, 9);
    let store = generate_store(&spec).map_err(|e| e.to_string())?;
    let schema = generate_schema(10, &spec.property_names(), &spec.class_names(), 9).map_err(|e| e.to_string())?;
    let workload = generate(
        &WorkloadSpec {
            shape: Shape::Mixed,
            queries: 5,
            atoms: 3,
            commonality: Commonality::High,
            constant_density: 0.3,
            seed: 9,
        },
        Some(&saturate(&store, &schema)),
    )
    .map_err(|e| e.to_string())?;

    let dir = tempfile::tempdir().unwrap();
    let path = |name: &str| dir.path().join(name);
    let mut buf = Vec::new();
    store.write(&mut buf).unwrap();
    std::fs::write(path("data.nt"), buf).unwrap();
    std::fs::write(path("schema.nt"), schema.to_text()).unwrap();
    let queries: String = workload.iter().map(|q| q.to_text() + "\n").collect();
    std::fs::write(path("queries.txt"), queries).unwrap();

    let config = SearchConfig {
        avf: true,
        stop_var: true,
        ..SearchConfig::new(Strategy::Gstr)
    };
    let run = |mode: Mode| -> Result<TuneDocument, String> {
        let manifest = RunManifest {
            triples: path("data.nt"),
            schema: Some(path("schema.nt")),
            queries: path("queries.txt"),
            mode,
            search: config.clone(),
            out: Some(path(&format!("{mode}.json"))),
            trace: None,
        };
        manifest.run().map_err(|e| e.to_string())?;
        let doc = TuneDocument::from_json(&std::fs::read_to_string(path(&format!("{mode}.json"))).unwrap())
            .map_err(|e| e.to_string())?;
        Ok(doc)
    };
    let sat = run(Mode::Saturate)?;
    let post = run(Mode::Post)?;
    for doc in [&sat, &post] {
        ledger.audit.merge(&doc.search.audit);
        ledger.searches += 1;
    }
    let bodies = |d: &TuneDocument| -> Vec<Vec<u64>> {
        let mut b: Vec<Vec<u64>> = d.views.iter().map(|v| body_key(&v.as_query())).collect();
        b.sort();
        b
    };
    if bodies(&sat) != bodies(&post) {
        return Err(format!("{} vs {} views differ", sat.views.len(), post.views.len()));
    }
    if sat.cost.total != post.cost.total {
        return Err(format!("best cost {} vs {}", sat.cost.total, post.cost.total));
    }
    Ok(format!(
        "{} views, cost {:.1} (rcr {:.3}) in both modes",
        sat.views.len(),
        sat.cost.total,
        sat.search.rcr
    ))
}

// ---------------------------------------------------------------------------
// 10. Relative cost reduction on generated workloads

fn criterion_10(ledger: &mut Ledger) -> Result<String, String> {
    let store = generate_store(&StoreSpec::new(10_000, 1)).map_err(|e| e.to_string())?;
    let mut lines = Vec::new();
    let mut failures = Vec::new();
    for shape in [Shape::Star, Shape::Chain] {
        let spec = WorkloadSpec {
            shape,
            queries: 5,
            atoms: 5,
            seed: 11,
            ..WorkloadSpec::default()
        };
        let workload = generate(&spec, Some(&store)).map_err(|e| e.to_string())?;
        let stats = Arc::new(collect_statistics(&workload, &store, None));
        let config = |strategy| SearchConfig {
            avf: true,
            stop_var: true,
            stop_time: Some(60.0),
            ..SearchConfig::new(strategy)
        };
        // Both strategies share the wall-clock minute.
        let (dfs, gstr) = std::thread::scope(|scope| {
            let run = |strategy| {
                let stats = stats.clone();
                let workload = workload.clone();
                scope.spawn(move || {
                    let mut ledger = Ledger {
                        label: format!("{shape} {strategy:?}"),
                        ..Ledger::default()
                    };
                    let mut fresh = Fresh::default();
                    let s0 = State::initial(&workload, &mut fresh).unwrap();
                    let r = ledger.search(s0, &stats, &config(strategy), &mut fresh, |_| {});
                    (r, ledger)
                })
            };
            let d = run(Strategy::Dfs);
            let g = run(Strategy::Gstr);
            (d.join().unwrap(), g.join().unwrap())
        });
        for (r, l) in [&dfs, &gstr] {
            ledger.audit.merge(&l.audit);
            ledger.searches += l.searches;
            ledger.observed_sc += l.observed_sc;
            ledger.observed_vf += l.observed_vf;
            ledger.observed_violations.extend(l.observed_violations.iter().cloned());
            let _ = r;
        }
        let (d, g) = (&dfs.0.report, &gstr.0.report);
        lines.push(format!(
            "{shape}: DFS-AVF-STV rcr {:.3} ({} states), GSTR-AVF-STV rcr {:.3} ({:?})",
            d.rcr, d.counters.created, g.rcr, g.termination
        ));
        if d.rcr <= 0.3 {
            failures.push(format!("{shape} DFS-AVF-STV rcr {:.3} <= 0.3", d.rcr));
        }
        if g.rcr < 0.0 {
            failures.push(format!("{shape} GSTR-AVF-STV rcr {:.3} < 0", g.rcr));
        }
    }
    if failures.is_empty() {
        Ok(lines.join("; "))
    } else {
        Err(format!("{}; {}", failures.join("; "), lines.join("; ")))
    }
}

// ---------------------------------------------------------------------------
// 6. Monotonicity over everything above

fn criterion_6(ledger: &mut Ledger) -> Result<String, String> {
    let a = &ledger.audit;
    if a.sc_checked == 0 || a.vf_checked == 0 || ledger.observed_sc == 0 || ledger.observed_vf == 0 {
        return Err("no SC or VF application was observed".into());
    }
    if !a.is_clean() || !ledger.observed_violations.is_empty() {
        return Err(format!(
            "SC violations {}, VF violations {}, observed {:?}",
            a.sc_violations,
            a.vf_violations,
            ledger.observed_violations.iter().take(8).collect::<Vec<_>>()
        ));
    }
    Ok(format!(
        "{} searches: {} SC and {} VF applications audited, {} and {} re-checked from observed costs",
        ledger.searches, a.sc_checked, a.vf_checked, ledger.observed_sc, ledger.observed_vf
    ))
}

type Criterion = fn(&mut Ledger) -> Result<String, String>;

fn main() {
    let criteria: [(u32, &str, Criterion, Option<Duration>); 10] = [
        (1, "running example transitions", criterion_1, Some(Duration::from_secs(1))),
        (2, "reformulation of q1 and q4", criterion_2, Some(Duration::from_secs(1))),
        (3, "reformulation equals saturation", criterion_3, Some(Duration::from_secs(60))),
        (4, "reformulation size bound", criterion_4, None),
        (5, "rewriting equivalence", criterion_5, Some(Duration::from_secs(120))),
        (7, "stratification", criterion_7, Some(Duration::from_secs(120))),
        (8, "AVF keeps the optimum", criterion_8, None),
        (9, "saturation vs post-reformulation", criterion_9, Some(Duration::from_secs(300))),
        (10, "relative cost reduction", criterion_10, Some(Duration::from_secs(180))),
        (6, "cost monotonicity", criterion_6, None),
    ];
    // ACCEPTANCE_ONLY=3,7 runs a subset.
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|n| n.trim().parse().ok()).collect());
    let mut ledger = Ledger::default();
    let mut failed = 0;
    for (n, name, run, budget) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&n)) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(|| run(&mut ledger)))
            .unwrap_or_else(|p| {
                let msg = p
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                Err(format!("panicked: {msg}"))
            });
        let elapsed = start.elapsed();
        let outcome = match (outcome, budget) {
            (Ok(_), Some(b)) if elapsed > b => Err(format!("took {:.1}s, budget {}s", elapsed.as_secs_f64(), b.as_secs())),
            (o, _) => o,
        };
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} {n:>2} {name} [{:.2}s]: {detail}", elapsed.as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
