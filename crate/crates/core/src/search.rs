//! Strategies over the state space: EXNAIVE, stratified EXSTR, depth-first
//! DFS and greedy GSTR, with aggressive view fusion (AVF) and stop
//! conditions.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cost::{CostBreakdown, CostModel, CostWeights};
use crate::error::{Error, Result};
use crate::state::{Fresh, Signature, State, Transition, TransitionKind};
use crate::store::WorkloadStatistics;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Exnaive,
    Exstr,
    Dfs,
    Gstr,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Exnaive => "exnaive",
            Strategy::Exstr => "exstr",
            Strategy::Dfs => "dfs",
            Strategy::Gstr => "gstr",
        })
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exnaive" => Ok(Strategy::Exnaive),
            "exstr" => Ok(Strategy::Exstr),
            "dfs" => Ok(Strategy::Dfs),
            "gstr" => Ok(Strategy::Gstr),
            other => Err(Error::Config(format!("unknown strategy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub strategy: Strategy,
    pub avf: bool,
    pub stop_tt: bool,
    pub stop_var: bool,
    /// Wall-clock budget in seconds.
    pub stop_time: Option<f64>,
    pub weights: CostWeights,
    /// Shuffles transition order when set; `None` keeps it deterministic.
    pub seed: Option<u64>,
    /// Cap on candidate plus explored states for EXNAIVE and EXSTR. When
    /// exceeded, the costliest candidates are dropped.
    pub max_states: Option<usize>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            strategy: Strategy::Dfs,
            avf: false,
            stop_tt: false,
            stop_var: false,
            stop_time: None,
            weights: CostWeights::default(),
            seed: None,
            max_states: None,
        }
    }
}

impl SearchConfig {
    pub fn new(strategy: Strategy) -> Self {
        SearchConfig {
            strategy,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        if let Some(t) = self.stop_time {
            if !(t > 0.0) {
                return Err(Error::Config("stop time must be positive".into()));
            }
        }
        if self.max_states == Some(0) {
            return Err(Error::Config("state cap must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Termination {
    Exhausted,
    Timeout,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    TripleTable,
    AllVariables,
    Time,
}

/// State accounting. Every created state ends up in exactly one of
/// `duplicates`, `discarded`, `explored` or `pending`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub created: u64,
    pub duplicates: u64,
    pub discarded: u64,
    pub explored: u64,
    pub pending: u64,
    pub transitions: u64,
    pub peak_candidates: u64,
}

/// Cost changes observed on SC and VF applications.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Audit {
    pub sc_checked: u64,
    pub sc_violations: u64,
    pub vf_checked: u64,
    pub vf_violations: u64,
}

impl Audit {
    pub fn merge(&mut self, other: &Audit) {
        self.sc_checked += other.sc_checked;
        self.sc_violations += other.sc_violations;
        self.vf_checked += other.vf_checked;
        self.vf_violations += other.vf_violations;
    }

    pub fn is_clean(&self) -> bool {
        self.sc_violations == 0 && self.vf_violations == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub elapsed: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchReport {
    pub strategy: Strategy,
    pub avf: bool,
    pub stop_tt: bool,
    pub stop_var: bool,
    pub initial_cost: CostBreakdown,
    pub best_cost: CostBreakdown,
    pub rcr: f64,
    pub termination: Termination,
    pub elapsed_seconds: f64,
    pub counters: Counters,
    pub audit: Audit,
    pub trace: Vec<TracePoint>,
}

impl SearchReport {
    /// CSV with columns `elapsed_seconds,best_cost,rcr`.
    pub fn trace_csv(&self) -> String {
        let c0 = self.initial_cost.total;
        let mut out = String::from("elapsed_seconds,best_cost,rcr\n");
        for p in &self.trace {
            out.push_str(&format!("{},{},{}\n", p.elapsed, p.cost, rcr(c0, p.cost)));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub best: State,
    pub report: SearchReport,
}

/// What happened to a state handed to an observer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Initial,
    New,
    Duplicate,
    /// Produced on the way to a VF fixpoint and dropped.
    Intermediate,
    /// Met a stop condition; kept as a best-state candidate, never expanded.
    Stopped,
}

pub struct Visit<'a> {
    pub state: &'a State,
    pub cost: f64,
    pub via: Option<TransitionKind>,
    pub parent_cost: Option<f64>,
    pub outcome: Outcome,
}

fn rcr(c0: f64, cb: f64) -> f64 {
    if c0 > 0.0 {
        (c0 - cb) / c0
    } else {
        0.0
    }
}

/// stop_tt / stop_var for one state. stop_var does not apply when the
/// initial state already satisfies it.
pub fn check_stop(s: &State, config: &SearchConfig, initial_has_var_view: bool) -> Option<StopReason> {
    if config.stop_tt && s.has_triple_table_view() {
        return Some(StopReason::TripleTable);
    }
    if config.stop_var && !initial_has_var_view && s.has_constant_free_view() {
        return Some(StopReason::AllVariables);
    }
    None
}

/// Applies view fusions until none is left. Returns the fixpoint and the
/// intermediate states passed through on the way.
pub fn avf_closure(s: &State, fresh: &mut Fresh) -> Result<(State, Vec<State>)> {
    let mut cur = s.clone();
    let mut passed = Vec::new();
    while let Some(t) = cur.transitions(&[TransitionKind::VF]).into_iter().next() {
        let next = cur.apply(&t, fresh)?;
        passed.push(std::mem::replace(&mut cur, next));
    }
    if !passed.is_empty() {
        passed.remove(0);
    }
    Ok((cur, passed))
}

#[derive(Clone)]
struct Node {
    state: Arc<State>,
    cost: f64,
}

struct Seen {
    /// Lowest stratum scheduled for expansion so far; 4 means none.
    covered: usize,
}

enum Arrival {
    New(Node),
    Duplicate(Node),
    /// A duplicate known to need no further expansion.
    Settled,
    Stopped,
}

struct Task {
    node: Node,
    lo: usize,
    hi: usize,
    new: bool,
}

struct Engine<'a> {
    model: CostModel,
    config: &'a SearchConfig,
    fresh: &'a mut Fresh,
    observer: &'a mut dyn FnMut(&Visit<'_>),
    start: Instant,
    seen: HashMap<Signature, Seen>,
    /// Pre-fusion signatures met under AVF and the fixpoint they led to.
    fused: HashMap<Signature, Signature>,
    best: Node,
    trace: Vec<TracePoint>,
    counters: Counters,
    audit: Audit,
    initial_has_var_view: bool,
    rng: Option<ChaCha8Rng>,
    timed_out: bool,
    stratified: bool,
}

impl<'a> Engine<'a> {
    fn elapsed(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }

    fn out_of_time(&mut self) -> bool {
        if !self.timed_out {
            if let Some(limit) = self.config.stop_time {
                self.timed_out = self.elapsed() > limit;
            }
        }
        self.timed_out
    }

    /// First stratum a state reached through `kind` may be expanded with.
    fn lowest(&self, kind: TransitionKind) -> usize {
        if self.stratified {
            kind.stratum()
        } else {
            0
        }
    }

    fn cost(&self, s: &State) -> Result<f64> {
        Ok(self.model.total_cost(s)?.total)
    }

    fn offer(&mut self, node: &Node) {
        if node.cost < self.best.cost {
            self.best = node.clone();
            self.trace.push(TracePoint {
                elapsed: self.elapsed(),
                cost: node.cost,
            });
        }
    }

    fn check(&mut self, kind: TransitionKind, before: f64, after: f64) {
        match kind {
            TransitionKind::SC => {
                self.audit.sc_checked += 1;
                if after < before {
                    self.audit.sc_violations += 1;
                }
            }
            TransitionKind::VF => {
                self.audit.vf_checked += 1;
                if after > before {
                    self.audit.vf_violations += 1;
                }
            }
            _ => {}
        }
    }

    fn transitions(&mut self, s: &State, kinds: &[TransitionKind]) -> Vec<Transition> {
        let mut ts = s.transitions(kinds);
        if let Some(rng) = self.rng.as_mut() {
            // Shuffle within each kind so stratum order is kept.
            let mut start = 0;
            while start < ts.len() {
                let k = ts[start].kind();
                let end = start + ts[start..].iter().take_while(|t| t.kind() == k).count();
                ts[start..end].shuffle(rng);
                start = end;
            }
        }
        ts
    }

    /// Applies `t` without registering the result.
    fn prepare(&mut self, parent: &Node, t: &Transition) -> Result<(State, f64)> {
        self.counters.transitions += 1;
        let state = parent.state.apply(t, self.fresh)?;
        let cost = self.cost(&state)?;
        Ok((state, cost))
    }

    /// Applies `t` (plus the VF closure under AVF) and classifies the result.
    fn derive(&mut self, parent: &Node, t: &Transition) -> Result<Arrival> {
        let (state, cost) = self.prepare(parent, t)?;
        self.arrive(parent, t.kind(), state, cost)
    }

    fn arrive(&mut self, parent: &Node, kind: TransitionKind, mut state: State, mut cost: f64) -> Result<Arrival> {
        self.counters.created += 1;
        self.check(kind, parent.cost, cost);
        let mut entry = None;
        if self.config.avf && kind != TransitionKind::VF && !state.transitions(&[TransitionKind::VF]).is_empty() {
            if let Some(done) = self.fused.get(state.signature()) {
                // Same pre-fusion state as before. Unless its fixpoint now
                // needs expanding from a lower stratum, nothing is new.
                let lo = self.lowest(kind);
                if !self.seen.get(done).is_some_and(|s| lo < s.covered) {
                    self.counters.duplicates += 1;
                    (self.observer)(&Visit {
                        state: &state,
                        cost,
                        via: Some(kind),
                        parent_cost: Some(parent.cost),
                        outcome: Outcome::Duplicate,
                    });
                    return Ok(Arrival::Settled);
                }
            }
            entry = Some(state.signature().clone());
            while let Some(vf) = state.transitions(&[TransitionKind::VF]).into_iter().next() {
                let next = state.apply(&vf, self.fresh)?;
                self.counters.transitions += 1;
                self.counters.created += 1;
                self.counters.discarded += 1;
                let next_cost = self.cost(&next)?;
                self.check(TransitionKind::VF, cost, next_cost);
                (self.observer)(&Visit {
                    state: &state,
                    cost,
                    via: Some(kind),
                    parent_cost: Some(parent.cost),
                    outcome: Outcome::Intermediate,
                });
                state = next;
                cost = next_cost;
            }
        }
        let node = Node {
            state: Arc::new(state),
            cost,
        };
        if let Some(sig) = entry {
            self.fused.insert(sig, node.state.signature().clone());
        }
        let sig = node.state.signature().clone();
        let outcome;
        let arrival = if self.seen.contains_key(&sig) {
            self.counters.duplicates += 1;
            outcome = Outcome::Duplicate;
            Arrival::Duplicate(node.clone())
        } else if check_stop(&node.state, self.config, self.initial_has_var_view).is_some() {
            self.counters.discarded += 1;
            self.seen.insert(sig, Seen { covered: 0 });
            outcome = Outcome::Stopped;
            Arrival::Stopped
        } else {
            self.seen.insert(sig, Seen { covered: 4 });
            outcome = Outcome::New;
            Arrival::New(node.clone())
        };
        self.offer(&node);
        (self.observer)(&Visit {
            state: &node.state,
            cost: node.cost,
            via: Some(kind),
            parent_cost: Some(parent.cost),
            outcome,
        });
        Ok(arrival)
    }

    /// Schedules expansion of an arrival reached through a `kind`
    /// transition. Returns the task to run, if any.
    fn schedule(&mut self, arrival: Arrival, kind: TransitionKind) -> Option<Task> {
        let lo = self.lowest(kind);
        match arrival {
            Arrival::Stopped | Arrival::Settled => None,
            Arrival::New(node) => {
                self.seen.get_mut(node.state.signature()).unwrap().covered = lo;
                Some(Task {
                    node,
                    lo,
                    hi: 4,
                    new: true,
                })
            }
            Arrival::Duplicate(node) => {
                let seen = self.seen.get_mut(node.state.signature()).unwrap();
                if lo < seen.covered {
                    let hi = seen.covered;
                    seen.covered = lo;
                    Some(Task {
                        node,
                        lo,
                        hi,
                        new: false,
                    })
                } else {
                    None
                }
            }
        }
    }

    fn kinds(lo: usize, hi: usize) -> &'static [TransitionKind] {
        &TransitionKind::ALL[lo..hi]
    }

    fn best_first(&mut self, root: Node) -> Result<()> {
        let mut cs: BTreeMap<(u64, usize, u64), Task> = BTreeMap::new();
        let mut seq = 0u64;
        let mut pending = 0u64;
        let key = |n: &Node, seq: u64| (n.cost.to_bits(), n.state.views.len(), seq);
        cs.insert(
            key(&root, 0),
            Task {
                node: root,
                lo: 0,
                hi: 4,
                new: true,
            },
        );
        pending += 1;
        while let Some((_, task)) = cs.pop_first() {
            if self.out_of_time() {
                break;
            }
            if task.new {
                pending -= 1;
                self.counters.explored += 1;
            }
            let ts = self.transitions(&task.node.state, Self::kinds(task.lo, task.hi));
            for t in &ts {
                if self.out_of_time() {
                    break;
                }
                let arrival = self.derive(&task.node, t)?;
                if let Some(child) = self.schedule(arrival, t.kind()) {
                    seq += 1;
                    if child.new {
                        pending += 1;
                    }
                    cs.insert(key(&child.node, seq), child);
                }
            }
            if let Some(cap) = self.config.max_states {
                while cs.len() as u64 + self.counters.explored > cap as u64 {
                    let Some((_, dropped)) = cs.pop_last() else { break };
                    if dropped.new {
                        pending -= 1;
                        self.counters.discarded += 1;
                    }
                }
            }
            self.counters.peak_candidates = self.counters.peak_candidates.max(cs.len() as u64);
            if self.timed_out {
                break;
            }
        }
        self.counters.pending = pending;
        Ok(())
    }

    /// Depth-first over the strata. The successors of a state are applied
    /// up front and visited cheapest first within each transition kind.
    fn depth_first(&mut self, root: Node) -> Result<()> {
        struct Frame {
            node: Node,
            children: std::vec::IntoIter<(TransitionKind, State, f64)>,
        }
        let frame = |e: &mut Self, task: Task| -> Result<Frame> {
            if task.new {
                e.counters.explored += 1;
            }
            let mut children = Vec::new();
            for t in e.transitions(&task.node.state, Self::kinds(task.lo, task.hi)) {
                if e.out_of_time() {
                    break;
                }
                let (state, cost) = e.prepare(&task.node, &t)?;
                children.push((t.kind(), state, cost));
            }
            children.sort_by(|a, b| a.0.stratum().cmp(&b.0.stratum()).then(a.2.total_cmp(&b.2)));
            Ok(Frame {
                node: task.node,
                children: children.into_iter(),
            })
        };
        let root = Task {
            node: root,
            lo: 0,
            hi: 4,
            new: true,
        };
        if self.out_of_time() {
            self.counters.pending = 1;
            return Ok(());
        }
        let first = frame(self, root)?;
        let mut stack = vec![first];
        while let Some(top) = stack.last_mut() {
            if self.out_of_time() {
                break;
            }
            let Some((kind, state, cost)) = top.children.next() else {
                stack.pop();
                continue;
            };
            let parent = top.node.clone();
            let arrival = self.arrive(&parent, kind, state, cost)?;
            if let Some(task) = self.schedule(arrival, kind) {
                let f = frame(self, task)?;
                stack.push(f);
                self.counters.peak_candidates = self.counters.peak_candidates.max(stack.len() as u64);
            }
        }
        Ok(())
    }

    fn greedy(&mut self, root: Node) -> Result<()> {
        self.counters.explored += 1;
        let mut current = root;
        for kind in TransitionKind::ALL {
            let mut winner = current.clone();
            let mut stack = vec![current.clone()];
            let mut first = true;
            while let Some(node) = stack.pop() {
                if !first {
                    self.counters.explored += 1;
                }
                first = false;
                for t in self.transitions(&node.state, &[kind]) {
                    if self.out_of_time() {
                        self.counters.pending = stack.len() as u64;
                        return Ok(());
                    }
                    if let Arrival::New(child) = self.derive(&node, &t)? {
                        let better = child.cost < winner.cost
                            || (child.cost == winner.cost
                                && child.state.signature() < winner.state.signature());
                        if better {
                            winner = child.clone();
                        }
                        stack.push(child);
                    }
                }
                self.counters.peak_candidates = self.counters.peak_candidates.max(stack.len() as u64);
            }
            current = winner;
        }
        Ok(())
    }
}

/// Runs the configured strategy from `s0`.
pub fn search(s0: State, stats: &Arc<WorkloadStatistics>, config: &SearchConfig, fresh: &mut Fresh) -> Result<SearchResult> {
    search_observed(s0, stats, config, fresh, &mut |_| {})
}

/// As [`search`], reporting every state it creates to `observer`.
pub fn search_observed(
    s0: State,
    stats: &Arc<WorkloadStatistics>,
    config: &SearchConfig,
    fresh: &mut Fresh,
    observer: &mut dyn FnMut(&Visit<'_>),
) -> Result<SearchResult> {
    config.validate()?;
    let start = Instant::now();
    let model = CostModel::new(stats.clone(), config.weights);
    let initial_cost = model.total_cost(&s0)?;
    let root = Node {
        state: Arc::new(s0),
        cost: initial_cost.total,
    };
    let initial_has_var_view = root.state.has_constant_free_view();
    let mut engine = Engine {
        model,
        config,
        fresh,
        observer,
        start,
        seen: HashMap::new(),
        fused: HashMap::new(),
        best: root.clone(),
        trace: vec![TracePoint {
            elapsed: 0.0,
            cost: root.cost,
        }],
        counters: Counters {
            created: 1,
            ..Default::default()
        },
        audit: Audit::default(),
        initial_has_var_view,
        rng: config.seed.map(ChaCha8Rng::seed_from_u64),
        timed_out: false,
        stratified: config.strategy != Strategy::Exnaive,
    };
    (engine.observer)(&Visit {
        state: &root.state,
        cost: root.cost,
        via: None,
        parent_cost: None,
        outcome: Outcome::Initial,
    });
    let root_stopped = check_stop(&root.state, config, initial_has_var_view).is_some();
    engine.seen.insert(root.state.signature().clone(), Seen { covered: 0 });
    if root_stopped {
        engine.counters.discarded += 1;
    } else {
        match config.strategy {
            Strategy::Exnaive | Strategy::Exstr => engine.best_first(root)?,
            Strategy::Dfs => engine.depth_first(root)?,
            Strategy::Gstr => engine.greedy(root)?,
        }
    }
    let best = engine.best.state.as_ref().clone();
    let best_cost = engine.model.total_cost(&best)?;
    let termination = if engine.timed_out {
        Termination::Timeout
    } else {
        Termination::Exhausted
    };
    let report = SearchReport {
        strategy: config.strategy,
        avf: config.avf,
        stop_tt: config.stop_tt,
        stop_var: config.stop_var,
        initial_cost,
        rcr: rcr(initial_cost.total, best_cost.total),
        best_cost,
        termination,
        elapsed_seconds: engine.elapsed(),
        counters: engine.counters,
        audit: engine.audit,
        trace: engine.trace,
    };
    Ok(SearchResult { best, report })
}

pub fn run_exnaive(s0: State, stats: &Arc<WorkloadStatistics>, config: &SearchConfig) -> Result<SearchResult> {
    run_with(Strategy::Exnaive, s0, stats, config)
}

pub fn run_exstr(s0: State, stats: &Arc<WorkloadStatistics>, config: &SearchConfig) -> Result<SearchResult> {
    run_with(Strategy::Exstr, s0, stats, config)
}

pub fn run_dfs(s0: State, stats: &Arc<WorkloadStatistics>, config: &SearchConfig) -> Result<SearchResult> {
    run_with(Strategy::Dfs, s0, stats, config)
}

pub fn run_gstr(s0: State, stats: &Arc<WorkloadStatistics>, config: &SearchConfig) -> Result<SearchResult> {
    run_with(Strategy::Gstr, s0, stats, config)
}

fn run_with(strategy: Strategy, s0: State, stats: &Arc<WorkloadStatistics>, config: &SearchConfig) -> Result<SearchResult> {
    let config = SearchConfig {
        strategy,
        ..config.clone()
    };
    let mut fresh = Fresh::after(&s0);
    search(s0, stats, &config, &mut fresh)
}
