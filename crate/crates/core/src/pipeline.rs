//! End-to-end tuning: reasoning mode, statistics, search and the output
//! document, plus materialization of recommended views and query answering
//! over them.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cost::CostBreakdown;
use crate::error::{Error, Result};
use crate::model::{parse_queries, ConjunctiveQuery, Term, TripleAtom, UnionQuery};
use crate::rdfs::{reformulate, saturate, Schema};
use crate::search::{search, SearchConfig, SearchReport};
use crate::state::{execute, Fresh, Rewriting, State};
use crate::store::{collect_statistics, column_names, evaluate, evaluate_union, Relation, TripleStore, WorkloadStatistics};

/// Name and version stamped on every tuning document.
pub const FORMAT: &str = "rdfvs-tune";
pub const FORMAT_VERSION: u32 = 1;

/// How implicit triples are taken into account.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Explicit triples only.
    Plain,
    /// Saturate the store, then tune on it.
    Saturate,
    /// Reformulate the workload, then tune the unions on the raw store.
    Pre,
    /// Tune the original workload on statistics of the saturated store and
    /// reformulate the recommended views.
    Post,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Plain => "plain",
            Mode::Saturate => "saturate",
            Mode::Pre => "pre",
            Mode::Post => "post",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(Mode::Plain),
            "saturate" | "saturation" => Ok(Mode::Saturate),
            "pre" | "pre-reformulation" => Ok(Mode::Pre),
            "post" | "post-reformulation" => Ok(Mode::Post),
            other => Err(Error::Config(format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub triples: PathBuf,
    pub schema: Option<PathBuf>,
    pub queries: PathBuf,
    pub mode: Mode,
    pub search: SearchConfig,
    pub out: Option<PathBuf>,
    pub trace: Option<PathBuf>,
}

impl RunManifest {
    pub fn validate(&self) -> Result<()> {
        if self.mode != Mode::Plain && self.schema.is_none() {
            return Err(Error::SchemaRequired(self.mode.to_string()));
        }
        self.search.validate()
    }

    pub fn load(&self) -> Result<Inputs> {
        self.validate()?;
        let store = TripleStore::load_path(&self.triples)?;
        let schema = match &self.schema {
            Some(p) => Some(Schema::load_path(p)?),
            None => None,
        };
        let workload = parse_queries(&std::fs::read_to_string(&self.queries).map_err(|e| Error::at_path(&self.queries, e))?)?;
        Ok(Inputs { store, schema, workload })
    }

    /// Loads the inputs, tunes, and writes the document and trace files
    /// that were asked for.
    pub fn run(&self) -> Result<TuneDocument> {
        let inputs = self.load()?;
        let doc = tune(&inputs, self.mode, &self.search)?;
        if let Some(p) = &self.out {
            std::fs::write(p, doc.to_json()?)?;
        }
        if let Some(p) = &self.trace {
            std::fs::write(p, doc.search.trace_csv())?;
        }
        Ok(doc)
    }
}

pub struct Inputs {
    pub store: TripleStore,
    pub schema: Option<Schema>,
    pub workload: Vec<ConjunctiveQuery>,
}

/// Everything the search needs for one mode.
pub struct Prepared {
    pub initial: State,
    pub fresh: Fresh,
    pub stats: Arc<WorkloadStatistics>,
}

fn require(schema: Option<&Schema>, mode: Mode) -> Result<&Schema> {
    schema.ok_or_else(|| Error::SchemaRequired(mode.to_string()))
}

pub fn prepare(inputs: &Inputs, mode: Mode) -> Result<Prepared> {
    let mut fresh = Fresh::default();
    let schema = inputs.schema.as_ref();
    let (initial, stats) = match mode {
        Mode::Plain => (
            State::initial(&inputs.workload, &mut fresh)?,
            collect_statistics(&inputs.workload, &inputs.store, None),
        ),
        Mode::Saturate => {
            let saturated = saturate(&inputs.store, require(schema, mode)?);
            (
                State::initial(&inputs.workload, &mut fresh)?,
                collect_statistics(&inputs.workload, &saturated, None),
            )
        }
        Mode::Pre => {
            let schema = require(schema, mode)?;
            let unions: Vec<UnionQuery> = inputs.workload.iter().map(|q| reformulate(q, schema)).collect();
            let members: Vec<ConjunctiveQuery> = unions.iter().flat_map(|u| u.members.iter().cloned()).collect();
            (
                State::initial_reformulated(&unions, &mut fresh)?,
                collect_statistics(&members, &inputs.store, None),
            )
        }
        Mode::Post => (
            State::initial(&inputs.workload, &mut fresh)?,
            collect_statistics(&inputs.workload, &inputs.store, Some(require(schema, mode)?)),
        ),
    };
    Ok(Prepared {
        initial,
        fresh,
        stats: Arc::new(stats),
    })
}

/// A recommended view. In post mode it also carries the union that is
/// actually materialized over the raw store.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewDoc {
    pub id: u32,
    pub name: String,
    pub head: Vec<Term>,
    pub body: Vec<TripleAtom>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reformulation: Option<UnionQuery>,
}

impl ViewDoc {
    pub fn as_query(&self) -> ConjunctiveQuery {
        ConjunctiveQuery {
            name: self.name.clone(),
            head: self.head.clone(),
            body: self.body.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneDocument {
    pub format: String,
    pub version: u32,
    pub mode: Mode,
    pub config: SearchConfig,
    pub workload: Vec<ConjunctiveQuery>,
    pub views: Vec<ViewDoc>,
    pub rewritings: Vec<Rewriting>,
    pub cost: CostBreakdown,
    pub search: SearchReport,
}

impl TuneDocument {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(src: &str) -> Result<Self> {
        let doc: TuneDocument = serde_json::from_str(src)?;
        if doc.format != FORMAT {
            return Err(Error::Config(format!("not a tuning document: format `{}`", doc.format)));
        }
        if doc.version != FORMAT_VERSION {
            return Err(Error::Config(format!(
                "unsupported document version {} (expected {FORMAT_VERSION})",
                doc.version
            )));
        }
        Ok(doc)
    }
}

/// Runs the whole pipeline for one mode.
pub fn tune(inputs: &Inputs, mode: Mode, config: &SearchConfig) -> Result<TuneDocument> {
    let Prepared {
        initial,
        mut fresh,
        stats,
    } = prepare(inputs, mode)?;
    let result = search(initial, &stats, config, &mut fresh)?;
    let best = result.best;
    let views = best
        .views
        .iter()
        .map(|v| {
            let reformulation = match mode {
                Mode::Post => Some(reformulate(&v.as_query(), require(inputs.schema.as_ref(), mode)?)),
                _ => None,
            };
            Ok(ViewDoc {
                id: v.id,
                name: v.name(),
                head: v.head.clone(),
                body: v.body.clone(),
                reformulation,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TuneDocument {
        format: FORMAT.to_string(),
        version: FORMAT_VERSION,
        mode,
        config: config.clone(),
        workload: inputs.workload.clone(),
        views,
        rewritings: best.rewritings.clone(),
        cost: result.report.best_cost,
        search: result.report,
    })
}

/// Evaluates every recommended view. Saturate mode evaluates over the
/// saturated store and so needs the schema; post mode evaluates the stored
/// reformulations over the raw store.
pub fn materialize_document(
    doc: &TuneDocument,
    store: &TripleStore,
    schema: Option<&Schema>,
) -> Result<BTreeMap<u32, Relation>> {
    let saturated;
    let base = if doc.mode == Mode::Saturate {
        saturated = saturate(store, require(schema, doc.mode)?);
        &saturated
    } else {
        store
    };
    let mut out = BTreeMap::new();
    for v in &doc.views {
        let rel = match &v.reformulation {
            Some(u) => evaluate_union(u, base),
            None => evaluate(&v.as_query(), base),
        };
        out.insert(v.id, rel);
    }
    Ok(out)
}

/// Answers every workload query from materialized views.
pub fn answer(doc: &TuneDocument, views: &HashMap<u32, Relation>) -> Result<Vec<(String, Relation)>> {
    doc.rewritings
        .iter()
        .map(|r| {
            let q = doc
                .workload
                .iter()
                .find(|q| q.name == r.query)
                .ok_or_else(|| Error::Invariant(format!("no workload query named {}", r.query)))?;
            let columns = column_names(&q.head);
            let rows = execute(&r.expr, views)?;
            Ok((r.query.clone(), Relation { columns, rows }))
        })
        .collect()
}
