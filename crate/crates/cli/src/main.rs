use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rdfvs_core::cost::CostWeights;
use rdfvs_core::model::parse_queries;
use rdfvs_core::pipeline::{answer, materialize_document, Mode, RunManifest, TuneDocument};
use rdfvs_core::rdfs::{reformulate, saturate, Schema};
use rdfvs_core::search::{SearchConfig, Strategy, Termination};
use rdfvs_core::store::{collect_statistics, Relation, TripleStore};
use rdfvs_core::workload::{generate, generate_schema, generate_store, Commonality, Shape, StoreSpec, WorkloadSpec};
use rdfvs_core::Error;

#[derive(Parser)]
#[command(name = "rdfvs", version, about = "Materialized view selection for RDF workloads")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Search for a view set and write the tuning document.
    Tune(TuneArgs),
    /// Reformulate every query of a file against a schema.
    Reformulate {
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Add every triple entailed by a schema.
    Saturate {
        #[arg(long)]
        triples: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Workload statistics as JSON; with a schema, those of the saturated store.
    Stats {
        #[arg(long)]
        triples: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic query workload.
    GenWorkload(GenWorkloadArgs),
    /// Generate a synthetic triple store and, optionally, a schema over it.
    GenStore {
        #[arg(long, default_value_t = 10_000)]
        size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write a schema with this many statements.
        #[arg(long, requires = "schema_out")]
        statements: Option<usize>,
        #[arg(long)]
        schema_out: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the views of a tuning document, one TSV file per view.
    Materialize {
        #[arg(long)]
        views: PathBuf,
        #[arg(long)]
        triples: PathBuf,
        #[arg(long)]
        schema: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Answer the workload from materialized views, one TSV file per query.
    Answer {
        #[arg(long)]
        views: PathBuf,
        /// Directory written by `materialize`.
        #[arg(long)]
        materialized: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct TuneArgs {
    #[arg(long)]
    triples: PathBuf,
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long)]
    queries: PathBuf,
    #[arg(long, default_value = "plain")]
    mode: Mode,
    #[arg(long, default_value = "dfs")]
    strategy: Strategy,
    #[arg(long)]
    avf: bool,
    #[arg(long)]
    stop_var: bool,
    #[arg(long)]
    stop_tt: bool,
    /// Wall-clock budget in seconds.
    #[arg(long)]
    timeout: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    cs: f64,
    #[arg(long, default_value_t = 1.0)]
    cr: f64,
    #[arg(long, default_value_t = 0.5)]
    cm: f64,
    #[arg(long, default_value_t = 1.0)]
    c1: f64,
    #[arg(long, default_value_t = 1.0)]
    c2: f64,
    #[arg(long, default_value_t = 2.0)]
    f: f64,
    /// Shuffle transitions with this seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Cap on stored states for the exhaustive strategies.
    #[arg(long)]
    max_states: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// CSV file for the best-cost trace.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct GenWorkloadArgs {
    #[arg(long, default_value = "chain")]
    shape: Shape,
    /// Number of queries.
    #[arg(long, default_value_t = 5)]
    count: usize,
    #[arg(long, default_value_t = 5)]
    atoms: usize,
    #[arg(long, default_value = "low")]
    commonality: Commonality,
    #[arg(long, default_value_t = 0.3)]
    constant_density: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Draw constants from this store so that queries have answers.
    #[arg(long)]
    triples: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(|e| Error::at_path(path, e))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Error> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::at_path(p, e))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn tune(a: TuneArgs) -> Result<(), Error> {
    let manifest = RunManifest {
        triples: a.triples,
        schema: a.schema,
        queries: a.queries,
        mode: a.mode,
        search: SearchConfig {
            strategy: a.strategy,
            avf: a.avf,
            stop_tt: a.stop_tt,
            stop_var: a.stop_var,
            stop_time: a.timeout,
            weights: CostWeights {
                cs: a.cs,
                cr: a.cr,
                cm: a.cm,
                c1: a.c1,
                c2: a.c2,
                f: a.f,
            },
            seed: a.seed,
            max_states: a.max_states,
        },
        out: a.out.clone(),
        trace: a.trace,
    };
    let doc = manifest.run()?;
    if a.out.is_none() {
        println!("{}", doc.to_json()?);
    }
    let r = &doc.search;
    eprintln!(
        "{} views, cost {:.3} -> {:.3} (rcr {:.4}), {} states, {}",
        doc.views.len(),
        r.initial_cost.total,
        r.best_cost.total,
        r.rcr,
        r.counters.created,
        match r.termination {
            Termination::Exhausted => "search exhausted",
            Termination::Timeout => "stopped at the time limit",
        }
    );
    Ok(())
}

fn gen_workload(a: GenWorkloadArgs) -> Result<(), Error> {
    let spec = WorkloadSpec {
        shape: a.shape,
        queries: a.count,
        atoms: a.atoms,
        commonality: a.commonality,
        constant_density: a.constant_density,
        seed: a.seed,
    };
    let store = a.triples.as_deref().map(TripleStore::load_path).transpose()?;
    let qs = generate(&spec, store.as_ref())?;
    let text: String = qs.iter().map(|q| q.to_text() + "\n").collect();
    emit(a.out.as_deref(), &text)
}

fn load_doc(path: &Path) -> Result<TuneDocument, Error> {
    TuneDocument::from_json(&read(path)?)
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Tune(a) => tune(a),
        Command::Reformulate { queries, schema, out } => {
            let schema = Schema::load_path(&schema)?;
            let qs = parse_queries(&read(&queries)?)?;
            let text: String = qs.iter().map(|q| reformulate(q, &schema).to_text() + "\n").collect();
            emit(out.as_deref(), &text)
        }
        Command::Saturate { triples, schema, out } => {
            let store = saturate(&TripleStore::load_path(&triples)?, &Schema::load_path(&schema)?);
            let mut buf = Vec::new();
            store.write(&mut buf)?;
            emit(out.as_deref(), &String::from_utf8_lossy(&buf))
        }
        Command::Stats {
            triples,
            queries,
            schema,
            out,
        } => {
            let store = TripleStore::load_path(&triples)?;
            let schema = schema.as_deref().map(Schema::load_path).transpose()?;
            let qs = parse_queries(&read(&queries)?)?;
            let stats = collect_statistics(&qs, &store, schema.as_ref());
            emit(out.as_deref(), &(stats.to_json()? + "\n"))
        }
        Command::GenWorkload(a) => gen_workload(a),
        Command::GenStore {
            size,
            seed,
            statements,
            schema_out,
            out,
        } => {
            let spec = StoreSpec::new(size, seed);
            let store = generate_store(&spec)?;
            if let (Some(n), Some(path)) = (statements, schema_out) {
                let schema = generate_schema(n, &spec.property_names(), &spec.class_names(), seed)?;
                std::fs::write(path, schema.to_text())?;
            }
            let mut buf = Vec::new();
            store.write(&mut buf)?;
            emit(out.as_deref(), &String::from_utf8_lossy(&buf))
        }
        Command::Materialize {
            views,
            triples,
            schema,
            out,
        } => {
            let doc = load_doc(&views)?;
            let store = TripleStore::load_path(&triples)?;
            let schema = schema.as_deref().map(Schema::load_path).transpose()?;
            let rels = materialize_document(&doc, &store, schema.as_ref())?;
            std::fs::create_dir_all(&out)?;
            for (id, rel) in rels {
                std::fs::write(out.join(format!("v{id}.tsv")), rel.to_tsv())?;
            }
            Ok(())
        }
        Command::Answer {
            views,
            materialized,
            out,
        } => {
            let doc = load_doc(&views)?;
            let mut rels = HashMap::new();
            for v in &doc.views {
                let path = materialized.join(format!("v{}.tsv", v.id));
                rels.insert(v.id, Relation::from_tsv(&read(&path)?)?);
            }
            std::fs::create_dir_all(&out)?;
            for (name, rel) in answer(&doc, &rels)? {
                std::fs::write(out.join(format!("{name}.tsv")), rel.to_tsv())?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 2 } else { 3 })
        }
    }
}
