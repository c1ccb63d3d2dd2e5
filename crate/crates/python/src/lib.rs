use std::collections::HashMap;

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use rdfvs_core::cost::CostWeights;
use rdfvs_core::model::{are_equivalent, minimize, parse_queries, parse_query, ConjunctiveQuery};
use rdfvs_core::pipeline::{self, Inputs, Mode, TuneDocument};
use rdfvs_core::rdfs::{self, Schema as CoreSchema};
use rdfvs_core::search::{SearchConfig, Strategy};
use rdfvs_core::store::{self, TripleStore as CoreStore};
use rdfvs_core::symbol::Symbol;
use rdfvs_core::workload::{self, Commonality, Shape, StoreSpec, WorkloadSpec};
use rdfvs_core::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyOSError::new_err(e.to_string()),
        e if e.is_input_error() => PyValueError::new_err(e.to_string()),
        e => PyRuntimeError::new_err(e.to_string()),
    }
}

fn rows(rel: &store::Relation) -> Vec<Vec<String>> {
    rel.sorted_rows()
}

/// A conjunctive query over the triple table.
#[pyclass(frozen, from_py_object, module = "rdfvs")]
#[derive(Clone)]
struct Query {
    inner: ConjunctiveQuery,
}

#[pymethods]
impl Query {
    /// Parses one query, e.g. `q(X) :- t(X, p, Y) .`
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        Ok(Query {
            inner: parse_query(text).map_err(py_err)?,
        })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn head(&self) -> Vec<String> {
        self.inner.head.iter().map(|t| t.to_string()).collect()
    }

    #[getter]
    fn body(&self) -> Vec<(String, String, String)> {
        self.inner
            .body
            .iter()
            .map(|a| (a.s().to_string(), a.p().to_string(), a.o().to_string()))
            .collect()
    }

    fn minimize(&self) -> Query {
        Query {
            inner: minimize(&self.inner),
        }
    }

    fn is_equivalent(&self, other: &Query) -> bool {
        are_equivalent(&self.inner, &other.inner)
    }

    fn __len__(&self) -> usize {
        self.inner.body.len()
    }

    fn __str__(&self) -> String {
        self.inner.to_text()
    }

    fn __repr__(&self) -> String {
        format!("Query({:?})", self.inner.to_text())
    }

    fn __eq__(&self, other: &Query) -> bool {
        self.inner == other.inner
    }
}

/// An RDFS schema.
#[pyclass(frozen, skip_from_py_object, module = "rdfvs")]
#[derive(Clone)]
struct Schema {
    inner: CoreSchema,
}

#[pymethods]
impl Schema {
    /// Parses statements such as `painting rdfs:subClassOf picture .`
    #[new]
    #[pyo3(signature = (text = ""))]
    fn new(text: &str) -> PyResult<Self> {
        Ok(Schema {
            inner: CoreSchema::load_str(text).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        Ok(Schema {
            inner: CoreSchema::load_path(&path).map_err(py_err)?,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __str__(&self) -> String {
        self.inner.to_text()
    }
}

/// A set of triples.
#[pyclass(frozen, skip_from_py_object, module = "rdfvs")]
#[derive(Clone)]
struct TripleStore {
    inner: CoreStore,
}

#[pymethods]
impl TripleStore {
    /// Parses one `s p o .` triple per line.
    #[new]
    #[pyo3(signature = (text = ""))]
    fn new(text: &str) -> PyResult<Self> {
        Ok(TripleStore {
            inner: CoreStore::load_str(text).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        Ok(TripleStore {
            inner: CoreStore::load_path(&path).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn from_triples(triples: Vec<(String, String, String)>) -> Self {
        let ts = triples
            .iter()
            .map(|(s, p, o)| [Symbol::new(s), Symbol::new(p), Symbol::new(o)]);
        TripleStore {
            inner: CoreStore::from_triples(ts),
        }
    }

    /// Triples in subject, property, object order.
    fn triples(&self) -> Vec<(String, String, String)> {
        self.inner
            .triples()
            .map(|t| (t[0].as_str().to_string(), t[1].as_str().to_string(), t[2].as_str().to_string()))
            .collect()
    }

    fn saturate(&self, schema: &Schema) -> TripleStore {
        TripleStore {
            inner: rdfs::saturate(&self.inner, &schema.inner),
        }
    }

    /// Answers of a query as sorted rows.
    fn evaluate(&self, query: &Query) -> Vec<Vec<String>> {
        rows(&store::evaluate(&query.inner, &self.inner))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// The outcome of a tuning run.
#[pyclass(frozen, module = "rdfvs")]
struct TuneResult {
    doc: TuneDocument,
}

#[pymethods]
impl TuneResult {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(TuneResult {
            doc: TuneDocument::from_json(text).map_err(py_err)?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        self.doc.to_json().map_err(py_err)
    }

    /// Recommended views.
    #[getter]
    fn views(&self) -> Vec<Query> {
        self.doc.views.iter().map(|v| Query { inner: v.as_query() }).collect()
    }

    /// Rewriting of each workload query, as relational algebra text.
    #[getter]
    fn rewritings(&self) -> HashMap<String, String> {
        self.doc
            .rewritings
            .iter()
            .map(|r| (r.query.clone(), r.expr.to_string()))
            .collect()
    }

    /// Cost breakdown of the best state.
    #[getter]
    fn cost(&self) -> HashMap<&'static str, f64> {
        let c = &self.doc.cost;
        HashMap::from([("vso", c.vso), ("rec", c.rec), ("vmc", c.vmc), ("total", c.total)])
    }

    #[getter]
    fn initial_cost(&self) -> f64 {
        self.doc.search.initial_cost.total
    }

    /// Relative cost reduction of the best state over the initial one.
    #[getter]
    fn rcr(&self) -> f64 {
        self.doc.search.rcr
    }

    #[getter]
    fn timed_out(&self) -> bool {
        self.doc.search.termination == rdfvs_core::search::Termination::Timeout
    }

    #[getter]
    fn counters(&self) -> HashMap<&'static str, u64> {
        let c = &self.doc.search.counters;
        HashMap::from([
            ("created", c.created),
            ("duplicates", c.duplicates),
            ("discarded", c.discarded),
            ("explored", c.explored),
            ("pending", c.pending),
            ("transitions", c.transitions),
        ])
    }

    /// Materializes the views over `store` and answers every workload query
    /// from them.
    #[pyo3(signature = (store, schema = None))]
    fn answer(&self, store: &TripleStore, schema: Option<&Schema>) -> PyResult<HashMap<String, Vec<Vec<String>>>> {
        let views = pipeline::materialize_document(&self.doc, &store.inner, schema.map(|s| &s.inner)).map_err(py_err)?;
        let views = views.into_iter().collect();
        Ok(pipeline::answer(&self.doc, &views)
            .map_err(py_err)?
            .into_iter()
            .map(|(name, rel)| (name, rows(&rel)))
            .collect())
    }
}

#[pyfunction]
fn parse(text: &str) -> PyResult<Vec<Query>> {
    Ok(parse_queries(text)
        .map_err(py_err)?
        .into_iter()
        .map(|inner| Query { inner })
        .collect())
}

/// Members of the union that reformulates `query` under `schema`.
#[pyfunction]
fn reformulate(query: &Query, schema: &Schema) -> Vec<Query> {
    rdfs::reformulate(&query.inner, &schema.inner)
        .members
        .into_iter()
        .map(|inner| Query { inner })
        .collect()
}

#[pyfunction]
#[pyo3(signature = (
    store, queries, schema = None, mode = "plain", strategy = "dfs", avf = false, stop_var = false,
    stop_tt = false, timeout = None, cs = 1.0, cr = 1.0, cm = 0.5, c1 = 1.0, c2 = 1.0, f = 2.0, seed = None,
))]
#[allow(clippy::too_many_arguments)]
fn tune(
    py: Python<'_>,
    store: &TripleStore,
    queries: Vec<Query>,
    schema: Option<&Schema>,
    mode: &str,
    strategy: &str,
    avf: bool,
    stop_var: bool,
    stop_tt: bool,
    timeout: Option<f64>,
    cs: f64,
    cr: f64,
    cm: f64,
    c1: f64,
    c2: f64,
    f: f64,
    seed: Option<u64>,
) -> PyResult<TuneResult> {
    let mode: Mode = mode.parse().map_err(py_err)?;
    let config = SearchConfig {
        strategy: strategy.parse::<Strategy>().map_err(py_err)?,
        avf,
        stop_tt,
        stop_var,
        stop_time: timeout,
        weights: CostWeights { cs, cr, cm, c1, c2, f },
        seed,
        max_states: None,
    };
    config.validate().map_err(py_err)?;
    let inputs = Inputs {
        store: store.inner.clone(),
        schema: schema.map(|s| s.inner.clone()),
        workload: queries.into_iter().map(|q| q.inner).collect(),
    };
    let doc = py
        .detach(|| pipeline::tune(&inputs, mode, &config))
        .map_err(py_err)?;
    Ok(TuneResult { doc })
}

/// A synthetic store of `size` triples.
#[pyfunction]
#[pyo3(signature = (size, seed = 0))]
fn generate_store(size: usize, seed: u64) -> PyResult<TripleStore> {
    Ok(TripleStore {
        inner: workload::generate_store(&StoreSpec::new(size, seed)).map_err(py_err)?,
    })
}

/// A random schema over the vocabulary of `generate_store(size, ...)`.
#[pyfunction]
#[pyo3(signature = (statements, size, seed = 0))]
fn generate_schema(statements: usize, size: usize, seed: u64) -> PyResult<Schema> {
    let spec = StoreSpec::new(size, seed);
    Ok(Schema {
        inner: workload::generate_schema(statements, &spec.property_names(), &spec.class_names(), seed)
            .map_err(py_err)?,
    })
}

#[pyfunction]
#[pyo3(signature = (
    shape = "chain", count = 5, atoms = 5, commonality = "low", constant_density = 0.3, seed = 0, store = None,
))]
fn generate_workload(
    shape: &str,
    count: usize,
    atoms: usize,
    commonality: &str,
    constant_density: f64,
    seed: u64,
    store: Option<&TripleStore>,
) -> PyResult<Vec<Query>> {
    let spec = WorkloadSpec {
        shape: shape.parse::<Shape>().map_err(py_err)?,
        queries: count,
        atoms,
        commonality: commonality.parse::<Commonality>().map_err(py_err)?,
        constant_density,
        seed,
    };
    Ok(workload::generate(&spec, store.map(|s| &s.inner))
        .map_err(py_err)?
        .into_iter()
        .map(|inner| Query { inner })
        .collect())
}

#[pymodule]
fn rdfvs(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Query>()?;
    m.add_class::<Schema>()?;
    m.add_class::<TripleStore>()?;
    m.add_class::<TuneResult>()?;
    m.add_function(wrap_pyfunction!(parse, m)?)?;
    m.add_function(wrap_pyfunction!(reformulate, m)?)?;
    m.add_function(wrap_pyfunction!(tune, m)?)?;
    m.add_function(wrap_pyfunction!(generate_store, m)?)?;
    m.add_function(wrap_pyfunction!(generate_schema, m)?)?;
    m.add_function(wrap_pyfunction!(generate_workload, m)?)?;
    Ok(())
}
