//! View selection for RDF query workloads under RDFS entailment.

pub mod cost;
pub mod error;
pub mod model;
pub mod pipeline;
pub mod rdfs;
pub mod search;
pub mod state;
pub mod store;
pub mod symbol;
pub mod workload;

pub use error::{Error, Result};
