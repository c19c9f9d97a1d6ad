//! Explainable conversational question answering over a heterogeneous
//! knowledge snapshot.
//!
//! The pipeline turns a conversational question into a structured
//! representation, retrieves verbalized evidences (KB facts, text, tables,
//! infoboxes), builds a bipartite entity/evidence graph and iteratively
//! shrinks it with a question-aware GNN until an answer and a handful of
//! explanatory evidences remain.

pub mod error;
pub mod eval;
pub mod gnn;
pub mod graph;
pub mod matching;
pub mod pipeline;
pub mod sr;
pub mod store;
pub mod synth;
pub mod temporal;
pub mod text;

pub use error::{Error, Result};
