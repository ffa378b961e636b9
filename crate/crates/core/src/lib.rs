//! Deep Graph Infomax: unsupervised node embeddings learned by maximizing
//! mutual information between patch representations and a graph summary.

pub mod cli;
pub mod error;
pub mod eval;
pub mod graph;
pub mod model;
pub mod sparse;
pub mod tensor;
pub mod theory;

pub use error::{DgiError, Result};
