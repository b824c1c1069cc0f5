//! Effective conductance and resistance on connection graphs.

pub mod builders;
pub mod check;
pub mod conductance;
pub mod decompose;
pub mod dirichlet;
pub mod error;
pub mod graph;
pub mod io;
pub mod linalg;
pub mod meanpath;
pub mod resistance;
pub mod sweep;

pub use conductance::PairMatrix;
pub use error::{Error, Result};
pub use graph::{BlockVector, ConnectionGraph, Edge, Signature, WeightedGraph};
