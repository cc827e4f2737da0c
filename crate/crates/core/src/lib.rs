//! Sparse Boltzmann machines over scale-free, small-world bipartite
//! topologies.

pub mod error;
pub mod rng;
pub mod topology;

pub use error::{Error, Result};
pub mod data;
pub mod models;
pub mod evaluation;
pub mod training;
