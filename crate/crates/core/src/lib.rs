//! Online vertex-Ramsey densities for small graphs.
//!
//! The crate computes `m₁*(F, r)` exactly as the inverse root of `Λ_θ(F, r)`,
//! extracts Painter's priority-list strategy and Builder's abstract strategy
//! from the weight computation, and validates both with a game engine, an
//! exhaustive minimax oracle and a vertex-exposure random-graph simulator.

pub mod board;
pub mod builder;
pub mod density;
pub mod flow;
pub mod game;
pub mod graph;
pub mod painter;
pub mod process;
pub mod rational;
pub mod weights;

pub use board::Board;
pub use graph::{CanonicalKey, Graph, OrderedGraph, SubgraphFamily};
pub use rational::{ExtRational, Rational};

/// Errors surfaced to callers; the CLI maps them to exit codes.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Graph(#[from] graph::GraphError),
    #[error(transparent)]
    Rational(#[from] rational::RationalError),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("resource limit reached: {0}")]
    Resource(String),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

pub type Result<T> = std::result::Result<T, Error>;
