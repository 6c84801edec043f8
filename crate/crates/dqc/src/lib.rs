//! Compiler for distributing quantum circuits over networks of quantum modules.
//!
//! A circuit in the `{H, Rz, CRz}` gateset is turned into a hypergraph whose
//! vertices are qubits and two-qubit gates; partitioning that hypergraph over
//! the modules of a network yields a distribution whose entanglement cost
//! (ebits) is driven down by packing gates into shared teleportation protocols,
//! embedding intervening Hadamard sections, and routing over Steiner trees.
//! A circuit builder materialises the distributed circuit (link qubits,
//! starting/ending processes, classical corrections) and a dense-statevector
//! verifier checks equivalence with the original circuit.

pub mod allocate;
pub mod bench;
pub mod builder;
pub mod circuit;
pub mod cli;
pub mod cost;
pub mod cover;
pub mod distribution;
pub mod network;
pub mod packing;
pub mod refine;
pub mod verify;
pub mod workflow;

pub use builder::{build, DistributedCircuit};
pub use circuit::{Circuit, Gate};
pub use distribution::{Distribution, Hypergraph};
pub use network::Network;

/// Absolute tolerance for comparing gate phases (in half-turns, mod 2).
pub const PHASE_TOL: f64 = 1e-10;

/// Distance between two phases in half-turns, reduced mod 2.
pub fn phase_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0);
    d.min(2.0 - d)
}

/// True when `phase` is equivalent to `target` mod 2 half-turns.
pub fn phase_eq(phase: f64, target: f64) -> bool {
    phase_dist(phase, target) <= PHASE_TOL
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unsupported gate: {0}")]
    UnsupportedGate(String),
    #[error("circuit is not rebased to {{H, Rz, CRz}}: found {0}")]
    NotRebased(String),
    #[error("unknown module: {0}")]
    UnknownModule(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid hyperedge: {0}")]
    InvalidHyperedge(String),
    #[error("unknown vertex: {0}")]
    UnknownVertex(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("graph is not bipartite: {0}")]
    NotBipartite(String),
    #[error("conflict structure is not bipartite: {0}")]
    NonBipartiteConflict(String),
    #[error("instance too large: {0}")]
    TooLarge(String),
    #[error("distributed circuit does not factorise: {0}")]
    NonFactorizable(String),
    #[error("link capacity bound is infeasible: {0}")]
    InfeasibleBound(String),
    #[error("conflicting embeddings produce a non-local correction: {0}")]
    ConflictDetected(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
