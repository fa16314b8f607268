//! Solver library for (p,q)-fair clustering.
//!
//! Given a metric on `m` points, `n` non-negative group weight functions and a
//! center budget `k`, the objective is the `ℓ_q`-norm over groups of each
//! group's weighted `ℓ_p` clustering cost. The crate provides:
//!
//! * exact cost/volume evaluators and metric validation ([`instance`]),
//! * convex-programming relaxations for both parameter regimes, solved with a
//!   cutting-plane engine, plus the round-or-cut loop for the exponential
//!   cluster-family constraints ([`relax`]),
//! * the sparsifying reduction onto at most `k/(1-γ)` representative points
//!   ([`reduction`]),
//! * randomized rounding of the sparsified solution with per-realization cost
//!   certificates ([`rounding`]),
//! * end-to-end approximation pipelines and the norm-swap baseline
//!   ([`algorithms`]),
//! * brute-force and Monte-Carlo ground-truth machinery ([`oracle`]),
//! * Min s-Union instance generators and the reduction to clustering
//!   ([`hardness`]).
//!
//! Everything is deterministic given an instance, a seed and the solver
//! tolerances; all randomness flows through seedable ChaCha streams.

pub mod algorithms;
pub mod corpus;
pub mod error;
pub mod hardness;
pub mod instance;
pub mod io;
pub mod oracle;
pub mod reduction;
pub mod relax;
pub mod rounding;

pub use error::Error;
pub use instance::{CenterSet, ClusterFamily, Instance, MetricSpace};
pub use relax::{ConstraintKind, ConstraintPool, FractionalSolution, Regime};

/// Crate result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Version stamp written into emitted documents.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
