//! Constrained biclustering as the k densest disjoint biclique problem.
//!
//! Two solvers share one model:
//!
//! * [`branch_and_cut::solve_exact`]: best-first branch-and-cut whose bounds
//!   come from a doubly nonnegative SDP relaxation solved by a first-order
//!   splitting method and post-processed into certified upper bounds.
//! * [`lowrank::heuristic_solve`]: a low-rank factorization of the same
//!   relaxation solved by an augmented Lagrangian method with a block
//!   projected-gradient inner solver.
//!
//! Both recover feasible biclusterings through [`rounding::round_solution`].

pub mod branch_and_cut;
pub mod error;
pub mod evalgen;
pub mod format;
pub mod lowrank;
pub mod model;
pub mod numerics;
pub mod preprocess;
pub mod rounding;
pub mod sdp;

pub use error::{Error, InfeasibleReport, Result};
pub use model::{
    check_feasible, total_density, Biclustering, Instance, PairwiseConstraints, Side, WeightMatrix,
};
