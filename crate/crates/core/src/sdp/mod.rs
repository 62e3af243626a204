//! Doubly nonnegative relaxation, its first-order solver, cutting planes,
//! and certified upper bounds.

mod admm;
mod bound;
mod cuts;
mod cutting_plane;
mod relaxation;

pub use admm::{solve_dnn, solve_dnn_with, AdmmState, DnnParams, DnnSolution, DnnStop};
pub use bound::{d_min, dual_slack, safe_upper_bound, DualEstimate};
pub use cuts::{all_cuts, purge_inactive, separate_cuts, SeparationParams, VIOLATION_TOL};
pub use cutting_plane::{
    cutting_plane_bound, cutting_plane_bound_with, CuttingPlaneOutcome, CuttingPlaneParams,
    CuttingPlaneStop, RoundControl, RoundInfo,
};
pub use relaxation::{lift_solution, Cut, CutPool, DnnRelaxation};
