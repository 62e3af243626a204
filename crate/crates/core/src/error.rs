use thiserror::Error;

use crate::model::Side;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("label {label} out of range 1..={k}")]
    LabelOutOfRange { label: usize, k: usize },

    #[error("cluster {0} is empty on the {1} side")]
    EmptyCluster(usize, Side),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("unsupported format version {0}")]
    UnsupportedVersion(String),

    #[error("infeasible: {0}")]
    Infeasible(InfeasibleReport),

    #[error("eigendecomposition did not converge (residual {residual:.3e})")]
    EigenNonConvergence { residual: f64 },

    #[error("instance too large for exhaustive search ({n}x{m}, limit {limit})")]
    SizeGuard { n: usize, m: usize, limit: usize },
}

/// Why an instance (or a subproblem) has no feasible biclustering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InfeasibleReport {
    /// A cannot-link pair whose endpoints are joined by must-links.
    /// Indices are 0-based original vertices.
    MustLinkConflict { side: Side, i: usize, j: usize },
    /// Fewer must-link components than clusters.
    TooFewComponents {
        side: Side,
        components: usize,
        k: usize,
    },
    /// The cannot-link graph on one side admits no assignment to k non-empty labels.
    NoColoring { side: Side },
}

impl std::fmt::Display for InfeasibleReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InfeasibleReport::MustLinkConflict { side, i, j } => write!(
                f,
                "cannot-link ({}, {}) on side {side} joins vertices of one must-link component",
                i + 1,
                j + 1
            ),
            InfeasibleReport::TooFewComponents {
                side,
                components,
                k,
            } => write!(
                f,
                "side {side} has {components} must-link components, fewer than k = {k}"
            ),
            InfeasibleReport::NoColoring { side } => {
                write!(
                    f,
                    "cannot-link constraints on side {side} admit no k-labeling"
                )
            }
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
