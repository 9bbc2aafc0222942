//! Halfspace polyhedra, affine images of polyhedra, and the LP-backed queries
//! the search needs on them.

mod ahpolytope;
mod hpolyhedron;
mod nullspace;
mod sampler;

pub use ahpolytope::{ah_containment_certified, AHPolytope};
pub use hpolyhedron::{ChebyshevBall, HPolyhedron, SplitPolyhedron};
pub use nullspace::nullspace_reduce;
pub use sampler::{sample_interior, HitAndRun, BURN_IN_STEPS, THINNING_STEPS};

use thiserror::Error;

use crate::lp::SolverError;

/// Default slack for point membership tests.
pub const MEMBERSHIP_TOL: f64 = 1e-6;

/// Singular values below `RANK_TOL * sigma_max` count as zero.
pub const RANK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("set is empty")]
    Empty,
    #[error("set is unbounded")]
    Unbounded,
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("malformed polyhedron: {0}")]
    Malformed(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<(), GeometryError> {
    if expected == got {
        Ok(())
    } else {
        Err(GeometryError::DimensionMismatch { expected, got })
    }
}
