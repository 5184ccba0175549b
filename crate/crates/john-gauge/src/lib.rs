//! Maximum-volume inscribed (John) ellipsoids of simplices and H-polytopes.
//!
//! The crate is organized around four pillars:
//!
//! - [`geom`] — simplex/polytope geometry: construction, halfspace
//!   conversion, volumes, dihedral angles, barycentric coordinates.
//! - [`mvie`] — the inscribed-ellipsoid machinery: a Chebyshev (largest
//!   inscribed ball) solver, a log-det interior-point solver for the
//!   maximum-volume inscribed ellipsoid of an H-polytope, and the exact
//!   analytic John ellipsoid of a simplex.
//! - [`john`] — John decompositions of the identity: contact points,
//!   weights, residual verification, and the ball-iff-regular classifier.
//! - [`blcheck`] — the dimension-lift to an identity decomposition one
//!   dimension up, exponential-density product integrands, the slab-section
//!   closed forms, Monte Carlo estimates, and the sharp volume bound.
//!
//! Interchangeable solver strategies live in [`engine`]: each ellipsoid
//! engine implements [`engine::MvieEngine`] and is selected by name at
//! runtime. The density families used by the integral checks follow the same
//! pattern in [`blcheck::density_by_name`].

// `!(x > 0.0)` is used throughout as the NaN-rejecting positivity test;
// the suggested `partial_cmp` spelling obscures that intent.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod blcheck;
pub mod engine;
pub mod geom;
pub mod john;
pub(crate) mod linalg;
pub mod mvie;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A simplex (or linear map) is too close to degenerate to work with.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// An instance generator exhausted its rejection budget.
    #[error("conditioning: {0}")]
    Conditioning(String),

    /// A value fails a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The requested index does not exist.
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    /// The polytope has empty interior (or is empty outright).
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// The polytope is unbounded, so no maximal ellipsoid exists.
    #[error("unbounded: {0}")]
    Unbounded(String),

    /// A certificate or decomposition fails its residual gate.
    #[error("verification failed: {0}")]
    Verification(String),

    /// A strategy name is not registered.
    #[error("unknown strategy `{0}` (available: {1})")]
    UnknownStrategy(String, String),
}

pub type Result<T> = std::result::Result<T, Error>;
