//! Consistently oriented eigenbases.
//!
//! Any eigendecomposition or SVD leaves the sign of each eigenvector
//! arbitrary. [`orient`] removes that freedom by choosing reflection signs and
//! a cascade of Givens rotations so that `Rᵀ V S = I`, which also yields the
//! basis in polar form as an [`AngleMatrix`]. [`dirstats`] summarises
//! sequences of oriented bases with directional statistics, [`eigenflow`]
//! runs sign-stable principal-component regression over evolving data, and
//! [`synthkit`] generates ground-truth fixtures.

pub mod dirstats;
pub mod eigenflow;
pub mod error;
pub mod givens;
pub mod orient;
pub mod synthkit;
pub mod walkthrough;

pub use error::{Error, Result};
pub use givens::{
    build_subspace_rotation, cumulative_rotation, generate_oriented_eigenvectors, givens_rotation, AngleMatrix,
};
pub use orient::{
    orient_basis, orient_eigenvectors, orient_eigenvectors_traced, orient_eigenvectors_with,
    orthonormality_residual, solve_subspace_angles, solve_subspace_angles_with, sort_eigensystem, EigenSystem,
    OrientOptions, OrientStep, OrientedEigensystem, SortedEigensystem,
};
