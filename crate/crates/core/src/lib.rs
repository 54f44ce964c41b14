//! Constructive tools for singular and degenerate fully nonlinear elliptic
//! operators on planar domains satisfying a uniform exterior cone condition.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: polygonal domains, exterior cone verification, interior and
//!   exterior offset sequences, and the wide-stencil lattice.
//! - [`operators`]: Pucci extremal operators and the operator families
//!   `F(x, p, M)` together with randomized structural checks.
//! - [`barriers`]: closed-form local cone barriers `r^γ φ(θ)` and the global
//!   barriers built from them.
//! - [`scheme`]: the monotone finite-difference discretization and Dirichlet
//!   solvers.
//! - [`eigen`]: principal eigenvalue estimation and maximum-principle tests.
//! - [`cli`]: configuration parsing and the report-writing commands.

pub mod barriers;
pub mod cli;
pub mod eigen;
pub mod error;
pub mod expr;
pub mod geometry;
pub mod operators;
pub mod sampling;
pub mod scheme;

pub use error::{Error, Result};

/// A point or vector in the plane.
pub type Point = [f64; 2];
