//! Finite element solver for the nonstationary Stokes equations on the unit
//! square, discretized by Taylor–Hood (Q2/Q1) elements in space and a
//! continuous piecewise linear Galerkin–Petrov method in time, together with
//! two pressure post-processing schemes and a convergence harness.

pub mod analysis;
pub mod assembly;
pub mod cli;
pub mod error;
pub mod fem_space;
pub mod linsolve;
pub mod mesh;
pub mod postprocess;
pub mod quadrature;
pub mod report;
pub mod timestepping;
pub mod verify;

pub use error::{Result, StokesError};
