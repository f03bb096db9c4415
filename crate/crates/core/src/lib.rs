//! Entropy-conservative and entropy-stable summation-by-parts discretization
//! of the compressible Navier-Stokes equations on curvilinear hexahedral
//! meshes, with entropy-consistent solid-wall boundary conditions.

pub mod cases;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod gas;
pub mod interface;
pub mod mesh;
pub mod rhs;
pub mod sbp;
pub mod time;
pub mod verify;
pub mod viscous;
pub mod wall;

pub use error::{Result, SolverError};
