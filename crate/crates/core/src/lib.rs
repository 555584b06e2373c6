//! Numerical laboratory for fractional Dirichlet reaction-diffusion problems:
//! grids, the discrete fractional Laplacian, barrier profiles, time
//! integrators and moving-plane / symmetry diagnostics.

pub mod analysis;
pub mod error;
pub mod extension;
pub mod fracops;
pub mod geometry;
pub mod io;
pub mod linalg;
pub mod quadrature;
pub mod solver;
pub mod special;

pub use error::{Error, Result};
