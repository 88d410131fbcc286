//! Simplified weak Galerkin (SWG) discretization of
//! −∇·(α∇u) + β·∇u + cu = f with Dirichlet data on polygonal meshes.
//!
//! The unknowns are one constant per mesh edge. On each cell the edge values
//! define a weak gradient and a least-squares linear extension, from which
//! the element matrices are formed in closed form.

pub mod cases;
pub mod config;
pub mod element;
pub mod error;
pub mod harness;
pub mod localops;
pub mod mesh;
pub mod postprocess;
pub mod quadrature;
pub mod sparse;
pub mod system;

pub use error::{Result, SwgError};
