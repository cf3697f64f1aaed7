//! Numerical solver for the singular Monge-Ampere equation
//! `det D^2 u = H / (l_1 ... l_N)` on convex polygons with Guillemin
//! boundary conditions, together with the boundary-regularity diagnostics
//! (Donaldson functionals, Hessian comparability, weighted Hoelder norms,
//! partial Legendre / Keldysh checks, and Huang-type barriers).

pub mod error;
pub mod geometry;
pub mod potential;
pub mod quad;
pub mod boundary;
pub mod linalg;
pub mod mesh;
pub mod solver;
pub mod field;
pub mod diagnostics;
pub mod legendre;
pub mod barrier;
pub mod expr;
pub mod config;
pub mod study;

pub use error::{Error, Result};
