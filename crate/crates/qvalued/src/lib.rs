//! Numerical machinery for unordered multisets of points ("Q-points"): the
//! assignment metric, the sorting embedding of the multiset space into
//! Euclidean space and the face complex of its image cone, almost
//! projections onto that cone, Q-valued Dirichlet minimization on planar
//! meshes, and excess analysis of graph currents, with verification
//! harnesses for the quantitative estimates each construction satisfies.

pub mod assignment;
pub mod currents;
pub mod dirichlet;
pub mod embedding;
pub mod error;
pub mod io;
pub mod mesh;
pub mod projections;
pub mod qspace;

pub use error::{Error, Result};
pub use qspace::QPoint;
