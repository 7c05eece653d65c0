//! Riemannian stochastic variance-reduced cubic-regularized Newton (R-SVRC)
//! optimization on embedded submanifolds, with exact and δ-inexact cubic
//! subproblem solvers, sphere and SPD geometries, two benchmark finite-sum
//! objectives, stationarity diagnostics, and a reproducible experiment
//! harness.

pub mod cubic;
pub mod diagnostics;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod lanczos;
pub mod linalg;
pub mod objectives;
pub mod optimizer;
pub mod rng;
pub mod spd;
pub mod sphere;

pub use error::{Error, Result};
pub use geometry::{Manifold, Point, TangentVector};
pub use spd::SpdManifold;
pub use sphere::SphereManifold;
