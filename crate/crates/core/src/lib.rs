//! Laplace operators on metric graphs.
//!
//! The crate models a metric graph, boundary-condition pairs (A,B) on its
//! boundary space, and the analysis built on them: scattering matrices,
//! operator classification (accretive, dissipative, self-adjoint), locality
//! and continuity forms, positivity and Feller criteria, closed-form Green's
//! functions with independent finite-difference oracles, negative-spectrum
//! scans, semigroup evolution, and the walk-series expansion of the kernel.

pub mod bc;
pub mod error;
pub mod graph;
pub mod graph_fn;
pub mod input;
pub mod linalg;
pub mod resolvent;
pub mod semigroup;
pub mod walks;

pub use error::{Error, Result};
