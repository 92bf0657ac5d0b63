//! Desk-scale numerical laboratory for mean-field particle systems near Gibbs
//! equilibrium on the unit torus: interaction kernels from Fourier data, spatial
//! Gibbs sampling and partition-function estimation, cluster-expansion
//! combinatorics, symplectic N-body dynamics with signed fluctuation weights,
//! Hoeffding correlation functions, two independent linearized-Vlasov solvers,
//! and the confined mean-field fixed point.
//!
//! The `harness` module ties these together into seeded, reproducible
//! experiments driven by the `fluctlab` CLI.

pub mod cluster;
pub mod correlations;
pub mod dynamics;
pub mod error;
pub mod gibbs;
pub mod harness;
pub mod kernels;
pub mod meanfield;
pub mod numerics;
pub mod observables;
pub mod vlasov;

pub use error::{Error, Result};
