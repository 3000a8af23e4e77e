//! Simulation and verification toolkit for the LASSO under clustered
//! (Gaussian-mixture) designs.
//!
//! The pieces, bottom-up:
//! - [`linalg`]: dense primitives, power-iteration spectral norms, coherence.
//! - [`mixture`]: the generative design model and its JSON record.
//! - [`proxy`]: ground truth and the cluster-representative proxy `β*`.
//! - [`lasso`]: FISTA and homotopy solvers with a duality-gap certificate.
//! - [`theory`]: theorem constants, assumption checks, probabilistic events,
//!   the `A, B, A*, B*` decompositions and concentration sanity suites.
//! - [`harness`]: seeded Monte Carlo runner, config files, CLI.

// `!(x > 0.0)` is deliberate: it rejects NaN along with the bad range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod encoding;
pub mod error;
pub mod harness;
pub mod lasso;
pub mod linalg;
pub mod mixture;
pub mod proxy;
pub mod rng;
pub mod theory;

pub use error::{Error, Result};
