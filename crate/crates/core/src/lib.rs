//! Approximate statistical solutions of the two-dimensional incompressible
//! Euler equations on the periodic unit torus.
//!
//! A finite volume scheme with a discrete Leray projection ([`scheme`],
//! [`leray`]) evolves samples of a random initial datum ([`init_data`]);
//! [`ensemble`] runs the Monte Carlo loop and persists the samples, and
//! [`stats`] computes the diagnostics on the resulting empirical measure:
//! moments, structure functions, Wasserstein distances of k-point
//! marginals and Cauchy rates under mesh refinement.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod ensemble;
pub mod error;
pub mod field_io;
pub mod init_data;
pub mod leray;
pub mod mesh;
pub mod rng;
pub mod scheme;
pub mod stats;

pub use error::{Error, ErrorKind, Result};
pub use mesh::{GridSpec, ScalarField, VectorField};
