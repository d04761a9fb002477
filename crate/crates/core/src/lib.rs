//! Latent-multigraph inference for observed simple graphs and the
//! edge-enhanced propagation operators built from it.
//!
//! The pipeline is: load a [`SimpleGraph`], run the sampler in [`mcmc`] to
//! obtain multiplicity snapshots, turn them into [`propagation`] operators and
//! train a linear classifier on top in [`train`].

// Validation is written as `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop, clippy::too_many_arguments)]

pub mod config;
pub mod crm;
pub mod dist;
pub mod error;
pub mod generate;
pub mod graph;
pub mod io;
pub mod linalg;
pub mod mcmc;
pub mod propagation;
pub mod report;
pub mod rng;
pub mod stats;
pub mod train;

pub use error::{Error, Result};
pub use graph::{MultiGraph, MultiplicityMap, SimpleGraph};
pub use linalg::{CsrMatrix, DenseMatrix};
pub use propagation::{build_p_hat, build_p_tilde, PropagationMatrix};
