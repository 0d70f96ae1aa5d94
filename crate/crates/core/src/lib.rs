//! Collaborative filtering for implicit feedback with adaptive spectral graph
//! wavelets.
//!
//! The pipeline: [`ingest`] raw logs into an [`InteractionSet`], build the
//! bipartite normalized Laplacian ([`graph`]), keep its smallest eigenpairs
//! and derive the adaptive low-pass filter ([`spectral`]), train the layered
//! embedding model ([`model`], [`train`]) with a pairwise ranking loss, and
//! score top-k lists ([`eval`]).
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the common choice.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod eval;
pub mod graph;
pub mod ingest;
pub mod linalg;
pub mod model;
pub mod pipeline;
pub mod rng;
pub mod scalar;
pub mod spectral;
pub mod synthetic;
pub mod textio;
pub mod train;

pub use error::{Error, Result};
pub use ingest::InteractionSet;
pub use linalg::Matrix;
pub use scalar::Scalar;

pub type Matrix64 = Matrix<f64>;
pub type Matrix32 = Matrix<f32>;
pub type SpectralDecomposition64 = spectral::SpectralDecomposition<f64>;
pub type ModelParams64 = model::ModelParams<f64>;
pub type ModelParams32 = model::ModelParams<f32>;
pub type SpectralContext64 = model::SpectralContext<f64>;
pub type SpectralContext32 = model::SpectralContext<f32>;
pub type Checkpoint64 = model::Checkpoint<f64>;
pub type Checkpoint32 = model::Checkpoint<f32>;
