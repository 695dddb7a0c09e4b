//! Estimation of the mean of a population of graphs.
//!
//! The central estimator ([`estimator::estimate_phat`]) averages a batch of
//! aligned adjacency matrices, imputes the hollow diagonal, and projects the
//! result onto its leading eigen-space. Around it sit the generative models
//! used to validate it (independent-edge, stochastic blockmodel, random dot
//! product graphs), dimension selection, Monte Carlo relative-efficiency
//! experiments and a spatially constrained permutation test for label
//! structure in embedded latent positions.

// Links the system OpenBLAS build that provides LAPACK.
extern crate openblas_src;

pub mod dimselect;
pub mod efficiency;
pub mod error;
pub mod estimator;
pub mod fixtures;
pub mod graph;
pub mod io;
pub mod models;
pub mod permtest;
pub mod rng;
pub mod spectral;

mod lapack;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use dimselect::{DimSelectMethod, Selection};
pub use error::{Error, Result};
pub use estimator::{estimate_phat, PhatResult};
pub use graph::{AdjacencyMatrix, GraphBatch, ProbabilityMatrix};
pub use models::{LatentPositions, Membership, SbmParams};
pub use spectral::EigenPairs;
