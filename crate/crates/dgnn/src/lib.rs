//! Debiased graph neural networks under agnostic label selection bias.
//!
//! This crate trains two-layer GCN and GAT node classifiers whose loss is
//! reweighted by per-sample weights learned from a variable-decorrelation
//! regularizer (plain VD, or DVD with per-dimension importance weights),
//! so that spurious correlations induced by a biased choice of labeled
//! nodes stop leaking into the parameter estimates.
//!
//! The main pieces:
//!
//! - [`graph`] / [`bundle`]: CSR graph storage, a portable text bundle
//!   format, symmetric adjacency normalization and the inductive
//!   train/test masking protocol.
//! - [`bias`]: the neighbor-disagreement biased label sampler and the
//!   small-sample (k per class) sampler.
//! - [`nn`]: dense kernels, GCN/GAT forward passes with hand-derived
//!   reverse-mode gradients, weighted softmax cross-entropy, Adam.
//! - [`decorr`]: weighted pairwise moments, the VD and DVD losses,
//!   variable weights from the classifier matrix, and the sample-weight
//!   inner optimizer.
//! - [`trainer`]: the alternating optimization loop, evaluation on the
//!   full graph, and the multi-seed bias sweep.
//! - [`synth`] / [`verify`]: synthetic generators and numerical checks
//!   for the estimation-bias formulas, the MTEF estimator, and the
//!   uniqueness / aggregation-invariance properties.
//! - [`citegen`]: seeded citation-network-shaped dataset generator used
//!   by the test and acceptance suites.
//!
//! Numeric kernels are generic over the scalar (see [`scalar::Scalar`]);
//! the trainer and harnesses run at 64-bit precision via the aliases
//! below.

pub mod bias;
pub mod bundle;
pub mod citegen;
pub mod decorr;
pub mod dense;
pub mod graph;
pub mod linalg;
pub mod nn;
pub mod scalar;
pub mod sparse;
pub mod synth;
pub mod trainer;
pub mod verify;

mod error;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Dense matrix at the precision used by the trainer and CLI.
pub type Mat = dense::Dense<f64>;
/// Sparse CSR matrix at the precision used by the trainer and CLI.
pub type SpMat = sparse::Csr<f64>;
/// Graph at the precision used by the trainer and CLI.
pub type Graph64 = graph::Graph<f64>;
/// Normalized adjacency at the precision used by the trainer and CLI.
pub type NormAdj64 = graph::NormalizedAdjacency<f64>;
