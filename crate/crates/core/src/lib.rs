//! Binary graph neural network inference over bit-packed tensors.
//!
//! Activations, weights, and graph structure are stored as bits and
//! multiplied with word-level popcount arithmetic:
//!
//! - [`bitdense`]: packed dense bit matrices, sign binarization, dot products.
//! - [`bitsparse`]: the tiled sparse adjacency format and its file layout.
//! - [`kernels`]: BMM / BSpMM variants and auxiliary operators.
//! - [`graphops`]: GNN layers, model specs, and the SCL-elimination rewrite.
//! - [`oracle`]: full-precision reference implementations.

pub mod bitdense;
pub mod bitsparse;
pub mod error;
pub mod graphops;
pub mod kernels;
pub mod oracle;

pub use error::{Error, Result};
