//! Adaptive, dynamic mangling-rule attacks.
//!
//! The crate is organised along the attack pipeline:
//!
//! - [`rules`]: a subset of the Hashcat rule language, parsed and applied.
//! - [`corpus`]: dictionaries, attacked sets and a synthetic corpus generator.
//! - [`labels`]: training labels obtained by simulating an attack.
//! - [`model`]: the convolutional compatibility model, its training and inference.
//! - [`engine`]: standard, adaptive, dynamic-dictionary, dynamic-budget and combined attacks.
//! - [`eval`]: success rates, curves, histograms and the throughput benchmark.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the precision used by the command-line tool.

pub mod corpus;
pub mod engine;
pub mod eval;
pub mod labels;
pub mod model;
pub mod rules;
pub mod scalar;

pub use scalar::Scalar;

pub type CompatModelF32 = model::CompatModel<f32>;
pub type CompatModelF64 = model::CompatModel<f64>;
pub type CompatMatrixF32 = model::CompatMatrix<f32>;
pub type CompatMatrixF64 = model::CompatMatrix<f64>;
pub type WeightsF32 = model::Weights<f32>;
pub type WeightsF64 = model::Weights<f64>;
