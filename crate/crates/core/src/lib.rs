//! Multiclass DDoS flow classification from CICFlowMeter-style CSVs.
//!
//! The crate covers the full workflow: ingest and clean flow records, rank
//! features with an extremely randomized trees ensemble, train one of four
//! from-scratch classifiers (random forest, decision tree, Gaussian naive
//! Bayes, linear squared-hinge SVM), and evaluate with confusion-matrix
//! metrics and one-vs-rest ROC/AUC.
//!
//! Everything randomized is keyed by explicit seeds; with the default
//! `parallel` feature the heavy loops run on rayon without changing any
//! result.

pub mod error;
pub mod eval;
mod exec;
pub mod ingest;
pub mod linear;
pub mod pipeline;
mod rng;
pub mod select;
pub mod trees;

pub use error::{Error, Result};
pub use rng::derive_seed;
