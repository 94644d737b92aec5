//! Feature engineering wrapper (FEW) for supervised classification.
//!
//! A genetic-programming population of scalar feature transformations is
//! evolved around a wrapped classifier: each generation the classifier is fit
//! on the population's outputs, features it assigns zero importance are
//! dropped, offspring are bred from the rest, and a survival method trims
//! parents and offspring back to the population size. A validation archive
//! keeps the best representation seen, so the returned model is never worse
//! on validation than the classifier on the raw attributes.

pub mod data;
pub mod engine;
pub mod error;
pub mod evolution;
pub mod expr;
pub mod fitness;
pub mod harness;
pub mod learners;
pub mod matrix;

pub use error::{FewError, Result};
pub use matrix::Matrix;
