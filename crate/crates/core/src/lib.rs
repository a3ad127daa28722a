//! Privacy-preserving graph recommendation.
//!
//! User side features are perturbed locally before they reach the
//! recommender, and the training objective is a polynomial approximation of
//! BPR whose coefficients carry Laplace noise. An attack harness measures how
//! well sensitive attributes can be inferred from the resulting
//! recommendations.

pub mod artifacts;
pub mod attack;
pub mod config;
pub mod data;
pub mod error;
pub mod experiment;
pub mod fm;
pub mod ldp;
pub mod metrics;
pub mod model;

pub use error::{Error, Result};
