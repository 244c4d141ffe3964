//! Fairness auditing for book recommendation.
//!
//! The crate covers the whole audit pipeline: linking catalog records into
//! works and resolving their authors' genders ([`ingest`]), loading and
//! deduplicating user interactions ([`interactions`]), training collaborative
//! filters ([`recommend`]), fitting the hierarchical model of user and
//! recommender author-gender tendencies ([`stats`]), forced-balance
//! re-ranking ([`rerank`]), offline evaluation ([`eval`]), and seeded
//! synthetic data with known ground truth ([`synth`]).

pub mod error;
pub mod eval;
pub mod ingest;
pub mod interactions;
pub mod recommend;
pub mod rerank;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};

/// Toolkit version, stamped into every emitted artifact.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
