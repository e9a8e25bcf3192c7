//! Multilingual tweet intimacy regression harness.
//!
//! The pipeline: load a multilingual labeled corpus, translate non-English
//! tweets to English through a cached pluggable backend, render inputs with
//! one of three strategies (original, translated, or joint around a
//! `</s></s>` separator), train deterministic hashed n-gram regressors,
//! average them into ensembles routed by language (seen → original, unseen
//! → joint), and score everything with Pearson's r and MSE.
//!
//! Numeric code is generic over [`scalar::Real`]; the concrete aliases
//! below fix `f64` for the pipeline.

pub mod corpus;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod manifest;
pub mod metrics;
pub mod regressor;
pub mod representation;
pub mod scalar;
pub mod translation;

pub use error::{Error, Result};

/// Score type used by the concrete pipeline.
pub type Score = f64;

/// Reference backbone over `f64`.
pub type Backbone = regressor::hashgram::HashGramBackbone<f64>;

/// Single-precision variant of the reference backbone.
pub type Backbone32 = regressor::hashgram::HashGramBackbone<f32>;

/// Trained model over `f64`.
pub type Model = regressor::TrainedModel<f64>;

/// Ensemble of `f64` models.
pub type ModelEnsemble = ensemble::Ensemble<f64>;
