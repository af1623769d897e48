//! Count forecasting engine: a bidirectional LSTM produces point guesses for
//! every series of a daily count panel, and a conjugate Poisson-Gamma layer
//! turns each guess into a Negative Binomial predictive distribution from
//! which ensembles, credible bands and scenario impacts are derived.

pub mod bayes;
pub mod ensemble;
pub mod error;
pub mod ingest;
pub mod kv;
pub mod lstm;
pub mod normalize;
pub mod panel;
pub mod pipeline;
pub mod report;
pub mod rng;
pub mod scenario;

pub use error::{Error, Result};
