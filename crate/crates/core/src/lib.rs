//! Voting-based ex-ante selection of a joint prediction strategy.
//!
//! A set of data-generation models is fitted to a sample. Each one simulates
//! full-population responses, and every candidate strategy predicts a vector
//! of population characteristics from the simulated sample. The simulated
//! prediction errors are reduced to accuracy measures (RMSE, QAPE), and four
//! voting systems then elect the strategy that is most accurate across the
//! scenarios.
//!
//! The Monte Carlo loop in [`engine`] runs on rayon when the `parallel`
//! feature is enabled (the default). Without it the same loop runs
//! sequentially and produces identical output.

pub mod accuracy;
pub mod dataset;
pub mod engine;
pub mod error;
pub mod generator;
pub mod matrix;
pub mod prediction;
mod stats;
pub mod voting;
pub mod zoo;

pub use error::{ErrorCategory, Result, WaspError};
