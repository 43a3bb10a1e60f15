//! Forecast combination engine.

mod error;

pub mod autodiff;
pub mod baselines;
pub mod cli;
pub mod cnn;
pub mod config;
pub mod core;
pub mod ingest;
pub mod metrics;
pub mod preprocess;
pub mod rnn;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};
