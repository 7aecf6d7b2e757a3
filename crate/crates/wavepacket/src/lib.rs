//! Experiment harness for semiclassical Bloch-wavepacket dynamics: configuration, built-in
//! scenarios, ε-sweeps with slope fits, the geometry suite, band dumps and result files.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bands_dump;
pub mod cache;
pub mod config;
pub mod fit;
pub mod geometry;
pub mod output;
pub mod scenario;
pub mod validation;

pub use config::{ExperimentConfig, Overrides};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] wavepacket_core::Error),
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}

impl From<csv::Error> for HarnessError {
    fn from(e: csv::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
