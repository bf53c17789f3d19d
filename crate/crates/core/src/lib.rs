//! Radar pulse-train deinterleaving built on density clustering and
//! optimal-transport distances.
//!
//! The crate covers the full processing chain for separating an interleaved
//! stream of pulse description words (TOA, frequency, pulse width, level)
//! into per-emitter pulse sets:
//!
//! * [`pdw`] — pulse data model, CSV I/O, feature extraction, quantile
//!   normalization.
//! * [`simulator`] — labeled scenario generator with scan-lobe level
//!   modulation, estimation noise, pulse loss and outlier injection.
//! * [`hdbscan`] — density clustering (mutual reachability, MST, condensed
//!   tree, excess-of-mass extraction).
//! * [`transport`] — discrete measures on the TOA axis, exact 1-D
//!   Wasserstein distance, and a small-instance transportation LP used as a
//!   verification oracle.
//! * [`stats`] — two-sample tests, knee-based p-value threshold selection,
//!   Gaussian KDE.
//! * [`hacot`] / [`ihacot`] — the 2-D and 3-D deinterleaving pipelines.
//! * [`baselines`] — PRI difference histograms (CDIF/SDIF) and the PRI
//!   transform, kept as reference methods.
//! * [`metrics`] — Adjusted Rand Index and run summaries.
//! * [`sweep`] — seeded robustness sweeps over outlier rates and noise
//!   levels.

pub mod baselines;
pub mod hacot;
pub mod hdbscan;
pub mod ihacot;
pub mod metrics;
pub mod pdw;
pub mod simulator;
pub mod stats;
pub mod sweep;
pub mod transport;

use thiserror::Error;

/// Errors produced by any stage of the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Input violated a documented precondition.
    #[error("validation error: {0}")]
    Validation(String),
    /// A file could not be parsed.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),
    /// A pipeline stage could not proceed (e.g. no significant clusters).
    #[error("pipeline error: {0}")]
    Pipeline(String),
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn pipeline(msg: impl Into<String>) -> Self {
        Error::Pipeline(msg.into())
    }

    /// Process exit code convention: 2 for bad input, 1 for internal errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_) | Error::Parse { .. } => 2,
            Error::Io(_) | Error::Pipeline(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
