//! Trace-driven simulator and library for tile-based 360-degree video
//! streaming.
//!
//! The pipeline has three stages. A viewport predictor estimates where the
//! user will look next and refines the predicted tile set with object
//! tracks. A priority classifier sorts every tile of the frame into one of
//! four classes and counts them. A bitrate allocator (an actor-critic agent
//! trained from scratch, or a fixed baseline policy) picks one of six ladder
//! levels per class, and the streaming environment replays the session
//! against a bandwidth trace, scoring each chunk with a four-component QoE
//! model plus a bitrate-utilization metric.
//!
//! Modules follow the data flow:
//!
//! * [`media_model`] — tiles, chunks, the bitrate ladder, gaze geometry.
//! * [`trace_io`] — file formats for the four trace kinds and results.
//! * [`viewport_prediction`] — gaze predictors and object-box refinement.
//! * [`tile_priority`] — the four-class tile classifier.
//! * [`qoe_metrics`] — per-chunk QoE components and bitrate utilization.
//! * [`streaming_env`] — the discrete-event download/playback simulator.
//! * [`a3c_agent`] — actor-critic networks, gradients, async training.
//! * [`experiment`] — run configs and the simulate/train/evaluate drivers.

pub mod a3c_agent;
pub mod checkpoint;
pub mod experiment;
pub mod media_model;
pub mod qoe_metrics;
pub mod streaming_env;
pub mod tile_priority;
pub mod trace_io;
pub mod viewport_prediction;

use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: parse error: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("validation error: {0}")]
    Validation(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }

    /// True for errors caused by bad user input rather than runtime failure.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. } | Error::Validation(_) | Error::InvalidInput(_) | Error::Config(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
