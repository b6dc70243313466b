//! Built-in deterministic simulators.

use thiserror::Error;

mod nav;
mod trace;
mod voronoi;

pub use nav::{CellKind, NavMap, NavSystem, OUT_OF_BOUNDS};
pub use trace::{SimTrace, TraceError};
pub use voronoi::{VoronoiSystem, VORONOI_HIGH, VORONOI_LOW, VORONOI_MEAN, VORONOI_SD, VORONOI_SITES};

use crate::simulator::SimError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BenchmarkError {
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("{0}")]
    Invalid(String),
    #[error("map not found: {0}")]
    MapNotFound(String),
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
    #[error("parse error: {0}")]
    Parse(String),
}

impl BenchmarkError {
    pub(crate) fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        if e.kind() == std::io::ErrorKind::NotFound {
            return BenchmarkError::MapNotFound(path.display().to_string());
        }
        BenchmarkError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }
}

/// A simulator that exposes its full sampled trace, not only a mode sequence.
pub trait TraceSimulator {
    fn dimension(&self) -> usize;

    fn trace(&mut self, x: &[f64]) -> Result<SimTrace, SimError>;
}
