//! The black-box interface every benchmark and adapter implements.

use thiserror::Error;

use crate::regions::ModeSequence;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("input {point:?} is outside the simulator's domain: {reason}")]
    OutOfDomain { point: Vec<f64>, reason: String },
    #[error("simulation diverged: {0}")]
    NonFinite(String),
    #[error("simulator did not answer within {0:?}")]
    Timeout(std::time::Duration),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("simulator process failed {failures} consecutive times: {last}")]
    ProcessFailed { failures: usize, last: String },
    #[error("simulator reported an error: {0}")]
    Remote(String),
    #[error("determinism violation at {point:?}: recorded {recorded}, replay gave {replayed}")]
    DeterminismViolation {
        point: Vec<f64>,
        recorded: ModeSequence,
        replayed: ModeSequence,
    },
    #[error("{0}")]
    Other(String),
}

/// A deterministic map from input points to mode sequences.
pub trait Simulator {
    fn dimension(&self) -> usize;

    fn simulate(&mut self, x: &[f64]) -> Result<ModeSequence, SimError>;
}

impl<S: Simulator + ?Sized> Simulator for Box<S> {
    fn dimension(&self) -> usize {
        (**self).dimension()
    }

    fn simulate(&mut self, x: &[f64]) -> Result<ModeSequence, SimError> {
        (**self).simulate(x)
    }
}

/// Wraps a closure as a simulator; handy for tests and ad-hoc systems.
pub struct FnSimulator<F> {
    dimension: usize,
    f: F,
}

impl<F> FnSimulator<F>
where
    F: FnMut(&[f64]) -> Result<ModeSequence, SimError>,
{
    pub fn new(dimension: usize, f: F) -> Self {
        Self { dimension, f }
    }
}

impl<F> Simulator for FnSimulator<F>
where
    F: FnMut(&[f64]) -> Result<ModeSequence, SimError>,
{
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn simulate(&mut self, x: &[f64]) -> Result<ModeSequence, SimError> {
        (self.f)(x)
    }
}
