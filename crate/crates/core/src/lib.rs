//! Discovery of distinct mode sequences of deterministic black-box
//! simulators.
//!
//! Inputs that produced the same mode sequence are kept as a convex region.
//! Points inside a region are assumed to behave the same and are never
//! simulated again, so the budget goes to unexplored parts of the input box.

pub mod benchmarks;
pub mod campaign;
pub mod geometry;
pub mod lp;
pub mod monitor;
pub mod optimizer;
pub mod regions;
pub mod samplers;
pub mod simproto;
pub mod simulator;

pub use geometry::{InputBox, InputPoint, CONTAINMENT_TOL};
pub use regions::{ModeSequence, Region, RegionSet};
pub use samplers::{DistanceMetric, Selection, SelectorConfig};
pub use simulator::{SimError, Simulator};
