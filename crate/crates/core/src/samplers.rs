//! Input-point selection: uniform random, convex rejection sampling (CRS) and
//! region distance maximization (RDM).
//!
//! CRS and RDM only ever return points that lie outside every region hull, so
//! each simulation they ask for can add information.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryError, InputBox, InputPoint, CONTAINMENT_TOL};
use crate::optimizer::{self, BoundedObjective, OptBudget, OptError, SearchOutcome, SearchParams};
use crate::regions::{Region, RegionError, RegionSet};

pub const DEFAULT_MAX_REJECTIONS: usize = 10_000;
pub const DEFAULT_PHANTOM_RETRIES: usize = 25;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SampleError {
    #[error(transparent)]
    Region(#[from] RegionError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Optimizer(#[from] OptError),
    #[error("region distance maximization needs at least one region")]
    NoRegions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMetric {
    /// ℓ∞ distance to the region's hull (one LP per region).
    Hull,
    /// Squared Euclidean distance to the region's nearest witness.
    Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SelectorConfig {
    Random,
    Crs {
        #[serde(default = "default_rejections")]
        max_rejections: usize,
    },
    Rdm {
        metric: DistanceMetric,
        #[serde(default = "default_evaluations")]
        evaluations: usize,
        #[serde(default = "default_retries")]
        phantom_retries: usize,
    },
}

fn default_rejections() -> usize {
    DEFAULT_MAX_REJECTIONS
}

fn default_evaluations() -> usize {
    optimizer::DEFAULT_EVALUATIONS
}

fn default_retries() -> usize {
    DEFAULT_PHANTOM_RETRIES
}

impl SelectorConfig {
    pub fn crs() -> Self {
        SelectorConfig::Crs {
            max_rejections: DEFAULT_MAX_REJECTIONS,
        }
    }

    pub fn rdm(metric: DistanceMetric) -> Self {
        SelectorConfig::Rdm {
            metric,
            evaluations: optimizer::DEFAULT_EVALUATIONS,
            phantom_retries: DEFAULT_PHANTOM_RETRIES,
        }
    }

    /// Short name: `random`, `crs`, `rdm-hull` or `rdm-point`.
    pub fn label(&self) -> &'static str {
        match self {
            SelectorConfig::Random => "random",
            SelectorConfig::Crs { .. } => "crs",
            SelectorConfig::Rdm {
                metric: DistanceMetric::Hull,
                ..
            } => "rdm-hull",
            SelectorConfig::Rdm {
                metric: DistanceMetric::Point,
                ..
            } => "rdm-point",
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match self {
            SelectorConfig::Crs { max_rejections: 0 } => Err("max_rejections must be positive".into()),
            SelectorConfig::Rdm { evaluations: 0, .. } => Err("evaluations must be positive".into()),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for SelectorConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Selection {
    /// `score` is the RDM objective at the point, when there is one.
    Point { point: InputPoint, score: Option<f64> },
    /// No in-box point outside all regions could be produced.
    Exhausted,
}

impl Selection {
    fn plain(point: InputPoint) -> Self {
        Selection::Point { point, score: None }
    }

    pub fn point(&self) -> Option<&InputPoint> {
        match self {
            Selection::Point { point, .. } => Some(point),
            Selection::Exhausted => None,
        }
    }
}

pub fn next_point_random<R: Rng + ?Sized>(bounds: &InputBox, rng: &mut R) -> InputPoint {
    let mut x = vec![0.0; bounds.dimension()];
    optimizer::uniform_into(rng, bounds, &mut x);
    x.into()
}

/// Draw uniform candidates until one falls outside every region, giving up
/// after `max_rejections` consecutive rejections.
pub fn next_point_crs<R: Rng + ?Sized>(
    bounds: &InputBox,
    set: &RegionSet,
    max_rejections: usize,
    rng: &mut R,
) -> Result<Selection, SampleError> {
    for _ in 0..max_rejections.max(1) {
        let x = next_point_random(bounds, rng);
        if set.locate_largest_first(&x, CONTAINMENT_TOL)?.is_none() {
            return Ok(Selection::plain(x));
        }
    }
    Ok(Selection::Exhausted)
}

/// Pick the in-box point whose distance to its closest region is largest.
///
/// Candidates are checked for containment whenever they would become the
/// optimizer's incumbent, so interior points are never returned. With the
/// point-wise metric, a search that finds nothing outside inserts its best
/// point as a phantom witness and tries again, up to `phantom_retries` times.
pub fn next_point_rdm<R: Rng + ?Sized>(
    bounds: &InputBox,
    set: &mut RegionSet,
    metric: DistanceMetric,
    evaluations: usize,
    phantom_retries: usize,
    rng: &mut R,
) -> Result<Selection, SampleError> {
    if set.is_empty() {
        return Err(SampleError::NoRegions);
    }
    let params = SearchParams::default();
    let attempts = match metric {
        DistanceMetric::Hull => 1,
        DistanceMetric::Point => phantom_retries + 1,
    };
    for _ in 0..attempts {
        let budget = OptBudget::new(evaluations, rng.gen())?;
        let outcome = {
            let regions: Vec<&Region> = set.regions().collect();
            let mut accept_err = None;
            let accept = |x: &[f64]| match set.locate(x, CONTAINMENT_TOL) {
                Ok(found) => found.is_none(),
                Err(e) => {
                    accept_err.get_or_insert(e);
                    false
                }
            };
            let result = match metric {
                DistanceMetric::Hull => {
                    let mut obj = HullObjective::new(regions);
                    let r = optimizer::search(&mut obj, accept, bounds, &budget, &params);
                    if let Some(e) = obj.error {
                        return Err(e.into());
                    }
                    r
                }
                DistanceMetric::Point => {
                    let mut obj = PointObjective { regions };
                    optimizer::search(&mut obj, accept, bounds, &budget, &params)
                }
            };
            if let Some(e) = accept_err {
                return Err(e.into());
            }
            result?
        };
        match outcome {
            SearchOutcome::Accepted(m) => {
                return Ok(Selection::Point {
                    point: m.point,
                    score: Some(m.value),
                })
            }
            SearchOutcome::NoneAccepted(m) => {
                if metric == DistanceMetric::Hull {
                    return Ok(Selection::Exhausted);
                }
                let owner = set
                    .locate(&m.point, CONTAINMENT_TOL)?
                    .cloned()
                    .expect("rejected candidates lie inside a region");
                set.insert_phantom(m.point, &owner, CONTAINMENT_TOL)?;
            }
        }
    }
    Ok(Selection::Exhausted)
}

/// `x ↦ min over regions of hull_distance(x, region)`, with early exit below the floor.
struct HullObjective<'a> {
    regions: Vec<&'a Region>,
    upper: Vec<f64>,
    lower: Vec<f64>,
    order: Vec<usize>,
    error: Option<GeometryError>,
}

impl<'a> HullObjective<'a> {
    fn new(regions: Vec<&'a Region>) -> Self {
        let k = regions.len();
        Self {
            regions,
            upper: vec![0.0; k],
            lower: vec![0.0; k],
            order: (0..k).collect(),
            error: None,
        }
    }

    fn eval(&mut self, x: &[f64], floor: f64) -> Result<f64, GeometryError> {
        // Nearest-witness ℓ∞ distance bounds the hull distance from above,
        // distance to the bounding box from below.
        let mut best = f64::INFINITY;
        for (k, r) in self.regions.iter().enumerate() {
            let ub = r.nearest_witness_linf(x);
            if ub <= floor {
                return Ok(ub);
            }
            self.upper[k] = ub;
            self.lower[k] = r.bbox().linf_gap(x);
            best = best.min(ub);
        }
        if floor >= 0.0 {
            for (k, r) in self.regions.iter().enumerate() {
                if self.lower[k] <= floor && self.lower[k] < self.upper[k] && r.contains(x, floor)? {
                    return Ok(floor);
                }
            }
        }
        let lower = &self.lower;
        self.order.sort_by(|&a, &b| lower[a].total_cmp(&lower[b]));
        for &k in &self.order {
            if self.lower[k] >= best {
                break;
            }
            if self.upper[k] <= self.lower[k] {
                continue;
            }
            best = best.min(self.regions[k].hull_distance(x)?);
        }
        Ok(best)
    }
}

impl BoundedObjective for HullObjective<'_> {
    fn eval_above(&mut self, x: &[f64], floor: f64) -> f64 {
        match self.eval(x, floor) {
            Ok(v) => v,
            Err(e) => {
                self.error.get_or_insert(e);
                f64::NAN
            }
        }
    }
}

/// `x ↦ min over all witnesses of squared Euclidean distance`.
struct PointObjective<'a> {
    regions: Vec<&'a Region>,
}

impl BoundedObjective for PointObjective<'_> {
    fn eval_above(&mut self, x: &[f64], floor: f64) -> f64 {
        let mut best = f64::INFINITY;
        for r in &self.regions {
            for p in r.witnesses() {
                let d = crate::geometry::dist_sq(p, x);
                if d < best {
                    best = d;
                    if best <= floor {
                        return best;
                    }
                }
            }
        }
        best
    }
}

/// A selector bound to its own random stream.
pub struct Sampler<R> {
    config: SelectorConfig,
    rng: R,
}

impl<R: Rng> Sampler<R> {
    pub fn new(config: SelectorConfig, rng: R) -> Self {
        Self { config, rng }
    }

    pub fn config(&self) -> &SelectorConfig {
        &self.config
    }

    /// The first point of a trial is always uniform.
    pub fn first_point(&mut self, bounds: &InputBox) -> InputPoint {
        next_point_random(bounds, &mut self.rng)
    }

    pub fn next_point(&mut self, bounds: &InputBox, set: &mut RegionSet) -> Result<Selection, SampleError> {
        match &self.config {
            SelectorConfig::Random => Ok(Selection::plain(next_point_random(bounds, &mut self.rng))),
            SelectorConfig::Crs { max_rejections } => next_point_crs(bounds, set, *max_rejections, &mut self.rng),
            SelectorConfig::Rdm {
                metric,
                evaluations,
                phantom_retries,
            } => next_point_rdm(bounds, set, *metric, *evaluations, *phantom_retries, &mut self.rng),
        }
    }
}
