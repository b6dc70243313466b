//! Seeded derivative-free maximization over an [`InputBox`].
//!
//! The search mixes uniform global samples with Gaussian steps around the
//! incumbent. The per-dimension step starts at a tenth of the box width and
//! halves after each run of non-improving evaluations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{InputBox, InputPoint};

pub const DEFAULT_EVALUATIONS: usize = 1000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptError {
    #[error("objective returned {value} at {point:?}")]
    NonFinite { point: Vec<f64>, value: f64 },
    #[error("optimization budget must be at least one evaluation")]
    EmptyBudget,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OptBudget {
    evaluations: usize,
    pub seed: u64,
}

impl OptBudget {
    pub fn new(evaluations: usize, seed: u64) -> Result<Self, OptError> {
        if evaluations == 0 {
            return Err(OptError::EmptyBudget);
        }
        Ok(Self { evaluations, seed })
    }

    pub fn evaluations(&self) -> usize {
        self.evaluations
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Maximum {
    pub point: InputPoint,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchParams {
    /// Fraction of evaluations drawn uniformly from the whole box.
    pub global_fraction: f64,
    /// Initial Gaussian step as a fraction of each box width.
    pub initial_step: f64,
    /// Non-improving evaluations before the step halves.
    pub patience: usize,
}

impl Default for SearchParams {
    fn default() -> Self {
        Self {
            global_fraction: 0.25,
            initial_step: 0.1,
            patience: 50,
        }
    }
}

/// Result of a search in which candidates must also pass an acceptance test.
#[derive(Debug, Clone, PartialEq)]
pub enum SearchOutcome {
    /// Best candidate among those accepted.
    Accepted(Maximum),
    /// Nothing was accepted; the best candidate overall.
    NoneAccepted(Maximum),
}

/// An objective that may stop early once the answer is known not to beat `floor`.
///
/// Contract: if the true value exceeds `floor`, return it exactly; otherwise
/// return any finite value `<= floor`.
pub trait BoundedObjective {
    fn eval_above(&mut self, x: &[f64], floor: f64) -> f64;
}

struct Exact<F>(F);

impl<F: FnMut(&[f64]) -> f64> BoundedObjective for Exact<F> {
    fn eval_above(&mut self, x: &[f64], _floor: f64) -> f64 {
        (self.0)(x)
    }
}

/// Maximize `objective` over `bounds` with exactly `budget.evaluations()` evaluations.
pub fn maximize<F>(objective: F, bounds: &InputBox, budget: &OptBudget) -> Result<Maximum, OptError>
where
    F: FnMut(&[f64]) -> f64,
{
    match search(&mut Exact(objective), |_| true, bounds, budget, &SearchParams::default())? {
        SearchOutcome::Accepted(m) | SearchOutcome::NoneAccepted(m) => Ok(m),
    }
}

/// The general search loop.
///
/// `accept` is consulted only for candidates that would improve the current
/// incumbent; rejected candidates never become the incumbent. Until something
/// is accepted every candidate is evaluated exactly.
pub fn search<O, A>(
    objective: &mut O,
    mut accept: A,
    bounds: &InputBox,
    budget: &OptBudget,
    params: &SearchParams,
) -> Result<SearchOutcome, OptError>
where
    O: BoundedObjective + ?Sized,
    A: FnMut(&[f64]) -> bool,
{
    let n = bounds.dimension();
    let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
    let mut step: Vec<f64> = (0..n).map(|d| params.initial_step * bounds.width(d)).collect();
    let mut stale = 0usize;

    let mut incumbent: Option<Maximum> = None;
    let mut rejected_best: Option<Maximum> = None;
    let mut x = vec![0.0; n];

    for _ in 0..budget.evaluations {
        match &incumbent {
            Some(inc) if rng.gen::<f64>() >= params.global_fraction => {
                for d in 0..n {
                    let z: f64 = rng.sample(StandardNormal);
                    x[d] = inc.point[d] + step[d] * z;
                }
                bounds.clamp(&mut x);
            }
            _ => uniform_into(&mut rng, bounds, &mut x),
        }

        let floor = incumbent.as_ref().map_or(f64::NEG_INFINITY, |m| m.value);
        let value = objective.eval_above(&x, floor);
        if !value.is_finite() {
            return Err(OptError::NonFinite {
                point: x.clone(),
                value,
            });
        }

        let mut improved = false;
        if value > floor {
            if accept(&x) {
                incumbent = Some(Maximum {
                    point: x.clone().into(),
                    value,
                });
                improved = true;
            } else if incumbent.is_none() && rejected_best.as_ref().map_or(true, |m| value > m.value) {
                rejected_best = Some(Maximum {
                    point: x.clone().into(),
                    value,
                });
            }
        }

        if improved {
            stale = 0;
        } else {
            stale += 1;
            if stale >= params.patience {
                stale = 0;
                for s in &mut step {
                    *s *= 0.5;
                }
            }
        }
    }

    Ok(match (incumbent, rejected_best) {
        (Some(m), _) => SearchOutcome::Accepted(m),
        (None, Some(m)) => SearchOutcome::NoneAccepted(m),
        (None, None) => unreachable!("budget >= 1 always yields a candidate"),
    })
}

pub(crate) fn uniform_into<R: Rng + ?Sized>(rng: &mut R, bounds: &InputBox, x: &mut [f64]) {
    for (d, v) in x.iter_mut().enumerate() {
        let (l, u) = (bounds.lower()[d], bounds.upper()[d]);
        *v = if u > l { rng.gen_range(l..=u) } else { l };
    }
}
