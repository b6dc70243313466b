//! Convex-hull queries over witness point sets.
//!
//! Hulls are never built explicitly. Containment and hull-wise distance are
//! each a single LP over the convex weights of the witnesses, so cost grows
//! with the number of witnesses and the dimension, not with facet counts.

use std::ops::Deref;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::{self, LinearProgram, LpError, LpStatus};

/// Tolerance for "inside the hull", in input-space units.
pub const CONTAINMENT_TOL: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("witness set is empty")]
    NoWitnesses,
    #[error("invalid input box: {0}")]
    InvalidBox(String),
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// A valuation of the simulator's input variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InputPoint(Vec<f64>);

impl InputPoint {
    pub fn new(coords: Vec<f64>) -> Self {
        Self(coords)
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for InputPoint {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for InputPoint {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for InputPoint {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl From<&[f64]> for InputPoint {
    fn from(v: &[f64]) -> Self {
        Self(v.to_vec())
    }
}

/// Axis-aligned box `[lower, upper]` of valid inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBox", into = "RawBox")]
pub struct InputBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl TryFrom<RawBox> for InputBox {
    type Error = GeometryError;

    fn try_from(r: RawBox) -> Result<Self, Self::Error> {
        InputBox::new(r.lower, r.upper)
    }
}

impl From<InputBox> for RawBox {
    fn from(b: InputBox) -> Self {
        RawBox {
            lower: b.lower,
            upper: b.upper,
        }
    }
}

impl InputBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, GeometryError> {
        if lower.is_empty() {
            return Err(GeometryError::InvalidBox("dimension must be at least 1".into()));
        }
        if lower.len() != upper.len() {
            return Err(GeometryError::Dimension {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        for (d, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !l.is_finite() || !u.is_finite() {
                return Err(GeometryError::InvalidBox(format!("non-finite bound in dimension {d}")));
            }
            if l > u {
                return Err(GeometryError::InvalidBox(format!("lower {l} > upper {u} in dimension {d}")));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The cube `[lo, hi]^n`.
    pub fn cube(n: usize, lo: f64, hi: f64) -> Result<Self, GeometryError> {
        Self::new(vec![lo; n], vec![hi; n])
    }

    pub fn dimension(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn width(&self, d: usize) -> f64 {
        self.upper[d] - self.lower[d]
    }

    /// Euclidean length of the main diagonal.
    pub fn diameter(&self) -> f64 {
        (0..self.dimension()).map(|d| self.width(d).powi(2)).sum::<f64>().sqrt()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dimension()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| l <= v && v <= u)
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for (v, (l, u)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*l, *u);
        }
    }

    /// All `2^n` corners, in binary counting order.
    pub fn corners(&self) -> Vec<InputPoint> {
        let n = self.dimension();
        (0..1usize << n)
            .map(|mask| {
                (0..n)
                    .map(|d| if mask >> d & 1 == 1 { self.upper[d] } else { self.lower[d] })
                    .collect::<Vec<_>>()
                    .into()
            })
            .collect()
    }

    pub fn check_dimension(&self, x: &[f64]) -> Result<(), GeometryError> {
        check_dim(self.dimension(), x)
    }
}

pub(crate) fn check_dim(expected: usize, x: &[f64]) -> Result<(), GeometryError> {
    if x.len() == expected {
        Ok(())
    } else {
        Err(GeometryError::Dimension {
            expected,
            got: x.len(),
        })
    }
}

fn check_witnesses<W: AsRef<[f64]>>(witnesses: &[W], query: &[f64]) -> Result<(), GeometryError> {
    if witnesses.is_empty() {
        return Err(GeometryError::NoWitnesses);
    }
    for w in witnesses {
        check_dim(query.len(), w.as_ref())?;
    }
    Ok(())
}

pub fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Bounding box of a witness set, kept incrementally by regions.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Aabb {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Aabb {
    pub fn around(p: &[f64]) -> Self {
        Self {
            lower: p.to_vec(),
            upper: p.to_vec(),
        }
    }

    pub fn of<W: AsRef<[f64]>>(points: &[W]) -> Option<Self> {
        let (first, rest) = points.split_first()?;
        let mut b = Self::around(first.as_ref());
        for p in rest {
            b.grow(p.as_ref());
        }
        Some(b)
    }

    pub fn grow(&mut self, p: &[f64]) {
        for ((l, u), v) in self.lower.iter_mut().zip(self.upper.iter_mut()).zip(p) {
            *l = l.min(*v);
            *u = u.max(*v);
        }
    }

    /// ℓ∞ distance from `q` to the box; a lower bound on ℓ∞ distance to anything inside it.
    pub fn linf_gap(&self, q: &[f64]) -> f64 {
        q.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (l, u))| (l - v).max(v - u).max(0.0))
            .fold(0.0, f64::max)
    }
}

/// Rows `Σ λ_j (p_j - q) - r·coef <= rhs` and `-Σ λ_j (p_j - q) - r·coef <= rhs`
/// for each dimension, over columns `[prefix.., λ_1..λ_m]`.
fn box_rows<W: AsRef<[f64]>>(
    lp: &mut LinearProgram,
    witnesses: &[W],
    query: &[f64],
    prefix: &[f64],
    rhs: f64,
) -> Result<(), LpError> {
    let k = prefix.len();
    let cols = k + witnesses.len();
    let mut row = vec![0.0; cols];
    for d in 0..query.len() {
        row[..k].copy_from_slice(prefix);
        for (slot, w) in row[k..].iter_mut().zip(witnesses) {
            *slot = w.as_ref()[d] - query[d];
        }
        lp.a_ub.push_row(&row)?;
        lp.b_ub.push(rhs);
        for slot in &mut row[k..] {
            *slot = -*slot;
        }
        lp.a_ub.push_row(&row)?;
        lp.b_ub.push(rhs);
    }
    let mut simplex = vec![0.0; k];
    simplex.resize(cols, 1.0);
    lp.a_eq.push_row(&simplex)?;
    lp.b_eq.push(1.0);
    Ok(())
}

/// Is `query` in the convex hull of `witnesses`, up to `tol` per coordinate?
///
/// Decided by feasibility of `λ >= 0, Σλ = 1, |Σ λ_j p_j - query|_∞ <= tol`.
/// Points on a face count as inside.
pub fn contains<W: AsRef<[f64]>>(witnesses: &[W], query: &[f64], tol: f64) -> Result<bool, GeometryError> {
    check_witnesses(witnesses, query)?;
    let bbox = Aabb::of(witnesses).expect("non-empty");
    if bbox.linf_gap(query) > tol {
        return Ok(false);
    }
    if witnesses.iter().any(|w| linf(w.as_ref(), query) <= tol) {
        return Ok(true);
    }
    if witnesses.len() == 1 {
        return Ok(false);
    }
    let mut lp = LinearProgram::feasibility(witnesses.len());
    box_rows(&mut lp, witnesses, query, &[], tol)?;
    let out = lp::solve(&lp, lp::DEFAULT_TOL)?;
    Ok(out.status == LpStatus::Optimal)
}

/// Smallest `r` such that the cube of half-width `r` around `query` meets the
/// hull of `witnesses`, i.e. the ℓ∞ distance from `query` to the hull.
pub fn hull_distance<W: AsRef<[f64]>>(query: &[f64], witnesses: &[W]) -> Result<f64, GeometryError> {
    check_witnesses(witnesses, query)?;
    if witnesses.len() == 1 {
        return Ok(linf(witnesses[0].as_ref(), query));
    }
    // columns: [r, λ_1..λ_m], minimize r
    let mut objective = vec![0.0; 1 + witnesses.len()];
    objective[0] = 1.0;
    let mut lp = LinearProgram::minimize(objective);
    box_rows(&mut lp, witnesses, query, &[-1.0], 0.0)?;
    let out = lp::solve(&lp, lp::DEFAULT_TOL)?;
    match out.status {
        LpStatus::Optimal => Ok(out.objective_value.expect("optimal").max(0.0)),
        // λ = e_1, r = max gap is always feasible and r >= 0 bounds the objective.
        status => Err(GeometryError::Lp(LpError::Malformed(format!(
            "hull distance LP reported {status:?}"
        )))),
    }
}

/// Squared Euclidean distance from `query` to its nearest witness.
///
/// This is the row-wise reduction of `D·Dᵀ` for the difference matrix `D`
/// of witnesses minus query, taking only the diagonal.
pub fn point_distance_sq<W: AsRef<[f64]>>(query: &[f64], witnesses: &[W]) -> Result<f64, GeometryError> {
    check_witnesses(witnesses, query)?;
    Ok(witnesses
        .iter()
        .map(|w| dist_sq(w.as_ref(), query))
        .fold(f64::INFINITY, f64::min))
}
