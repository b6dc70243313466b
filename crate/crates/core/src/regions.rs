//! Mode sequences and the regions of input space known to produce them.

use std::fmt;
use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{self, check_dim, Aabb, GeometryError, InputPoint};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegionError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("no region for mode sequence {0}")]
    UnknownSequence(ModeSequence),
    #[error("phantom point lies outside the hull of region {0}")]
    PhantomOutsideHull(ModeSequence),
    #[error("invalid snapshot: {0}")]
    Snapshot(String),
}

/// Ordered list of discrete-state tokens produced by one simulation.
///
/// Cloning is cheap; the token list is shared.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct ModeSequence(Arc<[String]>);

impl ModeSequence {
    pub fn new<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self(tokens.into_iter().map(Into::into).collect())
    }

    pub fn single(token: impl Into<String>) -> Self {
        Self::new([token.into()])
    }

    /// Parse `A,B,C`. The empty string is the empty sequence.
    pub fn parse_csv(s: &str) -> Self {
        if s.is_empty() {
            Self::new(Vec::<String>::new())
        } else {
            Self::new(s.split(','))
        }
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<Vec<String>> for ModeSequence {
    fn from(v: Vec<String>) -> Self {
        Self(v.into())
    }
}

impl From<ModeSequence> for Vec<String> {
    fn from(s: ModeSequence) -> Self {
        s.0.to_vec()
    }
}

impl fmt::Display for ModeSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join(","))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WitnessKind {
    Simulated,
    /// Returned by the optimizer while already inside the hull; never simulated.
    Phantom,
}

/// A mode sequence together with the witness points whose hull is its region.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    sequence: ModeSequence,
    points: Vec<InputPoint>,
    kinds: Vec<WitnessKind>,
    simulated: usize,
    bbox: Aabb,
}

impl Region {
    fn new(sequence: ModeSequence, first: InputPoint) -> Self {
        Self {
            sequence,
            bbox: Aabb::around(&first),
            points: vec![first],
            kinds: vec![WitnessKind::Simulated],
            simulated: 1,
        }
    }

    fn push(&mut self, p: InputPoint, kind: WitnessKind) {
        self.bbox.grow(&p);
        self.points.push(p);
        self.kinds.push(kind);
        if kind == WitnessKind::Simulated {
            self.simulated += 1;
        }
    }

    pub fn sequence(&self) -> &ModeSequence {
        &self.sequence
    }

    /// Simulated and phantom witnesses in insertion order.
    pub fn witnesses(&self) -> &[InputPoint] {
        &self.points
    }

    pub fn witness_kinds(&self) -> &[WitnessKind] {
        &self.kinds
    }

    pub fn simulated_witnesses(&self) -> impl Iterator<Item = &InputPoint> + '_ {
        self.of_kind(WitnessKind::Simulated)
    }

    pub fn phantom_witnesses(&self) -> impl Iterator<Item = &InputPoint> + '_ {
        self.of_kind(WitnessKind::Phantom)
    }

    fn of_kind(&self, kind: WitnessKind) -> impl Iterator<Item = &InputPoint> + '_ {
        self.points
            .iter()
            .zip(&self.kinds)
            .filter(move |(_, k)| **k == kind)
            .map(|(p, _)| p)
    }

    pub fn simulated_count(&self) -> usize {
        self.simulated
    }

    pub fn phantom_count(&self) -> usize {
        self.points.len() - self.simulated
    }

    pub(crate) fn bbox(&self) -> &Aabb {
        &self.bbox
    }

    pub fn contains(&self, q: &[f64], tol: f64) -> Result<bool, GeometryError> {
        if self.bbox.linf_gap(q) > tol {
            return Ok(false);
        }
        geometry::contains(&self.points, q, tol)
    }

    pub fn hull_distance(&self, q: &[f64]) -> Result<f64, GeometryError> {
        geometry::hull_distance(q, &self.points)
    }

    pub fn point_distance_sq(&self, q: &[f64]) -> Result<f64, GeometryError> {
        geometry::point_distance_sq(q, &self.points)
    }

    /// ℓ∞ distance to the nearest witness; an upper bound on `hull_distance`.
    pub(crate) fn nearest_witness_linf(&self, q: &[f64]) -> f64 {
        self.points
            .iter()
            .map(|p| geometry::linf(p, q))
            .fold(f64::INFINITY, f64::min)
    }
}

/// All regions after some number of simulations, keyed by mode sequence in
/// first-discovery order.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionSet {
    dimension: usize,
    regions: IndexMap<ModeSequence, Region>,
    simulations: usize,
}

impl RegionSet {
    pub fn new(dimension: usize) -> Self {
        Self {
            dimension,
            regions: IndexMap::new(),
            simulations: 0,
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn simulations(&self) -> usize {
        self.simulations
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn regions(&self) -> impl ExactSizeIterator<Item = &Region> + '_ {
        self.regions.values()
    }

    pub fn get(&self, seq: &ModeSequence) -> Option<&Region> {
        self.regions.get(seq)
    }

    pub fn total_witnesses(&self) -> usize {
        self.regions.values().map(|r| r.points.len()).sum()
    }

    /// Record one simulation. Returns `true` if the sequence is new.
    pub fn incorporate(&mut self, point: InputPoint, sequence: ModeSequence) -> Result<bool, RegionError> {
        check_dim(self.dimension, &point)?;
        self.simulations += 1;
        match self.regions.get_mut(&sequence) {
            Some(region) => {
                region.push(point, WitnessKind::Simulated);
                Ok(false)
            }
            None => {
                self.regions.insert(sequence.clone(), Region::new(sequence, point));
                Ok(true)
            }
        }
    }

    /// First region, in insertion order, whose hull contains `point`.
    pub fn locate(&self, point: &[f64], tol: f64) -> Result<Option<&ModeSequence>, RegionError> {
        check_dim(self.dimension, point)?;
        for r in self.regions.values() {
            if r.contains(point, tol)? {
                return Ok(Some(&r.sequence));
            }
        }
        Ok(None)
    }

    /// Same answer to "is the point inside some region" as [`locate`](Self::locate),
    /// but tries regions with the most witnesses first.
    pub fn locate_largest_first(&self, point: &[f64], tol: f64) -> Result<Option<&ModeSequence>, RegionError> {
        check_dim(self.dimension, point)?;
        let mut order: Vec<&Region> = self.regions.values().collect();
        order.sort_by(|a, b| b.points.len().cmp(&a.points.len()));
        for r in order {
            if r.contains(point, tol)? {
                return Ok(Some(&r.sequence));
            }
        }
        Ok(None)
    }

    /// Add an interior, unsimulated point to `sequence`'s region. The hull does
    /// not change, but point-wise distance to this point drops to zero.
    pub fn insert_phantom(&mut self, point: InputPoint, sequence: &ModeSequence, tol: f64) -> Result<(), RegionError> {
        check_dim(self.dimension, &point)?;
        let region = self
            .regions
            .get_mut(sequence)
            .ok_or_else(|| RegionError::UnknownSequence(sequence.clone()))?;
        if !region.contains(&point, tol)? {
            return Err(RegionError::PhantomOutsideHull(sequence.clone()));
        }
        region.push(point, WitnessKind::Phantom);
        Ok(())
    }

    pub fn snapshot(&self) -> RegionSnapshot {
        RegionSnapshot {
            dimension: self.dimension,
            simulations: self.simulations,
            regions: self
                .regions
                .values()
                .map(|r| RegionEntry {
                    sequence: r.sequence.clone(),
                    simulated: r.simulated_witnesses().map(|p| p.to_vec()).collect(),
                    phantom: r.phantom_witnesses().map(|p| p.to_vec()).collect(),
                    order: r.kinds.clone(),
                })
                .collect(),
        }
    }

    pub fn from_snapshot(snap: &RegionSnapshot) -> Result<Self, RegionError> {
        let bad = |m: String| RegionError::Snapshot(m);
        let mut set = RegionSet::new(snap.dimension);
        let mut simulated_total = 0;
        for entry in &snap.regions {
            if set.regions.contains_key(&entry.sequence) {
                return Err(bad(format!("duplicate sequence {}", entry.sequence)));
            }
            let mut sim = entry.simulated.iter();
            let mut ph = entry.phantom.iter();
            let mut region: Option<Region> = None;
            for kind in &entry.order {
                let p = match kind {
                    WitnessKind::Simulated => sim.next(),
                    WitnessKind::Phantom => ph.next(),
                }
                .ok_or_else(|| bad(format!("witness order of {} is inconsistent", entry.sequence)))?;
                check_dim(snap.dimension, p).map_err(|e| bad(e.to_string()))?;
                let p = InputPoint::from(p.clone());
                match region.as_mut() {
                    None if *kind == WitnessKind::Simulated => region = Some(Region::new(entry.sequence.clone(), p)),
                    None => return Err(bad(format!("region {} starts with a phantom", entry.sequence))),
                    Some(r) => r.push(p, *kind),
                }
            }
            if sim.next().is_some() || ph.next().is_some() {
                return Err(bad(format!("witness order of {} is inconsistent", entry.sequence)));
            }
            let region = region.ok_or_else(|| bad(format!("region {} has no witnesses", entry.sequence)))?;
            simulated_total += region.simulated;
            set.regions.insert(entry.sequence.clone(), region);
        }
        if simulated_total != snap.simulations {
            return Err(bad(format!(
                "{} simulated witnesses but counter says {}",
                simulated_total, snap.simulations
            )));
        }
        set.simulations = snap.simulations;
        Ok(set)
    }
}

/// On-disk form of a [`RegionSet`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSnapshot {
    pub dimension: usize,
    pub simulations: usize,
    pub regions: Vec<RegionEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionEntry {
    pub sequence: ModeSequence,
    pub simulated: Vec<Vec<f64>>,
    pub phantom: Vec<Vec<f64>>,
    /// Interleaving of simulated and phantom witnesses.
    pub order: Vec<WitnessKind>,
}

impl RegionSnapshot {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("snapshot serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, RegionError> {
        serde_json::from_str(s).map_err(|e| RegionError::Snapshot(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::CONTAINMENT_TOL as TOL;

    fn seq(s: &str) -> ModeSequence {
        ModeSequence::parse_csv(s)
    }

    fn pt(v: &[f64]) -> InputPoint {
        v.into()
    }

    #[test]
    fn incorporate_examples() {
        let mut set = RegionSet::new(2);
        assert!(set.incorporate(pt(&[1.0, 2.0]), seq("A,B")).unwrap());
        assert_eq!(set.len(), 1);
        assert!(!set.incorporate(pt(&[3.0, 4.0]), seq("A,B")).unwrap());
        assert_eq!(set.get(&seq("A,B")).unwrap().simulated_count(), 2);
        assert!(set.incorporate(pt(&[5.0, 6.0]), seq("A,C")).unwrap());
        assert_eq!(set.len(), 2);
        assert_eq!(set.simulations(), 3);
    }

    #[test]
    fn incorporate_dimension_mismatch() {
        let mut set = RegionSet::new(2);
        assert!(set.incorporate(pt(&[1.0]), seq("A")).is_err());
        assert_eq!(set.simulations(), 0);
    }

    fn unit_square_set() -> RegionSet {
        let mut set = RegionSet::new(2);
        for p in [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]] {
            set.incorporate(pt(&p), seq("A")).unwrap();
        }
        set
    }

    #[test]
    fn locate_examples() {
        let set = unit_square_set();
        assert_eq!(set.locate(&[0.5, 0.5], TOL).unwrap(), Some(&seq("A")));
        assert_eq!(set.locate(&[9.0, 9.0], TOL).unwrap(), None);
        assert_eq!(RegionSet::new(2).locate(&[0.0, 0.0], TOL).unwrap(), None);
        assert_eq!(set.locate_largest_first(&[0.5, 0.5], TOL).unwrap(), Some(&seq("A")));
    }

    #[test]
    fn phantom_centroid_zeroes_point_distance() {
        let mut set = RegionSet::new(2);
        for p in [[0.0, 0.0], [3.0, 0.0], [0.0, 3.0]] {
            set.incorporate(pt(&p), seq("T")).unwrap();
        }
        let c = [1.0, 1.0];
        assert!(set.get(&seq("T")).unwrap().point_distance_sq(&c).unwrap() > 0.0);
        set.insert_phantom(pt(&c), &seq("T"), TOL).unwrap();
        let r = set.get(&seq("T")).unwrap();
        assert_eq!(r.point_distance_sq(&c).unwrap(), 0.0);
        assert_eq!(r.phantom_count(), 1);
        assert_eq!(r.simulated_count(), 3);
        assert_eq!(set.simulations(), 3);
    }

    #[test]
    fn phantom_at_vertex_changes_nothing() {
        let mut set = RegionSet::new(2);
        for p in [[0.0, 0.0], [3.0, 0.0], [0.0, 3.0]] {
            set.incorporate(pt(&p), seq("T")).unwrap();
        }
        let probe = [2.0, 2.5];
        let before = set.get(&seq("T")).unwrap().point_distance_sq(&probe).unwrap();
        set.insert_phantom(pt(&[3.0, 0.0]), &seq("T"), TOL).unwrap();
        let after = set.get(&seq("T")).unwrap().point_distance_sq(&probe).unwrap();
        assert_eq!(before, after);
    }

    #[test]
    fn exterior_phantom_rejected() {
        let mut set = unit_square_set();
        let err = set.insert_phantom(pt(&[2.0, 2.0]), &seq("A"), TOL).unwrap_err();
        assert!(matches!(err, RegionError::PhantomOutsideHull(_)));
        assert!(matches!(
            set.insert_phantom(pt(&[0.5, 0.5]), &seq("B"), TOL),
            Err(RegionError::UnknownSequence(_))
        ));
    }

    #[test]
    fn snapshot_round_trip() {
        let mut set = unit_square_set();
        set.incorporate(pt(&[5.0, 5.0]), seq("B,C")).unwrap();
        set.insert_phantom(pt(&[0.25, 0.25]), &seq("A"), TOL).unwrap();
        set.incorporate(pt(&[0.9, 0.1]), seq("A")).unwrap();
        let json = set.snapshot().to_json();
        let back = RegionSet::from_snapshot(&RegionSnapshot::from_json(&json).unwrap()).unwrap();
        assert_eq!(back, set);
    }

    #[test]
    fn snapshot_rejects_bad_counter() {
        let mut snap = unit_square_set().snapshot();
        snap.simulations = 9;
        assert!(RegionSet::from_snapshot(&snap).is_err());
    }

    #[test]
    fn mode_sequence_serde_and_display() {
        let s = seq("A,B,C");
        assert_eq!(s.to_string(), "A,B,C");
        assert_eq!(serde_json::to_string(&s).unwrap(), r#"["A","B","C"]"#);
        assert!(seq("").is_empty());
    }
}
