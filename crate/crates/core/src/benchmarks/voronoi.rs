use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::BenchmarkError;
use crate::geometry::InputBox;
use crate::regions::ModeSequence;
use crate::simulator::{SimError, Simulator};

pub const VORONOI_SITES: usize = 100;
pub const VORONOI_MEAN: f64 = 100.0;
pub const VORONOI_SD: f64 = 10.0;
pub const VORONOI_LOW: f64 = 0.0;
pub const VORONOI_HIGH: f64 = 100.0;

/// Nearest-site labelling of `[0,100]^n`. Every label region is a Voronoi
/// cell, hence exactly convex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoronoiSystem {
    dimension: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    sites: Vec<Vec<f64>>,
    #[serde(skip)]
    labels: Vec<ModeSequence>,
}

impl VoronoiSystem {
    /// 100 sites with coordinates from Normal(100, 10) truncated to
    /// `[0, 100]` by rejection.
    pub fn make(dimension: usize, seed: u64) -> Result<Self, BenchmarkError> {
        if dimension == 0 {
            return Err(BenchmarkError::ZeroDimension);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sites = (0..VORONOI_SITES)
            .map(|_| (0..dimension).map(|_| truncated_normal(&mut rng)).collect())
            .collect();
        let mut sys = Self::from_sites(sites)?;
        sys.seed = Some(seed);
        Ok(sys)
    }

    /// Any non-empty list of sites of one dimension inside the box.
    pub fn from_sites(sites: Vec<Vec<f64>>) -> Result<Self, BenchmarkError> {
        let dimension = sites.first().map_or(0, Vec::len);
        if dimension == 0 {
            return Err(BenchmarkError::Invalid("need at least one site of dimension >= 1".into()));
        }
        for (i, s) in sites.iter().enumerate() {
            if s.len() != dimension {
                return Err(BenchmarkError::Invalid(format!("site {i} has dimension {}", s.len())));
            }
            if s.iter().any(|&c| !(VORONOI_LOW..=VORONOI_HIGH).contains(&c)) {
                return Err(BenchmarkError::Invalid(format!("site {i} lies outside [0,100]")));
            }
        }
        let labels = (0..sites.len()).map(|i| ModeSequence::single(i.to_string())).collect();
        Ok(Self {
            dimension,
            seed: None,
            sites,
            labels,
        })
    }

    pub fn sites(&self) -> &[Vec<f64>] {
        &self.sites
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn input_box(&self) -> InputBox {
        InputBox::cube(self.dimension, VORONOI_LOW, VORONOI_HIGH).expect("valid cube")
    }

    /// Index of the nearest site; ties go to the lowest index.
    pub fn nearest(&self, x: &[f64]) -> usize {
        let mut best = (0, f64::INFINITY);
        for (i, s) in self.sites.iter().enumerate() {
            let d = crate::geometry::dist_sq(s, x);
            if d < best.1 {
                best = (i, d);
            }
        }
        best.0
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sites serialize")
    }

    pub fn from_json(s: &str) -> Result<Self, BenchmarkError> {
        #[derive(Deserialize)]
        struct Raw {
            seed: Option<u64>,
            sites: Vec<Vec<f64>>,
        }
        let raw: Raw = serde_json::from_str(s).map_err(|e| BenchmarkError::Parse(e.to_string()))?;
        let mut sys = Self::from_sites(raw.sites)?;
        sys.seed = raw.seed;
        Ok(sys)
    }

    pub fn save(&self, path: &Path) -> Result<(), BenchmarkError> {
        std::fs::write(path, self.to_json()).map_err(|e| BenchmarkError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, BenchmarkError> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchmarkError::io(path, e))?;
        Self::from_json(&text)
    }
}

fn truncated_normal<R: Rng>(rng: &mut R) -> f64 {
    let normal = Normal::new(VORONOI_MEAN, VORONOI_SD).expect("positive sd");
    loop {
        let v = normal.sample(rng);
        if (VORONOI_LOW..=VORONOI_HIGH).contains(&v) {
            return v;
        }
    }
}

impl Simulator for VoronoiSystem {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn simulate(&mut self, x: &[f64]) -> Result<ModeSequence, SimError> {
        if x.len() != self.dimension || x.iter().any(|c| !(VORONOI_LOW..=VORONOI_HIGH).contains(c)) {
            return Err(SimError::OutOfDomain {
                point: x.to_vec(),
                reason: format!("expected a point in [0,100]^{}", self.dimension),
            });
        }
        Ok(self.labels[self.nearest(x)].clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn make_is_bounded_and_seeded() {
        let a = VoronoiSystem::make(2, 5).unwrap();
        assert_eq!(a.sites().len(), 100);
        assert!(a.sites().iter().flatten().all(|&c| (0.0..=100.0).contains(&c)));
        assert_eq!(a, VoronoiSystem::make(2, 5).unwrap());
        assert_ne!(a, VoronoiSystem::make(2, 6).unwrap());
        assert!(VoronoiSystem::make(0, 1).is_err());
    }

    #[test]
    fn nearest_and_ties() {
        let mut s = VoronoiSystem::from_sites(vec![vec![0.0, 0.0], vec![10.0, 10.0]]).unwrap();
        assert_eq!(s.simulate(&[1.0, 1.0]).unwrap(), ModeSequence::single("0"));
        assert_eq!(s.simulate(&[5.0, 5.0]).unwrap(), ModeSequence::single("0"));
        assert_eq!(s.simulate(&[9.0, 9.0]).unwrap(), ModeSequence::single("1"));
        assert!(matches!(s.simulate(&[101.0, 0.0]), Err(SimError::OutOfDomain { .. })));
        assert!(s.simulate(&[1.0]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let a = VoronoiSystem::make(3, 9).unwrap();
        let b = VoronoiSystem::from_json(&a.to_json()).unwrap();
        assert_eq!(a, b);
        assert_eq!(b.labels.len(), 100);
    }
}
