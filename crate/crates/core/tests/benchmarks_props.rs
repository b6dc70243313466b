use modescout::benchmarks::{
    BenchmarkError, NavMap, NavSystem, TraceSimulator, VoronoiSystem, OUT_OF_BOUNDS, VORONOI_SITES,
};
use modescout::{ModeSequence, SimError, Simulator};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn map(grid: &str, lower: [f64; 4], upper: [f64; 4]) -> NavMap {
    NavMap::parse(&format!(
        "initial_lower = {lower:?}\ninitial_upper = {upper:?}\ngrid = \"\"\"\n{grid}\n\"\"\"\n"
    ))
    .unwrap()
}

fn three_by_three() -> NavMap {
    map("3 4 T\n2 x 2\n0 0 1", [0.0, 0.0, -1.0, -1.0], [1.0, 1.0, 1.0, 1.0])
}

fn random_x0(b: &modescout::InputBox, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..4).map(|d| rng.gen_range(b.lower()[d]..=b.upper()[d])).collect()
}

#[test]
fn voronoi_sites_in_range_and_reproducible() {
    for seed in 0..5 {
        let sys = VoronoiSystem::make(2, seed).unwrap();
        assert_eq!(sys.sites().len(), VORONOI_SITES);
        assert!(sys.sites().iter().flatten().all(|c| (0.0..=100.0).contains(c)));
        assert_eq!(sys, VoronoiSystem::make(2, seed).unwrap());
    }
    assert_ne!(VoronoiSystem::make(3, 1).unwrap(), VoronoiSystem::make(3, 2).unwrap());
    assert_eq!(VoronoiSystem::make(0, 1), Err(BenchmarkError::ZeroDimension));
}

/// Φ(z) by Simpson integration of the standard normal density.
fn normal_cdf(z: f64) -> f64 {
    let lo = -12.0;
    let n = 20_000;
    let h = (z - lo) / n as f64;
    let pdf = |x: f64| (-x * x / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = pdf(lo) + pdf(z);
    for k in 1..n {
        s += pdf(lo + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn voronoi_coordinates_follow_truncated_normal() {
    let coords: Vec<f64> = (0..50)
        .flat_map(|seed| VoronoiSystem::make(4, seed).unwrap().sites().concat())
        .collect();
    let total = coords.len() as f64;
    let z = |v: f64| (v - 100.0) / 10.0;
    let mass = normal_cdf(z(100.0)) - normal_cdf(z(0.0));
    let edges = [0.0, 80.0, 85.0, 90.0, 95.0, 100.0];
    let mut previous = 0.0;
    for w in edges.windows(2) {
        let expected = (normal_cdf(z(w[1])) - normal_cdf(z(w[0]))) / mass;
        let observed = coords.iter().filter(|&&c| c >= w[0] && c < w[1]).count() as f64 / total;
        let sd = (expected * (1.0 - expected) / total).sqrt();
        assert!((observed - expected).abs() <= 5.0 * sd + 1e-4, "{w:?}: {observed} vs {expected}");
        if w[0] >= 80.0 {
            assert!(observed > previous, "density should rise toward 100");
            previous = observed;
        }
    }
}

#[test]
fn voronoi_labels_match_naive_scan() {
    let mut sys = VoronoiSystem::make(3, 42).unwrap();
    let sites = sys.sites().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10_000 {
        let x: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..=100.0)).collect();
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, s) in sites.iter().enumerate() {
            let d: f64 = s.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        assert_eq!(sys.simulate(&x).unwrap(), ModeSequence::single(best.to_string()));
    }
}

#[test]
fn voronoi_test_double() {
    let mut sys = VoronoiSystem::from_sites(vec![vec![0.0, 0.0], vec![10.0, 10.0]]).unwrap();
    assert_eq!(sys.simulate(&[1.0, 1.0]).unwrap(), ModeSequence::single("0"));
    assert_eq!(sys.simulate(&[5.0, 5.0]).unwrap(), ModeSequence::single("0"));
    assert_eq!(sys.simulate(&[9.0, 9.0]).unwrap(), ModeSequence::single("1"));
    assert!(matches!(sys.simulate(&[101.0, 5.0]), Err(SimError::OutOfDomain { .. })));
    assert!(matches!(sys.simulate(&[5.0]), Err(SimError::OutOfDomain { .. })));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sites.json");
    let made = VoronoiSystem::make(2, 9).unwrap();
    made.save(&path).unwrap();
    assert_eq!(VoronoiSystem::load(&path).unwrap(), made);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn voronoi_cells_are_convex(a in prop::collection::vec(0.0..100.0f64, 2), b in prop::collection::vec(0.0..100.0f64, 2), lam in 0.0..=1.0f64) {
        // few sites so same-label pairs are common
        let mut sys = VoronoiSystem::from_sites(vec![vec![20.0, 30.0], vec![70.0, 60.0], vec![40.0, 90.0]]).unwrap();
        let ya = sys.simulate(&a).unwrap();
        prop_assume!(ya == sys.simulate(&b).unwrap());
        let c: Vec<f64> = a.iter().zip(&b).map(|(x, y)| lam * x + (1.0 - lam) * y).collect();
        prop_assert_eq!(sys.simulate(&c).unwrap(), ya);
    }
}

#[test]
fn voronoi_convexity_on_generated_system() {
    let mut sys = VoronoiSystem::make(2, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut by_label: std::collections::HashMap<ModeSequence, Vec<Vec<f64>>> = Default::default();
    for _ in 0..5000 {
        let x = vec![rng.gen_range(0.0..100.0), rng.gen_range(0.0..100.0)];
        by_label.entry(sys.simulate(&x).unwrap()).or_default().push(x);
    }
    let mut checked = 0;
    for (label, pts) in &by_label {
        for pair in pts.windows(2) {
            let lam: f64 = rng.gen();
            let c: Vec<f64> = (0..2).map(|d| lam * pair[0][d] + (1.0 - lam) * pair[1][d]).collect();
            assert_eq!(&sys.simulate(&c).unwrap(), label);
            checked += 1;
        }
    }
    assert!(checked > 4000);
}

#[test]
fn nav_starting_in_terminal() {
    let mut sys = NavSystem::new(map("T 0", [0.2, 0.2, -1.0, -1.0], [0.8, 0.8, 1.0, 1.0]));
    assert_eq!(sys.simulate(&[0.5, 0.5, 0.3, 0.0]).unwrap(), ModeSequence::single("0"));
}

#[test]
fn nav_one_by_two_crossing() {
    let m = map("0 T", [0.0, 0.0, -1.0, -1.0], [1.0, 1.0, 1.0, 1.0]);
    let x0 = [0.5, 0.5, 1.0, 0.0];
    let coarse = NavSystem::new(m.clone()).simulate(&x0).unwrap();
    let dt = m.time_step();
    let fine = NavSystem::new(m.with_time_step(dt / 10.0).unwrap()).simulate(&x0).unwrap();
    assert_eq!(coarse, ModeSequence::new(["0", "1"]));
    assert_eq!(fine, coarse);
}

#[test]
fn nav_step_refinement_on_three_by_three() {
    let m = three_by_three();
    let mut coarse = NavSystem::new(m.clone());
    let mut fine = NavSystem::new(m.clone().with_time_step(m.time_step() / 2.0).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut distinct = std::collections::HashSet::new();
    for _ in 0..100 {
        let x0 = random_x0(m.initial_box(), &mut rng);
        let y = coarse.simulate(&x0).unwrap();
        assert_eq!(fine.simulate(&x0).unwrap(), y, "{x0:?}");
        distinct.insert(y);
    }
    assert!(distinct.len() > 1);
}

#[test]
fn nav_out_of_grid_and_forbidden_tokens() {
    let mut left_exit = NavSystem::new(map("4 T", [0.0, 0.0, 0.0, 0.0], [1.0, 1.0, 0.0, 0.0]));
    let y = left_exit.simulate(&[0.5, 0.5, 0.0, 0.0]).unwrap();
    assert_eq!(y, ModeSequence::new(["0", OUT_OF_BOUNDS]));

    let mut forbidden = NavSystem::new(map("0 x T", [0.0, 0.0, 0.0, 0.0], [1.0, 1.0, 0.0, 0.0]));
    assert_eq!(forbidden.simulate(&[0.5, 0.5, 0.0, 0.0]).unwrap(), ModeSequence::new(["0", "x1"]));
}

#[test]
fn nav_reference_map_properties() {
    let m = NavMap::reference();
    let mut sys = NavSystem::new(m.clone());
    let mut again = NavSystem::new(m.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..300 {
        let x0 = random_x0(m.initial_box(), &mut rng);
        let y = sys.simulate(&x0).unwrap();
        assert_eq!(again.simulate(&x0).unwrap(), y);
        assert!(y.tokens().windows(2).all(|w| w[0] != w[1]), "{y}");
        let trace = sys.trace(&x0).unwrap();
        let mut from_trace: Vec<&str> = Vec::new();
        for tok in trace.discrete() {
            if from_trace.last() != Some(&tok.as_str()) {
                from_trace.push(tok);
            }
        }
        assert_eq!(from_trace, y.tokens().iter().map(String::as_str).collect::<Vec<_>>());
    }
    assert!(matches!(sys.simulate(&[9.0, 0.5, 0.0, 0.0]), Err(SimError::OutOfDomain { .. })));
}

#[test]
fn nav_map_validation() {
    let bad = |grid: &str| NavMap::parse(&format!(
        "initial_lower = [0.0, 0.0, 0.0, 0.0]\ninitial_upper = [1.0, 1.0, 0.0, 0.0]\ngrid = \"\"\"\n{grid}\n\"\"\"\n"
    ));
    assert!(matches!(bad("0 1"), Err(BenchmarkError::Invalid(_))));
    assert!(matches!(bad("0 9 T"), Err(BenchmarkError::Invalid(_))));
    assert!(matches!(bad("0 T\n1"), Err(BenchmarkError::Invalid(_))));
    assert!(matches!(NavMap::parse("grid = 3"), Err(BenchmarkError::Parse(_))));
    assert!(matches!(
        NavMap::load(std::path::Path::new("/nonexistent/map.toml")),
        Err(BenchmarkError::MapNotFound(_))
    ));
}
