use modescout::benchmarks::VoronoiSystem;
use modescout::campaign::{
    aggregate, load_records, rounded, run_campaign, run_trial, run_trials, speedup, speedup_factor, summarize, CampaignPlan,
    write_outputs, DiscoveryEntry, DiscoveryRecord, Role, SelectorPlan, StopRule, Termination, TRIAL_STREAM,
};
use modescout::simulator::FnSimulator;
use modescout::{DistanceMetric, InputBox, ModeSequence, SelectorConfig, SimError};
use proptest::prelude::*;

fn voronoi_box() -> InputBox {
    InputBox::cube(2, 0.0, 100.0).unwrap()
}

/// A record whose `m`-th novelty happens at simulation `passages[m-1]`.
fn synthetic(passages: &[usize], kappa: usize, termination: Termination) -> DiscoveryRecord {
    let last = passages.last().copied().unwrap_or(0).max(1);
    let entries = (1..=last)
        .map(|i| {
            let novel = passages.contains(&i);
            let label = passages.iter().filter(|&&p| p <= i).count();
            DiscoveryEntry {
                index: i,
                point: vec![i as f64],
                sequence: ModeSequence::single(label.to_string()),
                novel,
            }
        })
        .collect();
    DiscoveryRecord {
        seed: 0,
        stream: 0,
        selector: SelectorConfig::Random,
        kappa,
        entries,
        termination,
    }
}

#[test]
fn single_simulation_trial() {
    let mut sys = VoronoiSystem::make(2, 1).unwrap();
    let rec = run_trial(&mut sys, &voronoi_box(), &SelectorConfig::crs(), StopRule::budget(1), 4, TRIAL_STREAM);
    assert_eq!(rec.simulations(), 1);
    assert_eq!(rec.distinct(), 1);
    assert_eq!(rec.replay(2).unwrap().len(), 1);
    assert_eq!(rec.termination, Termination::Budget);
}

#[test]
fn random_trial_codomain_and_determinism() {
    let mut sys = VoronoiSystem::make(2, 3).unwrap();
    let a = run_trial(&mut sys, &voronoi_box(), &SelectorConfig::Random, StopRule::budget(1000), 12, TRIAL_STREAM);
    assert_eq!(a.simulations(), 1000);
    for e in &a.entries {
        let id: usize = e.sequence.tokens()[0].parse().unwrap();
        assert!(id < 100);
    }
    let b = run_trial(&mut sys, &voronoi_box(), &SelectorConfig::Random, StopRule::budget(1000), 12, TRIAL_STREAM);
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert!(a.entries.iter().enumerate().all(|(i, e)| e.index == i + 1));
}

#[test]
fn accelerated_trials_are_sound_and_consistent() {
    let selectors = [
        SelectorConfig::crs(),
        SelectorConfig::Rdm { metric: DistanceMetric::Hull, evaluations: 300, phantom_retries: 5 },
        SelectorConfig::Rdm { metric: DistanceMetric::Point, evaluations: 300, phantom_retries: 5 },
    ];
    for sel in &selectors {
        let make = || VoronoiSystem::make(2, 8).map_err(|e| SimError::Other(e.to_string()));
        let recs = run_trials(&make, &voronoi_box(), sel, StopRule::budget(80), 100, 3, TRIAL_STREAM, 5);
        for r in &recs {
            assert!(r.failed().is_none(), "{:?}", r.termination);
            assert!(r.soundness_violations(2).unwrap().is_empty(), "{sel}");
            assert_eq!(r.replay(2).unwrap().len(), r.distinct());
        }
        let again = run_trials(&make, &voronoi_box(), sel, StopRule::budget(80), 100, 3, TRIAL_STREAM, 5);
        assert_eq!(recs, again);
    }
}

#[test]
fn simulator_errors_end_the_trial() {
    let mut calls = 0;
    let mut sim = FnSimulator::new(1, move |_: &[f64]| {
        calls += 1;
        if calls > 3 {
            Err(SimError::Remote("boom".into()))
        } else {
            Ok(ModeSequence::single(calls.to_string()))
        }
    });
    let b = InputBox::cube(1, 0.0, 1.0).unwrap();
    let rec = run_trial(&mut sim, &b, &SelectorConfig::Random, StopRule::budget(10), 0, TRIAL_STREAM);
    assert_eq!(rec.simulations(), 3);
    assert!(rec.failed().unwrap().contains("boom"));
}

#[test]
fn aggregate_examples() {
    let one = synthetic(&[2, 4, 6, 8], 8, Termination::Budget);
    let c = aggregate(&[one], 8);
    for m in 1..=4 {
        assert_eq!(c.at(m).unwrap().avg_sims, (2 * m) as f64);
    }

    let a = synthetic(&[1, 2, 3, 4, 10], 100, Termination::Budget);
    let b = synthetic(&[1, 2, 3, 4, 20], 100, Termination::Budget);
    assert_eq!(aggregate(&[a, b], 100).at(5).unwrap().avg_sims, 15.0);

    let short = synthetic(&[1, 2, 3, 4, 5, 6], 100, Termination::Exhausted);
    let long = synthetic(&[1, 2, 3, 4, 5, 6, 40], 100, Termination::Budget);
    let c = aggregate(&[short, long], 100);
    let p = c.at(7).unwrap();
    assert_eq!(p.avg_sims, 70.0);
    assert!(p.censored);
    assert!(!c.at(6).unwrap().censored);
    assert!(c.to_csv().starts_with("m,avg_sims,censored\n1,1.000,0\n"));
}

#[test]
fn speedup_examples() {
    assert_eq!(rounded(speedup_factor(354_345.9, 1000), 1), 354.3);
    assert_eq!(rounded(speedup_factor(16_329.5, 1000), 1), 16.3);
    assert_eq!(speedup_factor(500.0, 500), 1.0);

    let reached = synthetic(&[1, 5, 9], 0, Termination::TargetReached);
    let capped = synthetic(&[1, 5], 0, Termination::Budget);
    let s = speedup(&[reached.clone()], 3, 3);
    assert_eq!((s.random_sims_avg, s.factor, s.lower_bound), (9.0, 3.0, false));
    let s = speedup(&[reached, capped], 3, 3);
    assert!(s.lower_bound);
    assert_eq!(s.random_sims_avg, 7.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn curves_are_monotone(gaps in prop::collection::vec(prop::collection::vec(1usize..20, 0..15), 1..6)) {
        let kappa = 400;
        let recs: Vec<DiscoveryRecord> = gaps
            .iter()
            .map(|g| {
                let passages: Vec<usize> = g.iter().scan(0, |acc, d| { *acc += d; Some(*acc) }).collect();
                synthetic(&passages, kappa, Termination::Exhausted)
            })
            .collect();
        let c = aggregate(&recs, kappa);
        for w in c.points.windows(2) {
            prop_assert!(w[0].avg_sims <= w[1].avg_sims);
            prop_assert!(!w[0].censored || w[1].censored);
        }
    }
}

#[test]
fn campaign_groups_and_caps_baselines() {
    let plan = CampaignPlan {
        bounds: voronoi_box(),
        selectors: vec![
            SelectorPlan { selector: SelectorConfig::crs(), kappa: 30 },
            SelectorPlan { selector: SelectorConfig::crs(), kappa: 60 },
        ],
        trials: 2,
        seed: 5,
        baseline_cap: 2,
        audit: 0,
    };
    let make = || VoronoiSystem::make(2, 8).map_err(|e| SimError::Other(e.to_string()));
    let recs = run_campaign(&plan, &make).unwrap();
    let summary = summarize(&recs);
    let kappas: Vec<usize> = summary.rows.iter().map(|r| r.kappa).collect();
    assert_eq!(kappas, vec![30, 60]);
    for row in &summary.rows {
        assert!(row.speedup.target > 0);
        assert!(row.speedup.random_sims_avg > 0.0);
        assert_eq!(row.failed, 0);
    }
    for r in &recs {
        let cap = match r.role {
            Role::Trial => r.record.kappa,
            Role::Baseline => 2 * r.record.kappa,
        };
        assert!(r.record.simulations() <= cap);
    }
    assert_eq!(run_campaign(&plan, &make).unwrap(), recs);

    let dir = tempfile::tempdir().unwrap();
    let written = write_outputs(dir.path(), &recs).unwrap().to_csv();
    std::fs::write(dir.path().join("records").join("junk.json"), "{").unwrap();
    let (loaded, skipped) = load_records(dir.path()).unwrap();
    assert_eq!(skipped, 1);
    assert_eq!(summarize(&loaded).to_csv(), written);
    assert_eq!(std::fs::read_to_string(dir.path().join("summary.csv")).unwrap(), written);

    let mut bad = plan.clone();
    bad.trials = 0;
    assert!(run_campaign(&bad, &make).is_err());
}
