//! Trials, aggregation into discovery curves, and speedup against a random baseline.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{InputBox, CONTAINMENT_TOL};
use crate::regions::{ModeSequence, RegionError, RegionSet};
use crate::samplers::{Sampler, Selection, SelectorConfig};
use crate::simproto::Audited;
use crate::simulator::{SimError, Simulator};

/// Random stream for selector trials; baseline runs use [`BASELINE_STREAM`].
pub const TRIAL_STREAM: u64 = 0;
pub const BASELINE_STREAM: u64 = 1;
pub const DEFAULT_BASELINE_CAP: usize = 100;

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("{0}")]
    Invalid(String),
    #[error("i/o error on {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("no readable records in {0}")]
    NoRecords(PathBuf),
    #[error("csv: {0}")]
    Csv(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CampaignError + '_ {
    move |e| CampaignError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StopRule {
    pub budget: usize,
    /// Stop as soon as this many distinct sequences are known.
    pub target: Option<usize>,
}

impl StopRule {
    pub fn budget(budget: usize) -> Self {
        Self { budget, target: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "reason", content = "detail")]
pub enum Termination {
    Budget,
    Exhausted,
    TargetReached,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryEntry {
    /// 1-based simulation index.
    pub index: usize,
    pub point: Vec<f64>,
    pub sequence: ModeSequence,
    pub novel: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryRecord {
    pub seed: u64,
    pub stream: u64,
    pub selector: SelectorConfig,
    pub kappa: usize,
    pub entries: Vec<DiscoveryEntry>,
    pub termination: Termination,
}

impl DiscoveryRecord {
    pub fn simulations(&self) -> usize {
        self.entries.len()
    }

    /// `|Y|` at the end of the trial.
    pub fn distinct(&self) -> usize {
        self.entries.iter().filter(|e| e.novel).count()
    }

    /// `passages[m-1]` is the simulation index at which the `m`-th distinct sequence appeared.
    pub fn first_passages(&self) -> Vec<usize> {
        self.entries.iter().filter(|e| e.novel).map(|e| e.index).collect()
    }

    pub fn failed(&self) -> Option<&str> {
        match &self.termination {
            Termination::Failed(m) => Some(m),
            _ => None,
        }
    }

    /// Rebuild the region set from the simulated points.
    pub fn replay(&self, dimension: usize) -> Result<RegionSet, RegionError> {
        let mut set = RegionSet::new(dimension);
        for e in &self.entries {
            set.incorporate(e.point.clone().into(), e.sequence.clone())?;
        }
        Ok(set)
    }

    /// Indices of simulated points (after the first) that lay inside an
    /// existing region when they were chosen.
    pub fn soundness_violations(&self, dimension: usize) -> Result<Vec<usize>, RegionError> {
        let mut set = RegionSet::new(dimension);
        let mut bad = Vec::new();
        for e in &self.entries {
            if e.index > 1 && set.locate(&e.point, CONTAINMENT_TOL)?.is_some() {
                bad.push(e.index);
            }
            set.incorporate(e.point.clone().into(), e.sequence.clone())?;
        }
        Ok(bad)
    }
}

/// One run of the accelerated-testing loop: a uniform first point, then the
/// selector's choices, each simulated and folded into the region set.
pub fn run_trial<S: Simulator + ?Sized>(
    sim: &mut S,
    bounds: &InputBox,
    selector: &SelectorConfig,
    stop: StopRule,
    seed: u64,
    stream: u64,
) -> DiscoveryRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut sampler = Sampler::new(selector.clone(), rng);
    let mut set = RegionSet::new(bounds.dimension());
    let mut record = DiscoveryRecord {
        seed,
        stream,
        selector: selector.clone(),
        kappa: stop.budget,
        entries: Vec::with_capacity(stop.budget.min(1 << 16)),
        termination: Termination::Budget,
    };
    if stop.budget == 0 {
        record.termination = Termination::Failed("budget must be at least 1".into());
        return record;
    }
    if sim.dimension() != bounds.dimension() {
        record.termination = Termination::Failed(format!(
            "simulator dimension {} does not match input box dimension {}",
            sim.dimension(),
            bounds.dimension()
        ));
        return record;
    }
    for index in 1..=stop.budget {
        let x = if index == 1 {
            sampler.first_point(bounds)
        } else {
            match sampler.next_point(bounds, &mut set) {
                Ok(Selection::Point { point, .. }) => point,
                Ok(Selection::Exhausted) => {
                    record.termination = Termination::Exhausted;
                    break;
                }
                Err(e) => {
                    record.termination = Termination::Failed(format!("selection {index}: {e}"));
                    break;
                }
            }
        };
        let sequence = match sim.simulate(&x) {
            Ok(s) => s,
            Err(e) => {
                record.termination = Termination::Failed(format!("simulation {index}: {e}"));
                break;
            }
        };
        let novel = match set.incorporate(x.clone(), sequence.clone()) {
            Ok(n) => n,
            Err(e) => {
                record.termination = Termination::Failed(format!("simulation {index}: {e}"));
                break;
            }
        };
        record.entries.push(DiscoveryEntry {
            index,
            point: x.into_inner(),
            sequence,
            novel,
        });
        if stop.target.is_some_and(|t| set.len() >= t) {
            record.termination = Termination::TargetReached;
            break;
        }
    }
    record
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub m: usize,
    pub avg_sims: f64,
    /// Some trial stopped before finding `m` sequences.
    pub censored: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DiscoveryCurve {
    pub points: Vec<CurvePoint>,
}

impl DiscoveryCurve {
    pub fn at(&self, m: usize) -> Option<&CurvePoint> {
        m.checked_sub(1).and_then(|i| self.points.get(i))
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["m", "avg_sims", "censored"]).expect("in-memory write");
        for p in &self.points {
            w.write_record([p.m.to_string(), format!("{:.3}", p.avg_sims), u8::from(p.censored).to_string()])
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii")
    }
}

/// Average first-passage counts for `m = 1..=max |Y|`. A trial that never
/// reached `m` counts as `kappa` and marks the point censored.
pub fn aggregate(trials: &[DiscoveryRecord], kappa: usize) -> DiscoveryCurve {
    let passages: Vec<Vec<usize>> = trials.iter().map(DiscoveryRecord::first_passages).collect();
    let top = passages.iter().map(Vec::len).max().unwrap_or(0);
    let points = (1..=top)
        .map(|m| {
            let mut censored = false;
            let total: usize = passages
                .iter()
                .map(|p| match p.get(m - 1) {
                    Some(&i) => i,
                    None => {
                        censored = true;
                        kappa
                    }
                })
                .sum();
            CurvePoint {
                m,
                avg_sims: total as f64 / trials.len() as f64,
                censored,
            }
        })
        .collect();
    DiscoveryCurve { points }
}

pub fn speedup_factor(avg_random_sims: f64, kappa: usize) -> f64 {
    avg_random_sims / kappa as f64
}

/// Round half away from zero to `decimals` places.
pub fn rounded(x: f64, decimals: u32) -> f64 {
    let s = 10f64.powi(decimals as i32);
    (x * s).round() / s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Speedup {
    pub target: usize,
    pub random_sims_avg: f64,
    pub factor: f64,
    /// Some baseline trial hit its cap; the factor is only a lower bound.
    pub lower_bound: bool,
}

/// Mean accelerated `|Y_κ|`, floored: the count baseline runs must match.
pub fn baseline_target(trials: &[DiscoveryRecord]) -> usize {
    if trials.is_empty() {
        return 0;
    }
    let total: usize = trials.iter().map(DiscoveryRecord::distinct).sum();
    total / trials.len()
}

/// Speedup of a selector at budget `kappa` given baseline runs that stopped
/// at `target` distinct sequences or at their cap.
pub fn speedup(baseline: &[DiscoveryRecord], target: usize, kappa: usize) -> Speedup {
    let mut lower_bound = false;
    let mut total = 0usize;
    for r in baseline {
        if target == 0 {
            continue;
        }
        match r.first_passages().get(target - 1) {
            Some(&i) => total += i,
            None => {
                lower_bound = true;
                total += r.simulations();
            }
        }
    }
    let avg = if baseline.is_empty() {
        0.0
    } else {
        total as f64 / baseline.len() as f64
    };
    Speedup {
        target,
        random_sims_avg: avg,
        factor: speedup_factor(avg, kappa),
        lower_bound: lower_bound || (baseline.is_empty() && target > 0),
    }
}

/// Run `trials` independent trials in parallel with seeds `seed_base + i`.
pub fn run_trials<F, S>(
    make_sim: &F,
    bounds: &InputBox,
    selector: &SelectorConfig,
    stop: StopRule,
    seed_base: u64,
    trials: usize,
    stream: u64,
    audit: usize,
) -> Vec<DiscoveryRecord>
where
    F: Fn() -> Result<S, SimError> + Sync,
    S: Simulator,
{
    (0..trials)
        .into_par_iter()
        .map(|i| {
            let seed = seed_base.wrapping_add(i as u64);
            let mut sim = match make_sim() {
                Ok(s) => Audited::new(s),
                Err(e) => {
                    return DiscoveryRecord {
                        seed,
                        stream,
                        selector: selector.clone(),
                        kappa: stop.budget,
                        entries: Vec::new(),
                        termination: Termination::Failed(format!("cannot create simulator: {e}")),
                    }
                }
            };
            let mut rec = run_trial(&mut sim, bounds, selector, stop, seed, stream);
            if audit > 0 && rec.failed().is_none() {
                if let Err(e) = sim.audit(audit, seed) {
                    rec.termination = Termination::Failed(format!("audit: {e}"));
                }
            }
            log::info!(
                "{} trial seed {seed}: {} simulations, {} sequences, {:?}",
                selector.label(),
                rec.simulations(),
                rec.distinct(),
                rec.termination
            );
            rec
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Trial,
    Baseline,
}

/// A record plus where it belongs in a campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredRecord {
    pub selector_index: usize,
    pub role: Role,
    pub trial: usize,
    pub record: DiscoveryRecord,
}

impl StoredRecord {
    pub fn file_name(&self) -> String {
        let tag = match self.role {
            Role::Trial => 't',
            Role::Baseline => 'b',
        };
        format!(
            "s{}-{}-k{}-{tag}{}.json",
            self.selector_index,
            self.record.selector.label(),
            self.record.kappa,
            self.trial
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectorPlan {
    pub selector: SelectorConfig,
    pub kappa: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignPlan {
    pub bounds: InputBox,
    pub selectors: Vec<SelectorPlan>,
    pub trials: usize,
    pub seed: u64,
    /// Baseline runs stop after `baseline_cap * kappa` simulations.
    pub baseline_cap: usize,
    /// Past inputs replayed per trial to check determinism; 0 disables.
    pub audit: usize,
}

impl CampaignPlan {
    pub fn validate(&self) -> Result<(), CampaignError> {
        let bad = |m: String| Err(CampaignError::Invalid(m));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.selectors.is_empty() {
            return bad("at least one selector is required".into());
        }
        if self.baseline_cap == 0 {
            return bad("baseline_cap_factor must be at least 1".into());
        }
        for (i, s) in self.selectors.iter().enumerate() {
            if s.kappa == 0 {
                return bad(format!("selector {i}: kappa must be at least 1"));
            }
            s.selector.validate().or_else(|m| bad(format!("selector {i}: {m}")))?;
        }
        Ok(())
    }
}

/// Every selector's trials followed by their random baseline.
pub fn run_campaign<F, S>(plan: &CampaignPlan, make_sim: &F) -> Result<Vec<StoredRecord>, CampaignError>
where
    F: Fn() -> Result<S, SimError> + Sync,
    S: Simulator,
{
    plan.validate()?;
    let mut out = Vec::new();
    for (si, sp) in plan.selectors.iter().enumerate() {
        log::info!("selector {si} ({}) at kappa {}", sp.selector, sp.kappa);
        let trials = run_trials(
            make_sim,
            &plan.bounds,
            &sp.selector,
            StopRule::budget(sp.kappa),
            plan.seed,
            plan.trials,
            TRIAL_STREAM,
            plan.audit,
        );
        let target = baseline_target(&trials);
        let stop = StopRule {
            budget: plan.baseline_cap.saturating_mul(sp.kappa),
            target: Some(target),
        };
        let baseline = if target > 0 {
            run_trials(
                make_sim,
                &plan.bounds,
                &SelectorConfig::Random,
                stop,
                plan.seed,
                plan.trials,
                BASELINE_STREAM,
                0,
            )
            .into_iter()
            // grouped with the selector it is compared against
            .map(|r| DiscoveryRecord { kappa: sp.kappa, ..r })
            .collect()
        } else {
            Vec::new()
        };
        for (role, recs) in [(Role::Trial, trials), (Role::Baseline, baseline)] {
            for (trial, record) in recs.into_iter().enumerate() {
                out.push(StoredRecord {
                    selector_index: si,
                    role,
                    trial,
                    record,
                });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub selector_index: usize,
    pub selector: String,
    pub kappa: usize,
    pub trials: usize,
    pub distinct_mean: f64,
    pub speedup: Speedup,
    pub failed: usize,
}

pub struct Summary {
    pub rows: Vec<SummaryRow>,
    /// Keyed by `s{index}-{label}-k{kappa}`.
    pub curves: BTreeMap<String, DiscoveryCurve>,
}

/// Group by `(kappa, selector_index)` and compute curves and speedups.
pub fn summarize(records: &[StoredRecord]) -> Summary {
    let mut groups: BTreeMap<(usize, usize), (Vec<DiscoveryRecord>, Vec<DiscoveryRecord>)> = BTreeMap::new();
    let mut sorted: Vec<&StoredRecord> = records.iter().collect();
    sorted.sort_by_key(|r| (r.record.kappa, r.selector_index, r.role, r.trial));
    for r in sorted {
        let g = groups.entry((r.record.kappa, r.selector_index)).or_default();
        match r.role {
            Role::Trial => g.0.push(r.record.clone()),
            Role::Baseline => g.1.push(r.record.clone()),
        }
    }
    let mut rows = Vec::new();
    let mut curves = BTreeMap::new();
    for ((kappa, si), (trials, baseline)) in groups {
        let Some(first) = trials.first() else { continue };
        let label = first.selector.label().to_string();
        let distinct_mean = trials.iter().map(|t| t.distinct() as f64).sum::<f64>() / trials.len() as f64;
        let target = baseline_target(&trials);
        curves.insert(format!("s{si}-{label}-k{kappa}"), aggregate(&trials, kappa));
        rows.push(SummaryRow {
            selector_index: si,
            selector: label,
            kappa,
            trials: trials.len(),
            distinct_mean,
            speedup: speedup(&baseline, target, kappa),
            failed: trials.iter().chain(&baseline).filter(|t| t.failed().is_some()).count(),
        });
    }
    Summary { rows, curves }
}

impl Summary {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "selector",
            "kappa",
            "trials",
            "distinct_mean",
            "target",
            "random_sims_avg",
            "speedup",
            "lower_bound",
            "failed",
        ])
        .expect("in-memory write");
        for r in &self.rows {
            w.write_record([
                format!("s{}-{}", r.selector_index, r.selector),
                r.kappa.to_string(),
                r.trials.to_string(),
                format!("{:.2}", r.distinct_mean),
                r.speedup.target.to_string(),
                format!("{:.1}", r.speedup.random_sims_avg),
                format!("{:.1}", rounded(r.speedup.factor, 1)),
                u8::from(r.speedup.lower_bound).to_string(),
                r.failed.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii")
    }
}

/// Layout: `records/*.json`, `curves/*.csv`, `summary.csv`.
pub fn write_outputs(dir: &Path, records: &[StoredRecord]) -> Result<Summary, CampaignError> {
    let rec_dir = dir.join("records");
    let curve_dir = dir.join("curves");
    fs::create_dir_all(&rec_dir).map_err(io_err(&rec_dir))?;
    fs::create_dir_all(&curve_dir).map_err(io_err(&curve_dir))?;
    for r in records {
        let path = rec_dir.join(r.file_name());
        let json = serde_json::to_string(r).expect("records serialize");
        fs::write(&path, json).map_err(io_err(&path))?;
    }
    let summary = summarize(records);
    write_summary(dir, &summary)?;
    Ok(summary)
}

pub fn write_summary(dir: &Path, summary: &Summary) -> Result<(), CampaignError> {
    let curve_dir = dir.join("curves");
    fs::create_dir_all(&curve_dir).map_err(io_err(&curve_dir))?;
    for (name, curve) in &summary.curves {
        let path = curve_dir.join(format!("{name}.csv"));
        fs::write(&path, curve.to_csv()).map_err(io_err(&path))?;
    }
    let path = dir.join("summary.csv");
    fs::write(&path, summary.to_csv()).map_err(io_err(&path))
}

/// Load every `*.json` record below `dir` (or `dir/records`). Unreadable
/// files are skipped with a warning; returns the number skipped.
pub fn load_records(dir: &Path) -> Result<(Vec<StoredRecord>, usize), CampaignError> {
    let base = if dir.join("records").is_dir() {
        dir.join("records")
    } else {
        dir.to_path_buf()
    };
    let mut paths: Vec<PathBuf> = fs::read_dir(&base)
        .map_err(io_err(&base))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut out = Vec::new();
    let mut skipped = 0;
    for p in paths {
        match fs::read_to_string(&p)
            .map_err(|e| e.to_string())
            .and_then(|s| serde_json::from_str::<StoredRecord>(&s).map_err(|e| e.to_string()))
        {
            Ok(r) => out.push(r),
            Err(e) => {
                skipped += 1;
                log::warn!("skipping {}: {e}", p.display());
            }
        }
    }
    if out.is_empty() {
        return Err(CampaignError::NoRecords(base));
    }
    Ok((out, skipped))
}
