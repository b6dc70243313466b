//! Campaign configuration and the `run` / `report` commands.
//!
//! # Config schema (TOML, `schema_version = 1`)
//!
//! ```toml
//! schema_version = 1
//! kappa = 300                 # simulations per trial
//! trials = 10                 # default 10
//! seed = 1                    # trial i uses seed + i
//! output = "out"              # relative to this file
//! baseline_cap_factor = 100   # random baseline stops at factor * kappa
//! audit = 0                   # past inputs replayed per trial
//!
//! [benchmark]
//! kind = "voronoi"            # voronoi | nav | external | trace-suite
//! dimension = 2               # voronoi
//! seed = 7                    # voronoi; or `sites = "sites.json"`
//! # map = "map.toml"          # nav, trace-suite; default: shipped 5x5 map
//! # suite = "at.stl"          # trace-suite
//! # command = ["./sim"]       # external, with `dimension`
//! # timeout_secs = 60         # external
//!
//! [input_box]                 # optional except for external
//! lower = [0.0, 0.0]
//! upper = [100.0, 100.0]
//!
//! [[selectors]]
//! kind = "rdm-hull"           # random | crs | rdm-hull | rdm-point
//! evaluations = 1000          # rdm-*
//! # phantom_retries = 25      # rdm-point
//! # max_rejections = 10000    # crs
//! # kappa = 500               # per-selector override
//! ```

use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use modescout::benchmarks::{NavMap, NavSystem, VoronoiSystem};
use modescout::campaign::{self, CampaignPlan, SelectorPlan, DEFAULT_BASELINE_CAP};
use modescout::monitor::{self, BitVectorSimulator};
use modescout::simproto::{ExternalConfig, ExternalSimulator};
use modescout::{DistanceMetric, InputBox, ModeSequence, SelectorConfig, SimError, Simulator};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub schema_version: u32,
    pub kappa: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default = "default_cap")]
    pub baseline_cap_factor: usize,
    #[serde(default)]
    pub audit: usize,
    pub benchmark: BenchmarkConfig,
    pub input_box: Option<BoxConfig>,
    pub selectors: Vec<SelectorEntry>,
}

fn default_trials() -> usize {
    10
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn default_cap() -> usize {
    DEFAULT_BASELINE_CAP
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BenchmarkConfig {
    Voronoi {
        dimension: Option<usize>,
        seed: Option<u64>,
        sites: Option<PathBuf>,
    },
    Nav {
        map: Option<PathBuf>,
        time_step: Option<f64>,
    },
    External {
        command: Vec<String>,
        dimension: usize,
        timeout_secs: Option<f64>,
        handshake_secs: Option<f64>,
        max_failures: Option<usize>,
    },
    TraceSuite {
        suite: PathBuf,
        map: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectorEntry {
    pub kind: String,
    pub kappa: Option<usize>,
    pub max_rejections: Option<usize>,
    pub evaluations: Option<usize>,
    pub phantom_retries: Option<usize>,
}

impl SelectorEntry {
    pub fn to_config(&self) -> Result<SelectorConfig> {
        let only = |allowed: bool, field: &str| -> Result<()> {
            if !allowed {
                bail!("selector `{}` does not take `{field}`", self.kind);
            }
            Ok(())
        };
        let rdm = self.kind.starts_with("rdm-");
        only(self.kind == "crs" || self.max_rejections.is_none(), "max_rejections")?;
        only(rdm || self.evaluations.is_none(), "evaluations")?;
        only(self.kind == "rdm-point" || self.phantom_retries.is_none(), "phantom_retries")?;
        let metric = |m| {
            let mut c = SelectorConfig::rdm(m);
            if let SelectorConfig::Rdm {
                evaluations,
                phantom_retries,
                ..
            } = &mut c
            {
                *evaluations = self.evaluations.unwrap_or(*evaluations);
                *phantom_retries = self.phantom_retries.unwrap_or(*phantom_retries);
            }
            c
        };
        let cfg = match self.kind.as_str() {
            "random" => SelectorConfig::Random,
            "crs" => SelectorConfig::Crs {
                max_rejections: self.max_rejections.unwrap_or(modescout::samplers::DEFAULT_MAX_REJECTIONS),
            },
            "rdm-hull" => metric(DistanceMetric::Hull),
            "rdm-point" => metric(DistanceMetric::Point),
            other => bail!("unknown selector kind `{other}` (expected random, crs, rdm-hull or rdm-point)"),
        };
        cfg.validate().map_err(anyhow::Error::msg)?;
        Ok(cfg)
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub out: Option<PathBuf>,
}

pub fn parse_config(text: &str) -> Result<CampaignConfig> {
    let cfg: CampaignConfig = toml::from_str(text).map_err(|e| anyhow::anyhow!("invalid config: {e}"))?;
    if cfg.schema_version != SCHEMA_VERSION {
        bail!(
            "unsupported schema_version {} (this build reads {SCHEMA_VERSION})",
            cfg.schema_version
        );
    }
    if cfg.kappa == 0 {
        bail!("kappa must be at least 1");
    }
    if cfg.trials == 0 {
        bail!("trials must be at least 1");
    }
    if cfg.selectors.is_empty() {
        bail!("at least one [[selectors]] entry is required");
    }
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<CampaignConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    parse_config(&text).with_context(|| format!("in {}", path.display()))
}

/// Any of the built-in or external simulators.
pub enum BenchSim {
    Voronoi(VoronoiSystem),
    Nav(NavSystem),
    External(ExternalSimulator),
    TraceSuite(BitVectorSimulator<NavSystem>),
}

impl Simulator for BenchSim {
    fn dimension(&self) -> usize {
        match self {
            BenchSim::Voronoi(s) => s.dimension(),
            BenchSim::Nav(s) => Simulator::dimension(s),
            BenchSim::External(s) => s.dimension(),
            BenchSim::TraceSuite(s) => s.dimension(),
        }
    }

    fn simulate(&mut self, x: &[f64]) -> Result<ModeSequence, SimError> {
        match self {
            BenchSim::Voronoi(s) => s.simulate(x),
            BenchSim::Nav(s) => s.simulate(x),
            BenchSim::External(s) => s.simulate(x),
            BenchSim::TraceSuite(s) => s.simulate(x),
        }
    }
}

/// A benchmark resolved from config: how to build one simulator per trial,
/// and its natural input box when it has one.
pub enum Benchmark {
    Voronoi(VoronoiSystem),
    Nav(NavMap),
    External(ExternalConfig),
    TraceSuite(NavMap, Vec<monitor::Formula>),
}

impl Benchmark {
    pub fn resolve(cfg: &BenchmarkConfig, base: &Path) -> Result<Self> {
        let path = |p: &Path| base.join(p);
        let nav_map = |map: &Option<PathBuf>| -> Result<NavMap> {
            match map {
                Some(p) => Ok(NavMap::load(&path(p))?),
                None => Ok(NavMap::reference()),
            }
        };
        Ok(match cfg {
            BenchmarkConfig::Voronoi { dimension, seed, sites } => {
                let sys = match (sites, dimension) {
                    (Some(p), _) => VoronoiSystem::load(&path(p))?,
                    (None, Some(n)) => VoronoiSystem::make(*n, seed.unwrap_or(0))?,
                    (None, None) => bail!("voronoi benchmark needs `dimension` or `sites`"),
                };
                if let (Some(n), Some(_)) = (dimension, sites) {
                    if *n != sys.sites()[0].len() {
                        bail!("sites file has dimension {}, config says {n}", sys.sites()[0].len());
                    }
                }
                Benchmark::Voronoi(sys)
            }
            BenchmarkConfig::Nav { map, time_step } => {
                let mut m = nav_map(map)?;
                if let Some(dt) = time_step {
                    m = m.with_time_step(*dt)?;
                }
                Benchmark::Nav(m)
            }
            BenchmarkConfig::External {
                command,
                dimension,
                timeout_secs,
                handshake_secs,
                max_failures,
            } => {
                if command.is_empty() {
                    bail!("external benchmark needs a non-empty `command`");
                }
                let mut ec = ExternalConfig::new(command.clone(), *dimension);
                if let Some(t) = timeout_secs {
                    ec.sim_timeout = Duration::try_from_secs_f64(*t).context("timeout_secs")?;
                }
                if let Some(t) = handshake_secs {
                    ec.handshake_timeout = Duration::try_from_secs_f64(*t).context("handshake_secs")?;
                }
                if let Some(k) = max_failures {
                    ec.max_failures = *k;
                }
                Benchmark::External(ec)
            }
            BenchmarkConfig::TraceSuite { suite, map } => {
                let formulas = monitor::load_suite(&path(suite))?;
                Benchmark::TraceSuite(nav_map(map)?, formulas)
            }
        })
    }

    pub fn dimension(&self) -> usize {
        match self {
            Benchmark::Voronoi(s) => s.dimension(),
            Benchmark::Nav(_) | Benchmark::TraceSuite(..) => 4,
            Benchmark::External(c) => c.dimension,
        }
    }

    pub fn natural_box(&self) -> Option<InputBox> {
        match self {
            Benchmark::Voronoi(s) => Some(s.input_box()),
            Benchmark::Nav(m) | Benchmark::TraceSuite(m, _) => Some(m.initial_box().clone()),
            Benchmark::External(_) => None,
        }
    }

    pub fn instantiate(&self) -> Result<BenchSim, SimError> {
        Ok(match self {
            Benchmark::Voronoi(s) => BenchSim::Voronoi(s.clone()),
            Benchmark::Nav(m) => BenchSim::Nav(NavSystem::new(m.clone())),
            Benchmark::External(c) => BenchSim::External(ExternalSimulator::new(c.clone())),
            Benchmark::TraceSuite(m, suite) => BenchSim::TraceSuite(
                BitVectorSimulator::new(NavSystem::new(m.clone()), suite.clone())
                    .map_err(|e| SimError::Other(e.to_string()))?,
            ),
        })
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub summary_csv: String,
    /// One line per failed trial.
    pub failures: Vec<String>,
}

/// Everything `run` needs, resolved from a config file.
pub struct Prepared {
    pub plan: CampaignPlan,
    pub benchmark: Benchmark,
    pub out_dir: PathBuf,
}

pub fn prepare(config_path: &Path, overrides: &Overrides) -> Result<Prepared> {
    let cfg = load_config(config_path)?;
    let base = config_path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let benchmark = Benchmark::resolve(&cfg.benchmark, &base)?;
    let bounds = match (&cfg.input_box, benchmark.natural_box()) {
        (Some(b), _) => InputBox::new(b.lower.clone(), b.upper.clone()).context("input_box")?,
        (None, Some(b)) => b,
        (None, None) => bail!("this benchmark needs an [input_box]"),
    };
    if bounds.dimension() != benchmark.dimension() {
        bail!(
            "input_box has dimension {}, benchmark has dimension {}",
            bounds.dimension(),
            benchmark.dimension()
        );
    }
    let selectors = cfg
        .selectors
        .iter()
        .enumerate()
        .map(|(i, s)| {
            Ok(SelectorPlan {
                selector: s.to_config().with_context(|| format!("selectors[{i}]"))?,
                kappa: s.kappa.unwrap_or(cfg.kappa),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let plan = CampaignPlan {
        bounds,
        selectors,
        trials: overrides.trials.unwrap_or(cfg.trials),
        seed: overrides.seed.unwrap_or(cfg.seed),
        baseline_cap: cfg.baseline_cap_factor,
        audit: cfg.audit,
    };
    plan.validate()?;
    let out_dir = match &overrides.out {
        Some(o) => o.clone(),
        None => base.join(&cfg.output),
    };
    Ok(Prepared {
        plan,
        benchmark,
        out_dir,
    })
}

pub fn cmd_run(config_path: &Path, overrides: &Overrides) -> Result<RunOutcome> {
    let p = prepare(config_path, overrides)?;
    for (i, s) in p.plan.selectors.iter().enumerate() {
        eprintln!(
            "selector {i}: {} at kappa {} over {} trials",
            s.selector, s.kappa, p.plan.trials
        );
    }
    let bench = &p.benchmark;
    let records = campaign::run_campaign(&p.plan, &|| bench.instantiate())?;
    let failures = records
        .iter()
        .filter_map(|r| {
            r.record
                .failed()
                .map(|m| format!("{}: {m}", r.file_name().trim_end_matches(".json")))
        })
        .collect();
    let summary = campaign::write_outputs(&p.out_dir, &records)?;
    eprintln!("wrote {}", p.out_dir.display());
    Ok(RunOutcome {
        out_dir: p.out_dir,
        summary_csv: summary.to_csv(),
        failures,
    })
}

/// Recompute the summary (and, with `out`, curve files) from stored records.
pub fn cmd_report(dir: &Path, out: Option<&Path>) -> Result<String> {
    let (records, skipped) = campaign::load_records(dir).map_err(|e| match e {
        campaign::CampaignError::NoRecords(p) => anyhow::anyhow!("no records in {}", p.display()),
        other => other.into(),
    })?;
    if skipped > 0 {
        eprintln!("warning: skipped {skipped} unreadable record file(s)");
    }
    let summary = campaign::summarize(&records);
    if let Some(o) = out {
        campaign::write_summary(o, &summary)?;
    }
    Ok(summary.to_csv())
}
