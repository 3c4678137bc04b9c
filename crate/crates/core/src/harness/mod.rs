//! Parameter sweeps over policies, data fractions and seeds.
//!
//! A sweep replays every (algorithm, parameter, data fraction, seed) point
//! with the learning/deployment split and reports per-bucket CTRs relative
//! to the random policy, plus the lift over the best context-free ε-greedy.

mod report;

pub use report::{summarize, tuned_table, SummaryRow, TunedRow};

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::context::{LoggedEvent, RngSeed};
use crate::error::{Error, Result};
use crate::evaluator::{run_replay, BucketReport, ReplayOptions, ReplayPlan, ReplayResult};
use crate::policies::{
    ContextFreePolicy, LinearPolicy, OffsetTable, Omniscient, Policy, RandomPolicy,
};

pub const DEFAULT_LEARNING_FRACTION: f64 = 0.2;
pub const DEFAULT_DATA_FRACTIONS: [f64; 6] = [1.0, 0.3, 0.2, 0.1, 0.05, 0.01];
pub const DEFAULT_EPSILONS: [f64; 8] = [0.0, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0];
pub const DEFAULT_ALPHAS: [f64; 8] = [0.0, 0.1, 0.2, 0.5, 1.0, 2.0, 2.36, 5.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Random,
    Omniscient,
    Egreedy,
    Ucb,
    EgreedySeg,
    UcbSeg,
    EgreedyWarm,
    UcbWarm,
    EgreedyDisjoint,
    EgreedyHybrid,
    LinucbDisjoint,
    LinucbHybrid,
}

impl Algorithm {
    pub const ALL: [Algorithm; 12] = [
        Self::Random,
        Self::Omniscient,
        Self::Egreedy,
        Self::Ucb,
        Self::EgreedySeg,
        Self::UcbSeg,
        Self::EgreedyWarm,
        Self::UcbWarm,
        Self::EgreedyDisjoint,
        Self::EgreedyHybrid,
        Self::LinucbDisjoint,
        Self::LinucbHybrid,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Random => "random",
            Self::Omniscient => "omniscient",
            Self::Egreedy => "egreedy",
            Self::Ucb => "ucb",
            Self::EgreedySeg => "egreedy-seg",
            Self::UcbSeg => "ucb-seg",
            Self::EgreedyWarm => "egreedy-warm",
            Self::UcbWarm => "ucb-warm",
            Self::EgreedyDisjoint => "egreedy-disjoint",
            Self::EgreedyHybrid => "egreedy-hybrid",
            Self::LinucbDisjoint => "linucb-disjoint",
            Self::LinucbHybrid => "linucb-hybrid",
        }
    }

    /// The default parameter grid, or `None` for parameter-free policies.
    pub fn default_grid(self) -> Option<&'static [f64]> {
        match self {
            Self::Random | Self::Omniscient => None,
            Self::Egreedy | Self::EgreedySeg | Self::EgreedyWarm => Some(&DEFAULT_EPSILONS),
            Self::EgreedyDisjoint | Self::EgreedyHybrid => Some(&DEFAULT_EPSILONS),
            Self::Ucb | Self::UcbSeg | Self::UcbWarm => Some(&DEFAULT_ALPHAS),
            Self::LinucbDisjoint | Self::LinucbHybrid => Some(&DEFAULT_ALPHAS),
        }
    }

    pub fn needs_offsets(self) -> bool {
        matches!(self, Self::EgreedyWarm | Self::UcbWarm)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown algorithm `{s}`")))
    }
}

/// Everything needed to instantiate a policy on a given stream.
#[derive(Debug, Clone, Default)]
pub struct PolicyEnv<'a> {
    pub d: usize,
    pub k: Option<usize>,
    pub offsets: Option<&'a OffsetTable>,
    /// Events the omniscient policy fits on.
    pub events: &'a [LoggedEvent],
}

impl<'a> PolicyEnv<'a> {
    /// Dimensions taken from the first event of `events`.
    pub fn from_stream(events: &'a [LoggedEvent]) -> Result<Self> {
        let first = events
            .first()
            .ok_or_else(|| Error::DegenerateData("empty stream".into()))?;
        Ok(Self {
            d: first.context.x_dim(),
            k: first.context.z_dim(),
            offsets: None,
            events,
        })
    }
}

/// One concrete policy: an algorithm and, where it takes one, its parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicySpec {
    pub algorithm: Algorithm,
    pub parameter: Option<f64>,
}

impl PolicySpec {
    pub fn new(algorithm: Algorithm, parameter: Option<f64>) -> Result<Self> {
        match (algorithm.default_grid(), parameter) {
            (Some(_), None) => Err(Error::InvalidParameter(format!(
                "{algorithm} needs a parameter"
            ))),
            (None, Some(_)) => Err(Error::InvalidParameter(format!(
                "{algorithm} takes no parameter"
            ))),
            _ => Ok(Self {
                algorithm,
                parameter,
            }),
        }
    }

    /// Parses `name` or `name:param`, e.g. `linucb-disjoint:2.36`.
    pub fn parse(s: &str) -> Result<Self> {
        let (name, param) = match s.split_once(':') {
            Some((n, p)) => {
                let v = p
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidParameter(format!("bad parameter in `{s}`")))?;
                (n.trim(), Some(v))
            }
            None => (s.trim(), None),
        };
        Self::new(name.parse()?, param)
    }

    pub fn build(&self, env: &PolicyEnv<'_>) -> Result<Box<dyn Policy>> {
        let p = self.parameter.unwrap_or(0.0);
        let hybrid_k = || {
            env.k.ok_or_else(|| {
                Error::InvalidParameter(format!("{} needs shared features z", self.algorithm))
            })
        };
        let offsets = || {
            env.offsets.cloned().ok_or_else(|| {
                Error::InvalidParameter(format!("{} needs warm-start offsets", self.algorithm))
            })
        };
        Ok(match self.algorithm {
            Algorithm::Random => Box::new(RandomPolicy),
            Algorithm::Omniscient => Box::new(Omniscient::fit(env.events)?),
            Algorithm::Egreedy => Box::new(ContextFreePolicy::epsilon_greedy(p)?),
            Algorithm::Ucb => Box::new(ContextFreePolicy::ucb(p)?),
            Algorithm::EgreedySeg => Box::new(ContextFreePolicy::epsilon_greedy(p)?.segmented()),
            Algorithm::UcbSeg => Box::new(ContextFreePolicy::ucb(p)?.segmented()),
            Algorithm::EgreedyWarm => {
                Box::new(ContextFreePolicy::epsilon_greedy(p)?.with_warm_start(offsets()?))
            }
            Algorithm::UcbWarm => Box::new(ContextFreePolicy::ucb(p)?.with_warm_start(offsets()?)),
            Algorithm::EgreedyDisjoint => Box::new(LinearPolicy::egreedy_disjoint(env.d, p)?),
            Algorithm::EgreedyHybrid => {
                Box::new(LinearPolicy::egreedy_hybrid(env.d, hybrid_k()?, p)?)
            }
            Algorithm::LinucbDisjoint => Box::new(LinearPolicy::linucb_disjoint(env.d, p)?),
            Algorithm::LinucbHybrid => {
                Box::new(LinearPolicy::linucb_hybrid(env.d, hybrid_k()?, p)?)
            }
        })
    }
}

impl fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.parameter {
            Some(p) => write!(f, "{}:{p}", self.algorithm),
            None => write!(f, "{}", self.algorithm),
        }
    }
}

/// An algorithm and its parameter grid within a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmGrid {
    pub name: Algorithm,
    /// Defaults to the algorithm's standard grid.
    #[serde(default)]
    pub params: Option<Vec<f64>>,
}

impl AlgorithmGrid {
    pub fn points(&self) -> Result<Vec<PolicySpec>> {
        match (&self.params, self.name.default_grid()) {
            (_, None) => Ok(vec![PolicySpec::new(self.name, None)?]),
            (Some(ps), Some(_)) => {
                if ps.is_empty() {
                    return Err(Error::Config(format!("empty grid for {}", self.name)));
                }
                ps.iter()
                    .map(|p| PolicySpec::new(self.name, Some(*p)))
                    .collect()
            }
            (None, Some(grid)) => grid
                .iter()
                .map(|p| PolicySpec::new(self.name, Some(*p)))
                .collect(),
        }
    }
}

fn default_learning_fraction() -> f64 {
    DEFAULT_LEARNING_FRACTION
}

fn default_data_fractions() -> Vec<f64> {
    DEFAULT_DATA_FRACTIONS.to_vec()
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

/// Sweep configuration, read from TOML.
///
/// ```toml
/// stream = "events.jsonl"        # relative to this file
/// trials = 5000                  # T, retained events per run (both buckets)
/// learning_fraction = 0.2
/// data_fractions = [1.0, 0.1, 0.01]
/// seeds = [0, 1, 2]
/// warm_offsets = "offsets.jsonl" # only for *-warm algorithms
/// payoff_dump = "payoffs.csv"    # optional per-trial payoffs
///
/// [[algorithms]]
/// name = "egreedy"
///
/// [[algorithms]]
/// name = "linucb-disjoint"
/// params = [0.5, 1.0, 2.36]
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub stream: PathBuf,
    pub trials: usize,
    #[serde(default = "default_learning_fraction")]
    pub learning_fraction: f64,
    #[serde(default = "default_data_fractions")]
    pub data_fractions: Vec<f64>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub warm_offsets: Option<PathBuf>,
    #[serde(default)]
    pub payoff_dump: Option<PathBuf>,
    pub algorithms: Vec<AlgorithmGrid>,
}

impl SweepSpec {
    pub fn new(stream: impl Into<PathBuf>, trials: usize, algorithms: Vec<AlgorithmGrid>) -> Self {
        Self {
            stream: stream.into(),
            trials,
            learning_fraction: DEFAULT_LEARNING_FRACTION,
            data_fractions: default_data_fractions(),
            seeds: default_seeds(),
            warm_offsets: None,
            payoff_dump: None,
            algorithms,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    /// Reads a spec and resolves its relative paths against the file's directory.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut spec = Self::from_toml(&std::fs::read_to_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            Some(&mut spec.stream),
            spec.warm_offsets.as_mut(),
            spec.payoff_dump.as_mut(),
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.trials == 0 {
            return bad("trials must be positive".into());
        }
        if self.algorithms.is_empty() || self.seeds.is_empty() || self.data_fractions.is_empty() {
            return bad("algorithms, seeds and data_fractions must be non-empty".into());
        }
        for f in self.data_fractions.iter().chain([&self.learning_fraction]) {
            if !(*f > 0.0 && *f <= 1.0) {
                return bad(format!("fraction {f} outside (0, 1]"));
            }
        }
        for grid in &self.algorithms {
            grid.points()?;
        }
        Ok(())
    }

    /// Policy points in spec order.
    pub fn points(&self) -> Result<Vec<PolicySpec>> {
        let mut out = Vec::new();
        for grid in &self.algorithms {
            out.extend(grid.points()?);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bucket {
    Learn,
    Deploy,
}

/// One line of sweep output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub algorithm: Algorithm,
    pub parameter: Option<f64>,
    pub data_fraction: f64,
    pub bucket: Bucket,
    /// CTR divided by the random policy's CTR on the same bucket and seed.
    pub ctr: f64,
    /// `ctr / best ε-greedy ctr − 1`; empty when the sweep has no ε-greedy.
    pub lift_vs_baseline: Option<f64>,
    pub retained: usize,
    pub consumed: usize,
    pub seed: u64,
    pub raw_ctr: f64,
    /// The stream ran out before `trials` events were retained.
    pub exhausted: bool,
}

/// Cumulative CTR after each retained event of one run and bucket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayoffRow {
    pub algorithm: Algorithm,
    pub parameter: Option<f64>,
    pub data_fraction: f64,
    pub bucket: Bucket,
    pub seed: u64,
    pub trial: usize,
    pub payoff: f64,
    pub cumulative_ctr: f64,
}

#[derive(Debug, Clone, Default)]
pub struct SweepOutput {
    pub rows: Vec<ReportRow>,
    pub payoffs: Vec<PayoffRow>,
}

fn replay_point(
    spec: &PolicySpec,
    env: &PolicyEnv<'_>,
    stream: &[LoggedEvent],
    sweep: &SweepSpec,
    data_fraction: f64,
    seed: u64,
) -> Result<BucketReport> {
    let mut policy = spec.build(env)?;
    let plan = ReplayPlan::new(sweep.trials)
        .learning_fraction(sweep.learning_fraction)
        .data_fraction(data_fraction)
        .options(ReplayOptions {
            per_trial_payoffs: sweep.payoff_dump.is_some(),
            ..ReplayOptions::default()
        });
    run_replay(&mut policy, stream, &plan, &mut RngSeed(seed).rng())
}

fn bucket_results(report: &BucketReport) -> [(Bucket, &ReplayResult); 2] {
    [
        (Bucket::Learn, &report.learning),
        (Bucket::Deploy, &report.deployment),
    ]
}

/// Runs every point of `spec` against `stream`. Warm-start algorithms use
/// `offsets`.
pub fn run_sweep_detailed(
    spec: &SweepSpec,
    stream: &[LoggedEvent],
    offsets: Option<&OffsetTable>,
) -> Result<SweepOutput> {
    spec.validate()?;
    let mut env = PolicyEnv::from_stream(stream)?;
    env.offsets = offsets;
    let points = spec.points()?;
    let cells: Vec<(f64, u64)> = spec
        .data_fractions
        .iter()
        .flat_map(|f| spec.seeds.iter().map(move |s| (*f, *s)))
        .collect();

    let random = PolicySpec::new(Algorithm::Random, None)?;
    let baselines: Vec<BucketReport> = cells
        .par_iter()
        .map(|(f, s)| replay_point(&random, &env, stream, spec, *f, *s))
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..cells.len()).map(move |c| (p, c)))
        .collect();
    let reports: Vec<BucketReport> = jobs
        .par_iter()
        .map(|(p, c)| {
            let (f, s) = cells[*c];
            replay_point(&points[*p], &env, stream, spec, f, s)
        })
        .collect::<Result<_>>()?;

    let mut out = SweepOutput::default();
    for ((p, c), report) in jobs.iter().zip(&reports) {
        let (fraction, seed) = cells[*c];
        let point = &points[*p];
        for ((bucket, r), (_, base)) in bucket_results(report)
            .into_iter()
            .zip(bucket_results(&baselines[*c]))
        {
            if base.ctr() <= 0.0 {
                return Err(Error::DegenerateData(format!(
                    "random policy has zero {bucket:?} CTR at fraction {fraction}, seed {seed}"
                )));
            }
            out.rows.push(ReportRow {
                algorithm: point.algorithm,
                parameter: point.parameter,
                data_fraction: fraction,
                bucket,
                ctr: r.ctr() / base.ctr(),
                lift_vs_baseline: None,
                retained: r.retained,
                consumed: r.consumed,
                seed,
                raw_ctr: r.ctr(),
                exhausted: r.exhausted,
            });
            if let Some(payoffs) = &r.per_trial_payoffs {
                let mut total = 0.0;
                for (i, payoff) in payoffs.iter().enumerate() {
                    total += payoff;
                    out.payoffs.push(PayoffRow {
                        algorithm: point.algorithm,
                        parameter: point.parameter,
                        data_fraction: fraction,
                        bucket,
                        seed,
                        trial: i + 1,
                        payoff: *payoff,
                        cumulative_ctr: total / (i + 1) as f64,
                    });
                }
            }
        }
    }
    apply_lift(&mut out.rows);
    Ok(out)
}

pub fn run_sweep(
    spec: &SweepSpec,
    stream: &[LoggedEvent],
    offsets: Option<&OffsetTable>,
) -> Result<Vec<ReportRow>> {
    Ok(run_sweep_detailed(spec, stream, offsets)?.rows)
}

/// Reads the stream and offsets named by `spec` and runs it.
pub fn run_sweep_files(spec: &SweepSpec) -> Result<SweepOutput> {
    let stream = crate::eventlog::read_events(&spec.stream)?;
    let offsets = spec
        .warm_offsets
        .as_ref()
        .map(OffsetTable::read)
        .transpose()?;
    run_sweep_detailed(spec, &stream, offsets.as_ref())
}

/// Fills `lift_vs_baseline` against the best context-free ε-greedy row of
/// the same fraction, seed and bucket.
fn apply_lift(rows: &mut [ReportRow]) {
    let key = |r: &ReportRow| (r.data_fraction.to_bits(), r.seed, r.bucket);
    let mut best: Vec<((u64, u64, Bucket), f64)> = Vec::new();
    for r in rows.iter().filter(|r| r.algorithm == Algorithm::Egreedy) {
        match best.iter_mut().find(|(k, _)| *k == key(r)) {
            Some((_, v)) => *v = v.max(r.ctr),
            None => best.push((key(r), r.ctr)),
        }
    }
    for r in rows.iter_mut() {
        r.lift_vs_baseline = best.iter().find(|(k, _)| *k == key(r)).map(|(_, b)| {
            if *b > 0.0 {
                r.ctr / b - 1.0
            } else {
                0.0
            }
        });
    }
}

pub fn write_rows<T: Serialize>(rows: &[T], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows(path: impl AsRef<Path>) -> Result<Vec<ReportRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}
