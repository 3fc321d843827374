//! Monte-Carlo experiments over seeded trials.
//!
//! Trial `t` of an experiment with master seed `s` runs the configured
//! strategy with streams `(s, t, player)`. Randomized instance generators
//! draw a fresh instance per trial from stream `(s, t, INSTANCE_STREAM)`.
//! Trials may run in parallel; records are sorted by trial index before
//! aggregation, so reports do not depend on scheduling.

mod budget;
mod generator;
mod report;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algorithms::{Algorithm, AlgorithmSpec, TrialStreams};
use crate::error::{Error, Result};
use crate::instance::{BanditInstance, RewardKind};
use crate::rng::{RngStream, INSTANCE_STREAM};

pub use budget::{budget_calculator, BudgetMode};
pub use generator::{lower_bound_instance, GeneratorSpec};
pub use report::{write_trace, ExperimentReport, TraceRecord, TrialRecord, TRIAL_CSV_HEADER};

/// Where a trial's instance comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum InstanceSource {
    File { path: String },
    Inline { instance: BanditInstance },
    Generator { spec: String, reward: RewardKind },
}

impl InstanceSource {
    pub fn generator(spec: &str, reward: RewardKind) -> Self {
        InstanceSource::Generator {
            spec: spec.to_string(),
            reward,
        }
    }
}

/// What counts as a successful trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SuccessCriterion {
    /// The chosen arm has the maximal mean.
    BestArm,
    /// The chosen arm is within `epsilon` of the maximal mean.
    EpsBest { epsilon: f64 },
}

impl SuccessCriterion {
    /// Default for a strategy: `2 eps` for one-round PAC runs, `eps` for other
    /// runs with `eps > 0`, exact best arm otherwise.
    pub fn default_for(spec: &AlgorithmSpec) -> Self {
        let eps = spec.epsilon;
        if eps == 0.0 {
            return SuccessCriterion::BestArm;
        }
        match spec.algorithm {
            Algorithm::OneRoundPac | Algorithm::Amplified => SuccessCriterion::EpsBest { epsilon: 2.0 * eps },
            _ => SuccessCriterion::EpsBest { epsilon: eps },
        }
    }

    pub fn judge(&self, instance: &BanditInstance, chosen: usize) -> bool {
        match *self {
            SuccessCriterion::BestArm => instance.is_eps_best(chosen, 0.0),
            SuccessCriterion::EpsBest { epsilon } => instance.is_eps_best(chosen, epsilon),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub instance: InstanceSource,
    pub algorithm: AlgorithmSpec,
    pub trials: u64,
    pub seed: u64,
    /// Overrides [`SuccessCriterion::default_for`].
    #[serde(default)]
    pub success: Option<SuccessCriterion>,
    /// Include per-trial records in the JSON report.
    #[serde(default)]
    pub record_trials: bool,
}

impl ExperimentConfig {
    pub fn new(instance: InstanceSource, algorithm: AlgorithmSpec, trials: u64, seed: u64) -> Self {
        Self {
            instance,
            algorithm,
            trials,
            seed,
            success: None,
            record_trials: false,
        }
    }

    pub fn criterion(&self) -> SuccessCriterion {
        self.success
            .unwrap_or_else(|| SuccessCriterion::default_for(&self.algorithm))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Instance provider after files are loaded and specs parsed.
enum ResolvedInstance {
    Fixed(BanditInstance),
    PerTrial(GeneratorSpec, RewardKind),
}

impl ResolvedInstance {
    fn for_trial(&self, seed: u64, trial: u64) -> Result<std::borrow::Cow<'_, BanditInstance>> {
        match self {
            ResolvedInstance::Fixed(inst) => Ok(std::borrow::Cow::Borrowed(inst)),
            ResolvedInstance::PerTrial(spec, reward) => {
                let mut rng = RngStream::for_player(seed, trial, INSTANCE_STREAM);
                Ok(std::borrow::Cow::Owned(spec.generate(*reward, &mut rng)?))
            }
        }
    }
}

/// Loads files and parses generators. A file source is replaced by its
/// contents in the returned config so the echo is self-contained.
fn resolve(config: &ExperimentConfig) -> Result<(ExperimentConfig, ResolvedInstance)> {
    let mut echo = config.clone();
    let resolved = match &config.instance {
        InstanceSource::File { path } => {
            let inst = BanditInstance::load(path)?;
            echo.instance = InstanceSource::Inline { instance: inst.clone() };
            ResolvedInstance::Fixed(inst)
        }
        InstanceSource::Inline { instance } => ResolvedInstance::Fixed(instance.clone()),
        InstanceSource::Generator { spec, reward } => {
            let g: GeneratorSpec = spec.parse()?;
            if g.is_randomized() {
                ResolvedInstance::PerTrial(g, *reward)
            } else {
                let mut unused = RngStream::for_player(config.seed, 0, INSTANCE_STREAM);
                ResolvedInstance::Fixed(g.generate(*reward, &mut unused)?)
            }
        }
    };
    Ok((echo, resolved))
}

/// Checks everything that can be checked before the first trial; returns
/// the resolved echo, the instance provider and soft warnings.
fn prepare(config: &ExperimentConfig) -> Result<(ExperimentConfig, ResolvedInstance, Vec<String>)> {
    if config.trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    let (echo, resolved) = resolve(config)?;
    let first = resolved.for_trial(config.seed, 0)?;
    let warnings = config.algorithm.validate(&first)?;
    if config.criterion() == SuccessCriterion::BestArm {
        first
            .validate_for(0.0)
            .map_err(|_| Error::Config("best-arm success criterion needs a unique best arm".into()))?;
    }
    Ok((echo, resolved, warnings))
}

/// Validates a config without running it.
pub fn validate_config(config: &ExperimentConfig) -> Result<Vec<String>> {
    prepare(config).map(|(_, _, w)| w)
}

fn run_trial(
    config: &ExperimentConfig,
    criterion: SuccessCriterion,
    instances: &ResolvedInstance,
    trial: u64,
    keep_trace: bool,
) -> Result<(TrialRecord, Vec<TraceRecord>)> {
    let inst = instances.for_trial(config.seed, trial)?;
    let outcome = config.algorithm.run(&inst, TrialStreams::new(config.seed, trial))?;
    let k = outcome.ledger.players.len().max(1);
    let record = TrialRecord {
        trial,
        chosen: outcome.chosen,
        success: criterion.judge(&inst, outcome.chosen),
        pulls_max: outcome.ledger.max_per_player(),
        rounds: outcome.comm.rounds,
        values_sent: outcome.comm.values_sent,
        pulls_mean: outcome.ledger.grand_total() as f64 / k as f64,
        values_per_player_max: outcome.comm.values_per_player_max,
        fallback_events: outcome.metadata.fallback_events,
        best_eliminated: (!outcome.survivors.is_empty()).then(|| outcome.eliminated(inst.first_best_arm())),
        violations: outcome.invariant_violations(),
    };
    let trace = if keep_trace {
        outcome
            .transcript
            .into_iter()
            .map(|b| TraceRecord {
                trial,
                round: b.round,
                player: b.player,
                payload: b.payload,
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok((record, trace))
}

/// Execution knobs that do not affect results.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses the global pool.
    pub jobs: Option<usize>,
    /// Collect every broadcast for a JSON-lines trace.
    pub trace: bool,
}

/// Runs every trial of `config` and aggregates the results.
pub fn run_trials(config: &ExperimentConfig) -> Result<ExperimentReport> {
    run_trials_with(config, RunOptions::default()).map(|(r, _)| r)
}

/// [`run_trials`] with explicit parallelism and optional tracing.
pub fn run_trials_with(config: &ExperimentConfig, options: RunOptions) -> Result<(ExperimentReport, Vec<TraceRecord>)> {
    let started = Instant::now();
    let (echo, instances, warnings) = prepare(config)?;
    let criterion = config.criterion();
    let work = || -> Result<Vec<(TrialRecord, Vec<TraceRecord>)>> {
        (0..config.trials)
            .into_par_iter()
            .map(|t| run_trial(config, criterion, &instances, t, options.trace))
            .collect()
    };
    let results = match options.jobs {
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {jobs} workers: {e}")))?
            .install(work)?,
        None => work()?,
    };
    let mut records = Vec::with_capacity(results.len());
    let mut trace = Vec::new();
    for (rec, tr) in results {
        records.push(rec);
        trace.extend(tr);
    }
    trace.sort_by_key(|r| (r.trial, r.round, r.player));
    let report = ExperimentReport::aggregate(echo, criterion, warnings, records, started.elapsed());
    Ok((report, trace))
}

/// Parameter varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    K,
    Budget,
    Epsilon,
    R,
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "k" => Ok(SweepAxis::K),
            "budget" => Ok(SweepAxis::Budget),
            "epsilon" => Ok(SweepAxis::Epsilon),
            "R" | "r" => Ok(SweepAxis::R),
            _ => Err(Error::arg(format!(
                "unknown sweep axis {s:?}; expected k, budget, epsilon or R"
            ))),
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepAxis::K => "k",
            SweepAxis::Budget => "budget",
            SweepAxis::Epsilon => "epsilon",
            SweepAxis::R => "R",
        })
    }
}

impl SweepAxis {
    fn apply(self, base: &ExperimentConfig, value: f64) -> Result<ExperimentConfig> {
        let mut cfg = base.clone();
        let whole = |what: &str| -> Result<u64> {
            if value >= 0.0 && value.fract() == 0.0 && value <= u64::MAX as f64 {
                Ok(value as u64)
            } else {
                Err(Error::Config(format!(
                    "{what} must be a non-negative integer, got {value}"
                )))
            }
        };
        match self {
            SweepAxis::K => cfg.algorithm.k = whole("k")? as usize,
            SweepAxis::Budget => cfg.algorithm.budget = Some(whole("budget")?),
            SweepAxis::Epsilon => cfg.algorithm.epsilon = value,
            SweepAxis::R => cfg.algorithm.rounds = Some(whole("R")? as u32),
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub value: f64,
    pub report: ExperimentReport,
}

pub const SWEEP_CSV_HEADER: [&str; 13] = [
    "axis",
    "value",
    "trials",
    "successes",
    "success_rate",
    "std_error",
    "mean_pulls_per_player",
    "max_pulls_per_player",
    "mean_rounds",
    "max_rounds",
    "mean_values_sent",
    "max_values_per_player",
    "fallback_events",
];

/// Runs `base` once per value along `axis`, in the order given. Every value
/// is validated before any trial runs.
pub fn sweep(base: &ExperimentConfig, axis: SweepAxis, values: &[f64], options: RunOptions) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let configs: Vec<ExperimentConfig> = values
        .iter()
        .map(|&v| {
            let cfg = axis.apply(base, v)?;
            validate_config(&cfg).map_err(|e| {
                let detail = match e {
                    Error::Config(msg) => msg,
                    other => other.to_string(),
                };
                Error::Config(format!("{axis} = {v}: {detail}"))
            })?;
            Ok(cfg)
        })
        .collect::<Result<_>>()?;
    configs
        .iter()
        .zip(values)
        .map(|(cfg, &value)| {
            let (report, _) = run_trials_with(
                cfg,
                RunOptions {
                    trace: false,
                    ..options
                },
            )?;
            Ok(SweepRow { value, report })
        })
        .collect()
}

/// CSV with [`SWEEP_CSV_HEADER`], one row per value.
pub fn write_sweep_csv<W: std::io::Write>(out: W, axis: SweepAxis, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_CSV_HEADER)?;
    for row in rows {
        let r = &row.report;
        w.write_record([
            axis.to_string(),
            row.value.to_string(),
            r.trials.to_string(),
            r.successes.to_string(),
            r.success_rate.to_string(),
            r.std_error.to_string(),
            r.mean_pulls_per_player.to_string(),
            r.max_pulls_per_player.to_string(),
            r.mean_rounds.to_string(),
            r.max_rounds.to_string(),
            r.mean_values_sent.to_string(),
            r.max_values_per_player.to_string(),
            r.fallback_events.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
