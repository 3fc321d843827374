use std::io::Write;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{ExperimentConfig, SuccessCriterion};
use crate::error::Result;
use crate::protocol::Entry;

/// Outcome of one trial, as written to the per-trial CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub chosen: usize,
    pub success: bool,
    pub pulls_max: u64,
    pub rounds: u64,
    pub values_sent: u64,
    #[serde(skip)]
    pub pulls_mean: f64,
    #[serde(skip)]
    pub values_per_player_max: u64,
    #[serde(skip)]
    pub fallback_events: u32,
    /// Whether the best arm left the surviving set (elimination strategies).
    #[serde(skip)]
    pub best_eliminated: Option<bool>,
    #[serde(skip)]
    pub violations: Vec<String>,
}

/// One line of the broadcast trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub trial: u64,
    pub round: u64,
    pub player: usize,
    pub payload: Vec<Entry>,
}

/// Aggregate statistics over all trials of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub success_criterion: SuccessCriterion,
    pub trials: u64,
    pub successes: u64,
    pub success_rate: f64,
    /// `sqrt(p (1 - p) / trials)`.
    pub std_error: f64,
    pub mean_pulls_per_player: f64,
    pub max_pulls_per_player: u64,
    pub mean_rounds: f64,
    pub max_rounds: u64,
    pub mean_values_sent: f64,
    pub max_values_per_player: u64,
    pub fallback_events: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub best_eliminated: Option<u64>,
    pub invariant_violations: u64,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub wall_clock: Duration,
    #[serde(skip)]
    pub records: Vec<TrialRecord>,
}

impl ExperimentReport {
    pub(crate) fn aggregate(
        config: ExperimentConfig,
        success_criterion: SuccessCriterion,
        warnings: Vec<String>,
        mut records: Vec<TrialRecord>,
        wall_clock: Duration,
    ) -> Self {
        records.sort_by_key(|r| r.trial);
        let trials = records.len() as u64;
        let t = trials.max(1) as f64;
        let successes = records.iter().filter(|r| r.success).count() as u64;
        let success_rate = successes as f64 / t;
        let eliminated: Vec<bool> = records.iter().filter_map(|r| r.best_eliminated).collect();
        Self {
            config,
            success_criterion,
            trials,
            successes,
            success_rate,
            std_error: (success_rate * (1.0 - success_rate) / t).sqrt(),
            mean_pulls_per_player: records.iter().map(|r| r.pulls_mean).sum::<f64>() / t,
            max_pulls_per_player: records.iter().map(|r| r.pulls_max).max().unwrap_or(0),
            mean_rounds: records.iter().map(|r| r.rounds as f64).sum::<f64>() / t,
            max_rounds: records.iter().map(|r| r.rounds).max().unwrap_or(0),
            mean_values_sent: records.iter().map(|r| r.values_sent as f64).sum::<f64>() / t,
            max_values_per_player: records.iter().map(|r| r.values_per_player_max).max().unwrap_or(0),
            fallback_events: records.iter().map(|r| u64::from(r.fallback_events)).sum(),
            best_eliminated: (!eliminated.is_empty()).then(|| eliminated.iter().filter(|&&e| e).count() as u64),
            invariant_violations: records.iter().map(|r| r.violations.len() as u64).sum(),
            warnings,
            wall_clock,
            records,
        }
    }

    /// Pretty JSON; per-trial records are included when the config asks.
    pub fn to_json(&self) -> String {
        let mut value = serde_json::to_value(self).expect("report serializes");
        if self.config.record_trials {
            value["records"] = serde_json::to_value(&self.records).expect("records serialize");
        }
        serde_json::to_string_pretty(&value).expect("report serializes") + "\n"
    }

    /// CSV with header `trial,chosen,success,pulls_max,rounds,values_sent`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        if self.records.is_empty() {
            w.write_record(TRIAL_CSV_HEADER)?;
        }
        for r in &self.records {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    /// One-line human summary.
    pub fn summary(&self) -> String {
        format!(
            "{} k={} trials={} success={}/{} ({:.4} +/- {:.4}) mean_rounds={:.3} max_rounds={} \
             mean_pulls/player={:.1} max_pulls/player={} mean_values={:.1} fallbacks={} violations={}",
            self.config.algorithm.algorithm,
            self.config.algorithm.k,
            self.trials,
            self.successes,
            self.trials,
            self.success_rate,
            self.std_error,
            self.mean_rounds,
            self.max_rounds,
            self.mean_pulls_per_player,
            self.max_pulls_per_player,
            self.mean_values_sent,
            self.fallback_events,
            self.invariant_violations,
        )
    }
}

pub const TRIAL_CSV_HEADER: [&str; 6] = ["trial", "chosen", "success", "pulls_max", "rounds", "values_sent"];

/// Writes one JSON object per broadcast.
pub fn write_trace<W: Write>(mut out: W, trace: &[TraceRecord]) -> Result<()> {
    for rec in trace {
        serde_json::to_writer(&mut out, rec)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
