//! Distributed strategies and their baselines.
//!
//! Every strategy runs `k` players under [`crate::protocol`] and returns a
//! [`RunOutcome`]. Player `j` of trial `t` always draws from the stream
//! `(seed, t, j)`, so a `(seed, trial)` pair fully determines a run.

mod baselines;
mod multi_round;
mod one_round;
mod vote;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::BanditInstance;
use crate::protocol::{Broadcast, CommStats, PullLedger};
use crate::rng::RngStream;

pub use baselines::{baseline_full_comm, baseline_majority_vote, baseline_no_comm};
pub use multi_round::{multi_round, r_round, round_bound, round_pulls, EliminationSchedule, MAX_ELIMINATION_ROUNDS};
pub use one_round::{
    amplification_copies, amplify, one_round_best_arm, one_round_pac, subset_size, OneRoundKind,
    DEFAULT_AMPLIFICATION_CONSTANT,
};
pub use vote::{pac_sample_threshold, plurality, Selection, VoteBoard};

/// Strategy selector, written as in the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "one-round-best")]
    OneRoundBest,
    #[serde(rename = "one-round-pac")]
    OneRoundPac,
    #[serde(rename = "amplified")]
    Amplified,
    #[serde(rename = "multi-round")]
    MultiRound,
    #[serde(rename = "r-round")]
    RRound,
    #[serde(rename = "no-comm")]
    NoComm,
    #[serde(rename = "majority-vote")]
    MajorityVote,
    #[serde(rename = "full-comm")]
    FullComm,
}

impl Algorithm {
    pub const ALL: [Algorithm; 8] = [
        Algorithm::OneRoundBest,
        Algorithm::OneRoundPac,
        Algorithm::Amplified,
        Algorithm::MultiRound,
        Algorithm::RRound,
        Algorithm::NoComm,
        Algorithm::MajorityVote,
        Algorithm::FullComm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::OneRoundBest => "one-round-best",
            Algorithm::OneRoundPac => "one-round-pac",
            Algorithm::Amplified => "amplified",
            Algorithm::MultiRound => "multi-round",
            Algorithm::RRound => "r-round",
            Algorithm::NoComm => "no-comm",
            Algorithm::MajorityVote => "majority-vote",
            Algorithm::FullComm => "full-comm",
        }
    }

    /// Strategies that spend a fixed per-player budget `T`.
    pub fn uses_budget(self) -> bool {
        !matches!(self, Algorithm::MultiRound | Algorithm::RRound)
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
        Algorithm::ALL.into_iter().find(|a| a.as_str() == s).ok_or_else(|| {
            let names: Vec<_> = Algorithm::ALL.iter().map(|a| a.as_str()).collect();
            Error::arg(format!("unknown algorithm {s:?}; expected one of {}", names.join(", ")))
        })
    }
}

/// Source of per-player streams for one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialStreams {
    pub seed: u64,
    pub trial: u64,
}

impl TrialStreams {
    pub fn new(seed: u64, trial: u64) -> Self {
        Self { seed, trial }
    }

    pub fn player(&self, j: usize) -> RngStream {
        RngStream::for_player(self.seed, self.trial, j as u64)
    }
}

/// Parameters echoed into every outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub algorithm: Algorithm,
    pub k: usize,
    /// Per-player budget, for strategies that have one.
    pub budget: Option<u64>,
    pub epsilon: f64,
    pub delta: Option<f64>,
    pub rounds: Option<u32>,
    /// Independent copies combined by amplification.
    pub copies: Option<u32>,
    pub fallback_events: u32,
    pub warnings: Vec<String>,
}

impl RunMetadata {
    pub(crate) fn new(algorithm: Algorithm, k: usize, epsilon: f64) -> Self {
        Self {
            algorithm,
            k,
            budget: None,
            epsilon,
            delta: None,
            rounds: None,
            copies: None,
            fallback_events: 0,
            warnings: Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub chosen: usize,
    /// Each player's final answer.
    pub per_player_choices: Vec<usize>,
    pub comm: CommStats,
    pub ledger: PullLedger,
    pub metadata: RunMetadata,
    /// One board per combined copy of a one-round strategy.
    pub boards: Vec<VoteBoard>,
    /// Surviving sets `S_0, S_1, ...` of an elimination strategy.
    pub survivors: Vec<Vec<usize>>,
    /// Cumulative per-arm pull targets `t_1, t_2, ...` of an elimination strategy.
    pub schedule: Vec<u64>,
    /// Sweeps of the pooled serial run (full communication only).
    pub sweeps: Option<u64>,
    pub transcript: Vec<Broadcast>,
}

impl RunOutcome {
    /// True if `arm` was dropped from the surviving set in some round.
    pub fn eliminated(&self, arm: usize) -> bool {
        self.survivors.first().is_some_and(|s0| s0.contains(&arm))
            && self.survivors.last().is_some_and(|s| !s.contains(&arm))
    }

    /// Every structural invariant this outcome breaks, one message each.
    pub fn invariant_violations(&self) -> Vec<String> {
        let mut out = self.ledger.violations();
        let k = self.metadata.k;
        for (c, board) in self.boards.iter().enumerate() {
            if board.total_votes() != k {
                out.push(format!("copy {c}: {} votes from {k} players", board.total_votes()));
            }
        }
        for (r, pair) in self.survivors.windows(2).enumerate() {
            if pair[1].is_empty() {
                out.push(format!("S_{} is empty", r + 1));
            }
            if !pair[1].iter().all(|a| pair[0].contains(a)) {
                out.push(format!("S_{} is not a subset of S_{r}", r + 1));
            }
        }
        if !self.schedule.is_empty() {
            let expected: u64 = self
                .survivors
                .iter()
                .zip(round_pulls(&self.schedule))
                .map(|(s, pulls)| s.len() as u64 * pulls)
                .sum();
            for (j, p) in self.ledger.players.iter().enumerate() {
                if p.total != expected {
                    out.push(format!("player {j}: {} pulls, schedule implies {expected}", p.total));
                }
            }
        }
        let rounds = self.comm.rounds;
        let m = &self.metadata;
        let round_ok = match m.algorithm {
            Algorithm::OneRoundBest | Algorithm::OneRoundPac | Algorithm::Amplified | Algorithm::MajorityVote => {
                rounds == 1
            }
            Algorithm::NoComm => rounds == 0,
            Algorithm::MultiRound => m.epsilon == 0.0 || rounds <= round_bound(m.epsilon),
            Algorithm::RRound => rounds <= u64::from(m.rounds.unwrap_or(0)),
            Algorithm::FullComm => true,
        };
        if !round_ok {
            out.push(format!("{} used {rounds} rounds", m.algorithm));
        }
        if !self
            .per_player_choices
            .iter()
            .all(|&c| c < self.ledger.players.first().map_or(0, |p| p.arms.len()))
        {
            out.push("player answer out of range".into());
        }
        out
    }
}

/// Full parameter set for one strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSpec {
    pub algorithm: Algorithm,
    pub k: usize,
    /// Per-player budget `T` (total budget for `amplified`).
    #[serde(default)]
    pub budget: Option<u64>,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default)]
    pub delta: Option<f64>,
    /// `R` for `r-round`.
    #[serde(default)]
    pub rounds: Option<u32>,
    #[serde(default = "default_amplification")]
    pub amplification_constant: f64,
}

fn default_amplification() -> f64 {
    DEFAULT_AMPLIFICATION_CONSTANT
}

impl AlgorithmSpec {
    pub fn new(algorithm: Algorithm, k: usize) -> Self {
        Self {
            algorithm,
            k,
            budget: None,
            epsilon: 0.0,
            delta: None,
            rounds: None,
            amplification_constant: DEFAULT_AMPLIFICATION_CONSTANT,
        }
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = Some(budget);
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = Some(delta);
        self
    }

    pub fn with_rounds(mut self, rounds: u32) -> Self {
        self.rounds = Some(rounds);
        self
    }

    pub fn with_amplification_constant(mut self, c: f64) -> Self {
        self.amplification_constant = c;
        self
    }

    fn require_budget(&self) -> Result<u64> {
        self.budget
            .ok_or_else(|| Error::Config(format!("{} requires a per-player budget", self.algorithm)))
    }

    fn require_delta(&self) -> Result<f64> {
        self.delta
            .ok_or_else(|| Error::Config(format!("{} requires delta", self.algorithm)))
    }

    /// Checks hard preconditions against `instance`; returns soft warnings.
    pub fn validate(&self, instance: &BanditInstance) -> Result<Vec<String>> {
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!("epsilon must be >= 0, got {}", self.epsilon)));
        }
        let mut warnings = Vec::new();
        let sqrt_k = (self.k as f64).sqrt();
        let n = instance.n() as f64;
        match self.algorithm {
            Algorithm::OneRoundBest => {
                check_budget(self.require_budget()?, 2)?;
                instance.validate_for(0.0)?;
                if !(6.0 <= sqrt_k && sqrt_k <= n) {
                    warnings.push(format!(
                        "one-round-best guarantee needs 36 <= k <= n^2 (k = {})",
                        self.k
                    ));
                }
            }
            Algorithm::OneRoundPac => {
                check_budget(self.require_budget()?, 2)?;
                check_open_unit("epsilon", self.epsilon)?;
                if !(24.0 <= sqrt_k && sqrt_k <= n) {
                    warnings.push(format!(
                        "one-round-pac guarantee needs 576 <= k <= n^2 (k = {})",
                        self.k
                    ));
                }
            }
            Algorithm::Amplified => {
                let delta = self.require_delta()?;
                if !(delta > 0.0 && delta < 1.0 / 3.0) {
                    return Err(Error::Config(format!(
                        "amplified requires 0 < delta < 1/3, got {delta}"
                    )));
                }
                let m = amplification_copies(delta, self.amplification_constant)?;
                let total = self.require_budget()?;
                if total / u64::from(m) < 2 {
                    return Err(Error::Config(format!(
                        "amplified needs at least 2 pulls per copy: budget {total} over {m} copies"
                    )));
                }
                let base = OneRoundKind::for_epsilon(self.epsilon)?;
                if base == OneRoundKind::BestArm {
                    instance.validate_for(0.0)?;
                }
            }
            Algorithm::MultiRound => {
                check_open_unit("delta", self.require_delta()?)?;
                instance.validate_for(self.epsilon)?;
            }
            Algorithm::RRound => {
                check_open_unit("delta", self.require_delta()?)?;
                check_open_unit("epsilon", self.epsilon)?;
                match self.rounds {
                    Some(r) if r >= 1 => {}
                    _ => return Err(Error::Config("r-round requires R >= 1".into())),
                }
            }
            Algorithm::NoComm | Algorithm::MajorityVote | Algorithm::FullComm => {
                self.require_budget()?;
                instance.validate_for(self.epsilon)?;
            }
        }
        Ok(warnings)
    }

    /// Runs one trial.
    pub fn run(&self, instance: &BanditInstance, streams: TrialStreams) -> Result<RunOutcome> {
        let eps = self.epsilon;
        let k = self.k;
        match self.algorithm {
            Algorithm::OneRoundBest => one_round_best_arm(instance, k, self.require_budget()?, streams),
            Algorithm::OneRoundPac => one_round_pac(instance, k, self.require_budget()?, eps, streams),
            Algorithm::Amplified => amplify(
                OneRoundKind::for_epsilon(eps)?,
                self.require_delta()?,
                self.amplification_constant,
                instance,
                k,
                self.require_budget()?,
                streams,
            ),
            Algorithm::MultiRound => multi_round(instance, k, eps, self.require_delta()?, streams),
            Algorithm::RRound => r_round(
                instance,
                k,
                eps,
                self.require_delta()?,
                self.rounds.ok_or_else(|| Error::Config("r-round requires R".into()))?,
                streams,
            ),
            Algorithm::NoComm => baseline_no_comm(instance, k, self.require_budget()?, eps, streams),
            Algorithm::MajorityVote => baseline_majority_vote(instance, k, self.require_budget()?, eps, streams),
            Algorithm::FullComm => baseline_full_comm(instance, k, self.require_budget()?, eps, streams),
        }
    }
}

fn check_budget(budget: u64, min: u64) -> Result<()> {
    if budget < min {
        return Err(Error::Config(format!(
            "per-player budget must be at least {min}, got {budget}"
        )));
    }
    Ok(())
}

fn check_open_unit(name: &str, x: f64) -> Result<()> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::Config(format!("{name} must lie in (0, 1), got {x}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selector_strings_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.as_str().parse::<Algorithm>().unwrap(), a);
            assert_eq!(serde_json::to_string(&a).unwrap(), format!("\"{a}\""));
        }
        assert!("two-round".parse::<Algorithm>().is_err());
    }

    #[test]
    fn validation_rules() {
        let inst = BanditInstance::bernoulli(vec![0.9, 0.5, 0.5]).unwrap();
        let tied = BanditInstance::bernoulli(vec![0.9, 0.9, 0.5]).unwrap();

        let spec = AlgorithmSpec::new(Algorithm::OneRoundBest, 4).with_budget(100);
        let warnings = spec.validate(&inst).unwrap();
        assert_eq!(warnings.len(), 1);
        assert!(spec.validate(&tied).is_err());
        assert!(AlgorithmSpec::new(Algorithm::OneRoundBest, 4)
            .with_budget(1)
            .validate(&inst)
            .is_err());
        assert!(AlgorithmSpec::new(Algorithm::OneRoundBest, 0)
            .with_budget(10)
            .validate(&inst)
            .is_err());

        let pac = AlgorithmSpec::new(Algorithm::OneRoundPac, 4).with_budget(100);
        assert!(pac.validate(&inst).is_err());
        assert!(pac.clone().with_epsilon(0.1).validate(&tied).is_ok());

        let amp = AlgorithmSpec::new(Algorithm::Amplified, 36).with_budget(1000);
        assert!(amp.clone().with_delta(1.0 / 3.0).validate(&inst).is_err());
        assert!(amp.clone().with_delta(0.1).validate(&inst).is_ok());
        // 42 copies cannot share a 41-pull budget
        assert!(AlgorithmSpec::new(Algorithm::Amplified, 36)
            .with_budget(41)
            .with_delta(0.1)
            .validate(&inst)
            .is_err());

        let multi = AlgorithmSpec::new(Algorithm::MultiRound, 4).with_delta(0.1);
        assert!(multi.validate(&inst).is_ok());
        assert!(multi.validate(&tied).is_err());
        assert!(multi.clone().with_epsilon(0.1).validate(&tied).is_ok());

        let rr = AlgorithmSpec::new(Algorithm::RRound, 4)
            .with_delta(0.1)
            .with_epsilon(0.1);
        assert!(rr.validate(&inst).is_err());
        assert!(rr.clone().with_rounds(0).validate(&inst).is_err());
        assert!(rr.with_rounds(2).validate(&inst).is_ok());

        assert!(AlgorithmSpec::new(Algorithm::NoComm, 3).validate(&inst).is_err());
    }
}
