//! Collaborative pure-exploration bandits.
//!
//! `k` simulated players share the job of finding a best (or `eps`-best) arm
//! of a stochastic bandit and talk only through synchronous broadcast
//! rounds. The crate provides the instance model, a budget-capped serial
//! explorer, the broadcast protocol with its accounting, one-round and
//! multi-round strategies with their baselines, and a seeded Monte-Carlo
//! harness.
//!
//! ```
//! use cobandit::{one_round_best_arm, BanditInstance, TrialStreams};
//!
//! let mut means = vec![0.0; 20];
//! means[0] = 1.0;
//! let instance = BanditInstance::deterministic(means).unwrap();
//! let outcome = one_round_best_arm(&instance, 36, 200, TrialStreams::new(7, 0)).unwrap();
//! assert_eq!(outcome.chosen, 0);
//! assert_eq!(outcome.comm.rounds, 1);
//! ```

pub mod algorithms;
pub mod error;
pub mod explore;
pub mod harness;
pub mod instance;
pub mod protocol;
pub mod rng;

pub use algorithms::{
    amplify, baseline_full_comm, baseline_majority_vote, baseline_no_comm, multi_round, one_round_best_arm,
    one_round_pac, r_round, Algorithm, AlgorithmSpec, OneRoundKind, RunMetadata, RunOutcome, TrialStreams, VoteBoard,
};
pub use error::{Error, Result};
pub use explore::{successive_elimination, ExploreOutcome, SerialBudget};
pub use harness::{
    budget_calculator, lower_bound_instance, run_trials, run_trials_with, sweep, BudgetMode, ExperimentConfig,
    ExperimentReport, GeneratorSpec, InstanceSource, RunOptions, SuccessCriterion, SweepAxis,
};
pub use instance::{ArmSpec, BanditInstance, GapProfile, RewardKind};
pub use protocol::{run_synchronous, Broadcast, CommStats, Entry, PullLedger};
pub use rng::RngStream;
