//! One-round strategies: explore a random subset, exploit the local winner,
//! broadcast `(arm, mean)` once, and aggregate the votes.

use rand::seq::index;

use super::vote::{plurality, Selection, VoteBoard};
use super::{Algorithm, RunMetadata, RunOutcome, TrialStreams};
use crate::error::{Error, Result};
use crate::explore::{successive_elimination_with, ArmSampler, SerialBudget};
use crate::instance::BanditInstance;
use crate::protocol::{run_synchronous, Broadcast, Entry, Player, PlayerEnv, Seat, Step};

/// Repetitions per unit of `ln(1/delta)` when amplifying.
pub const DEFAULT_AMPLIFICATION_CONSTANT: f64 = 18.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OneRoundKind {
    /// Subsets of `6n/sqrt(k)` arms, votes kept when `k_i > sqrt(k)`.
    BestArm,
    /// Subsets of `12n/sqrt(k)` arms, votes kept when `t_i >= ln(12n)/eps^2`.
    Pac { epsilon: f64 },
}

impl OneRoundKind {
    /// `BestArm` for `epsilon == 0`, `Pac` for `epsilon` in `(0, 1)`.
    pub fn for_epsilon(epsilon: f64) -> Result<Self> {
        if epsilon == 0.0 {
            Ok(OneRoundKind::BestArm)
        } else if epsilon > 0.0 && epsilon < 1.0 {
            Ok(OneRoundKind::Pac { epsilon })
        } else {
            Err(Error::arg(format!("epsilon must be 0 or in (0, 1), got {epsilon}")))
        }
    }

    fn subset_factor(self) -> f64 {
        match self {
            OneRoundKind::BestArm => 6.0,
            OneRoundKind::Pac { .. } => 12.0,
        }
    }

    fn epsilon(self) -> f64 {
        match self {
            OneRoundKind::BestArm => 0.0,
            OneRoundKind::Pac { epsilon } => epsilon,
        }
    }

    fn select(self, board: &VoteBoard, k: usize) -> Selection {
        match self {
            OneRoundKind::BestArm => board.select_best_arm(k),
            OneRoundKind::Pac { epsilon } => board.select_eps_best(epsilon),
        }
    }

    fn algorithm(self) -> Algorithm {
        match self {
            OneRoundKind::BestArm => Algorithm::OneRoundBest,
            OneRoundKind::Pac { .. } => Algorithm::OneRoundPac,
        }
    }
}

/// `min(n, ceil(factor * n / sqrt(k)))`.
pub fn subset_size(n: usize, k: usize, factor: f64) -> usize {
    let s = (factor * n as f64 / (k as f64).sqrt()).ceil() as usize;
    s.clamp(1, n)
}

/// `ceil(constant * ln(1/delta))` independent copies.
pub fn amplification_copies(delta: f64, constant: f64) -> Result<u32> {
    if !(delta > 0.0 && delta < 1.0 / 3.0) {
        return Err(Error::arg(format!("amplification needs 0 < delta < 1/3, got {delta}")));
    }
    if !(constant > 0.0 && constant.is_finite()) {
        return Err(Error::arg(format!(
            "amplification constant must be positive, got {constant}"
        )));
    }
    Ok((constant * (1.0 / delta).ln()).ceil() as u32)
}

struct OneRoundPlayer {
    kind: OneRoundKind,
    n: usize,
    k: usize,
    subset: usize,
    copy_budget: u64,
    copies: u32,
    answer: usize,
    boards: Vec<VoteBoard>,
    fallbacks: u32,
}

impl OneRoundPlayer {
    fn explore_cap(&self) -> u64 {
        self.copy_budget / 2
    }

    fn exploit_pulls(&self) -> u64 {
        self.copy_budget - self.explore_cap()
    }
}

impl Player for OneRoundPlayer {
    fn local_phase(&mut self, round: u64, env: &mut PlayerEnv<'_>) -> Result<Step> {
        if round > 1 {
            return Ok(Step::Halt);
        }
        let exploit = self.exploit_pulls();
        let mut payload = Vec::with_capacity(self.copies as usize);
        for copy in 0..self.copies {
            let mut subset = index::sample(env.rng(), self.n, self.subset).into_vec();
            subset.sort_unstable();
            let explored =
                successive_elimination_with(env, &subset, self.kind.epsilon(), SerialBudget::new(self.explore_cap()))?;
            let mut sum = 0.0;
            for _ in 0..exploit {
                sum += env.pull(explored.chosen)?;
            }
            payload.push(Entry::pair(explored.chosen, sum / exploit as f64).in_group(copy));
        }
        Ok(Step::Broadcast(payload))
    }

    fn receive(&mut self, _round: u64, broadcasts: &[Broadcast]) {
        let mut boards: Vec<VoteBoard> = (0..self.copies)
            .map(|_| VoteBoard::new(self.n, self.exploit_pulls()))
            .collect();
        for entry in broadcasts.iter().flat_map(|b| &b.payload) {
            if let Some(board) = boards.get_mut(entry.group as usize) {
                board.add(entry.arm, entry.value.unwrap_or(0.0));
            }
        }
        let selections: Vec<Selection> = boards.iter().map(|b| self.kind.select(b, self.k)).collect();
        self.fallbacks = selections.iter().filter(|s| s.fallback).count() as u32;
        self.answer = plurality(selections.iter().map(|s| s.arm)).unwrap_or(0);
        self.boards = boards;
    }

    fn answer(&self) -> usize {
        self.answer
    }
}

fn run_one_round(
    kind: OneRoundKind,
    instance: &BanditInstance,
    k: usize,
    copy_budget: u64,
    copies: u32,
    streams: TrialStreams,
    mut metadata: RunMetadata,
) -> Result<RunOutcome> {
    if k == 0 {
        return Err(Error::arg("k must be at least 1"));
    }
    if copy_budget < 2 {
        return Err(Error::arg(format!(
            "per-copy budget must be at least 2, got {copy_budget}"
        )));
    }
    let n = instance.n();
    let subset = subset_size(n, k, kind.subset_factor());
    let total = copy_budget * u64::from(copies);
    let seats = (0..k)
        .map(|j| Seat {
            player: OneRoundPlayer {
                kind,
                n,
                k,
                subset,
                copy_budget,
                copies,
                answer: 0,
                boards: Vec::new(),
                fallbacks: 0,
            },
            rng: streams.player(j),
            budget: Some(total),
        })
        .collect();
    let mut run = run_synchronous(instance, seats, 1)?;
    let lead = run.players.swap_remove(0);
    metadata.fallback_events = lead.fallbacks;
    Ok(RunOutcome {
        chosen: run.answers[0],
        per_player_choices: run.answers,
        comm: run.comm,
        ledger: run.ledger,
        metadata,
        boards: lead.boards,
        survivors: Vec::new(),
        schedule: Vec::new(),
        sweeps: None,
        transcript: run.transcript,
    })
}

fn guarantee_warning(kind: OneRoundKind, n: usize, k: usize) -> Option<String> {
    let root = (k as f64).sqrt();
    let lower = match kind {
        OneRoundKind::BestArm => 6.0,
        OneRoundKind::Pac { .. } => 24.0,
    };
    (root < lower || root > n as f64).then(|| {
        format!(
            "{} requires {} <= k <= {} for its guarantee (k = {k})",
            kind.algorithm(),
            lower * lower,
            n * n
        )
    })
}

/// Best-arm identification with a single broadcast of `(i_j, q_j)` per player.
///
/// Each player explores a uniform subset of `min(n, ceil(6n/sqrt(k)))` arms
/// with at most `floor(T/2)` pulls, then pulls its local winner `ceil(T/2)`
/// times.
pub fn one_round_best_arm(
    instance: &BanditInstance,
    k: usize,
    budget: u64,
    streams: TrialStreams,
) -> Result<RunOutcome> {
    let kind = OneRoundKind::BestArm;
    let mut meta = RunMetadata::new(Algorithm::OneRoundBest, k, 0.0);
    meta.budget = Some(budget);
    meta.warnings.extend(guarantee_warning(kind, instance.n(), k));
    run_one_round(kind, instance, k, budget, 1, streams, meta)
}

/// `epsilon`-PAC variant: subsets of `min(n, ceil(12n/sqrt(k)))` arms and a
/// sample-count threshold on the vote board.
pub fn one_round_pac(
    instance: &BanditInstance,
    k: usize,
    budget: u64,
    epsilon: f64,
    streams: TrialStreams,
) -> Result<RunOutcome> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::arg(format!(
            "one-round-pac needs epsilon in (0, 1), got {epsilon}; use one-round-best for epsilon = 0"
        )));
    }
    let kind = OneRoundKind::Pac { epsilon };
    let mut meta = RunMetadata::new(Algorithm::OneRoundPac, k, epsilon);
    meta.budget = Some(budget);
    meta.warnings.extend(guarantee_warning(kind, instance.n(), k));
    run_one_round(kind, instance, k, budget, 1, streams, meta)
}

/// Runs `ceil(constant * ln(1/delta))` copies of a one-round strategy, each
/// with `floor(total_budget / copies)` pulls per player, sends every copy's
/// vote in one combined broadcast, and returns the plurality of the copies'
/// outputs.
pub fn amplify(
    base: OneRoundKind,
    delta: f64,
    constant: f64,
    instance: &BanditInstance,
    k: usize,
    total_budget: u64,
    streams: TrialStreams,
) -> Result<RunOutcome> {
    let copies = amplification_copies(delta, constant)?;
    let copy_budget = total_budget / u64::from(copies);
    let mut meta = RunMetadata::new(Algorithm::Amplified, k, base.epsilon());
    meta.budget = Some(total_budget);
    meta.delta = Some(delta);
    meta.copies = Some(copies);
    meta.warnings.extend(guarantee_warning(base, instance.n(), k));
    run_one_round(base, instance, k, copy_budget, copies, streams, meta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_good(n: usize) -> BanditInstance {
        let mut means = vec![0.0; n];
        means[0] = 1.0;
        BanditInstance::deterministic(means).unwrap()
    }

    #[test]
    fn subset_sizes() {
        assert_eq!(subset_size(120, 144, 6.0), 60);
        assert_eq!(subset_size(100, 576, 12.0), 50);
        assert_eq!(subset_size(20, 36, 6.0), 20);
        assert_eq!(subset_size(50, 4, 6.0), 50);
        assert_eq!(subset_size(10, 1_000_000, 6.0), 1);
    }

    #[test]
    fn copies_formula() {
        assert_eq!(amplification_copies(1.0 / 3.0 - 1e-9, 18.0).unwrap(), 20);
        assert_eq!(amplification_copies(0.05, 18.0).unwrap(), 54);
        assert!(amplification_copies(1.0 / 3.0, 18.0).is_err());
        assert!(amplification_copies(0.0, 18.0).is_err());
    }

    #[test]
    fn deterministic_best_arm_always_found() {
        let inst = one_good(20);
        for trial in 0..20 {
            let out = one_round_best_arm(&inst, 36, 200, TrialStreams::new(1, trial)).unwrap();
            assert_eq!(out.chosen, 0);
            assert_eq!(out.comm.rounds, 1);
            assert_eq!(out.comm.values_per_player_max, 2);
            assert_eq!(out.comm.values_sent, 72);
            assert_eq!(out.boards.len(), 1);
            assert_eq!(out.boards[0].votes(0), 36);
            assert!(out.metadata.warnings.is_empty());
            assert!(out.invariant_violations().is_empty());
            assert!(out.per_player_choices.iter().all(|&c| c == 0));
        }
    }

    #[test]
    fn odd_budget_split() {
        let inst = one_good(5);
        let out = one_round_best_arm(&inst, 1, 7, TrialStreams::new(2, 0)).unwrap();
        // explore cap 3 truncates the first sweep after arms 0, 1, 2; exploit 4
        let p = &out.ledger.players[0];
        assert_eq!(p.total, 7);
        assert_eq!(p.arms[0].pulls, 5);
        assert_eq!(out.chosen, 0);
        assert!(!out.metadata.warnings.is_empty());
    }

    #[test]
    fn deterministic_pac() {
        let inst = one_good(10);
        for trial in 0..10 {
            let out = one_round_pac(&inst, 16, 400, 0.1, TrialStreams::new(3, trial)).unwrap();
            assert_eq!(out.chosen, 0);
            assert_eq!(out.comm.rounds, 1);
        }
        assert!(one_round_pac(&inst, 16, 400, 0.0, TrialStreams::new(3, 0)).is_err());
    }

    #[test]
    fn amplified_sends_two_values_per_copy() {
        let inst = one_good(10);
        let out = amplify(
            OneRoundKind::BestArm,
            0.05,
            18.0,
            &inst,
            9,
            54 * 40,
            TrialStreams::new(4, 0),
        )
        .unwrap();
        assert_eq!(out.chosen, 0);
        assert_eq!(out.comm.rounds, 1);
        assert_eq!(out.comm.values_per_player_max, 108);
        assert_eq!(out.boards.len(), 54);
        assert!(out.ledger.players.iter().all(|p| p.total <= 54 * 40));
        assert!(out.invariant_violations().is_empty());
    }

    #[test]
    fn budget_below_two_is_rejected() {
        assert!(one_round_best_arm(&one_good(4), 4, 1, TrialStreams::new(0, 0)).is_err());
    }

    #[test]
    fn first_broadcast_ignores_other_players_seeds() {
        // player 0 keeps stream (seed 5, trial 0, player 0) in both runs;
        // the others are fed streams from another trial
        let inst = BanditInstance::bernoulli(vec![0.7, 0.5, 0.4, 0.6, 0.2, 0.1]).unwrap();
        let build = |other_trial: u64| -> Vec<Seat<OneRoundPlayer>> {
            (0..4)
                .map(|j| Seat {
                    player: OneRoundPlayer {
                        kind: OneRoundKind::BestArm,
                        n: 6,
                        k: 4,
                        subset: 6,
                        copy_budget: 60,
                        copies: 1,
                        answer: 0,
                        boards: Vec::new(),
                        fallbacks: 0,
                    },
                    rng: if j == 0 {
                        TrialStreams::new(5, 0).player(0)
                    } else {
                        TrialStreams::new(5, other_trial).player(j)
                    },
                    budget: Some(60),
                })
                .collect()
        };
        let a = run_synchronous(&inst, build(0), 1).unwrap();
        let b = run_synchronous(&inst, build(99), 1).unwrap();
        assert_eq!(a.transcript[0], b.transcript[0]);
        assert_eq!(a.ledger.players[0], b.ledger.players[0]);
    }
}
