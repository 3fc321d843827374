//! Reference strategies: isolated players, a plain majority vote, and a
//! pooled serial run that stands in for unlimited communication.

use super::vote::plurality;
use super::{Algorithm, RunMetadata, RunOutcome, TrialStreams};
use crate::error::{Error, Result};
use crate::explore::{successive_elimination_with, ArmSampler, SerialBudget};
use crate::instance::BanditInstance;
use crate::protocol::{
    run_synchronous, Broadcast, CommStats, Entry, Player, PlayerEnv, PlayerLedger, PullLedger, Seat, Step,
};
use crate::rng::RngStream;

struct SoloPlayer {
    epsilon: f64,
    budget: u64,
    vote: bool,
    local: usize,
    answer: usize,
}

impl Player for SoloPlayer {
    fn local_phase(&mut self, round: u64, env: &mut PlayerEnv<'_>) -> Result<Step> {
        if round > 1 {
            return Ok(Step::Halt);
        }
        let arms: Vec<usize> = (0..env.n()).collect();
        let out = successive_elimination_with(env, &arms, self.epsilon, SerialBudget::new(self.budget))?;
        self.local = out.chosen;
        self.answer = out.chosen;
        Ok(if self.vote {
            Step::Broadcast(vec![Entry::vote(out.chosen)])
        } else {
            Step::Halt
        })
    }

    fn receive(&mut self, _round: u64, broadcasts: &[Broadcast]) {
        let votes = broadcasts.iter().flat_map(|b| &b.payload).map(|e| e.arm);
        self.answer = plurality(votes).unwrap_or(self.local);
    }

    fn answer(&self) -> usize {
        self.answer
    }
}

fn run_solo(
    algorithm: Algorithm,
    instance: &BanditInstance,
    k: usize,
    budget: u64,
    epsilon: f64,
    streams: TrialStreams,
) -> Result<RunOutcome> {
    if k == 0 {
        return Err(Error::arg("k must be at least 1"));
    }
    let vote = algorithm == Algorithm::MajorityVote;
    let seats = (0..k)
        .map(|j| Seat {
            player: SoloPlayer {
                epsilon,
                budget,
                vote,
                local: 0,
                answer: 0,
            },
            rng: streams.player(j),
            budget: Some(budget),
        })
        .collect();
    let run = run_synchronous(instance, seats, 1)?;
    let mut meta = RunMetadata::new(algorithm, k, epsilon);
    meta.budget = Some(budget);
    Ok(RunOutcome {
        chosen: run.answers[0],
        per_player_choices: run.answers,
        comm: run.comm,
        ledger: run.ledger,
        metadata: meta,
        boards: Vec::new(),
        survivors: Vec::new(),
        schedule: Vec::new(),
        sweeps: None,
        transcript: run.transcript,
    })
}

/// Every player runs Successive Elimination on all arms with budget `T`
/// and never communicates; the collective answer is player 0's.
pub fn baseline_no_comm(
    instance: &BanditInstance,
    k: usize,
    budget: u64,
    epsilon: f64,
    streams: TrialStreams,
) -> Result<RunOutcome> {
    run_solo(Algorithm::NoComm, instance, k, budget, epsilon, streams)
}

/// Isolated exploration followed by one broadcast of each player's arm; the
/// plurality wins.
pub fn baseline_majority_vote(
    instance: &BanditInstance,
    k: usize,
    budget: u64,
    epsilon: f64,
    streams: TrialStreams,
) -> Result<RunOutcome> {
    run_solo(Algorithm::MajorityVote, instance, k, budget, epsilon, streams)
}

/// Pulls of a single serial run spread round-robin over `k` ledgers.
struct PooledSampler<'a> {
    instance: &'a BanditInstance,
    rng: RngStream,
    ledgers: Vec<PlayerLedger>,
    next: usize,
}

impl ArmSampler for PooledSampler<'_> {
    fn pull(&mut self, arm: usize) -> Result<f64> {
        let reward = self.instance.draw_reward(arm, &mut self.rng)?;
        let player = self.next;
        self.ledgers[player].record(player, arm, reward)?;
        self.next = (self.next + 1) % self.ledgers.len();
        Ok(reward)
    }
}

/// One serial Successive Elimination with the pooled budget `k * T`, as if
/// every sample were shared instantly.
///
/// Rounds are reported as the number of sweeps, and every pooled reward
/// counts as one transmitted value.
pub fn baseline_full_comm(
    instance: &BanditInstance,
    k: usize,
    budget: u64,
    epsilon: f64,
    streams: TrialStreams,
) -> Result<RunOutcome> {
    if k == 0 {
        return Err(Error::arg("k must be at least 1"));
    }
    let mut sampler = PooledSampler {
        instance,
        rng: streams.player(0),
        ledgers: (0..k).map(|_| PlayerLedger::new(instance.n(), Some(budget))).collect(),
        next: 0,
    };
    let arms: Vec<usize> = (0..instance.n()).collect();
    let out = successive_elimination_with(&mut sampler, &arms, epsilon, SerialBudget::new(budget * k as u64))?;
    let ledger = PullLedger {
        players: sampler.ledgers,
    };
    let comm = CommStats {
        rounds: out.sweeps,
        values_sent: ledger.grand_total(),
        values_per_player_max: ledger.max_per_player(),
    };
    let mut meta = RunMetadata::new(Algorithm::FullComm, k, epsilon);
    meta.budget = Some(budget);
    Ok(RunOutcome {
        chosen: out.chosen,
        per_player_choices: vec![out.chosen; k],
        comm,
        ledger,
        metadata: meta,
        boards: Vec::new(),
        survivors: Vec::new(),
        schedule: Vec::new(),
        sweeps: Some(out.sweeps),
        transcript: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explore::successive_elimination;

    #[test]
    fn no_comm_is_silent() {
        let inst = BanditInstance::deterministic(vec![1.0, 0.0]).unwrap();
        let out = baseline_no_comm(&inst, 5, 100, 0.0, TrialStreams::new(0, 0)).unwrap();
        assert_eq!(out.comm, CommStats::default());
        assert_eq!(out.per_player_choices, vec![0; 5]);
        assert!(out.invariant_violations().is_empty());
    }

    #[test]
    fn no_comm_matches_a_solo_run() {
        let inst = BanditInstance::bernoulli(vec![0.6, 0.5, 0.55]).unwrap();
        for trial in 0..10 {
            let streams = TrialStreams::new(11, trial);
            let out = baseline_no_comm(&inst, 3, 300, 0.0, streams).unwrap();
            let solo =
                successive_elimination(&inst, &[0, 1, 2], 0.0, SerialBudget::new(300), &mut streams.player(0)).unwrap();
            assert_eq!(out.chosen, solo.chosen);
            assert_eq!(out.ledger.players[0].total, solo.pulls_used);
        }
    }

    #[test]
    fn majority_vote_counts_one_value_each() {
        let inst = BanditInstance::deterministic(vec![0.2, 1.0, 0.0]).unwrap();
        let out = baseline_majority_vote(&inst, 4, 1000, 0.0, TrialStreams::new(0, 0)).unwrap();
        assert_eq!(out.chosen, 1);
        assert_eq!(out.comm.rounds, 1);
        assert_eq!(out.comm.values_sent, 4);
        assert_eq!(out.comm.values_per_player_max, 1);
    }

    #[test]
    fn pooled_with_one_player_is_serial() {
        let inst = BanditInstance::bernoulli(vec![0.6, 0.5, 0.55, 0.1]).unwrap();
        for trial in 0..10 {
            let streams = TrialStreams::new(12, trial);
            let out = baseline_full_comm(&inst, 1, 500, 0.0, streams).unwrap();
            let solo = successive_elimination(
                &inst,
                &[0, 1, 2, 3],
                0.0,
                SerialBudget::new(500),
                &mut streams.player(0),
            )
            .unwrap();
            assert_eq!(out.chosen, solo.chosen);
            assert_eq!(out.sweeps, Some(solo.sweeps));
            assert_eq!(out.ledger.grand_total(), solo.pulls_used);
        }
    }

    #[test]
    fn pooled_pulls_respect_budgets() {
        let inst = BanditInstance::bernoulli(vec![0.6, 0.5, 0.55, 0.1]).unwrap();
        let out = baseline_full_comm(&inst, 7, 50, 0.0, TrialStreams::new(1, 0)).unwrap();
        assert!(out.ledger.grand_total() <= 350);
        assert!(out.ledger.max_per_player() <= 50);
        assert!(out.invariant_violations().is_empty());
    }
}
