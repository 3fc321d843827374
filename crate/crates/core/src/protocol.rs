//! Round-based broadcast model.
//!
//! A run alternates local phases and barriers. In a local phase each player
//! pulls arms through its own [`PlayerEnv`], which exposes only that
//! player's stream and ledger. At a barrier every active player emits one
//! [`Broadcast`] and then every player receives all of them, its own
//! included. Delivery is lockstep and lossless.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explore::ArmSampler;
use crate::instance::BanditInstance;
use crate::rng::RngStream;

/// One scalar report about an arm.
///
/// `group` tags which of several independent sub-runs the entry belongs to;
/// it is positional and is not counted as a transmitted value. An entry
/// costs one value for the arm id plus one if `value` is present.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    #[serde(default, skip_serializing_if = "is_zero")]
    pub group: u32,
    pub arm: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
}

fn is_zero(g: &u32) -> bool {
    *g == 0
}

impl Entry {
    pub fn pair(arm: usize, value: f64) -> Self {
        Self {
            group: 0,
            arm,
            value: Some(value),
        }
    }

    pub fn vote(arm: usize) -> Self {
        Self {
            group: 0,
            arm,
            value: None,
        }
    }

    pub fn in_group(self, group: u32) -> Self {
        Self { group, ..self }
    }

    pub fn cost(&self) -> u64 {
        1 + u64::from(self.value.is_some())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Broadcast {
    pub player: usize,
    pub round: u64,
    pub payload: Vec<Entry>,
}

impl Broadcast {
    pub fn values(&self) -> u64 {
        self.payload.iter().map(Entry::cost).sum()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommStats {
    /// Barriers executed.
    pub rounds: u64,
    pub values_sent: u64,
    pub values_per_player_max: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ArmTally {
    pub pulls: u64,
    pub reward_sum: f64,
}

/// Pull accounting for one player.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerLedger {
    pub budget: Option<u64>,
    pub arms: Vec<ArmTally>,
    pub total: u64,
}

impl PlayerLedger {
    pub fn new(n: usize, budget: Option<u64>) -> Self {
        Self {
            budget,
            arms: vec![ArmTally::default(); n],
            total: 0,
        }
    }

    pub fn remaining(&self) -> Option<u64> {
        self.budget.map(|b| b.saturating_sub(self.total))
    }

    pub(crate) fn record(&mut self, player: usize, arm: usize, reward: f64) -> Result<()> {
        if self.budget.is_some_and(|b| self.total >= b) {
            return Err(Error::ProtocolViolation {
                player,
                detail: format!("pull beyond budget of {}", self.budget.unwrap_or(0)),
            });
        }
        let tally = &mut self.arms[arm];
        tally.pulls += 1;
        tally.reward_sum += reward;
        self.total += 1;
        Ok(())
    }
}

/// Per-player pull accounting for a whole run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PullLedger {
    pub players: Vec<PlayerLedger>,
}

impl PullLedger {
    pub fn totals(&self) -> Vec<u64> {
        self.players.iter().map(|p| p.total).collect()
    }

    pub fn max_per_player(&self) -> u64 {
        self.players.iter().map(|p| p.total).max().unwrap_or(0)
    }

    pub fn grand_total(&self) -> u64 {
        self.players.iter().map(|p| p.total).sum()
    }

    /// Budget and bookkeeping violations, one message each.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (j, p) in self.players.iter().enumerate() {
            let sum: u64 = p.arms.iter().map(|a| a.pulls).sum();
            if sum != p.total {
                out.push(format!("player {j}: per-arm pulls {sum} != total {}", p.total));
            }
            if let Some(b) = p.budget {
                if p.total > b {
                    out.push(format!("player {j}: {} pulls exceed budget {b}", p.total));
                }
            }
            if let Some((i, _)) = p
                .arms
                .iter()
                .enumerate()
                .find(|(_, a)| a.reward_sum > a.pulls as f64 + 1e-9 || a.reward_sum < 0.0)
            {
                out.push(format!("player {j}: reward sum of arm {i} outside [0, pulls]"));
            }
        }
        out
    }
}

/// A player's private view of the world during a local phase.
pub struct PlayerEnv<'a> {
    player: usize,
    instance: &'a BanditInstance,
    rng: &'a mut RngStream,
    ledger: &'a mut PlayerLedger,
}

impl<'a> PlayerEnv<'a> {
    pub fn new(
        player: usize,
        instance: &'a BanditInstance,
        rng: &'a mut RngStream,
        ledger: &'a mut PlayerLedger,
    ) -> Self {
        Self {
            player,
            instance,
            rng,
            ledger,
        }
    }

    pub fn player(&self) -> usize {
        self.player
    }

    pub fn n(&self) -> usize {
        self.instance.n()
    }

    /// The player's stream, for its own randomized choices.
    pub fn rng(&mut self) -> &mut RngStream {
        self.rng
    }

    pub fn ledger(&self) -> &PlayerLedger {
        self.ledger
    }
}

impl ArmSampler for PlayerEnv<'_> {
    fn pull(&mut self, arm: usize) -> Result<f64> {
        if self.ledger.remaining() == Some(0) {
            return Err(Error::ProtocolViolation {
                player: self.player,
                detail: format!("pull beyond budget of {}", self.ledger.budget.unwrap_or(0)),
            });
        }
        let reward = self.instance.draw_reward(arm, self.rng)?;
        self.ledger.record(self.player, arm, reward)?;
        Ok(reward)
    }
}

/// What a player does at the end of a local phase.
#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    Broadcast(Vec<Entry>),
    /// No message now or later.
    Halt,
}

pub trait Player {
    /// Local play for `round` (starting at 1).
    fn local_phase(&mut self, round: u64, env: &mut PlayerEnv<'_>) -> Result<Step>;

    /// Delivery of every broadcast made at the barrier closing `round`.
    fn receive(&mut self, round: u64, broadcasts: &[Broadcast]);

    fn answer(&self) -> usize;
}

/// A player together with its private stream and optional budget.
pub struct Seat<P> {
    pub player: P,
    pub rng: RngStream,
    pub budget: Option<u64>,
}

pub struct SyncRun<P> {
    pub answers: Vec<usize>,
    pub comm: CommStats,
    pub ledger: PullLedger,
    pub transcript: Vec<Broadcast>,
    pub players: Vec<P>,
}

/// Runs players in lockstep for at most `max_rounds` barriers.
///
/// The run ends early once a local phase produces no broadcast at all.
pub fn run_synchronous<P: Player>(
    instance: &BanditInstance,
    seats: Vec<Seat<P>>,
    max_rounds: u64,
) -> Result<SyncRun<P>> {
    if seats.is_empty() {
        return Err(Error::arg("need at least one player"));
    }
    let k = seats.len();
    let mut players = Vec::with_capacity(k);
    let mut rngs = Vec::with_capacity(k);
    let mut ledgers = Vec::with_capacity(k);
    for seat in seats {
        players.push(seat.player);
        rngs.push(seat.rng);
        ledgers.push(PlayerLedger::new(instance.n(), seat.budget));
    }

    let mut halted = vec![false; k];
    let mut comm = CommStats::default();
    let mut per_player_values = vec![0u64; k];
    let mut transcript = Vec::new();

    for round in 1..=max_rounds {
        let mut barrier = Vec::new();
        for j in 0..k {
            if halted[j] {
                continue;
            }
            let mut env = PlayerEnv::new(j, instance, &mut rngs[j], &mut ledgers[j]);
            match players[j].local_phase(round, &mut env)? {
                Step::Halt => halted[j] = true,
                Step::Broadcast(payload) => {
                    validate_payload(j, instance.n(), &payload)?;
                    barrier.push(Broadcast {
                        player: j,
                        round,
                        payload,
                    });
                }
            }
        }
        if barrier.is_empty() {
            break;
        }
        comm.rounds += 1;
        for b in &barrier {
            let v = b.values();
            comm.values_sent += v;
            per_player_values[b.player] += v;
        }
        for player in players.iter_mut() {
            player.receive(round, &barrier);
        }
        transcript.extend(barrier);
    }
    comm.values_per_player_max = per_player_values.into_iter().max().unwrap_or(0);

    Ok(SyncRun {
        answers: players.iter().map(Player::answer).collect(),
        comm,
        ledger: PullLedger { players: ledgers },
        transcript,
        players,
    })
}

fn validate_payload(player: usize, n: usize, payload: &[Entry]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for e in payload {
        if e.arm >= n {
            return Err(Error::ProtocolViolation {
                player,
                detail: format!("broadcast names arm {} but n = {n}", e.arm),
            });
        }
        if !seen.insert((e.group, e.arm)) {
            return Err(Error::ProtocolViolation {
                player,
                detail: format!("arm {} repeated in one broadcast", e.arm),
            });
        }
        if e.value.is_some_and(|v| !v.is_finite()) {
            return Err(Error::ProtocolViolation {
                player,
                detail: "non-finite value in broadcast".into(),
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Pulls `pulls` times on arm 0, then broadcasts its mean once.
    struct OneShot {
        pulls: u64,
        speak: bool,
        heard: usize,
    }

    impl Player for OneShot {
        fn local_phase(&mut self, round: u64, env: &mut PlayerEnv<'_>) -> Result<Step> {
            if round > 1 || !self.speak {
                return Ok(Step::Halt);
            }
            let mut sum = 0.0;
            for _ in 0..self.pulls {
                sum += env.pull(0)?;
            }
            Ok(Step::Broadcast(vec![Entry::pair(0, sum / self.pulls.max(1) as f64)]))
        }

        fn receive(&mut self, _round: u64, broadcasts: &[Broadcast]) {
            self.heard += broadcasts.len();
        }

        fn answer(&self) -> usize {
            0
        }
    }

    fn seats(k: usize, pulls: u64, speak: bool, budget: Option<u64>) -> Vec<Seat<OneShot>> {
        (0..k)
            .map(|j| Seat {
                player: OneShot { pulls, speak, heard: 0 },
                rng: RngStream::for_player(9, 0, j as u64),
                budget,
            })
            .collect()
    }

    fn inst() -> BanditInstance {
        BanditInstance::bernoulli(vec![0.5, 0.2]).unwrap()
    }

    #[test]
    fn silent_player_uses_no_rounds() {
        let run = run_synchronous(&inst(), seats(1, 3, false, None), 10).unwrap();
        assert_eq!(run.comm, CommStats::default());
        assert!(run.transcript.is_empty());
    }

    #[test]
    fn one_pair_each_from_five_players() {
        let run = run_synchronous(&inst(), seats(5, 4, true, Some(4)), 10).unwrap();
        assert_eq!(run.comm.rounds, 1);
        assert_eq!(run.comm.values_sent, 10);
        assert_eq!(run.comm.values_per_player_max, 2);
        assert!(run.players.iter().all(|p| p.heard == 5));
        assert_eq!(run.ledger.totals(), vec![4; 5]);
        assert!(run.ledger.violations().is_empty());
    }

    #[test]
    fn over_budget_pull_names_the_player() {
        let mut s = seats(3, 4, true, Some(4));
        s[2].budget = Some(3);
        match run_synchronous(&inst(), s, 10) {
            Err(Error::ProtocolViolation { player, .. }) => assert_eq!(player, 2),
            other => panic!("unexpected {:?}", other.map(|r| r.comm)),
        }
    }

    #[test]
    fn duplicate_arm_in_payload_is_rejected() {
        let bad = [Entry::pair(1, 0.5), Entry::vote(1)];
        assert!(validate_payload(0, 3, &bad).is_err());
        let ok = [Entry::pair(1, 0.5), Entry::vote(1).in_group(1)];
        assert!(validate_payload(0, 3, &ok).is_ok());
        assert!(validate_payload(0, 3, &[Entry::vote(3)]).is_err());
        assert!(validate_payload(0, 3, &[Entry::pair(0, f64::NAN)]).is_err());
    }

    #[test]
    fn no_players_is_an_error() {
        assert!(run_synchronous::<OneShot>(&inst(), Vec::new(), 1).is_err());
    }

    #[test]
    fn replay_is_bit_identical() {
        let a = run_synchronous(&inst(), seats(4, 50, true, None), 3).unwrap();
        let b = run_synchronous(&inst(), seats(4, 50, true, None), 3).unwrap();
        assert_eq!(a.transcript, b.transcript);
        assert_eq!(a.ledger, b.ledger);
    }
}
