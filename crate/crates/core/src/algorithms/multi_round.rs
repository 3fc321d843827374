//! Multi-round elimination.
//!
//! In round `r` every player samples each surviving arm until it holds
//! `t_r = ceil((2 / (k eps_r^2)) ln(4 n r^2 / delta))` samples of it, then
//! broadcasts its cumulative mean for every surviving arm. All players
//! average the `k` reports per arm and drop every arm whose average is more
//! than `eps_r` below the best average.

use super::{Algorithm, RunMetadata, RunOutcome, TrialStreams};
use crate::error::{Error, Result};
use crate::explore::ArmSampler;
use crate::instance::BanditInstance;
use crate::protocol::{run_synchronous, Broadcast, Entry, Player, PlayerEnv, Seat, Step};

/// Hard stop for elimination runs with `epsilon == 0`.
pub const MAX_ELIMINATION_ROUNDS: u32 = 40;

/// How the elimination threshold shrinks and when the run stops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EliminationSchedule {
    /// `eps_r = 2^-r`; stop once `eps_r <= epsilon / 2`.
    Halving { epsilon: f64 },
    /// `eps_r = epsilon^(r/R)`; stop after round `R`.
    Geometric { epsilon: f64, rounds: u32 },
}

impl EliminationSchedule {
    pub fn threshold(&self, r: u32) -> f64 {
        match *self {
            EliminationSchedule::Halving { .. } => 0.5f64.powi(r as i32),
            EliminationSchedule::Geometric { epsilon, rounds } => epsilon.powf(f64::from(r) / f64::from(rounds)),
        }
    }

    /// True if round `r` is the last one regardless of survivors.
    pub fn is_last(&self, r: u32) -> bool {
        if r >= MAX_ELIMINATION_ROUNDS {
            return true;
        }
        match *self {
            EliminationSchedule::Halving { epsilon } => self.threshold(r) <= epsilon / 2.0,
            EliminationSchedule::Geometric { rounds, .. } => r >= rounds,
        }
    }

    /// Cumulative samples per surviving arm per player after round `r`.
    pub fn target(&self, r: u32, k: usize, n: usize, delta: f64) -> u64 {
        let eps_r = self.threshold(r);
        let r = f64::from(r);
        let t = (2.0 / (k as f64 * eps_r * eps_r)) * (4.0 * n as f64 * r * r / delta).ln();
        t.ceil() as u64
    }
}

/// `1 + ceil(log2(max(2, 1/epsilon)))`, the most rounds a halving run with
/// `epsilon > 0` can take.
pub fn round_bound(epsilon: f64) -> u64 {
    1 + (1.0 / epsilon).max(2.0).log2().ceil() as u64
}

/// Per-round sample counts `t_r - t_{r-1}` from cumulative targets.
pub fn round_pulls(schedule: &[u64]) -> impl Iterator<Item = u64> + '_ {
    schedule.iter().scan(0u64, |prev, &t| {
        let d = t.saturating_sub(*prev);
        *prev = t.max(*prev);
        Some(d)
    })
}

struct EliminationPlayer {
    schedule: EliminationSchedule,
    k: usize,
    n: usize,
    delta: f64,
    surviving: Vec<usize>,
    pulls: Vec<u64>,
    sums: Vec<f64>,
    targets: Vec<u64>,
    history: Vec<Vec<usize>>,
    finished: bool,
}

impl Player for EliminationPlayer {
    fn local_phase(&mut self, round: u64, env: &mut PlayerEnv<'_>) -> Result<Step> {
        if self.finished {
            return Ok(Step::Halt);
        }
        let r = round as u32;
        let target = self.schedule.target(r, self.k, self.n, self.delta);
        let prev = self.targets.last().copied().unwrap_or(0);
        let extra = target.saturating_sub(prev);
        self.targets.push(target.max(prev));
        let mut payload = Vec::with_capacity(self.surviving.len());
        for &arm in &self.surviving {
            for _ in 0..extra {
                self.sums[arm] += env.pull(arm)?;
            }
            self.pulls[arm] += extra;
            payload.push(Entry::pair(arm, self.sums[arm] / self.pulls[arm] as f64));
        }
        Ok(Step::Broadcast(payload))
    }

    fn receive(&mut self, round: u64, broadcasts: &[Broadcast]) {
        let r = round as u32;
        let mut totals = vec![0.0; self.n];
        for entry in broadcasts.iter().flat_map(|b| &b.payload) {
            totals[entry.arm] += entry.value.unwrap_or(0.0);
        }
        let senders = broadcasts.len() as f64;
        let pooled = |arm: usize| totals[arm] / senders;
        let leader = self
            .surviving
            .iter()
            .map(|&a| pooled(a))
            .fold(f64::NEG_INFINITY, f64::max);
        let cutoff = leader - self.schedule.threshold(r);
        self.surviving.retain(|&a| pooled(a) >= cutoff);
        self.history.push(self.surviving.clone());
        if self.surviving.len() == 1 || self.schedule.is_last(r) {
            self.finished = true;
        }
    }

    fn answer(&self) -> usize {
        self.surviving[0]
    }
}

fn run_elimination(
    schedule: EliminationSchedule,
    instance: &BanditInstance,
    k: usize,
    delta: f64,
    streams: TrialStreams,
    metadata: RunMetadata,
) -> Result<RunOutcome> {
    if k == 0 {
        return Err(Error::arg("k must be at least 1"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::arg(format!("delta must lie in (0, 1), got {delta}")));
    }
    let n = instance.n();
    let all: Vec<usize> = (0..n).collect();
    let seats = (0..k)
        .map(|j| Seat {
            player: EliminationPlayer {
                schedule,
                k,
                n,
                delta,
                surviving: all.clone(),
                pulls: vec![0; n],
                sums: vec![0.0; n],
                targets: Vec::new(),
                history: Vec::new(),
                finished: false,
            },
            rng: streams.player(j),
            budget: None,
        })
        .collect();
    let max_rounds = match schedule {
        EliminationSchedule::Halving { .. } => MAX_ELIMINATION_ROUNDS,
        EliminationSchedule::Geometric { rounds, .. } => rounds.min(MAX_ELIMINATION_ROUNDS),
    };
    let mut run = run_synchronous(instance, seats, u64::from(max_rounds))?;
    let lead = run.players.swap_remove(0);
    let mut survivors = vec![all];
    survivors.extend(lead.history);
    Ok(RunOutcome {
        chosen: run.answers[0],
        per_player_choices: run.answers,
        comm: run.comm,
        ledger: run.ledger,
        metadata,
        boards: Vec::new(),
        survivors,
        schedule: lead.targets,
        sweeps: None,
        transcript: run.transcript,
    })
}

/// Halving elimination: `eps_r = 2^-r`, stopping once `eps_r <= epsilon/2` or
/// a single arm survives. Returns the lowest-index survivor.
pub fn multi_round(
    instance: &BanditInstance,
    k: usize,
    epsilon: f64,
    delta: f64,
    streams: TrialStreams,
) -> Result<RunOutcome> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::arg(format!("epsilon must be finite and >= 0, got {epsilon}")));
    }
    instance.validate_for(epsilon)?;
    let mut meta = RunMetadata::new(Algorithm::MultiRound, k, epsilon);
    meta.delta = Some(delta);
    run_elimination(
        EliminationSchedule::Halving { epsilon },
        instance,
        k,
        delta,
        streams,
        meta,
    )
}

/// Elimination with `eps_r = epsilon^(r/R)`, finishing within `R` rounds.
pub fn r_round(
    instance: &BanditInstance,
    k: usize,
    epsilon: f64,
    delta: f64,
    rounds: u32,
    streams: TrialStreams,
) -> Result<RunOutcome> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::arg(format!("r-round needs epsilon in (0, 1), got {epsilon}")));
    }
    if rounds == 0 {
        return Err(Error::arg("r-round needs R >= 1"));
    }
    let mut meta = RunMetadata::new(Algorithm::RRound, k, epsilon);
    meta.delta = Some(delta);
    meta.rounds = Some(rounds);
    run_elimination(
        EliminationSchedule::Geometric { epsilon, rounds },
        instance,
        k,
        delta,
        streams,
        meta,
    )
}
