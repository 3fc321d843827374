//! Serial exploration with a hard pull cap: Successive Elimination.
//!
//! The surviving arms are pulled once per sweep in ascending index order.
//! After sweep `t` every arm whose empirical mean is more than `2 * alpha_t`
//! below the empirical leader is dropped, where
//!
//! ```text
//! alpha_t = sqrt( ln(8 * |A| * t^2 / delta_A) / (2 t) ),   delta_A = 1/3
//! ```
//!
//! The run stops on its own once a single arm survives or, for `epsilon > 0`,
//! once `alpha_t < epsilon / 2`. Reaching the cap first halts the run and
//! reports the current empirical leader with `graceful == false`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::BanditInstance;
use crate::rng::RngStream;

/// Failure probability the explorer is tuned for.
pub const EXPLORER_DELTA: f64 = 1.0 / 3.0;

/// Anything that can produce a reward for an arm.
pub trait ArmSampler {
    fn pull(&mut self, arm: usize) -> Result<f64>;
}

/// Samples an instance directly from a stream, with no ledger.
pub struct DirectSampler<'a> {
    instance: &'a BanditInstance,
    rng: &'a mut RngStream,
}

impl<'a> DirectSampler<'a> {
    pub fn new(instance: &'a BanditInstance, rng: &'a mut RngStream) -> Self {
        Self { instance, rng }
    }
}

impl ArmSampler for DirectSampler<'_> {
    fn pull(&mut self, arm: usize) -> Result<f64> {
        self.instance.draw_reward(arm, self.rng)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SerialBudget {
    pub cap: u64,
    /// Guarantee constant of the explorer; only used for reporting.
    pub c_a: f64,
}

impl SerialBudget {
    pub fn new(cap: u64) -> Self {
        Self { cap, c_a: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExploreOutcome {
    pub chosen: usize,
    /// Stopped by its own rule rather than by the cap.
    pub graceful: bool,
    pub pulls_used: u64,
    pub per_arm_pulls: BTreeMap<usize, u64>,
    /// Sweeps started, including a truncated final one.
    pub sweeps: u64,
}

/// Confidence radius after `t` pulls of each of `m` arms.
pub fn elimination_radius(m: usize, t: u64) -> f64 {
    let t = t as f64;
    ((8.0 * m as f64 * t * t / EXPLORER_DELTA).ln() / (2.0 * t)).sqrt()
}

#[derive(Clone, Copy, Default)]
struct Tally {
    pulls: u64,
    sum: f64,
}

impl Tally {
    fn mean(&self) -> Option<f64> {
        (self.pulls > 0).then(|| self.sum / self.pulls as f64)
    }
}

/// Successive Elimination against the instance, drawing from `rng`.
pub fn successive_elimination(
    instance: &BanditInstance,
    arm_subset: &[usize],
    epsilon: f64,
    budget: SerialBudget,
    rng: &mut RngStream,
) -> Result<ExploreOutcome> {
    if let Some(&bad) = arm_subset.iter().find(|&&a| a >= instance.n()) {
        return Err(Error::arg(format!("arm {bad} out of range for n = {}", instance.n())));
    }
    successive_elimination_with(&mut DirectSampler::new(instance, rng), arm_subset, epsilon, budget)
}

/// Successive Elimination over any sampler.
pub fn successive_elimination_with<S: ArmSampler + ?Sized>(
    sampler: &mut S,
    arm_subset: &[usize],
    epsilon: f64,
    budget: SerialBudget,
) -> Result<ExploreOutcome> {
    if arm_subset.is_empty() {
        return Err(Error::arg("arm subset is empty"));
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::arg(format!("epsilon must be finite and >= 0, got {epsilon}")));
    }

    let mut surviving: Vec<usize> = arm_subset.to_vec();
    surviving.sort_unstable();
    surviving.dedup();
    let m = surviving.len();
    let mut tallies: BTreeMap<usize, Tally> = surviving.iter().map(|&a| (a, Tally::default())).collect();

    let finish = |tallies: &BTreeMap<usize, Tally>, surviving: &[usize], graceful: bool, sweeps: u64| {
        let per_arm_pulls: BTreeMap<usize, u64> = tallies.iter().map(|(&a, t)| (a, t.pulls)).collect();
        ExploreOutcome {
            chosen: leader(tallies, surviving),
            graceful,
            pulls_used: per_arm_pulls.values().sum(),
            per_arm_pulls,
            sweeps,
        }
    };

    if m == 1 {
        return Ok(finish(&tallies, &surviving, true, 0));
    }

    let mut used = 0u64;
    let mut t = 0u64;
    loop {
        if used >= budget.cap {
            return Ok(finish(&tallies, &surviving, false, t));
        }
        t += 1;
        for &arm in &surviving {
            if used >= budget.cap {
                return Ok(finish(&tallies, &surviving, false, t));
            }
            let reward = sampler.pull(arm)?;
            let tally = tallies.get_mut(&arm).expect("surviving arm has a tally");
            tally.pulls += 1;
            tally.sum += reward;
            used += 1;
        }

        let alpha = elimination_radius(m, t);
        let best = surviving
            .iter()
            .filter_map(|a| tallies[a].mean())
            .fold(f64::NEG_INFINITY, f64::max);
        surviving.retain(|a| best - tallies[a].mean().unwrap_or(best) <= 2.0 * alpha);

        if surviving.len() == 1 || (epsilon > 0.0 && alpha < epsilon / 2.0) {
            return Ok(finish(&tallies, &surviving, true, t));
        }
    }
}

/// Surviving arm with the highest empirical mean; ties and the all-unpulled
/// case resolve to the lowest index.
fn leader(tallies: &BTreeMap<usize, Tally>, surviving: &[usize]) -> usize {
    let mut best: Option<(usize, f64)> = None;
    for &arm in surviving {
        if let Some(mean) = tallies[&arm].mean() {
            if best.is_none_or(|(_, b)| mean > b) {
                best = Some((arm, mean));
            }
        }
    }
    best.map_or(surviving[0], |(arm, _)| arm)
}
