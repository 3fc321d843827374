use std::collections::BTreeMap;

/// Votes collected in one round of a one-round strategy.
///
/// For every arm: the players who voted for it (`k_i`), their exploit-phase
/// means, and the total number of exploit samples behind it (`t_i`).
#[derive(Debug, Clone, PartialEq)]
pub struct VoteBoard {
    n: usize,
    exploit_pulls: u64,
    means_by_arm: BTreeMap<usize, Vec<f64>>,
}

/// Arm picked from a board, and whether the empty-set fallback was used.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Selection {
    pub arm: usize,
    pub fallback: bool,
}

impl VoteBoard {
    pub fn new(n: usize, exploit_pulls: u64) -> Self {
        Self {
            n,
            exploit_pulls,
            means_by_arm: BTreeMap::new(),
        }
    }

    pub fn from_votes(n: usize, exploit_pulls: u64, votes: impl IntoIterator<Item = (usize, f64)>) -> Self {
        let mut board = Self::new(n, exploit_pulls);
        for (arm, q) in votes {
            board.add(arm, q);
        }
        board
    }

    pub fn add(&mut self, arm: usize, exploit_mean: f64) {
        self.means_by_arm.entry(arm).or_default().push(exploit_mean);
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn total_votes(&self) -> usize {
        self.means_by_arm.values().map(Vec::len).sum()
    }

    pub fn votes(&self, arm: usize) -> usize {
        self.means_by_arm.get(&arm).map_or(0, Vec::len)
    }

    pub fn voter_means(&self, arm: usize) -> &[f64] {
        self.means_by_arm.get(&arm).map_or(&[], Vec::as_slice)
    }

    /// Unweighted mean of the voters' exploit means.
    pub fn pooled_mean(&self, arm: usize) -> Option<f64> {
        let qs = self.means_by_arm.get(&arm)?;
        Some(qs.iter().sum::<f64>() / qs.len() as f64)
    }

    pub fn exploit_samples(&self, arm: usize) -> u64 {
        self.votes(arm) as u64 * self.exploit_pulls
    }

    /// Among arms with more than `sqrt(k)` votes, the highest pooled mean;
    /// otherwise the most-voted arm.
    pub fn select_best_arm(&self, k: usize) -> Selection {
        let threshold = (k as f64).sqrt();
        self.select(|arm| self.votes(arm) as f64 > threshold, |arm| self.votes(arm) as u64)
    }

    /// Among arms with at least `ln(12 n) / eps^2` exploit samples, the
    /// highest pooled mean; otherwise the most-sampled arm.
    pub fn select_eps_best(&self, epsilon: f64) -> Selection {
        let threshold = pac_sample_threshold(self.n, epsilon);
        self.select(
            |arm| self.exploit_samples(arm) as f64 >= threshold,
            |arm| self.exploit_samples(arm),
        )
    }

    fn select(&self, admitted: impl Fn(usize) -> bool, fallback_score: impl Fn(usize) -> u64) -> Selection {
        let mut best: Option<(usize, f64)> = None;
        for &arm in self.means_by_arm.keys() {
            if !admitted(arm) {
                continue;
            }
            let p = self.pooled_mean(arm).unwrap_or(f64::NEG_INFINITY);
            if best.is_none_or(|(_, b)| p > b) {
                best = Some((arm, p));
            }
        }
        match best {
            Some((arm, _)) => Selection { arm, fallback: false },
            None => {
                let mut arm = 0;
                let mut top = 0;
                for &a in self.means_by_arm.keys() {
                    let s = fallback_score(a);
                    if s > top {
                        top = s;
                        arm = a;
                    }
                }
                Selection { arm, fallback: true }
            }
        }
    }
}

/// `ln(12 n) / eps^2`, the exploit-sample count an arm needs to be trusted.
pub fn pac_sample_threshold(n: usize, epsilon: f64) -> f64 {
    (12.0 * n as f64).ln() / (epsilon * epsilon)
}

/// Most frequent arm; ties go to the lowest index. `None` on empty input.
pub fn plurality(choices: impl IntoIterator<Item = usize>) -> Option<usize> {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for c in choices {
        *counts.entry(c).or_default() += 1;
    }
    let mut best: Option<(usize, usize)> = None;
    for (arm, count) in counts {
        if best.is_none_or(|(_, c)| count > c) {
            best = Some((arm, count));
        }
    }
    best.map(|(arm, _)| arm)
}
