//! Bandit instances, reward sampling, gaps and the hardness measure.
//!
//! Arms are indexed from 0 and are not assumed to be sorted by mean.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardKind {
    /// Reward 1 with probability `mean`, else 0.
    Bernoulli,
    /// Reward equals `mean` on every pull.
    Deterministic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmSpec {
    pub mean: f64,
}

/// A stochastic bandit with `n >= 2` arms whose means lie in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstanceFile", into = "InstanceFile")]
pub struct BanditInstance {
    arms: Vec<ArmSpec>,
    reward_kind: RewardKind,
}

/// On-disk form: `{"reward": "bernoulli", "means": [..]}`.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    reward: RewardKind,
    means: Vec<f64>,
}

impl TryFrom<InstanceFile> for BanditInstance {
    type Error = Error;

    fn try_from(file: InstanceFile) -> Result<Self> {
        BanditInstance::new(file.reward, file.means)
    }
}

impl From<BanditInstance> for InstanceFile {
    fn from(instance: BanditInstance) -> Self {
        InstanceFile {
            reward: instance.reward_kind,
            means: instance.means(),
        }
    }
}

impl BanditInstance {
    pub fn new(reward_kind: RewardKind, means: Vec<f64>) -> Result<Self> {
        if means.len() < 2 {
            return Err(Error::InvalidInstance(format!(
                "need at least 2 arms, got {}",
                means.len()
            )));
        }
        if let Some((i, m)) = means
            .iter()
            .enumerate()
            .find(|(_, m)| !(m.is_finite() && (0.0..=1.0).contains(*m)))
        {
            return Err(Error::InvalidInstance(format!(
                "mean of arm {i} is {m}, outside [0, 1]"
            )));
        }
        Ok(Self {
            arms: means.into_iter().map(|mean| ArmSpec { mean }).collect(),
            reward_kind,
        })
    }

    pub fn bernoulli(means: Vec<f64>) -> Result<Self> {
        Self::new(RewardKind::Bernoulli, means)
    }

    pub fn deterministic(means: Vec<f64>) -> Result<Self> {
        Self::new(RewardKind::Deterministic, means)
    }

    pub fn n(&self) -> usize {
        self.arms.len()
    }

    pub fn arms(&self) -> &[ArmSpec] {
        &self.arms
    }

    pub fn reward_kind(&self) -> RewardKind {
        self.reward_kind
    }

    pub fn means(&self) -> Vec<f64> {
        self.arms.iter().map(|a| a.mean).collect()
    }

    pub fn mean(&self, arm: usize) -> Result<f64> {
        self.arms
            .get(arm)
            .map(|a| a.mean)
            .ok_or_else(|| Error::arg(format!("arm {arm} out of range for n = {}", self.n())))
    }

    pub fn max_mean(&self) -> f64 {
        self.arms.iter().map(|a| a.mean).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Lowest index attaining the maximal mean.
    pub fn first_best_arm(&self) -> usize {
        let max = self.max_mean();
        self.arms.iter().position(|a| a.mean == max).unwrap_or(0)
    }

    /// The best arm if the maximal mean is attained exactly once.
    pub fn unique_best_arm(&self) -> Option<usize> {
        let max = self.max_mean();
        let mut it = self.arms.iter().enumerate().filter(|(_, a)| a.mean == max);
        match (it.next(), it.next()) {
            (Some((i, _)), None) => Some(i),
            _ => None,
        }
    }

    /// Validation for a run configured with accuracy `epsilon`; `epsilon == 0`
    /// requires a unique best arm.
    pub fn validate_for(&self, epsilon: f64) -> Result<()> {
        if epsilon == 0.0 && self.unique_best_arm().is_none() {
            return Err(Error::UndefinedHardness);
        }
        Ok(())
    }

    /// True if `arm` is within `epsilon` of the best mean.
    pub fn is_eps_best(&self, arm: usize, epsilon: f64) -> bool {
        self.arms.get(arm).is_some_and(|a| self.max_mean() - a.mean <= epsilon)
    }

    /// Draws one reward for `arm`, advancing `rng` by exactly one step.
    pub fn draw_reward(&self, arm: usize, rng: &mut RngStream) -> Result<f64> {
        let mean = self.mean(arm)?;
        let u = rng.next_unit();
        Ok(match self.reward_kind {
            RewardKind::Bernoulli => {
                if u < mean {
                    1.0
                } else {
                    0.0
                }
            }
            RewardKind::Deterministic => mean,
        })
    }

    pub fn gaps(&self) -> GapProfile {
        let max = self.max_mean();
        let deltas: Vec<f64> = self.arms.iter().map(|a| max - a.mean).collect();
        let min_gap = deltas
            .iter()
            .copied()
            .filter(|&d| d > 0.0)
            .fold(None, |acc: Option<f64>, d| Some(acc.map_or(d, |m| m.min(d))));
        GapProfile { deltas, min_gap }
    }

    /// `H_eps = sum over i != i* of 1 / max(gap_i, eps)^2`, excluding exactly
    /// one maximal-mean arm.
    pub fn hardness(&self, epsilon: f64) -> Result<f64> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::arg(format!("epsilon must be finite and >= 0, got {epsilon}")));
        }
        self.validate_for(epsilon)?;
        let best = self.first_best_arm();
        let gaps = self.gaps();
        Ok(gaps
            .truncated(epsilon)
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != best)
            .map(|(_, d)| 1.0 / (d * d))
            .sum())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("instance serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }
}

/// Suboptimality gaps measured against the maximal mean.
#[derive(Debug, Clone, PartialEq)]
pub struct GapProfile {
    pub deltas: Vec<f64>,
    /// Smallest strictly positive gap; `None` when all means are equal.
    pub min_gap: Option<f64>,
}

impl GapProfile {
    /// Gaps truncated from below at `epsilon`.
    pub fn truncated(&self, epsilon: f64) -> Vec<f64> {
        self.deltas.iter().map(|&d| d.max(epsilon)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn deterministic_reward_is_the_mean() {
        let inst = BanditInstance::deterministic(vec![1.0, 0.0]).unwrap();
        let mut rng = RngStream::for_player(0, 0, 0);
        for _ in 0..50 {
            assert_eq!(inst.draw_reward(0, &mut rng).unwrap(), 1.0);
        }
    }

    #[test]
    fn degenerate_bernoulli_never_pays() {
        let inst = BanditInstance::bernoulli(vec![0.0, 1.0]).unwrap();
        for seed in 0..20 {
            let mut rng = RngStream::for_player(seed, 0, 0);
            assert_eq!(inst.draw_reward(0, &mut rng).unwrap(), 0.0);
            assert_eq!(inst.draw_reward(1, &mut rng).unwrap(), 1.0);
        }
    }

    #[test]
    fn bernoulli_sample_mean_converges() {
        let inst = BanditInstance::bernoulli(vec![0.5, 0.1]).unwrap();
        let mut rng = RngStream::for_player(42, 0, 0);
        let n = 1_000_000;
        let sum: f64 = (0..n).map(|_| inst.draw_reward(0, &mut rng).unwrap()).sum();
        assert!((sum / n as f64 - 0.5).abs() < 0.002);
    }

    #[test]
    fn draw_advances_one_step() {
        let inst = BanditInstance::bernoulli(vec![0.5, 0.1]).unwrap();
        let mut a = RngStream::for_player(5, 1, 2);
        let mut b = a.clone();
        inst.draw_reward(1, &mut a).unwrap();
        b.next_unit();
        assert_eq!(a.next_unit(), b.next_unit());
    }

    #[test]
    fn out_of_range_arm_is_rejected() {
        let inst = BanditInstance::bernoulli(vec![0.5, 0.1]).unwrap();
        let mut rng = RngStream::for_player(0, 0, 0);
        assert!(matches!(inst.draw_reward(2, &mut rng), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn construction_rejects_bad_means() {
        assert!(BanditInstance::bernoulli(vec![0.5]).is_err());
        assert!(BanditInstance::bernoulli(vec![0.5, 1.5]).is_err());
        assert!(BanditInstance::bernoulli(vec![-0.1, 0.5]).is_err());
        assert!(BanditInstance::bernoulli(vec![f64::NAN, 0.5]).is_err());
    }

    #[test]
    fn gap_examples() {
        let g = BanditInstance::bernoulli(vec![1.0, 0.5]).unwrap().gaps();
        assert_eq!(g.deltas, vec![0.0, 0.5]);
        assert_eq!(g.min_gap, Some(0.5));

        let g = BanditInstance::bernoulli(vec![0.7, 0.9, 0.8]).unwrap().gaps();
        assert_relative_eq!(g.deltas[0], 0.2, epsilon = 1e-12);
        assert_eq!(g.deltas[1], 0.0);
        assert_relative_eq!(g.deltas[2], 0.1, epsilon = 1e-12);
        assert_relative_eq!(g.min_gap.unwrap(), 0.1, epsilon = 1e-12);
    }

    #[test]
    fn tie_rejected_for_best_arm_task() {
        let inst = BanditInstance::bernoulli(vec![0.6, 0.6]).unwrap();
        assert_eq!(inst.gaps().deltas, vec![0.0, 0.0]);
        assert_eq!(inst.gaps().min_gap, None);
        assert!(matches!(inst.validate_for(0.0), Err(Error::UndefinedHardness)));
        assert!(matches!(inst.hardness(0.0), Err(Error::UndefinedHardness)));
        assert!(inst.validate_for(0.1).is_ok());
        // one tied arm is excluded, the other is truncated to epsilon
        assert_relative_eq!(inst.hardness(0.1).unwrap(), 100.0, max_relative = 1e-12);
    }

    #[test]
    fn hardness_examples() {
        let two = BanditInstance::bernoulli(vec![1.0, 0.5]).unwrap();
        assert_eq!(two.hardness(0.0).unwrap(), 4.0);

        let three = BanditInstance::bernoulli(vec![0.9, 0.8, 0.7]).unwrap();
        assert_relative_eq!(three.hardness(0.0).unwrap(), 125.0, max_relative = 1e-9);
        assert_relative_eq!(
            three.hardness(0.15).unwrap(),
            1.0 / 0.0225 + 1.0 / 0.04,
            max_relative = 1e-9
        );
    }

    #[test]
    fn json_format() {
        let inst = BanditInstance::bernoulli(vec![0.9, 0.5]).unwrap();
        assert_eq!(inst.to_json(), r#"{"reward":"bernoulli","means":[0.9,0.5]}"#);
        let back = BanditInstance::from_json(r#"{"reward":"deterministic","means":[1,0]}"#).unwrap();
        assert_eq!(back.reward_kind(), RewardKind::Deterministic);
        assert_eq!(back.means(), vec![1.0, 0.0]);
        assert!(BanditInstance::from_json(r#"{"reward":"bernoulli","means":[2.0,0.5]}"#).is_err());
        assert!(BanditInstance::from_json(r#"{"reward":"gaussian","means":[0.2,0.5]}"#).is_err());
    }

    fn means_strategy() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..=1.0, 2..40)
    }

    proptest! {
        #[test]
        fn json_round_trips_exactly(means in means_strategy(), det in any::<bool>()) {
            let kind = if det { RewardKind::Deterministic } else { RewardKind::Bernoulli };
            let inst = BanditInstance::new(kind, means).unwrap();
            let back = BanditInstance::from_json(&inst.to_json()).unwrap();
            prop_assert_eq!(back, inst);
        }

        #[test]
        fn hardness_nonincreasing_in_epsilon(
            means in means_strategy(),
            e1 in 0.001f64..0.5,
            e2 in 0.001f64..0.5,
        ) {
            let inst = BanditInstance::bernoulli(means).unwrap();
            let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
            prop_assert!(inst.hardness(hi).unwrap() <= inst.hardness(lo).unwrap());
            let bound = (inst.n() - 1) as f64 / (lo * lo);
            prop_assert!(inst.hardness(lo).unwrap() <= bound * (1.0 + 1e-12));
        }

        #[test]
        fn gaps_follow_permutations(
            means in means_strategy(),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            let mut perm: Vec<usize> = (0..means.len()).collect();
            perm.shuffle(&mut RngStream::for_player(seed, 0, 0));
            let permuted: Vec<f64> = perm.iter().map(|&i| means[i]).collect();
            let g = BanditInstance::bernoulli(means).unwrap().gaps();
            let gp = BanditInstance::bernoulli(permuted).unwrap().gaps();
            for (slot, &i) in perm.iter().enumerate() {
                prop_assert_eq!(gp.deltas[slot], g.deltas[i]);
            }
            prop_assert_eq!(gp.min_gap, g.min_gap);
        }
    }
}
