//! Instance generators addressed by short spec strings.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::instance::{BanditInstance, RewardKind};
use crate::rng::RngStream;

/// One of
///
/// * `uniform-grid(n, p_max, step)`: means `p_max, p_max - step, ...`
/// * `one-good(n, p1, rest)`: arm 0 has mean `p1`, every other arm `rest`
/// * `lower-bound(n)`: a random permutation of `1/2 + 1/sqrt(n)`,
///   `1/2 - 1/sqrt(n)` and `n - 2` zeros
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GeneratorSpec {
    UniformGrid { n: usize, p_max: f64, step: f64 },
    OneGood { n: usize, best: f64, rest: f64 },
    LowerBound { n: usize },
}

impl GeneratorSpec {
    /// Whether `generate` consumes randomness.
    pub fn is_randomized(&self) -> bool {
        matches!(self, GeneratorSpec::LowerBound { .. })
    }

    pub fn generate(&self, reward: RewardKind, rng: &mut RngStream) -> Result<BanditInstance> {
        match *self {
            GeneratorSpec::UniformGrid { n, p_max, step } => {
                let means = (0..n).map(|i| snap(p_max - i as f64 * step)).collect();
                BanditInstance::new(reward, means)
            }
            GeneratorSpec::OneGood { n, best, rest } => {
                let mut means = vec![rest; n];
                if let Some(first) = means.first_mut() {
                    *first = best;
                }
                BanditInstance::new(reward, means)
            }
            GeneratorSpec::LowerBound { n } => {
                let inst = lower_bound_instance(n, rng)?;
                BanditInstance::new(reward, inst.means())
            }
        }
    }
}

/// Rounds to 12 decimals so grid arithmetic lands on the intended values.
fn snap(x: f64) -> f64 {
    let y = (x * 1e12).round() / 1e12;
    if y == 0.0 {
        0.0
    } else {
        y
    }
}

/// Bernoulli instance whose means are a uniformly random permutation of
/// `{1/2 + 1/sqrt(n), 1/2 - 1/sqrt(n), 0, ..., 0}`.
///
/// Needs `n >= 4` for the means to stay inside `[0, 1]`.
pub fn lower_bound_instance(n: usize, rng: &mut RngStream) -> Result<BanditInstance> {
    if n < 2 {
        return Err(Error::arg(format!("lower-bound instance needs n >= 2, got {n}")));
    }
    if n < 4 {
        return Err(Error::arg(format!(
            "lower-bound instance needs n >= 4 so that 1/2 + 1/sqrt(n) <= 1, got {n}"
        )));
    }
    let gap = 1.0 / (n as f64).sqrt();
    let mut means = vec![0.0; n];
    means[0] = 0.5 + gap;
    means[1] = 0.5 - gap;
    means.shuffle(rng);
    BanditInstance::bernoulli(means)
}

impl FromStr for GeneratorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |why: &str| Error::arg(format!("malformed generator spec {s:?}: {why}"));
        let s_trim = s.trim();
        let open = s_trim.find('(').ok_or_else(|| bad("expected name(args)"))?;
        if !s_trim.ends_with(')') {
            return Err(bad("missing closing parenthesis"));
        }
        let name = s_trim[..open].trim();
        let args: Vec<&str> = s_trim[open + 1..s_trim.len() - 1]
            .split(',')
            .map(str::trim)
            .filter(|a| !a.is_empty())
            .collect();
        let count = |want: usize| {
            if args.len() == want {
                Ok(())
            } else {
                Err(bad(&format!("{name} takes {want} arguments, got {}", args.len())))
            }
        };
        let int = |a: &str| a.parse::<usize>().map_err(|_| bad(&format!("{a:?} is not a count")));
        let real = |a: &str| {
            a.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| bad(&format!("{a:?} is not a number")))
        };
        match name {
            "uniform-grid" => {
                count(3)?;
                Ok(GeneratorSpec::UniformGrid {
                    n: int(args[0])?,
                    p_max: real(args[1])?,
                    step: real(args[2])?,
                })
            }
            "one-good" => {
                count(3)?;
                Ok(GeneratorSpec::OneGood {
                    n: int(args[0])?,
                    best: real(args[1])?,
                    rest: real(args[2])?,
                })
            }
            "lower-bound" => {
                count(1)?;
                Ok(GeneratorSpec::LowerBound { n: int(args[0])? })
            }
            _ => Err(bad(&format!("unknown generator {name:?}"))),
        }
    }
}

impl fmt::Display for GeneratorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeneratorSpec::UniformGrid { n, p_max, step } => write!(f, "uniform-grid({n},{p_max},{step})"),
            GeneratorSpec::OneGood { n, best, rest } => write!(f, "one-good({n},{best},{rest})"),
            GeneratorSpec::LowerBound { n } => write!(f, "lower-bound({n})"),
        }
    }
}
