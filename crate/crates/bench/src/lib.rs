//! Fixtures shared by the criterion benchmarks.

use cobandit::{BanditInstance, GeneratorSpec, RewardKind, RngStream};

/// Bernoulli instance with one arm at `best` and `n - 1` arms at `rest`.
pub fn one_good(n: usize, best: f64, rest: f64) -> BanditInstance {
    generate(&format!("one-good({n},{best},{rest})"))
}

/// Bernoulli instance from a generator spec string.
pub fn generate(spec: &str) -> BanditInstance {
    let spec: GeneratorSpec = spec.parse().expect("valid generator spec");
    spec.generate(RewardKind::Bernoulli, &mut RngStream::for_player(0, 0, 0))
        .expect("valid instance")
}
