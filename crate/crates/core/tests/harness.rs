use cobandit::harness::{run_trials_with, validate_config, RunOptions};
use cobandit::{
    run_trials, sweep, Algorithm, AlgorithmSpec, BanditInstance, ExperimentConfig, InstanceSource, RewardKind,
    SuccessCriterion, SweepAxis, TrialStreams,
};
use proptest::prelude::*;

fn grid() -> InstanceSource {
    InstanceSource::generator("uniform-grid(10,0.9,0.1)", RewardKind::Bernoulli)
}

#[test]
fn reports_are_byte_identical_across_runs_and_pools() {
    let mut cfg = ExperimentConfig::new(
        InstanceSource::generator("lower-bound(16)", RewardKind::Bernoulli),
        AlgorithmSpec::new(Algorithm::OneRoundBest, 36).with_budget(64),
        200,
        11,
    );
    cfg.record_trials = true;
    let (a, _) = run_trials_with(
        &cfg,
        RunOptions {
            jobs: Some(1),
            trace: false,
        },
    )
    .unwrap();
    let (b, _) = run_trials_with(
        &cfg,
        RunOptions {
            jobs: Some(3),
            trace: false,
        },
    )
    .unwrap();
    assert_eq!(a.to_json(), b.to_json());
    cfg.seed = 12;
    let c = run_trials(&cfg).unwrap();
    assert_ne!(a.to_json(), c.to_json());
}

#[test]
fn single_trial_echoes_config() {
    let inst = BanditInstance::bernoulli(vec![0.8, 0.5, 0.2]).unwrap();
    let cfg = ExperimentConfig::new(
        InstanceSource::Inline { instance: inst },
        AlgorithmSpec::new(Algorithm::NoComm, 2).with_budget(90),
        1,
        5,
    );
    let report = run_trials(&cfg).unwrap();
    assert_eq!(report.trials, 1);
    assert_eq!(report.config, cfg);
    assert_eq!(report.max_rounds, 0);
    assert_eq!(report.mean_values_sent, 0.0);
    let echoed: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
    let replay = ExperimentConfig::from_json(&echoed["config"].to_string()).unwrap();
    assert_eq!(run_trials(&replay).unwrap().to_json(), report.to_json());
}

#[test]
fn zero_trials_is_rejected() {
    let cfg = ExperimentConfig::new(grid(), AlgorithmSpec::new(Algorithm::NoComm, 2).with_budget(10), 0, 0);
    assert!(run_trials(&cfg).unwrap_err().is_usage());
}

#[test]
fn missing_budget_is_rejected() {
    let cfg = ExperimentConfig::new(grid(), AlgorithmSpec::new(Algorithm::OneRoundBest, 36), 10, 0);
    assert!(validate_config(&cfg).is_err());
}

#[test]
fn strict_criterion_is_never_easier() {
    let spec = AlgorithmSpec::new(Algorithm::OneRoundPac, 36)
        .with_budget(100)
        .with_epsilon(0.1);
    let loose = ExperimentConfig::new(grid(), spec.clone(), 300, 1);
    let mut strict = loose.clone();
    strict.success = Some(SuccessCriterion::EpsBest { epsilon: 0.1 });
    let a = run_trials(&loose).unwrap();
    let b = run_trials(&strict).unwrap();
    assert_eq!(a.success_criterion, SuccessCriterion::EpsBest { epsilon: 0.2 });
    assert!(b.successes <= a.successes);
}

#[test]
fn trace_lists_every_broadcast_in_order() {
    let cfg = ExperimentConfig::new(
        grid(),
        AlgorithmSpec::new(Algorithm::MultiRound, 3)
            .with_epsilon(0.25)
            .with_delta(0.1),
        4,
        2,
    );
    let (report, trace) = run_trials_with(
        &cfg,
        RunOptions {
            jobs: None,
            trace: true,
        },
    )
    .unwrap();
    let broadcasts: u64 = report.records.iter().map(|r| r.rounds * 3).sum();
    assert_eq!(trace.len() as u64, broadcasts);
    let keys: Vec<_> = trace.iter().map(|t| (t.trial, t.round, t.player)).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    let values: u64 = trace.iter().flat_map(|t| &t.payload).map(|e| e.cost()).sum();
    assert_eq!(values, report.records.iter().map(|r| r.values_sent).sum::<u64>());
}

#[test]
fn sweep_keeps_value_order() {
    let base = ExperimentConfig::new(
        grid(),
        AlgorithmSpec::new(Algorithm::RRound, 4)
            .with_epsilon(0.05)
            .with_delta(0.1)
            .with_rounds(1),
        20,
        0,
    );
    let rows = sweep(&base, SweepAxis::R, &[4.0, 1.0, 2.0], RunOptions::default()).unwrap();
    let order: Vec<f64> = rows.iter().map(|r| r.value).collect();
    assert_eq!(order, vec![4.0, 1.0, 2.0]);
    for row in &rows {
        assert!(row.report.max_rounds as f64 <= row.value);
    }
    assert!(sweep(&base, SweepAxis::K, &[4.0, 2.5], RunOptions::default()).is_err());
}

fn any_spec() -> impl Strategy<Value = AlgorithmSpec> {
    let eps = prop_oneof![Just(0.0), Just(0.1), Just(0.25)];
    (0usize..8, 1usize..12, 4u64..200, eps, 1u32..4).prop_map(|(which, k, budget, eps, r)| {
        let algo = Algorithm::ALL[which];
        let spec = AlgorithmSpec::new(algo, k).with_epsilon(eps).with_delta(0.1);
        match algo {
            Algorithm::OneRoundPac => spec.with_epsilon(0.1).with_budget(budget),
            Algorithm::Amplified => spec.with_budget(budget * 42),
            Algorithm::RRound => spec.with_epsilon(0.1).with_rounds(r),
            Algorithm::MultiRound => spec,
            _ => spec.with_budget(budget),
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn runs_respect_budgets_and_conservation(
        spec in any_spec(),
        means in proptest::collection::vec(0.0f64..=1.0, 2..12),
        seed in any::<u64>(),
    ) {
        let inst = BanditInstance::bernoulli(means).unwrap();
        prop_assume!(spec.validate(&inst).is_ok());
        let out = spec.run(&inst, TrialStreams::new(seed, 0)).unwrap();
        prop_assert!(out.invariant_violations().is_empty(), "{:?}", out.invariant_violations());
        prop_assert!(out.chosen < inst.n());
        prop_assert_eq!(out.per_player_choices.len(), spec.k);
        if let Some(t) = spec.budget {
            prop_assert!(out.ledger.max_per_player() <= t);
        }
        let again = spec.run(&inst, TrialStreams::new(seed, 0)).unwrap();
        prop_assert_eq!(again.chosen, out.chosen);
        prop_assert_eq!(again.comm, out.comm);
    }
}
