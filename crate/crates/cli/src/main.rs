//! `cobandit`: generate bandit instances, run collaborative exploration
//! experiments, sweep a parameter and evaluate budget formulas.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use cobandit::harness::{run_trials_with, sweep, write_sweep_csv, write_trace, RunOptions};
use cobandit::{
    budget_calculator, Algorithm, AlgorithmSpec, BanditInstance, BudgetMode, ExperimentConfig, GeneratorSpec,
    InstanceSource, RewardKind, RngStream, SuccessCriterion, SweepAxis,
};

#[derive(Debug, Parser)]
#[command(
    name = "cobandit",
    version,
    about = "Collaborative best-arm identification experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write an instance produced by a generator spec.
    Gen(GenArgs),
    /// Run repeated trials of one strategy and report the aggregate.
    Run(RunArgs),
    /// Run one configuration per value of a parameter and emit a CSV table.
    Sweep(SweepArgs),
    /// Evaluate a budget formula or the hardness of an instance.
    Budget(BudgetArgs),
}

#[derive(Debug, Args)]
struct GenArgs {
    /// `uniform-grid(n,hi,lo)`, `one-good(n,best,rest)` or `lower-bound(n)`.
    spec: String,
    #[arg(long, default_value = "bernoulli", value_parser = parse_reward)]
    reward: RewardKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct InstanceArgs {
    /// Instance JSON file.
    #[arg(conflicts_with = "gen")]
    instance: Option<PathBuf>,
    /// Generator spec instead of a file. Randomized generators draw a fresh
    /// instance per trial.
    #[arg(long)]
    gen: Option<String>,
    /// Reward model for `--gen`.
    #[arg(long, default_value = "bernoulli", value_parser = parse_reward)]
    reward: RewardKind,
}

impl InstanceArgs {
    fn source(&self) -> anyhow::Result<InstanceSource> {
        match (&self.instance, &self.gen) {
            (Some(path), None) => Ok(InstanceSource::File {
                path: path.display().to_string(),
            }),
            (None, Some(spec)) => Ok(InstanceSource::generator(spec, self.reward)),
            _ => Err(usage("give an instance file or --gen SPEC")),
        }
    }
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// Replay a config: either a config JSON or a report JSON containing one.
    #[arg(long, conflicts_with_all = ["instance", "gen", "algo"])]
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_algorithm)]
    algo: Option<Algorithm>,
    #[arg(long, default_value_t = 36)]
    k: usize,
    /// Per-player pull budget (total budget for `amplified`).
    #[arg(long)]
    budget: Option<u64>,
    /// Accuracy parameter; 0 asks for the best arm.
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    #[arg(long)]
    delta: Option<f64>,
    /// Number of rounds `R` for `r-round`.
    #[arg(long)]
    rounds: Option<u32>,
    /// Copies per unit of ln(1/delta) for `amplified`.
    #[arg(long)]
    amp_const: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Judge success at `epsilon` even where the guarantee is for `2 epsilon`.
    #[arg(long)]
    strict: bool,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    jobs: Option<usize>,
}

impl ExperimentArgs {
    fn config(&self) -> anyhow::Result<ExperimentConfig> {
        if let Some(path) = &self.config {
            return load_config(path);
        }
        let algo = self.algo.ok_or_else(|| usage("--algo is required"))?;
        let mut spec = AlgorithmSpec::new(algo, self.k).with_epsilon(self.epsilon);
        spec.budget = self.budget;
        spec.delta = self.delta;
        spec.rounds = self.rounds;
        if let Some(c) = self.amp_const {
            spec = spec.with_amplification_constant(c);
        }
        let mut cfg = ExperimentConfig::new(self.instance.source()?, spec, self.trials, self.seed);
        if self.strict && self.epsilon > 0.0 {
            cfg.success = Some(SuccessCriterion::EpsBest { epsilon: self.epsilon });
        }
        Ok(cfg)
    }

    fn options(&self, trace: bool) -> RunOptions {
        RunOptions { jobs: self.jobs, trace }
    }
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    /// JSON report path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-trial CSV path.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// JSON-lines broadcast trace path.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Include per-trial records in the JSON report.
    #[arg(long)]
    records: bool,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    /// One of k, budget, epsilon, R.
    #[arg(long, value_parser = parse_axis)]
    axis: SweepAxis,
    /// Comma-separated values, run in the order given.
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
    values: Vec<f64>,
    /// CSV path; standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BudgetArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long, default_value_t = 36)]
    k: usize,
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    /// eq3, eq4 or hardness.
    #[arg(long, default_value = "eq3", value_parser = parse_mode)]
    mode: BudgetMode,
    /// Constant of the serial explorer.
    #[arg(long, default_value_t = 1.0)]
    c_a: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Marks an error as a usage problem (exit code 2).
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: &str) -> anyhow::Error {
    Usage(msg.to_string()).into()
}

fn parse_reward(s: &str) -> Result<RewardKind, String> {
    match s {
        "bernoulli" => Ok(RewardKind::Bernoulli),
        "deterministic" => Ok(RewardKind::Deterministic),
        _ => Err(format!("expected bernoulli or deterministic, got {s:?}")),
    }
}

fn parse_algorithm(s: &str) -> Result<Algorithm, String> {
    s.parse().map_err(|e: cobandit::Error| e.to_string())
}

fn parse_axis(s: &str) -> Result<SweepAxis, String> {
    s.parse().map_err(|e: cobandit::Error| e.to_string())
}

fn parse_mode(s: &str) -> Result<BudgetMode, String> {
    s.parse().map_err(|e: cobandit::Error| e.to_string())
}

fn load_config(path: &Path) -> anyhow::Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut value: serde_json::Value = serde_json::from_str(&text).map_err(cobandit::Error::from)?;
    if let Some(inner) = value.get_mut("config") {
        value = inner.take();
    }
    Ok(serde_json::from_value(value).map_err(cobandit::Error::from)?)
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn resolve_instance(args: &InstanceArgs, seed: u64) -> anyhow::Result<BanditInstance> {
    Ok(match args.source()? {
        InstanceSource::File { path } => BanditInstance::load(path)?,
        InstanceSource::Inline { instance } => instance,
        InstanceSource::Generator { spec, reward } => {
            let g: GeneratorSpec = spec.parse()?;
            g.generate(
                reward,
                &mut RngStream::for_player(seed, 0, cobandit::rng::INSTANCE_STREAM),
            )?
        }
    })
}

fn cmd_gen(args: GenArgs) -> anyhow::Result<()> {
    let g: GeneratorSpec = args.spec.parse()?;
    let instance = g.generate(
        args.reward,
        &mut RngStream::for_player(args.seed, 0, cobandit::rng::INSTANCE_STREAM),
    )?;
    match args.out {
        Some(path) => instance.save(&path)?,
        None => println!("{}", instance.to_json()),
    }
    Ok(())
}

fn cmd_run(args: RunArgs) -> anyhow::Result<()> {
    let mut cfg = args.experiment.config()?;
    cfg.record_trials |= args.records;
    let (report, trace) = run_trials_with(&cfg, args.experiment.options(args.trace.is_some()))?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(path) = &args.out {
        let mut out = create(path)?;
        out.write_all(report.to_json().as_bytes())?;
        out.flush()?;
    }
    if let Some(path) = &args.csv {
        let mut out = create(path)?;
        report.write_csv(&mut out)?;
        out.flush()?;
    }
    if let Some(path) = &args.trace {
        let mut out = create(path)?;
        write_trace(&mut out, &trace)?;
        out.flush()?;
    }
    println!(
        "{} wall_clock={:.3}s",
        report.summary(),
        report.wall_clock.as_secs_f64()
    );
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> anyhow::Result<()> {
    let cfg = args.experiment.config()?;
    let rows = sweep(&cfg, args.axis, &args.values, args.experiment.options(false))?;
    let mut warned = std::collections::BTreeSet::new();
    for w in rows.iter().flat_map(|r| &r.report.warnings) {
        if warned.insert(w) {
            eprintln!("warning: {w}");
        }
    }
    match &args.out {
        Some(path) => {
            let mut out = create(path)?;
            write_sweep_csv(&mut out, args.axis, &rows)?;
            out.flush()?;
            for row in &rows {
                println!("{}={} {}", args.axis, row.value, row.report.summary());
            }
        }
        None => write_sweep_csv(io::stdout().lock(), args.axis, &rows)?,
    }
    Ok(())
}

fn cmd_budget(args: BudgetArgs) -> anyhow::Result<()> {
    let instance = resolve_instance(&args.instance, args.seed)?;
    let value = budget_calculator(&instance, args.k, args.epsilon, args.mode, args.c_a)?;
    println!("{value:?}");
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.is::<Usage>() {
        return 2;
    }
    match err.downcast_ref::<cobandit::Error>() {
        Some(e) if e.is_usage() => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Budget(a) => cmd_budget(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_is_well_formed() {
        Cli::command().debug_assert();
    }

    #[test]
    fn unknown_flag_is_rejected() {
        assert!(Cli::try_parse_from(["cobandit", "run", "--gen", "one-good(5,1,0)", "--bogus"]).is_err());
    }

    #[test]
    fn sweep_values_split_on_commas() {
        let cli = Cli::try_parse_from(["cobandit", "sweep", "--axis", "k", "--values", "36,64,144"]).unwrap();
        let Command::Sweep(args) = cli.command else {
            panic!("expected sweep")
        };
        assert_eq!(args.values, vec![36.0, 64.0, 144.0]);
        assert_eq!(args.axis, SweepAxis::K);
    }
}
