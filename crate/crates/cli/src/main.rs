//! `specmix`: fixtures, testers, learners, sweeps and hard instances from the shell.
//!
//! Exit codes: 0 success or Accept, 1 Reject or a failed run, 2 usage or
//! precondition error, 3 budget exceeded.

mod commands;
mod config;

use clap::{Args, Parser, Subcommand};
use config::{ExperimentConfig, Format, Side};
use specmix_core::tester::Profile;
use specmix_core::verify::Suite;
use specmix_core::{Error, FamilyId};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "specmix", version, about = "Learn separated mixtures by Fourier-domain testing")]
struct Cli {
    /// Master RNG seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON experiment config; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output path (stdout when absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Constants profile: paper or practical.
    #[arg(long, global = true)]
    profile: Option<Profile>,
    /// Per-call tester sample cap.
    #[arg(long, global = true)]
    budget_cap: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw Δ-separated means and write a model file.
    Generate(GenerateArgs),
    /// Draw samples from a model, or (x, y) pairs from a mixed linear regression.
    Sample(SampleArgs),
    /// Run the tester at one candidate point.
    Test(TestArgs),
    /// Recover all k means.
    Learn(LearnArgs),
    /// Success-rate map over a (Δ, d) grid at fixed k.
    Sweep(SweepArgs),
    /// Build a moment-matched pair and its TV certificates.
    HardInstance(HardArgs),
    /// Show the family registry.
    Families {
        #[arg(value_parser = ["list"], default_value = "list")]
        action: String,
    },
    /// Run numeric verification suites.
    Verify(VerifyArgs),
}

#[derive(Args, Default)]
struct ProblemArgs {
    #[arg(long)]
    family: Option<FamilyId>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    /// Partial constant overrides as name=value, comma separated.
    #[arg(long, value_delimiter = ',', value_parser = parse_constant)]
    constants: Option<Vec<(String, f64)>>,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Means are drawn uniformly from [-radius, radius]^d.
    #[arg(long)]
    radius: Option<f64>,
}

#[derive(Args, Default)]
struct SourceArgs {
    /// Model file from `generate`.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Recorded samples, one row per sample.
    #[arg(long)]
    samples: Option<PathBuf>,
    /// Pair file from `hard-instance`; use with --side.
    #[arg(long)]
    hard_instance: Option<PathBuf>,
    #[arg(long, value_enum)]
    side: Option<Side>,
    /// Mixed linear regression weights, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    mlr_weights: Option<Vec<f64>>,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long)]
    n: Option<u64>,
}

#[derive(Args)]
struct TestArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    source: SourceArgs,
    /// Candidate point, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    mu_star: Option<Vec<f64>>,
    /// Tester parameters JSON (as echoed by a previous `test`).
    #[arg(long)]
    params: Option<PathBuf>,
}

#[derive(Args, Default)]
struct LearnerArgs {
    #[arg(long)]
    sample_budget: Option<u64>,
    #[arg(long)]
    candidate_cap: Option<u64>,
    #[arg(long)]
    vote_multiplier: Option<f64>,
}

#[derive(Args)]
struct LearnArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    learner: LearnerArgs,
    /// Model whose means are the ground truth for the ε-closeness report.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    learner: LearnerArgs,
    #[arg(long, value_delimiter = ',')]
    deltas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    dims: Option<Vec<usize>>,
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Args)]
struct HardArgs {
    /// Points per set.
    #[arg(long)]
    n: Option<u64>,
    /// Number of matched moments.
    #[arg(long)]
    t: Option<usize>,
    #[arg(long)]
    delta: Option<f64>,
    /// Support radius R.
    #[arg(long = "R", alias = "r")]
    r: Option<f64>,
    /// Tail mass ε' used by the TV bound.
    #[arg(long)]
    eps_tail: Option<f64>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Suites to run (all when absent).
    #[arg(long = "suite")]
    suites: Option<Vec<Suite>>,
    #[arg(long, value_delimiter = ',', value_parser = parse_constant)]
    constants: Option<Vec<(String, f64)>>,
    #[arg(long, value_delimiter = ',', value_parser = parse_constant)]
    general_constants: Option<Vec<(String, f64)>>,
}

fn parse_constant(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected name=value, got {s:?}"))?;
    let v: f64 = v.parse().map_err(|e| format!("{k}: {e}"))?;
    Ok((k.trim().to_string(), v))
}

fn to_map(v: Option<Vec<(String, f64)>>) -> Option<std::collections::BTreeMap<String, f64>> {
    v.map(|pairs| pairs.into_iter().collect())
}

impl ProblemArgs {
    fn fill(self, c: &mut ExperimentConfig) {
        c.family = self.family;
        c.k = self.k;
        c.d = self.d;
        c.delta = self.delta;
        c.eps = self.eps;
        c.constants = to_map(self.constants);
    }
}

impl SourceArgs {
    fn fill(self, c: &mut ExperimentConfig) {
        c.model = self.model;
        c.samples = self.samples;
        c.hard_instance = self.hard_instance;
        c.side = self.side;
        c.mlr_weights = self.mlr_weights;
    }
}

impl LearnerArgs {
    fn fill(self, c: &mut ExperimentConfig) {
        c.sample_budget = self.sample_budget;
        c.candidate_cap = self.candidate_cap;
        c.vote_multiplier = self.vote_multiplier;
    }
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError { code: 2, message: message.into() }
    }

    pub fn failed(message: impl Into<String>) -> Self {
        CliError { code: 1, message: message.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::SampleBudgetExceeded { .. }
            | Error::CandidateBudgetExceeded { .. }
            | Error::InsufficientSamples { .. }
            | Error::RetryCapExceeded { .. } => 3,
            Error::ClusterCountMismatch { .. }
            | Error::SearchExhausted { .. }
            | Error::Overflow { .. }
            | Error::ModulusUnderflow { .. }
            | Error::Quadrature { .. } => 1,
            _ => 2,
        };
        CliError { code, message: e.to_string() }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("SPECMIX_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        // Only fails if a pool already exists, which cannot happen this early.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("{}", serde_json::json!({ "error": e.message, "exit_code": e.code }));
            ExitCode::from(e.code)
        }
    }
}

fn run(cli: Cli) -> Result<u8, CliError> {
    let mut flags = ExperimentConfig {
        seed: cli.seed,
        profile: cli.profile,
        budget_cap: cli.budget_cap,
        format: cli.format,
        ..Default::default()
    };
    let name = match cli.command {
        Command::Generate(a) => {
            a.problem.fill(&mut flags);
            flags.radius = a.radius;
            "generate"
        }
        Command::Sample(a) => {
            a.source.fill(&mut flags);
            flags.n = a.n;
            "sample"
        }
        Command::Test(a) => {
            a.problem.fill(&mut flags);
            a.source.fill(&mut flags);
            flags.mu_star = a.mu_star;
            flags.params = a.params;
            "test"
        }
        Command::Learn(a) => {
            a.problem.fill(&mut flags);
            a.source.fill(&mut flags);
            a.learner.fill(&mut flags);
            flags.truth = a.truth;
            "learn"
        }
        Command::Sweep(a) => {
            a.problem.fill(&mut flags);
            a.learner.fill(&mut flags);
            flags.deltas = a.deltas;
            flags.dims = a.dims;
            flags.trials = a.trials;
            "sweep"
        }
        Command::HardInstance(a) => {
            flags.n = a.n;
            flags.t = a.t;
            flags.delta = a.delta;
            flags.r = a.r;
            flags.eps_tail = a.eps_tail;
            "hard-instance"
        }
        Command::Families { .. } => "families",
        Command::Verify(a) => {
            flags.suites = a.suites;
            flags.constants = to_map(a.constants);
            flags.general_constants = to_map(a.general_constants);
            "verify"
        }
    };
    let base = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let mut cfg = base.overlay(&flags)?;
    match cfg.command.as_deref() {
        Some(c) if c != name => return Err(CliError::usage(format!("config is for `{c}`, not `{name}`"))),
        _ => cfg.command = Some(name.to_string()),
    }
    let out = commands::Output { path: cli.out };
    match name {
        "generate" => commands::generate(cfg, &out),
        "sample" => commands::sample(cfg, &out),
        "test" => commands::test(cfg, &out),
        "learn" => commands::learn(cfg, &out),
        "sweep" => commands::sweep(cfg, &out),
        "hard-instance" => commands::hard_instance(cfg, &out),
        "families" => commands::families(cfg, &out),
        _ => commands::verify(cfg, &out),
    }
}
