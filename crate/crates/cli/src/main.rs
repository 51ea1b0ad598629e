//! `otforge`: run OT protocols, sweep capacity bounds and run security checks.
//!
//! Exit codes: 0 success, 1 configuration error, 2 abort-dominated run,
//! 3 security-property failure.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use otforge::bounds::{parse_grid, BoundCurve, OptimizerConfig, UpperBoundSet};
use otforge::channel::{make_bsec, make_example1, BsecParams};
use otforge::protocol::{run_trial, ChannelKind, Mutation, ProtocolKind, TrialSpec};
use otforge::report::run_report;
use otforge::seclab::{
    parse_rational, receiver_privacy_report, sender_security_test, ExactInstance,
    SenderSecurityConfig,
};

#[derive(Debug, Error)]
enum CliError {
    #[error("{field} {constraint}")]
    Config { field: String, constraint: String },
    #[error("cannot write {path}: {source}")]
    Write { path: String, source: io::Error },
    #[error("{0}")]
    Core(otforge::Error),
}

impl From<otforge::Error> for CliError {
    fn from(e: otforge::Error) -> Self {
        match e {
            otforge::Error::InvalidParameter { field, constraint } => CliError::Config {
                field: field.to_string(),
                constraint,
            },
            other => CliError::Core(other),
        }
    }
}

fn config(field: &str, constraint: impl Into<String>) -> CliError {
    CliError::Config {
        field: field.into(),
        constraint: constraint.into(),
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Parser)]
#[command(name = "otforge", version, about = "Oblivious transfer over simulated noisy channels")]
struct Cli {
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true, env = "OTFORGE_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a protocol for a number of independent trials and write a JSON report.
    Run(RunArgs),
    /// Write lower and upper rate bounds over a crossover grid as CSV.
    Bounds(BoundsArgs),
    /// Run a security suite and write a JSON report.
    Seclab {
        #[command(subcommand)]
        suite: Suite,
    },
    /// Export a channel description as JSON.
    Channel(ChannelArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ProtocolArg {
    P1,
    P2,
    P3,
}

impl From<ProtocolArg> for ProtocolKind {
    fn from(p: ProtocolArg) -> Self {
        match p {
            ProtocolArg::P1 => ProtocolKind::Standard,
            ProtocolArg::P2 => ProtocolKind::Recursive,
            ProtocolArg::P3 => ProtocolKind::Example,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(value_enum)]
    protocol: ProtocolArg,
    /// Erasure probability of the BSEC.
    #[arg(long, default_value_t = 0.25, allow_hyphen_values = true)]
    p1: f64,
    /// Crossover probability of the BSEC.
    #[arg(long, default_value_t = 0.05, allow_hyphen_values = true)]
    q1: f64,
    /// Channel uses.
    #[arg(long, default_value_t = 4000)]
    n: usize,
    /// Rounds (1 for p1, 2 for p2 unless given).
    #[arg(long = "T")]
    rounds: Option<usize>,
    #[arg(long, default_value_t = 0.05, allow_hyphen_values = true)]
    delta: f64,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Inject a protocol defect.
    #[arg(long)]
    mutate: Option<String>,
    /// Report path (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the first trial's transcript as JSON.
    #[arg(long)]
    transcript: Option<PathBuf>,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long, default_value_t = 0.1, allow_hyphen_values = true)]
    p1: f64,
    /// `start:stop:step` or a single value.
    #[arg(long, default_value = "0.01:0.99:0.01")]
    qgrid: String,
    /// Largest round count; columns lb_T1..lb_TT are written.
    #[arg(long = "T", default_value_t = 3)]
    rounds: usize,
    /// Comma-separated upper bounds: eq4j2, eq5 (empty for none).
    #[arg(long, default_value = "eq4j2,eq5")]
    ub: String,
    /// Seed for the optimiser's random restarts.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Suite {
    /// Exact receiver-privacy distance by enumeration.
    Exact(ExactArgs),
    /// Monte-Carlo dependence tests on the sender's unchosen key.
    Statistical(StatisticalArgs),
}

#[derive(Args)]
struct ExactArgs {
    /// Erasure probability, as a fraction or decimal.
    #[arg(long, default_value = "1/4")]
    p: String,
    #[arg(long, default_value = "1/4")]
    q: String,
    #[arg(long, default_value_t = 4)]
    n: usize,
    #[arg(long)]
    mutate: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StatisticalArgs {
    #[arg(long, default_value_t = 88)]
    n: usize,
    #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
    p: f64,
    #[arg(long, default_value_t = 0.25, allow_hyphen_values = true)]
    q: f64,
    #[arg(long, default_value_t = 0.05, allow_hyphen_values = true)]
    delta: f64,
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    #[arg(long, default_value_t = 11)]
    seed: u64,
    /// Family-wise significance level.
    #[arg(long, default_value_t = 1e-3)]
    alpha: f64,
    #[arg(long, default_value_t = 200)]
    bootstrap: usize,
    #[arg(long)]
    mutate: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ChannelName {
    Bsec,
    Example1,
}

#[derive(Args)]
struct ChannelArgs {
    #[arg(value_enum)]
    kind: ChannelName,
    #[arg(long, default_value_t = 0.25, allow_hyphen_values = true)]
    p1: f64,
    #[arg(long, default_value_t = 0.05, allow_hyphen_values = true)]
    q1: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn bsec_point(p1: f64, q1: f64) -> CliResult<BsecParams> {
    if !(0.0..=0.5).contains(&p1) {
        return Err(config("p1", format!("must be ≤ 0.5 and ≥ 0 (got {p1})")));
    }
    if !(0.0..=1.0).contains(&q1) {
        return Err(config("q1", format!("must be in [0, 1] (got {q1})")));
    }
    Ok(BsecParams::new(p1, q1)?)
}

fn mutation(text: Option<&str>) -> CliResult<Option<Mutation>> {
    Ok(text.map(str::parse).transpose()?)
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => fs::write(path, text).map_err(|source| CliError::Write {
            path: path.display().to_string(),
            source,
        }),
        None => {
            let mut stdout = io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|source| CliError::Write {
                    path: "stdout".into(),
                    source,
                })
        }
    }
}

fn with_newline(mut text: String) -> String {
    if !text.ends_with('\n') {
        text.push('\n');
    }
    text
}

fn cmd_run(args: &RunArgs) -> CliResult<ExitCode> {
    let kind = ProtocolKind::from(args.protocol);
    if args.trials == 0 {
        return Err(config("trials", "must be at least 1"));
    }
    let (channel, rounds) = match kind {
        ProtocolKind::Example => (ChannelKind::Example1, 2),
        ProtocolKind::Standard => {
            let rounds = args.rounds.unwrap_or(1);
            if rounds != 1 {
                return Err(config("T", "must be 1 for p1"));
            }
            (ChannelKind::Bsec(bsec_point(args.p1, args.q1)?), 1)
        }
        ProtocolKind::Recursive => (
            ChannelKind::Bsec(bsec_point(args.p1, args.q1)?),
            args.rounds.unwrap_or(2),
        ),
    };
    let mut spec = TrialSpec::new(kind, args.n, rounds, args.delta, channel);
    spec.mutation = mutation(args.mutate.as_deref())?;
    spec.params(args.seed, 0)?;

    let report = run_report(&spec, args.trials, args.seed)?;
    emit(args.out.as_deref(), &report.to_json()?)?;
    if let Some(path) = &args.transcript {
        let (_, transcript) = run_trial(&spec, args.seed, 0)?;
        emit(Some(path), &with_newline(transcript.to_json()?))?;
    }
    Ok(if report.abort_dominated {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    })
}

fn cmd_bounds(args: &BoundsArgs) -> CliResult<ExitCode> {
    if !(0.0..=0.5).contains(&args.p1) {
        return Err(config("p1", format!("must be ≤ 0.5 and ≥ 0 (got {})", args.p1)));
    }
    if args.rounds == 0 {
        return Err(config("T", "must be at least 1"));
    }
    let grid = parse_grid(&args.qgrid)?;
    if let Some(q) = grid.iter().find(|q| !(0.0..=1.0).contains(*q)) {
        return Err(config("qgrid", format!("values must be in [0, 1] (got {q})")));
    }
    let which = UpperBoundSet::parse(&args.ub)?;
    let cfg = OptimizerConfig {
        seed: args.seed,
        ..OptimizerConfig::default()
    };
    let curve = BoundCurve::compute(args.p1, &grid, args.rounds, which, &cfg)?;
    emit(args.out.as_deref(), &curve.to_csv()?)?;
    Ok(ExitCode::SUCCESS)
}

fn security_exit(passed: Option<bool>) -> ExitCode {
    if passed == Some(false) {
        ExitCode::from(3)
    } else {
        ExitCode::SUCCESS
    }
}

fn cmd_exact(args: &ExactArgs) -> CliResult<ExitCode> {
    let inst = ExactInstance {
        n: args.n,
        p: parse_rational(&args.p).map_err(|_| config("p", format!("`{}` is not a rational number", args.p)))?,
        q: parse_rational(&args.q).map_err(|_| config("q", format!("`{}` is not a rational number", args.q)))?,
        mutation: mutation(args.mutate.as_deref())?,
    };
    let report = receiver_privacy_report(&inst)?;
    emit(args.out.as_deref(), &with_newline(report.to_json()?))?;
    Ok(security_exit(report.passed))
}

fn cmd_statistical(args: &StatisticalArgs) -> CliResult<ExitCode> {
    let cfg = SenderSecurityConfig {
        n: args.n,
        p: args.p,
        q: args.q,
        delta: args.delta,
        trials: args.trials,
        seed: args.seed,
        mutation: mutation(args.mutate.as_deref())?,
        bootstrap: args.bootstrap,
        alpha: args.alpha,
    };
    let report = sender_security_test(&cfg)?;
    emit(args.out.as_deref(), &with_newline(report.to_json()?))?;
    Ok(security_exit(report.passed))
}

fn cmd_channel(args: &ChannelArgs) -> CliResult<ExitCode> {
    let spec = match args.kind {
        ChannelName::Bsec => make_bsec(bsec_point(args.p1, args.q1)?),
        ChannelName::Example1 => make_example1(),
    };
    emit(args.out.as_deref(), &with_newline(spec.to_json()?))?;
    Ok(ExitCode::SUCCESS)
}

fn dispatch(cli: &Cli) -> CliResult<ExitCode> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(config("threads", "must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| config("threads", e.to_string()))?;
    }
    match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Bounds(args) => cmd_bounds(args),
        Command::Seclab { suite: Suite::Exact(args) } => cmd_exact(args),
        Command::Seclab { suite: Suite::Statistical(args) } => cmd_statistical(args),
        Command::Channel(args) => cmd_channel(args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
