//! `ctm`: run scenarios, check the selection theorem, compute win
//! probabilities and latencies, and replay traces.
//!
//! Exit status is 0 when every check passes, 1 when a check fails and 2 on
//! a usage, configuration or input error.

mod probabilities;
mod replay;
mod scenario;
mod theorem;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "ctm", version, about = "Conscious Turing Machine simulator")]
struct Cli {
    /// Seed for every random draw.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a named scenario, or `custom` with a machine configuration.
    RunScenario {
        name: String,
        /// Scenario parameter overrides (TOML), or the machine configuration
        /// for `custom`.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory for the report and trace files.
        #[arg(long, default_value = "ctm-out")]
        out: PathBuf,
        /// Competitions counted by inattentional-blindness.
        #[arg(long)]
        trials: Option<u64>,
    },
    /// Compare the exact oracle with the closed form and Monte Carlo.
    VerifyTheorem {
        /// Number of processors; random weights in [-10, 10] unless given.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 2)]
        arity: usize,
        /// intensity, intensity+<c>*mood, abs-mood or abs-weight.
        #[arg(long, default_value = "intensity")]
        f: String,
        #[arg(long, default_value = "probabilistic")]
        mode: String,
        /// Comma-separated level-0 weights.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        weights: Option<Vec<f64>>,
        /// Monte Carlo trials; 0 reports the oracle only.
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        /// Fail if f is not additive, as the theorem then does not apply.
        #[arg(long)]
        expect_theorem: bool,
        /// Also write the table as CSV into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact win probability of each leaf of a fixture.
    Probabilities {
        fixture: PathBuf,
        #[arg(long)]
        f: Option<String>,
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        arity: Option<usize>,
        /// Add a Monte Carlo frequency column.
        #[arg(long, default_value_t = 0)]
        trials: u64,
    },
    /// Time to STM and to conscious awareness.
    Latency {
        tick_ms: f64,
        n_processors: u64,
        arity: u64,
    },
    /// Print the events of a trace, or its stream of consciousness.
    Replay {
        trace: PathBuf,
        /// Print broadcast gists only, one per line.
        #[arg(long)]
        stream: bool,
        /// kind=, phase=, tick= (5, 5..9, 5..=9) or addr=; repeatable.
        #[arg(long)]
        filter: Vec<String>,
    },
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let seed = cli.seed;
    match cli.command {
        Command::RunScenario { name, config, out, trials } => scenario::run(&name, config.as_deref(), &out, trials, seed),
        Command::VerifyTheorem { n, arity, f, mode, weights, trials, expect_theorem, out } => {
            theorem::run(&theorem::Args {
                n,
                arity,
                f,
                mode,
                weights,
                trials,
                expect_theorem,
                out,
                seed: seed.unwrap_or(0),
            })
        }
        Command::Probabilities { fixture, f, mode, arity, trials } => {
            probabilities::run(&fixture, f.as_deref(), mode.as_deref(), arity, trials, seed.unwrap_or(0))
        }
        Command::Latency { tick_ms, n_processors, arity } => {
            let r = ctm_core::uptree::latency(tick_ms, n_processors, arity)?;
            println!("h={} ticks_to_stm={} ticks_to_awareness={}", r.height, r.ticks_to_stm, r.ticks_to_awareness);
            println!("seconds_to_stm={}", r.seconds_to_stm);
            println!("seconds_to_awareness={}", r.seconds_to_awareness);
            Ok(true)
        }
        Command::Replay { trace, stream, filter } => replay::run(&trace, stream, &filter),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        // A closed pipe (e.g. `| head`) only ends the output early.
        Err(e) if e.downcast_ref::<std::io::Error>().is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe) => {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// Parses `probabilistic` or `deterministic`.
fn parse_mode(s: &str) -> anyhow::Result<ctm_core::Mode> {
    match s {
        "probabilistic" => Ok(ctm_core::Mode::Probabilistic),
        "deterministic" => Ok(ctm_core::Mode::Deterministic),
        _ => anyhow::bail!("unknown mode {s:?} (expected probabilistic or deterministic)"),
    }
}
