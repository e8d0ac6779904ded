use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

use stakecosi_core::bench::run_cosi_bench;
use stakecosi_core::simnet::scenario::{run_scenario, RunReport, Scenario, ScenarioError};
use stakecosi_core::vectors::write_vectors;

#[derive(Parser)]
#[command(
    name = "stakecosi",
    version,
    about = "Stake-weighted leader election with collective-signing consensus"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and grade it against its assertions.
    Run {
        scenario: PathBuf,
        /// Directory for report.json, metrics.csv, chain.jsonl and events.jsonl.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Overrides the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Time full signing rounds for each signer count.
    Bench {
        #[arg(long, value_delimiter = ',', default_values_t = [10usize, 50, 100])]
        signers: Vec<usize>,
        #[arg(long, default_value_t = 10)]
        reps: usize,
    },
    /// Write the election golden vectors.
    Genvectors {
        #[arg(long, default_value = "vectors")]
        out: PathBuf,
    },
}

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("{path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Usage(String),
    #[error("scenario {0} failed its assertions")]
    Assertions(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Assertions(_) => 1,
            _ => 2,
        }
    }
}

fn write(path: PathBuf, body: &str) -> Result<(), CliError> {
    std::fs::write(&path, body).map_err(|source| CliError::Write { path, source })
}

fn cmd_run(path: &Path, out: &Path, seed: Option<u64>) -> Result<RunReport, CliError> {
    let mut scenario = Scenario::load(path)?;
    if let Some(seed) = seed {
        scenario.seed = seed;
    }
    let (report, outcome) = run_scenario(&scenario)?;
    std::fs::create_dir_all(out).map_err(|source| CliError::Write {
        path: out.into(),
        source,
    })?;
    write(
        out.join("report.json"),
        &(serde_json::to_string_pretty(&report).expect("report serializes") + "\n"),
    )?;
    write(out.join("metrics.csv"), &report.metrics.to_csv())?;
    write(
        out.join("chain.jsonl"),
        &outcome.canonical_chain().map(|c| c.dump_jsonl()).unwrap_or_default(),
    )?;
    let mut events = String::new();
    for e in &outcome.events {
        events.push_str(&serde_json::to_string(e).expect("event serializes"));
        events.push('\n');
    }
    write(out.join("events.jsonl"), &events)?;

    let m = &report.metrics;
    println!(
        "{}: {}/{} slots committed, {} skipped, {} forks, {:.1} messages per signing round",
        report.scenario, m.committed_blocks, m.n_slots, m.skipped_slots, m.fork_count, m.messages_per_cosi_round
    );
    if !report.liveness_guaranteed {
        println!("liveness not guaranteed: more faulty signers than the group tolerates");
    }
    for c in &report.checks {
        println!("  {} {} {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail);
    }
    for name in &report.skipped_checks {
        println!("  skip {name}");
    }
    if report.passed {
        Ok(report)
    } else {
        Err(CliError::Assertions(report.scenario))
    }
}

fn cmd_bench(signers: &[usize], reps: usize) -> Result<String, CliError> {
    if signers.is_empty() || signers.contains(&0) || reps == 0 {
        return Err(CliError::Usage("signer counts and reps must be at least 1".into()));
    }
    let rows = run_cosi_bench(signers, reps);
    let mut table = format!(
        "{:>8} {:>6} {:>12} {:>14}\n",
        "signers", "reps", "mean_ms", "published_ms"
    );
    for r in rows {
        let published = r.published_ms.map(|v| format!("{v:.1}")).unwrap_or_else(|| "-".into());
        writeln!(
            table,
            "{:>8} {:>6} {:>12.3} {:>14}",
            r.signers, r.reps, r.mean_ms, published
        )
        .unwrap();
    }
    Ok(table)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { scenario, out, seed } => cmd_run(&scenario, &out, seed).map(|_| ()),
        Command::Bench { signers, reps } => cmd_bench(&signers, reps).map(|t| print!("{t}")),
        Command::Genvectors { out } => write_vectors(&out)
            .map(|files| files.iter().for_each(|f| println!("{}", f.display())))
            .map_err(|source| CliError::Write { path: out, source }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
