use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use npexec::analysis::ReleaseOption;
use npexec::model::PriorityPolicy;
use npexec::time::{parse_duration, Duration};

mod commands;

/// Simulate and analyze single-threaded callback executors.
#[derive(Debug, Parser)]
#[command(name = "npexec", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a generated workload or one of the built-in case studies.
    Generate(GenerateArgs),
    /// Bound overheads, response times and chain latencies.
    Analyze(AnalyzeArgs),
    /// Run executors over a workload and write traces and metrics.
    Simulate(SimulateArgs),
    /// Per-chain normalized latency reduction between two sources.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Target total utilization in (0, 1].
    #[arg(long, default_value_t = 0.6)]
    utilization: f64,
    /// Task count, `N` or `MIN-MAX`.
    #[arg(long, default_value = "10-200", value_parser = parse_range)]
    tasks: (usize, usize),
    /// Chain count, `N` or `MIN-MAX`.
    #[arg(long, default_value = "5-60", value_parser = parse_range)]
    chains: (usize, usize),
    /// Chain length, `N` or `MIN-MAX`.
    #[arg(long, default_value = "2-15", value_parser = parse_range)]
    chain_length: (usize, usize),
    /// Restrict the period set (ms, comma separated).
    #[arg(long, value_delimiter = ',')]
    periods: Option<Vec<u64>>,
    /// Build timer-headed subscription sequences instead of sampled chains.
    #[arg(long)]
    sequences: bool,
    /// Per-release overhead stored with the set.
    #[arg(long, default_value = "0", value_parser = parse_duration)]
    delta: Duration,
    /// Emit the seven-node case study at 60, 80 or 90 percent instead.
    #[arg(long)]
    casestudy: Option<u32>,
    #[arg(long, env = "NPEXEC_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    taskset: PathBuf,
    #[arg(long, default_value = "rm")]
    policy: PriorityPolicy,
    #[arg(long, default_value = "ro")]
    option: ReleaseOption,
    /// Per-release overhead; defaults to the value stored in the file.
    #[arg(long, value_parser = parse_duration)]
    delta: Option<Duration>,
    /// Report chain bounds computed with the tightened overhead.
    #[arg(long)]
    tighten: bool,
    /// Write tasks.csv, chains.csv and report.json here instead of printing.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(required = true)]
    tasksets: Vec<PathBuf>,
    /// Executor names, comma separated.
    #[arg(long, default_value = "rm-ro", value_delimiter = ',')]
    executor: Vec<String>,
    /// Policy of the `reference` executor.
    #[arg(long, default_value = "rm")]
    policy: PriorityPolicy,
    #[arg(long, conflicts_with = "horizon")]
    hyperperiods: Option<u64>,
    /// Absolute horizon; defaults to the largest phase plus two hyperperiods.
    #[arg(long, value_parser = parse_duration)]
    horizon: Option<Duration>,
    #[arg(long, value_parser = parse_duration)]
    delta: Option<Duration>,
    /// Draw execution times uniformly from `[f * wcet, wcet]`.
    #[arg(long)]
    min_exec_fraction: Option<f64>,
    #[arg(long, env = "NPEXEC_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Concurrent simulations.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Debug, Args)]
struct CompareArgs {
    taskset: PathBuf,
    /// Baseline: `sim:<executor>` or `bound:<policy>-<option>`.
    #[arg(long)]
    a: String,
    /// Candidate, same syntax as `--a`.
    #[arg(long)]
    b: String,
    #[arg(long, conflicts_with = "horizon")]
    hyperperiods: Option<u64>,
    #[arg(long, value_parser = parse_duration)]
    horizon: Option<Duration>,
    #[arg(long, value_parser = parse_duration)]
    delta: Option<Duration>,
    #[arg(long, env = "NPEXEC_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    bins: usize,
    /// Write comparison.csv and histogram.csv here instead of printing.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let parse = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("`{x}`: {e}"));
    match s.split_once('-') {
        Some((lo, hi)) => {
            let (lo, hi) = (parse(lo)?, parse(hi)?);
            if lo > hi {
                return Err(format!("empty range {lo}-{hi}"));
            }
            Ok((lo, hi))
        }
        None => parse(s).map(|n| (n, n)),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(args) => commands::generate(args),
        Command::Analyze(args) => commands::analyze(args),
        Command::Simulate(args) => commands::simulate(args),
        Command::Compare(args) => commands::compare(args),
    };
    match result {
        Ok(code) => code.into(),
        Err(err) => {
            eprintln!("error: {:#}", err.source);
            err.code.into()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_range("50"), Ok((50, 50)));
        assert_eq!(parse_range("2-15"), Ok((2, 15)));
        assert!(parse_range("9-3").is_err());
        assert!(parse_range("x").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
