use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use npexec::analysis::{self, AnalysisError, AnalysisReport, ReleaseOption};
use npexec::experiment::{self, ExperimentError, LatencySource};
use npexec::gen::{self, GenError, GenParams};
use npexec::model::{hyperperiod, FileError, PriorityPolicy, Workload};
use npexec::sim::{self, ExecModel, Executor, SimError};
use npexec::time::{ns_to_ms, Duration};
use rayon::prelude::*;

use crate::{AnalyzeArgs, CompareArgs, GenerateArgs, SimulateArgs};

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_UNSCHEDULABLE: u8 = 3;
pub const EXIT_UNSUPPORTED: u8 = 4;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub source: anyhow::Error,
}

impl Failure {
    fn new(code: u8, source: impl Into<anyhow::Error>) -> Self {
        Failure { code, source: source.into() }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(source: anyhow::Error) -> Self {
        Failure::new(EXIT_FAILURE, source)
    }
}

impl From<FileError> for Failure {
    fn from(e: FileError) -> Self {
        let code = if matches!(e, FileError::Io { .. }) { EXIT_FAILURE } else { EXIT_USAGE };
        Failure::new(code, e)
    }
}

impl From<GenError> for Failure {
    fn from(e: GenError) -> Self {
        let code = if matches!(e, GenError::Model(_)) { EXIT_FAILURE } else { EXIT_USAGE };
        Failure::new(code, e)
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        let code = match e {
            SimError::UnknownExecutor(_) | SimError::IncompatiblePolicy(..) | SimError::NoPriority(_) => EXIT_USAGE,
            SimError::InvalidHorizon => EXIT_USAGE,
            SimError::EdfWithoutDeadline(_) => EXIT_UNSUPPORTED,
            _ => EXIT_FAILURE,
        };
        Failure::new(code, e)
    }
}

impl From<AnalysisError> for Failure {
    fn from(e: AnalysisError) -> Self {
        let code = match e {
            AnalysisError::Subscription(_) | AnalysisError::UnsupportedPolicy(_) => EXIT_UNSUPPORTED,
            AnalysisError::OverheadUnbounded(_) => EXIT_UNSCHEDULABLE,
            _ => EXIT_FAILURE,
        };
        Failure::new(code, e)
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Analysis(e) => e.into(),
            ExperimentError::Sim(e) => e.into(),
            ExperimentError::Gen(e) => e.into(),
            ExperimentError::Model(e) => Failure::new(EXIT_FAILURE, e),
        }
    }
}

type CmdResult = Result<u8, Failure>;

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(())
}

pub fn generate(args: GenerateArgs) -> CmdResult {
    let workload = match args.casestudy {
        Some(util) => gen::casestudy_workload(util)?,
        None => {
            let mut params = GenParams::default()
                .with_utilization(args.utilization)
                .with_tasks(args.tasks.0, args.tasks.1)
                .with_chains(args.chains.0, args.chains.1)
                .with_chain_length(args.chain_length.0, args.chain_length.1)
                .with_delta(args.delta)
                .with_seed(args.seed);
            if let Some(periods) = &args.periods {
                params = params.with_periods_ms(periods);
            }
            if args.sequences {
                gen::generate_sequence_workload(&params)?
            } else {
                gen::generate_workload(&params)?
            }
        }
    };
    workload.save(&args.output)?;
    let ts = &workload.taskset;
    let h = hyperperiod(ts).map(ns_to_ms).map_err(|e| Failure::new(EXIT_FAILURE, e))?;
    println!(
        "{}: {} tasks, utilization {:.4}, hyperperiod {} ms, {} chains",
        args.output.display(),
        ts.len(),
        ts.utilization(),
        h,
        workload.chains.len()
    );
    Ok(EXIT_OK)
}

fn tightened_view(report: &AnalysisReport) -> AnalysisReport {
    let mut r = report.clone();
    for c in &mut r.chains {
        c.latency_bound = c.tightened_latency_bound;
    }
    r
}

pub fn analyze(args: AnalyzeArgs) -> CmdResult {
    let workload = Workload::load(&args.taskset)?;
    let delta = args.delta.unwrap_or(workload.taskset.delta());
    let report = analysis::analyze(&workload.taskset, args.policy, args.option, delta, &workload.chains)?;
    let shown = if args.tighten { tightened_view(&report) } else { report.clone() };
    match &args.out_dir {
        Some(dir) => {
            ensure_dir(dir)?;
            write(&dir.join("tasks.csv"), &shown.tasks_csv())?;
            write(&dir.join("chains.csv"), &shown.chains_csv())?;
            write(&dir.join("report.json"), &report.to_json())?;
            println!(
                "{} {}-{}: schedulable = {}",
                args.taskset.display(),
                args.policy,
                args.option,
                report.schedulable
            );
        }
        None => {
            print!("{}", shown.tasks_csv());
            println!();
            print!("{}", shown.chains_csv());
        }
    }
    Ok(if report.schedulable { EXIT_OK } else { EXIT_UNSCHEDULABLE })
}

fn horizon_for(workload: &Workload, hyperperiods: Option<u64>, horizon: Option<Duration>) -> Result<Duration, Failure> {
    if let Some(h) = horizon {
        return Ok(h);
    }
    let ts = &workload.taskset;
    match hyperperiods {
        Some(n) => {
            let h = hyperperiod(ts).map_err(|e| Failure::new(EXIT_USAGE, e))?;
            let max_phase = ts.timers().map(|t| t.phase).max().unwrap_or(0);
            Ok(max_phase + n * h)
        }
        None => Ok(sim::default_horizon(ts)?),
    }
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "taskset".into())
}

struct Run {
    label: String,
    workload: Workload,
    executor: Executor,
    horizon: Duration,
    out: PathBuf,
}

fn execute(run: &Run, seed: u64) -> Result<String, Failure> {
    let trace = run.executor.run(&run.workload.taskset, run.horizon, seed)?;
    let metrics = sim::compute_metrics(&trace, &run.workload.taskset, &run.workload.chains)?;
    ensure_dir(&run.out)?;
    write(&run.out.join("trace.csv"), &sim::trace_csv(&trace))?;
    write(&run.out.join("drops.csv"), &sim::drops_csv(&trace))?;
    write(&run.out.join("metrics.json"), &metrics.to_json())?;
    let misses: u64 = metrics.tasks.iter().map(|t| t.deadline_misses).sum();
    Ok(format!(
        "{}: {} jobs, {} dropped, {} deadline misses -> {}",
        run.label,
        trace.jobs.len(),
        trace.total_dropped(),
        misses,
        run.out.display()
    ))
}

pub fn simulate(args: SimulateArgs) -> CmdResult {
    let mut runs = Vec::new();
    let multi = args.tasksets.len() * args.executor.len() > 1;
    for path in &args.tasksets {
        let workload = Workload::load(path)?;
        let delta = args.delta.unwrap_or(workload.taskset.delta());
        let horizon = horizon_for(&workload, args.hyperperiods, args.horizon)?;
        for name in &args.executor {
            let mut executor = Executor::from_name(name, delta, args.policy)?;
            if let (Some(f), Executor::Sim(cfg)) = (args.min_exec_fraction, &mut executor) {
                if !(0.0..=1.0).contains(&f) {
                    return Err(Failure::new(EXIT_USAGE, anyhow!("--min-exec-fraction must lie in [0, 1]")));
                }
                *cfg = cfg.clone().with_exec_model(ExecModel::Uniform { min_fraction: f });
            }
            let label = format!("{}/{}", stem(path), name);
            let out = if multi { args.out_dir.join(format!("{}-{}", stem(path), name)) } else { args.out_dir.clone() };
            runs.push(Run { label, workload: workload.clone(), executor, horizon, out });
        }
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(args.jobs.max(1)).build().context("building worker pool")?;
    let results: Vec<Result<String, Failure>> =
        pool.install(|| runs.par_iter().map(|r| execute(r, args.seed)).collect());
    for r in results {
        println!("{}", r?);
    }
    Ok(EXIT_OK)
}

fn parse_source(text: &str, delta: Duration, horizon: Duration, seed: u64) -> Result<LatencySource, Failure> {
    let (kind, name) = text.split_once(':').unwrap_or(("sim", text));
    match kind {
        "sim" => Ok(LatencySource::Simulated {
            executor: Executor::from_name(name, delta, PriorityPolicy::RateMonotonic)?,
            horizon,
            seed,
        }),
        "bound" => {
            let bad = || Failure::new(EXIT_USAGE, anyhow!("bound source must look like `bound:rm-ro`, got `{text}`"));
            let (policy, option) = name.split_once('-').ok_or_else(bad)?;
            Ok(LatencySource::Bound {
                policy: policy.parse().map_err(|_| bad())?,
                option: option.parse::<ReleaseOption>().map_err(|_| bad())?,
                delta,
            })
        }
        other => {
            Err(Failure::new(EXIT_USAGE, anyhow!("unknown latency source kind `{other}` (expected sim or bound)")))
        }
    }
}

pub fn compare(args: CompareArgs) -> CmdResult {
    if args.bins == 0 {
        return Err(Failure::new(EXIT_USAGE, anyhow!("--bins must be positive")));
    }
    let workload = Workload::load(&args.taskset)?;
    let delta = args.delta.unwrap_or(workload.taskset.delta());
    let horizon = horizon_for(&workload, args.hyperperiods, args.horizon)?;
    let a = parse_source(&args.a, delta, horizon, args.seed)?;
    let b = parse_source(&args.b, delta, horizon, args.seed)?;
    let la = experiment::chain_latencies(&workload, &a)?;
    let lb = experiment::chain_latencies(&workload, &b)?;
    let rows = experiment::compare(&la, &lb);
    let reductions: Vec<f64> = rows.iter().filter_map(|r| r.reduction).collect();
    let bins = experiment::histogram(&reductions, args.bins, -1.0, 1.0);
    match &args.out_dir {
        Some(dir) => {
            ensure_dir(dir)?;
            write(&dir.join("comparison.csv"), &experiment::comparison_csv(&rows))?;
            write(&dir.join("histogram.csv"), &experiment::histogram_csv(&bins))?;
        }
        None => print!("{}", experiment::comparison_csv(&rows)),
    }
    let missing = rows.len() - reductions.len();
    let median = experiment::median(&reductions).map_or("n/a".to_string(), |m| format!("{m:.4}"));
    eprintln!("{} chains, {} compared, {} missing, median reduction {}", rows.len(), reductions.len(), missing, median);
    Ok(EXIT_OK)
}
