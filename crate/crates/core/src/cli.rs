//! Command-line front end.

use std::ffi::OsString;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{ModelConfig, ModelVisitor, RunConfig};
use crate::error::{Error, Result};
use crate::experiments::report::{join_times, write_json, write_multi_trace_csv, write_simulations_csv, write_trace_csv};
use crate::experiments::{
    counterexample_check, evaluate_schedule, optimize_offline, program_key, regular_schedule, run_online_pipeline,
    BatchOutcome, CounterexampleSettings, ExperimentConfig, IndicatorSummary, ObjectiveCost,
};
use crate::filter::Schedule;
use crate::model::SystemModel;
use crate::noise::StreamKey;
use crate::objective::{AcquiredPrefix, CostSettings, ObjectiveEstimate};
use crate::optimizers::{CostFunction, OptimizationResult, OptimizerChoice, TracePoint};
use crate::fmt_float;

#[derive(Debug, Parser)]
#[command(name = "measure-times", version, about = "Choose when to measure a particle-filtered system")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimize an offline schedule and write its convergence trace.
    Optimize(Common),
    /// Compare a schedule with the regular one over simulated runs.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// `regular`, `optimize`, or a file listing the times.
        #[arg(long, default_value = "optimize")]
        schedule: String,
    },
    /// Re-optimize after every measurement and compare with the regular schedule.
    Online(Common),
    /// Run several optimizers on the same offline problem.
    CompareOptimizers(Common),
    /// Evaluate the example where an adaptive policy beats fixed schedules.
    Counterexample(Common),
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Number of simulations.
    #[arg(long)]
    pub sims: Option<usize>,
    /// Monte-Carlo draws per objective evaluation.
    #[arg(long)]
    pub draws: Option<usize>,
    /// Particles inside objective evaluations.
    #[arg(long)]
    pub particles: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let e = &mut cfg.experiment;
        if let Some(v) = self.seed {
            e.seed = v;
        }
        if let Some(v) = &self.out_dir {
            e.out_dir = v.clone();
        }
        if let Some(v) = self.sims {
            e.simulations = v;
        }
        if let Some(v) = self.draws {
            e.draws = v;
        }
        if let Some(v) = self.particles {
            e.particles = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// 3 for numerical failures, 2 for everything the user can fix.
pub fn exit_code(e: &Error) -> i32 {
    match e.root() {
        Error::Numerical(_) | Error::DegenerateWeights { .. } => 3,
        _ => 2,
    }
}

fn common(command: &Command) -> &Common {
    match command {
        Command::Optimize(c) | Command::Online(c) | Command::CompareOptimizers(c) | Command::Counterexample(c) => c,
        Command::Simulate { common, .. } => common,
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    let workers = common(&cli.command).workers;
    if workers == Some(0) {
        return Err(Error::invalid("--workers must be at least 1"));
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(k) = workers {
        pool = pool.num_threads(k);
    }
    let pool = pool.build().map_err(|e| Error::invalid(e.to_string()))?;
    pool.install(|| dispatch(cli.command))
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Optimize(c) => {
            let cfg = c.load()?;
            cfg.with_model(OptimizeCmd { cfg: &cfg })?
        }
        Command::Simulate { common, schedule } => {
            let cfg = common.load()?;
            cfg.with_model(SimulateCmd { cfg: &cfg, source: &schedule })?
        }
        Command::Online(c) => {
            let cfg = c.load()?;
            cfg.with_model(OnlineCmd { cfg: &cfg })?
        }
        Command::CompareOptimizers(c) => {
            let cfg = c.load()?;
            cfg.with_model(CompareCmd { cfg: &cfg })?
        }
        Command::Counterexample(c) => counterexample(&c),
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let file = File::create(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(BufWriter::new(file))
}

fn root_key(cfg: &RunConfig) -> StreamKey {
    StreamKey::new(cfg.experiment.seed)
}

/// One estimate of the offline objective for `schedule`, drawn from the
/// same noise family as the optimizer's evaluations.
fn offline_cost<M: SystemModel>(model: &M, cfg: &RunConfig, schedule: &Schedule, evaluation: u64) -> Result<ObjectiveEstimate> {
    let prefix = AcquiredPrefix::empty();
    let counts = cfg.experiment.counts();
    let cost = ObjectiveCost {
        model,
        prefix: &prefix,
        count: schedule.len(),
        settings: CostSettings { draws: counts.draws, particles: counts.particles },
        key: program_key(root_key(cfg), &prefix),
    };
    cost.evaluate(schedule.times(), evaluation)
}

fn print_summary(batch: &BatchOutcome) {
    match &batch.summary {
        Some(s) => {
            println!("simulations: {}", batch.records.len());
            println!("mean gain: {}", fmt_float(s.mean_gain));
            println!("std gain: {}", fmt_float(s.std_gain));
            println!("median gain: {}", fmt_float(s.median_gain));
            println!("proportion positive: {}", fmt_float(s.proportion_positive));
        }
        None => println!("simulations: {} (no defined gain)", batch.records.len()),
    }
    if batch.degenerate > 0 {
        println!("degenerate simulations (zero error): {}", batch.degenerate);
    }
}

#[derive(Serialize)]
struct OptimizeSummary<'a> {
    config: &'a RunConfig,
    optimization: &'a OptimizationResult,
    regular_schedule: Vec<usize>,
    regular_cost: ObjectiveEstimate,
}

struct OptimizeCmd<'a> {
    cfg: &'a RunConfig,
}

impl ModelVisitor for OptimizeCmd<'_> {
    type Output = Result<()>;

    fn visit<M: SystemModel>(self, model: &M) -> Result<()> {
        let cfg = self.cfg;
        let counts = cfg.experiment.counts();
        let result = optimize_offline(model, &cfg.optimizer, &counts, root_key(cfg))?;
        let regular = regular_schedule(model.horizon(), counts.measurements)?;
        let regular_cost = offline_cost(model, cfg, &regular, result.evaluations as u64)?;
        let dir = &cfg.experiment.out_dir;
        write_trace_csv(create(dir, "trace.csv")?, &result.trace)?;
        let summary = OptimizeSummary {
            config: cfg,
            optimization: &result,
            regular_schedule: regular.times().to_vec(),
            regular_cost,
        };
        write_json(create(dir, "optimize.json")?, &summary)?;
        println!("schedule: {}", join_times(&result.times, " "));
        match result.cost {
            Some(c) => println!("cost: {}", fmt_float(c)),
            None => println!("cost: not evaluated (only one admissible schedule)"),
        }
        println!("evaluations: {}", result.evaluations);
        println!("regular schedule: {regular}");
        println!("regular cost: {}", fmt_float(regular_cost.value));
        println!("trace: {}", dir.join("trace.csv").display());
        Ok(())
    }
}

#[derive(Serialize)]
struct SimulateSummary<'a> {
    config: &'a RunConfig,
    schedule_source: &'a str,
    schedule: &'a [usize],
    optimization: Option<&'a OptimizationResult>,
    summary: Option<IndicatorSummary>,
    degenerate: usize,
}

struct SimulateCmd<'a> {
    cfg: &'a RunConfig,
    source: &'a str,
}

fn read_schedule(path: &Path, horizon: usize) -> Result<Schedule> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read schedule file {}: {e}", path.display())))?;
    let times = text
        .split(|c: char| c.is_whitespace() || c == ',' || c == ';')
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<usize>().map_err(|_| Error::Config(format!("{}: bad time {s:?}", path.display()))))
        .collect::<Result<Vec<_>>>()?;
    Schedule::new(times, horizon)
}

impl ModelVisitor for SimulateCmd<'_> {
    type Output = Result<()>;

    fn visit<M: SystemModel>(self, model: &M) -> Result<()> {
        let cfg = self.cfg;
        let counts = cfg.experiment.counts();
        let root = root_key(cfg);
        let mut optimization = None;
        let schedule = match self.source {
            "regular" => regular_schedule(model.horizon(), counts.measurements)?,
            "optimize" => {
                let r = optimize_offline(model, &cfg.optimizer, &counts, root)?;
                let s = Schedule::new(r.times.clone(), model.horizon())?;
                optimization = Some(r);
                s
            }
            path => read_schedule(Path::new(path), model.horizon())?,
        };
        let batch = evaluate_schedule(model, &schedule, &counts, root)?;
        let dir = &cfg.experiment.out_dir;
        write_simulations_csv(create(dir, "simulations.csv")?, &batch.records)?;
        let summary = SimulateSummary {
            config: cfg,
            schedule_source: self.source,
            schedule: schedule.times(),
            optimization: optimization.as_ref(),
            summary: batch.summary,
            degenerate: batch.degenerate,
        };
        write_json(create(dir, "summary.json")?, &summary)?;
        println!("schedule: {schedule}");
        print_summary(&batch);
        Ok(())
    }
}

#[derive(Serialize)]
struct OnlineSummary<'a> {
    config: &'a RunConfig,
    first_program: &'a OptimizationResult,
    evaluations: usize,
    summary: Option<IndicatorSummary>,
    degenerate: usize,
}

struct OnlineCmd<'a> {
    cfg: &'a RunConfig,
}

impl ModelVisitor for OnlineCmd<'_> {
    type Output = Result<()>;

    fn visit<M: SystemModel>(self, model: &M) -> Result<()> {
        let cfg = self.cfg;
        let out = run_online_pipeline(model, &cfg.optimizer, &cfg.experiment.counts(), root_key(cfg))?;
        let dir = &cfg.experiment.out_dir;
        write_simulations_csv(create(dir, "online_simulations.csv")?, &out.batch.records)?;
        let summary = OnlineSummary {
            config: cfg,
            first_program: &out.first_program,
            evaluations: out.evaluations,
            summary: out.batch.summary,
            degenerate: out.batch.degenerate,
        };
        write_json(create(dir, "online_summary.json")?, &summary)?;
        println!("first program schedule: {}", join_times(&out.first_program.times, " "));
        println!("evaluations: {}", out.evaluations);
        print_summary(&out.batch);
        Ok(())
    }
}

#[derive(Serialize)]
struct ComparedOptimizer<'a> {
    optimizer: &'a OptimizerChoice,
    result: &'a OptimizationResult,
}

#[derive(Serialize)]
struct CompareSummary<'a> {
    config: &'a RunConfig,
    optimizers: Vec<ComparedOptimizer<'a>>,
    regular_schedule: Vec<usize>,
    regular_cost: ObjectiveEstimate,
}

struct CompareCmd<'a> {
    cfg: &'a RunConfig,
}

impl ModelVisitor for CompareCmd<'_> {
    type Output = Result<()>;

    fn visit<M: SystemModel>(self, model: &M) -> Result<()> {
        let cfg = self.cfg;
        if cfg.compare.is_empty() {
            return Err(Error::Config("no optimizers listed under [[compare]]".into()));
        }
        let counts: ExperimentConfig = cfg.experiment.counts();
        let results = cfg
            .compare
            .iter()
            .map(|opt| optimize_offline(model, opt, &counts, root_key(cfg)))
            .collect::<Result<Vec<_>>>()?;
        let regular = regular_schedule(model.horizon(), counts.measurements)?;
        let longest = results.iter().map(|r| r.evaluations).max().unwrap_or(0);
        let regular_cost = offline_cost(model, cfg, &regular, longest as u64)?;
        let regular_line = [
            TracePoint { evaluations: 0, best_cost: regular_cost.value, population_mean: None },
            TracePoint { evaluations: longest, best_cost: regular_cost.value, population_mean: None },
        ];
        let mut traces: Vec<(&str, &[TracePoint])> =
            cfg.compare.iter().zip(&results).map(|(o, r)| (o.label(), r.trace.as_slice())).collect();
        traces.push(("regular", &regular_line));
        let dir = &cfg.experiment.out_dir;
        write_multi_trace_csv(create(dir, "compare.csv")?, traces)?;
        let summary = CompareSummary {
            config: cfg,
            optimizers: cfg.compare.iter().zip(&results).map(|(optimizer, result)| ComparedOptimizer { optimizer, result }).collect(),
            regular_schedule: regular.times().to_vec(),
            regular_cost,
        };
        write_json(create(dir, "compare.json")?, &summary)?;
        for (opt, r) in cfg.compare.iter().zip(&results) {
            let cost = r.cost.map_or_else(|| "-".to_string(), fmt_float);
            println!("{}: cost {cost} after {} evaluations, schedule {}", opt.label(), r.evaluations, join_times(&r.times, " "));
        }
        println!("regular: cost {}, schedule {regular}", fmt_float(regular_cost.value));
        Ok(())
    }
}

fn counterexample(c: &Common) -> Result<()> {
    let cfg = c.load()?;
    let mut settings = CounterexampleSettings::default();
    if let ModelConfig::Counterexample(m) = cfg.model {
        settings.model = m;
    }
    if let Some(k) = c.draws {
        settings.draws = k;
    }
    if let Some(p) = c.particles {
        settings.particles = p;
    }
    let report = counterexample_check(&settings, root_key(&cfg))?;
    #[derive(Serialize)]
    struct Out<'a> {
        settings: &'a CounterexampleSettings,
        seed: u64,
        report: &'a crate::experiments::CounterexampleReport,
    }
    let dir = &cfg.experiment.out_dir;
    write_json(create(dir, "counterexample.json")?, &Out { settings: &settings, seed: cfg.experiment.seed, report: &report })?;
    let show = |e: &ObjectiveEstimate| format!("{} (std error {})", fmt_float(e.value), fmt_float(e.std_error));
    println!("offline schedule: {}", join_times(&report.offline.times, " "));
    for (times, count) in &report.online_schedules {
        println!("online schedule: {} ({count} of {})", join_times(times, " "), settings.draws);
    }
    println!("adaptive policy cost v0: {}", show(&report.costs.v0));
    println!("online cost f0: {}", show(&report.costs.f0));
    println!("offline cost j0: {}", show(&report.costs.j0));
    println!("verdict: {}", report.verdict.describe());
    Ok(())
}
