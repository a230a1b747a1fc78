//! `vcqa`: instance generation, single runs, sweeps, gap studies and
//! annealing-time reports from the command line.
//!
//! Settings come from an optional TOML file; every flag overrides the
//! matching key. The worker count is read from `VCQA_WORKERS` only.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use vcqa_core::annealtime::prediction_from_samples;
use vcqa_core::harness::{
    emit_gap_study, emit_sweep, ensemble, run_gap_study, run_sweep, strategy_setup,
    StoredRun,
};
use vcqa_core::optimize::{minimize_problem, VcqaProblem};
use vcqa_core::schedule::{ramp_profile, ScheduleSet};
use vcqa_core::{Connectivity, DrawRange, ExperimentConfig, ProblemInstance, Strategy};

#[derive(Parser, Debug)]
#[command(name = "vcqa", version, about = "Variational schedule optimization for small quantum annealers")]
struct Cli {
    /// TOML experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

/// Flags that override configuration keys.
#[derive(Args, Debug, Default)]
struct Overrides {
    #[arg(long, global = true)]
    connectivity: Option<Connectivity>,
    /// System sizes, comma separated.
    #[arg(long = "n", global = true, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    #[arg(long, global = true)]
    instances: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Anneal times, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    times: Option<Vec<f64>>,
    /// Strategies: ramp, vcqa-no-aux, vcqa-x, vcqa-y, vcqa-z.
    #[arg(long, global = true, value_delimiter = ',')]
    strategies: Option<Vec<Strategy>>,
    /// half-open or closed.
    #[arg(long, global = true, value_parser = parse_draw_range)]
    draw_range: Option<DrawRange>,
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    max_evals: Option<usize>,
    #[arg(long, global = true)]
    restarts: Option<usize>,
    #[arg(long, global = true)]
    params_per_schedule: Option<usize>,
    /// Integrator convergence tolerance on the final energy.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Use the full-size ensembles.
    #[arg(long, global = true)]
    full_scale: bool,
}

fn parse_draw_range(s: &str) -> std::result::Result<DrawRange, String> {
    match s {
        "half-open" => Ok(DrawRange::HalfOpen),
        "closed" => Ok(DrawRange::Closed),
        other => Err(format!("unknown draw range {other:?}; expected half-open or closed")),
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the configured instance ensemble as JSON.
    Gen,
    /// Propagate one instance under the ramp or given knots.
    Anneal(RunArgs),
    /// Optimize the schedules of one instance.
    Optimize(RunArgs),
    /// Ensemble sweep over sizes, times and strategies.
    Sweep,
    /// Ensemble-averaged spectral gap along the anneal.
    Gap,
    /// Annealing-time report for a stored run.
    Annealtime {
        /// Run file written by `anneal --store` or `optimize --store`.
        run: PathBuf,
    },
    /// Schedule utilities.
    Schedule {
        #[command(subcommand)]
        command: ScheduleCommand,
    },
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Ensemble member to run.
    #[arg(long, default_value_t = 0)]
    index: usize,
    /// Knots for an optimized strategy, comma separated (F1, F2, F3 blocks).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    params: Option<Vec<f64>>,
    /// Write the sampled trajectory as CSV.
    #[arg(long)]
    trajectory: Option<PathBuf>,
    /// Write a run file for `annealtime`.
    #[arg(long)]
    store: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum ScheduleCommand {
    /// Write `x,F1,F2,F3` rows on a uniform grid.
    Dump {
        /// Knots in F1, F2, F3 blocks; the ramp when absent.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        params: Option<Vec<f64>>,
        /// Auxiliary knots are absent (F3 = 0).
        #[arg(long)]
        no_aux: bool,
        #[arg(long, default_value_t = 101)]
        points: usize,
    },
}

fn resolve(path: Option<&Path>, o: &Overrides) -> Result<ExperimentConfig> {
    let mut c = match path {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    if o.full_scale {
        c.instance_count = vcqa_core::harness::FULL_SCALE_INSTANCES;
    }
    if let Some(v) = o.connectivity {
        c.connectivity = v;
    }
    if let Some(v) = &o.sizes {
        c.n = v.clone();
    }
    if let Some(v) = o.instances {
        c.instance_count = v;
    }
    if let Some(v) = o.seed {
        c.seed = v;
    }
    if let Some(v) = &o.times {
        c.t_grid = v.clone();
    }
    if let Some(v) = &o.strategies {
        c.strategies = v.clone();
    }
    if let Some(v) = o.draw_range {
        c.draw_range = v;
    }
    if let Some(v) = o.epsilon {
        c.epsilon = v;
    }
    if let Some(v) = &o.out {
        c.output_dir = v.clone();
    }
    if let Some(v) = o.max_evals {
        c.optimizer.max_evals = v;
    }
    if let Some(v) = o.restarts {
        c.optimizer.restarts = v;
    }
    if let Some(v) = o.params_per_schedule {
        c.optimizer.params_per_schedule = v;
    }
    if let Some(v) = o.tol {
        c.integrator.tol = v;
    }
    if let Some(v) = o.samples {
        c.integrator.n_samples = v;
    }
    c.validate()?;
    Ok(c)
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

/// First size, first time and first strategy of the configuration.
fn single(config: &ExperimentConfig, index: usize) -> Result<(ProblemInstance, f64, Strategy)> {
    let n = config.n[0];
    let instances = ensemble(config, n)?;
    let Some(instance) = instances.get(index) else {
        bail!("instance index {index} outside the ensemble of {}", instances.len());
    };
    Ok((instance.clone(), config.t_grid[0], config.strategies[0]))
}

fn finish_run(
    config: &ExperimentConfig,
    args: &RunArgs,
    instance: ProblemInstance,
    total_time: f64,
    strategy: Strategy,
    params: Option<Vec<f64>>,
) -> Result<serde_json::Value> {
    let setup = strategy_setup(config, &instance, strategy, total_time, params.as_deref())?;
    let (traj, metrics) = vcqa_core::evolve::evaluate(&setup, &config.integrator)?;
    if let Some(path) = &args.trajectory {
        traj.write_csv(std::fs::File::create(path)?)?;
    }
    if let Some(path) = &args.store {
        let run = StoredRun {
            instance: instance.clone(),
            strategy,
            total_time,
            epsilon: config.epsilon,
            params: params.clone(),
            optimizer: config.optimizer,
            integrator: config.integrator,
            samples: traj.samples.clone(),
        };
        run.write(path)?;
    }
    Ok(serde_json::json!({
        "instance": instance,
        "strategy": strategy,
        "total_time": total_time,
        "params": params,
        "metrics": metrics,
    }))
}

fn anneal(config: &ExperimentConfig, args: &RunArgs) -> Result<()> {
    let (instance, t, strategy) = single(config, args.index)?;
    if matches!(strategy, Strategy::Vcqa(_)) && args.params.is_none() {
        bail!("strategy {strategy} needs --params; use `optimize` to search for them");
    }
    let params = if strategy == Strategy::Ramp { None } else { args.params.clone() };
    print_json(&finish_run(config, args, instance, t, strategy, params)?)
}

fn optimize(config: &ExperimentConfig, args: &RunArgs) -> Result<()> {
    let (instance, t, strategy) = single(config, args.index)?;
    let Strategy::Vcqa(aux) = strategy else {
        bail!("the ramp has nothing to optimize; pass --strategies vcqa-z or similar");
    };
    let problem = VcqaProblem::new(&instance, t, aux, &config.optimizer, config.epsilon)?;
    let result = minimize_problem(&problem, &config.optimizer)?;
    let mut value = finish_run(config, args, instance, t, strategy, Some(result.best_params.clone()))?;
    value["optimization"] = serde_json::to_value(&result)?;
    print_json(&value)
}

fn annealtime(path: &Path) -> Result<()> {
    let run = StoredRun::read(path).with_context(|| format!("reading {}", path.display()))?;
    let config = ExperimentConfig { epsilon: run.epsilon, optimizer: run.optimizer, ..Default::default() };
    let setup = strategy_setup(&config, &run.instance, run.strategy, run.total_time, run.params.as_deref())?;
    let report = prediction_from_samples(&run.samples, run.total_time, &setup)?;
    print_json(&report)
}

fn schedule_dump(config: &ExperimentConfig, params: Option<&[f64]>, no_aux: bool, points: usize) -> Result<()> {
    if points < 2 {
        bail!("need at least 2 grid points");
    }
    let set = match params {
        None => ramp_profile(),
        Some(p) => {
            let per = config.optimizer.params_per_schedule;
            let counts = [per, per, if no_aux { 0 } else { per }];
            ScheduleSet::from_params(p, counts, config.optimizer.bounds, config.optimizer.endpoints)?
        }
    };
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(std::io::stdout());
    out.write_record(["x", "F1", "F2", "F3"])?;
    for k in 0..points {
        let x = k as f64 / (points - 1) as f64;
        let [f1, f2, f3] = set.weights(x);
        out.write_record([x, f1, f2, f3].map(|v| v.to_string()))?;
    }
    out.flush()?;
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let config = resolve(cli.config.as_deref(), &cli.overrides)?;
    match &cli.command {
        Command::Gen => {
            let all: Vec<ProblemInstance> = config
                .n
                .iter()
                .map(|&n| ensemble(&config, n))
                .collect::<vcqa_core::Result<Vec<_>>>()?
                .into_iter()
                .flatten()
                .collect();
            print_json(&all)
        }
        Command::Anneal(args) => anneal(&config, args),
        Command::Optimize(args) => optimize(&config, args),
        Command::Sweep => {
            let output = run_sweep(&config)?;
            for path in emit_sweep(&config.output_dir, &config, &output)? {
                eprintln!("wrote {}", path.display());
            }
            vcqa_core::harness::emit::write_sweep_csv(std::io::stdout(), &output.aggregates)?;
            Ok(())
        }
        Command::Gap => {
            let studies = run_gap_study(&config)?;
            for path in emit_gap_study(&config.output_dir, &config, &studies)? {
                eprintln!("wrote {}", path.display());
            }
            for s in &studies {
                for p in &s.profiles {
                    let (at, gap) = p.argmin();
                    println!("N={} {}: minimum gap {gap:.6} at s = {at:.3}", s.n, p.strategy);
                }
                if let Some(f) = s.z_dominance {
                    println!("N={} z-aux >= ramp on {:.1}% of the grid", s.n, 100.0 * f);
                }
            }
            Ok(())
        }
        Command::Annealtime { run } => annealtime(run),
        Command::Schedule { command: ScheduleCommand::Dump { params, no_aux, points } } => {
            schedule_dump(&config, params.as_deref(), *no_aux, *points)
        }
    }
}
