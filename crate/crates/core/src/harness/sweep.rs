//! Ensemble sweeps and gap studies.
//!
//! Every (N, T, instance, strategy) task is independent; tasks run on a
//! bounded rayon pool and records are sorted by key afterwards, so results
//! do not depend on the worker count.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::instances::{instance_from_seed, DrawRange};
use crate::error::{Error, Result};
use crate::evolve::evaluate;
use crate::hamiltonian::{AnnealSetup, Axis, Connectivity, ProblemInstance};
use crate::optimize::{minimize_problem, Strategy, VcqaProblem};
use crate::schedule::{ramp_profile, EndpointSlopes};
use crate::seeding::child_seed;
use crate::spectrum::{gap_profile, mean_profile, uniform_grid, GapProfile};

/// Environment variable holding the worker count.
pub const WORKERS_ENV: &str = "VCQA_WORKERS";

/// Conventions a record was produced under.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conventions {
    /// Third Hermite basis function.
    pub h3: String,
    pub endpoint_slopes: EndpointSlopes,
    /// Rule for the `R31(1) <H_aux>_T` term of the annealing-time relation.
    pub boundary_term: String,
    pub draw_range: DrawRange,
}

impl Conventions {
    pub fn of(config: &ExperimentConfig) -> Self {
        Self {
            h3: "t^2 (t - 1)".into(),
            endpoint_slopes: config.optimizer.endpoints,
            boundary_term: format!("included when |value| > {:e}", crate::annealtime::BOUNDARY_THRESHOLD),
            draw_range: config.draw_range,
        }
    }
}

/// Outcome of one (N, T, instance, strategy) task. Failed runs keep their
/// reason and carry no metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub connectivity: Connectivity,
    pub n: usize,
    pub instance_index: usize,
    pub instance_seed: u64,
    pub strategy: Strategy,
    pub total_time: f64,
    pub ok: bool,
    pub error: Option<String>,
    pub percent_error: Option<f64>,
    pub fidelity: Option<f64>,
    pub final_energy: Option<f64>,
    pub ground_energy: Option<f64>,
    pub best_params: Option<Vec<f64>>,
    pub best_cost: Option<f64>,
    pub eval_count: usize,
    pub wall_time_s: f64,
    pub conventions: Conventions,
}

impl ResultRecord {
    /// Sort key; `T` compares by total order.
    fn key(&self) -> (usize, u64, &'static str, usize) {
        (self.n, self.total_time.to_bits(), self.strategy.name(), self.instance_index)
    }
}

/// Mean figures of merit over the successful records of one (N, T, strategy).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub n: usize,
    pub total_time: f64,
    pub strategy: Strategy,
    /// `NaN` when no run succeeded.
    pub mean_err_pct: f64,
    pub mean_fidelity: f64,
    pub n_ok: usize,
    pub n_fail: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub records: Vec<ResultRecord>,
    pub aggregates: Vec<Aggregate>,
}

/// Pool sized by `VCQA_WORKERS`, or rayon's default when unset.
pub fn worker_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Config(format!("{WORKERS_ENV}={v:?} is not a positive integer")))?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| Error::Config(format!("worker pool: {e}")))
}

/// Child seed of instance `index` in the size-`n` ensemble. Sizes get
/// disjoint streams.
pub fn instance_seed(config: &ExperimentConfig, n: usize, index: usize) -> u64 {
    child_seed(child_seed(config.seed, n as u64), index as u64)
}

pub fn ensemble(config: &ExperimentConfig, n: usize) -> Result<Vec<ProblemInstance>> {
    (0..config.instance_count)
        .map(|i| {
            instance_from_seed(config.connectivity, n, instance_seed(config, n, i), config.draw_range, config.heisenberg)
        })
        .collect()
}

/// Setup of `strategy` at the given knots (ignored for the ramp).
pub fn strategy_setup(
    config: &ExperimentConfig,
    instance: &ProblemInstance,
    strategy: Strategy,
    total_time: f64,
    params: Option<&[f64]>,
) -> Result<AnnealSetup> {
    match (strategy, params) {
        (Strategy::Ramp, _) => AnnealSetup::for_instance(instance, ramp_profile(), None, total_time, config.epsilon),
        (Strategy::Vcqa(aux), Some(p)) => {
            VcqaProblem::new(instance, total_time, aux, &config.optimizer, config.epsilon)?.setup(p)
        }
        (Strategy::Vcqa(_), None) => Err(Error::Validation("optimized strategy needs parameters".into())),
    }
}

struct Outcome {
    percent_error: f64,
    fidelity: f64,
    final_energy: f64,
    ground_energy: f64,
    best_params: Option<Vec<f64>>,
    best_cost: Option<f64>,
    eval_count: usize,
}

fn execute(config: &ExperimentConfig, instance: &ProblemInstance, strategy: Strategy, total_time: f64) -> Result<Outcome> {
    let (setup, opt) = match strategy {
        Strategy::Ramp => (strategy_setup(config, instance, strategy, total_time, None)?, None),
        Strategy::Vcqa(aux) => {
            let problem = VcqaProblem::new(instance, total_time, aux, &config.optimizer, config.epsilon)?;
            let result = minimize_problem(&problem, &config.optimizer)?;
            (problem.setup(&result.best_params)?, Some(result))
        }
    };
    let (_, m) = evaluate(&setup, &config.integrator)?;
    Ok(Outcome {
        percent_error: m.percent_error,
        fidelity: m.fidelity,
        final_energy: m.final_energy,
        ground_energy: m.ground_energy,
        eval_count: opt.as_ref().map_or(0, |r| r.eval_count),
        best_cost: opt.as_ref().map(|r| r.best_cost),
        best_params: opt.map(|r| r.best_params),
    })
}

/// Runs one task; failures become records with `ok = false`.
pub fn run_task(
    config: &ExperimentConfig,
    n: usize,
    instance_index: usize,
    strategy: Strategy,
    total_time: f64,
) -> ResultRecord {
    let seed = instance_seed(config, n, instance_index);
    let start = Instant::now();
    let outcome = instance_from_seed(config.connectivity, n, seed, config.draw_range, config.heisenberg)
        .and_then(|inst| execute(config, &inst, strategy, total_time));
    let mut record = ResultRecord {
        connectivity: config.connectivity,
        n,
        instance_index,
        instance_seed: seed,
        strategy,
        total_time,
        ok: false,
        error: None,
        percent_error: None,
        fidelity: None,
        final_energy: None,
        ground_energy: None,
        best_params: None,
        best_cost: None,
        eval_count: 0,
        wall_time_s: 0.0,
        conventions: Conventions::of(config),
    };
    match outcome {
        Ok(o) => {
            record.ok = true;
            record.percent_error = Some(o.percent_error);
            record.fidelity = Some(o.fidelity);
            record.final_energy = Some(o.final_energy);
            record.ground_energy = Some(o.ground_energy);
            record.best_params = o.best_params;
            record.best_cost = o.best_cost;
            record.eval_count = o.eval_count;
        }
        Err(e) => {
            log::warn!("task N={n} T={total_time} instance={instance_index} {strategy} failed: {e}");
            record.error = Some(e.to_string());
        }
    }
    record.wall_time_s = start.elapsed().as_secs_f64();
    record
}

pub fn aggregate(records: &[ResultRecord]) -> Vec<Aggregate> {
    let mut out: Vec<Aggregate> = Vec::new();
    for r in records {
        let same = |a: &Aggregate| a.n == r.n && a.total_time == r.total_time && a.strategy == r.strategy;
        if !out.iter().any(same) {
            let group: Vec<&ResultRecord> = records
                .iter()
                .filter(|q| q.n == r.n && q.total_time == r.total_time && q.strategy == r.strategy)
                .collect();
            let ok: Vec<&ResultRecord> = group.iter().copied().filter(|q| q.ok).collect();
            let mean = |f: fn(&ResultRecord) -> Option<f64>| {
                if ok.is_empty() {
                    f64::NAN
                } else {
                    ok.iter().map(|q| f(q).unwrap_or(f64::NAN)).sum::<f64>() / ok.len() as f64
                }
            };
            out.push(Aggregate {
                n: r.n,
                total_time: r.total_time,
                strategy: r.strategy,
                mean_err_pct: mean(|q| q.percent_error),
                mean_fidelity: mean(|q| q.fidelity),
                n_ok: ok.len(),
                n_fail: group.len() - ok.len(),
            });
        }
    }
    out
}

pub fn sort_records(records: &mut [ResultRecord]) {
    records.sort_by(|a, b| a.key().cmp(&b.key()));
}

/// Every (N, T, instance, strategy) combination of `config`.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepOutput> {
    config.validate()?;
    let mut tasks = Vec::new();
    for &n in &config.n {
        for &t in &config.t_grid {
            for i in 0..config.instance_count {
                for &s in &config.strategies {
                    tasks.push((n, i, s, t));
                }
            }
        }
    }
    let pool = worker_pool()?;
    let mut records: Vec<ResultRecord> =
        pool.install(|| tasks.par_iter().map(|&(n, i, s, t)| run_task(config, n, i, s, t)).collect());
    sort_records(&mut records);
    let aggregates = aggregate(&records);
    Ok(SweepOutput { records, aggregates })
}

/// Re-runs the task behind `record` under `config`.
pub fn replay_record(record: &ResultRecord, config: &ExperimentConfig) -> Result<ResultRecord> {
    if record.connectivity != config.connectivity || record.conventions != Conventions::of(config) {
        return Err(Error::Validation("record was produced under a different configuration".into()));
    }
    if record.instance_seed != instance_seed(config, record.n, record.instance_index) {
        return Err(Error::Validation("record seed does not match the configuration seed".into()));
    }
    Ok(run_task(config, record.n, record.instance_index, record.strategy, record.total_time))
}

/// Mean gap profiles of one ensemble size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapStudy {
    pub connectivity: Connectivity,
    pub n: usize,
    pub instance_seeds: Vec<u64>,
    pub profiles: Vec<GapProfile>,
    /// Instances behind each profile, in `profiles` order.
    pub instances_used: Vec<usize>,
    /// Fraction of grid points where the z-aux mean gap is at least the
    /// ramp mean gap; present when both strategies were studied.
    pub z_dominance: Option<f64>,
}

impl GapStudy {
    pub fn profile(&self, strategy: Strategy) -> Option<&GapProfile> {
        self.profiles.iter().find(|p| p.strategy == strategy.name())
    }

    /// Non-gating diagnostic: z-aux dominates the ramp on at least 90% of the grid.
    pub fn z_dominates(&self) -> Option<bool> {
        self.z_dominance.map(|f| f >= 0.9)
    }
}

fn instance_profile(
    config: &ExperimentConfig,
    instance: &ProblemInstance,
    strategy: Strategy,
    grid: &[f64],
) -> Result<GapProfile> {
    let t = config.gap.optimize_time;
    let setup = match strategy {
        Strategy::Ramp => strategy_setup(config, instance, strategy, t, None)?,
        Strategy::Vcqa(aux) => {
            let problem = VcqaProblem::new(instance, t, aux, &config.optimizer, config.epsilon)?;
            let best = minimize_problem(&problem, &config.optimizer)?;
            problem.setup(&best.best_params)?
        }
    };
    gap_profile(&setup, grid, strategy.name())
}

/// Ensemble-averaged `E1 - E0` along `s` for every configured strategy and size.
pub fn run_gap_study(config: &ExperimentConfig) -> Result<Vec<GapStudy>> {
    config.validate()?;
    let grid = uniform_grid(config.gap.grid_points);
    let pool = worker_pool()?;
    let mut studies = Vec::new();
    for &n in &config.n {
        let instances = ensemble(config, n)?;
        let mut profiles = Vec::new();
        let mut used = Vec::new();
        for &strategy in &config.strategies {
            let count = match strategy {
                Strategy::Ramp => instances.len(),
                Strategy::Vcqa(_) => config.gap.optimized_instances.unwrap_or(instances.len()).min(instances.len()),
            };
            let per: Vec<GapProfile> = pool.install(|| {
                instances[..count]
                    .par_iter()
                    .map(|inst| instance_profile(config, inst, strategy, &grid))
                    .collect::<Result<Vec<_>>>()
            })?;
            profiles.push(mean_profile(&per, strategy.name())?);
            used.push(count);
        }
        let find = |s: Strategy| profiles.iter().find(|p| p.strategy == s.name());
        let z_dominance = match (find(Strategy::Ramp), find(Strategy::Vcqa(Some(Axis::Z)))) {
            (Some(r), Some(z)) => {
                let hits = r.gaps.iter().zip(&z.gaps).filter(|(a, b)| b >= a).count();
                Some(hits as f64 / r.gaps.len() as f64)
            }
            _ => None,
        };
        studies.push(GapStudy {
            connectivity: config.connectivity,
            n,
            instance_seeds: instances.iter().map(|i| i.seed).collect(),
            profiles,
            instances_used: used,
            z_dominance,
        });
    }
    Ok(studies)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimize::OptimizerConfig;

    fn tiny() -> ExperimentConfig {
        ExperimentConfig {
            n: vec![2],
            instance_count: 1,
            t_grid: vec![2.0],
            strategies: vec![Strategy::Ramp],
            ..Default::default()
        }
    }

    #[test]
    fn single_ramp_record_equals_aggregate() {
        let out = run_sweep(&tiny()).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.aggregates.len(), 1);
        let (r, a) = (&out.records[0], &out.aggregates[0]);
        assert!(r.ok);
        assert_eq!(a.mean_err_pct, r.percent_error.unwrap());
        assert_eq!(a.mean_fidelity, r.fidelity.unwrap());
        assert_eq!((a.n_ok, a.n_fail), (1, 0));
    }

    #[test]
    fn failures_are_recorded_and_excluded() {
        let ok = run_task(&tiny(), 2, 0, Strategy::Ramp, 1.0);
        let mut bad = run_task(&tiny(), 2, 0, Strategy::Ramp, -1.0);
        assert!(!bad.ok && bad.error.is_some() && bad.percent_error.is_none());
        bad.total_time = 1.0;
        let agg = aggregate(&[ok.clone(), bad]);
        assert_eq!(agg.len(), 1);
        assert_eq!((agg[0].n_ok, agg[0].n_fail), (1, 1));
        assert_eq!(agg[0].mean_err_pct, ok.percent_error.unwrap());
    }

    #[test]
    fn aggregates_are_means_and_records_sorted() {
        let config = ExperimentConfig {
            n: vec![3, 2],
            instance_count: 3,
            t_grid: vec![1.0, 2.0],
            strategies: vec![Strategy::Ramp],
            ..Default::default()
        };
        let out = run_sweep(&config).unwrap();
        assert_eq!(out.records.len(), 12);
        assert!(out.records.windows(2).all(|w| w[0].key() <= w[1].key()));
        for a in &out.aggregates {
            let group: Vec<f64> = out
                .records
                .iter()
                .filter(|r| r.n == a.n && r.total_time == a.total_time)
                .map(|r| r.percent_error.unwrap())
                .collect();
            assert_eq!(group.len(), 3);
            assert_eq!(a.mean_err_pct, group.iter().sum::<f64>() / 3.0);
        }
    }

    #[test]
    fn optimized_record_replays() {
        let config = ExperimentConfig {
            strategies: vec![Strategy::Vcqa(Some(Axis::Z))],
            optimizer: OptimizerConfig { max_evals: 30, restarts: 2, ..Default::default() },
            ..tiny()
        };
        let r = run_task(&config, 2, 0, config.strategies[0], 2.0);
        assert!(r.ok && r.eval_count > 0);
        let again = replay_record(&r, &config).unwrap();
        assert!((again.percent_error.unwrap() - r.percent_error.unwrap()).abs() < 1e-6);
        assert_eq!(again.best_params, r.best_params);
        let mut other = config.clone();
        other.seed += 1;
        assert!(replay_record(&r, &other).is_err());
    }

    #[test]
    fn ramp_gap_profile_starts_at_two_epsilon() {
        let config = ExperimentConfig {
            connectivity: Connectivity::Full,
            n: vec![3],
            instance_count: 4,
            gap: super::super::config::GapConfig { grid_points: 11, ..Default::default() },
            ..tiny()
        };
        let studies = run_gap_study(&config).unwrap();
        let p = studies[0].profile(Strategy::Ramp).unwrap();
        assert_eq!(p.gaps[0], 2.0);
        assert_eq!(studies[0].instance_seeds.len(), 4);
        assert_eq!(studies[0].z_dominance, None);
    }
}
