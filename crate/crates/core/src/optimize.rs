//! The variational loop: minimize the final `<H_f>` over schedule knots.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::{evaluate, expectation, final_state, EvolutionMetrics, IntegratorConfig};
use crate::hamiltonian::{aux_hamiltonian, final_hamiltonian, initial_hamiltonian, AnnealSetup, Axis, ProblemInstance};
use crate::pauli::PauliSum;
use crate::schedule::{ramp_equivalent_params, ramp_profile, EndpointSlopes, ScheduleSet};
use crate::seeding::{child_seed, rng};
use crate::simplex::{minimize_box, SimplexOptions};

/// How the schedules of one run are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Strategy {
    /// Linear ramp, nothing optimized.
    Ramp,
    /// Optimized schedules; `None` drops the auxiliary term and its parameters.
    Vcqa(Option<Axis>),
}

impl Strategy {
    pub fn aux_axis(self) -> Option<Axis> {
        match self {
            Strategy::Ramp | Strategy::Vcqa(None) => None,
            Strategy::Vcqa(axis) => axis,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Ramp => "ramp",
            Strategy::Vcqa(None) => "vcqa-no-aux",
            Strategy::Vcqa(Some(Axis::X)) => "vcqa-x",
            Strategy::Vcqa(Some(Axis::Y)) => "vcqa-y",
            Strategy::Vcqa(Some(Axis::Z)) => "vcqa-z",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ramp" => Ok(Strategy::Ramp),
            "vcqa-no-aux" | "vcqa-none" => Ok(Strategy::Vcqa(None)),
            other => match other.strip_prefix("vcqa-") {
                Some(axis) => Ok(Strategy::Vcqa(Some(axis.parse()?))),
                None => Err(Error::Domain(format!("unknown strategy {s:?}"))),
            },
        }
    }
}

impl From<Strategy> for String {
    fn from(s: Strategy) -> String {
        s.name().to_string()
    }
}

impl TryFrom<String> for Strategy {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    /// Evaluation budget per start.
    pub max_evals: usize,
    /// Number of simplex starts; the first is the ramp-equivalent point.
    pub restarts: usize,
    pub init_scale: f64,
    pub xtol: f64,
    pub ftol: f64,
    /// Interior knots per schedule function.
    pub params_per_schedule: usize,
    /// Knot-value bounds for `(F1, F2, F3)`.
    pub bounds: [(f64, f64); 3],
    pub endpoints: EndpointSlopes,
    pub seed: u64,
    /// Integrator used inside the cost function; final metrics use the
    /// run's own integrator settings.
    pub cost_integrator: IntegratorConfig,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_evals: 400,
            restarts: 3,
            init_scale: 0.25,
            xtol: 1e-6,
            ftol: 1e-9,
            params_per_schedule: 2,
            bounds: [(0.0, 1.0); 3],
            endpoints: EndpointSlopes::Flat,
            seed: 0,
            cost_integrator: IntegratorConfig { tol: 1e-4, n_samples: 2, ..Default::default() },
        }
    }
}

impl OptimizerConfig {
    pub fn counts(&self, aux: Option<Axis>) -> [usize; 3] {
        let n = self.params_per_schedule;
        [n, n, if aux.is_some() { n } else { 0 }]
    }

    pub fn validate(&self, dimension: usize) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::Domain("at least one optimizer start is required".into()));
        }
        if self.max_evals < dimension + 2 {
            return Err(Error::Domain(format!(
                "max_evals {} is below dimension + 2 = {}",
                self.max_evals,
                dimension + 2
            )));
        }
        if !(self.init_scale > 0.0 && self.init_scale <= 1.0) {
            return Err(Error::Domain(format!("init_scale {} must lie in (0, 1]", self.init_scale)));
        }
        for &(lo, hi) in &self.bounds {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::Domain(format!("invalid parameter bounds [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    fn simplex(&self) -> SimplexOptions {
        SimplexOptions { max_evals: self.max_evals, init_scale: self.init_scale, xtol: self.xtol, ftol: self.ftol }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub best_params: Vec<f64>,
    pub best_cost: f64,
    pub eval_count: usize,
    /// Every evaluated cost, starts concatenated in order; failures are `+inf`.
    #[serde(skip)]
    pub cost_history: Vec<f64>,
    /// Best cost reached by each start.
    pub start_costs: Vec<f64>,
    pub converged: bool,
}

/// Schedule optimization problem for one instance and anneal time.
#[derive(Debug, Clone)]
pub struct VcqaProblem {
    pub instance: ProblemInstance,
    pub total_time: f64,
    pub aux: Option<Axis>,
    pub epsilon: f64,
    h_initial: PauliSum,
    h_final: PauliSum,
    h_aux: PauliSum,
    counts: [usize; 3],
    bounds: [(f64, f64); 3],
    endpoints: EndpointSlopes,
}

impl VcqaProblem {
    pub fn new(
        instance: &ProblemInstance,
        total_time: f64,
        aux: Option<Axis>,
        config: &OptimizerConfig,
        epsilon: f64,
    ) -> Result<Self> {
        instance.validate()?;
        let n = instance.n;
        let h_aux = match aux {
            Some(axis) => aux_hamiltonian(instance, axis)?,
            None => PauliSum::zero(n),
        };
        Ok(Self {
            instance: instance.clone(),
            total_time,
            aux,
            epsilon,
            h_initial: initial_hamiltonian(n, epsilon)?,
            h_final: final_hamiltonian(instance)?,
            h_aux,
            counts: config.counts(aux),
            bounds: config.bounds,
            endpoints: config.endpoints,
        })
    }

    pub fn n_params(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn counts(&self) -> [usize; 3] {
        self.counts
    }

    pub fn lower(&self) -> Vec<f64> {
        self.expand(|(lo, _)| lo)
    }

    pub fn upper(&self) -> Vec<f64> {
        self.expand(|(_, hi)| hi)
    }

    fn expand(&self, pick: impl Fn((f64, f64)) -> f64) -> Vec<f64> {
        self.counts.iter().zip(&self.bounds).flat_map(|(&c, &b)| std::iter::repeat_n(pick(b), c)).collect()
    }

    /// Knots on the linear ramp for `F1`, `F2` and zeros for `F3`.
    pub fn ramp_equivalent(&self) -> Vec<f64> {
        ramp_equivalent_params(self.counts[0], self.counts[2])
    }

    pub fn schedules(&self, params: &[f64]) -> Result<ScheduleSet> {
        ScheduleSet::from_params(params, self.counts, self.bounds, self.endpoints)
    }

    pub fn setup(&self, params: &[f64]) -> Result<AnnealSetup> {
        AnnealSetup::new(
            self.h_initial.clone(),
            self.h_final.clone(),
            self.h_aux.clone(),
            self.schedules(params)?,
            self.total_time,
            self.epsilon,
        )
    }

    /// Final `<H_f>` after propagating with the given knots.
    pub fn cost(&self, params: &[f64], integrator: &IntegratorConfig) -> Result<f64> {
        let setup = self.setup(params)?;
        let (psi, _, _) = final_state(&setup, integrator)?;
        expectation(&self.h_final, &psi)
    }
}

/// Final energy for one parameter vector.
pub fn cost(
    params: &[f64],
    instance: &ProblemInstance,
    total_time: f64,
    aux: Option<Axis>,
    config: &OptimizerConfig,
) -> Result<f64> {
    VcqaProblem::new(instance, total_time, aux, config, 1.0)?.cost(params, &config.cost_integrator)
}

/// Multi-start bounded simplex over an arbitrary cost. Start 0 is `first`;
/// later starts are uniform in the box, drawn from `seed`.
pub fn minimize_with<F>(f: F, lo: &[f64], hi: &[f64], first: &[f64], seed: u64, config: &OptimizerConfig) -> Result<OptimizationResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    config.validate(lo.len())?;
    let starts: Vec<Vec<f64>> = (0..config.restarts)
        .map(|k| {
            if k == 0 {
                first.to_vec()
            } else {
                let mut r = rng(child_seed(seed, k as u64));
                lo.iter().zip(hi).map(|(&l, &h)| r.gen_range(l..=h)).collect()
            }
        })
        .collect();
    let runs: Vec<_> = starts.par_iter().map(|x0| minimize_box(&f, x0, lo, hi, config.simplex())).collect();

    let best = (0..runs.len()).min_by(|&a, &b| runs[a].f.total_cmp(&runs[b].f)).unwrap();
    if !runs[best].f.is_finite() {
        return Err(Error::Optimization("no start produced a finite cost".into()));
    }
    Ok(OptimizationResult {
        best_params: runs[best].x.clone(),
        best_cost: runs[best].f,
        eval_count: runs.iter().map(|r| r.evals).sum(),
        cost_history: runs.iter().flat_map(|r| r.history.iter().copied()).collect(),
        start_costs: runs.iter().map(|r| r.f).collect(),
        converged: runs[best].converged,
    })
}

/// Minimizes the final energy of `instance` at anneal time `total_time`.
/// Deterministic in `(instance.seed, config.seed)`.
pub fn minimize(instance: &ProblemInstance, total_time: f64, aux: Option<Axis>, config: &OptimizerConfig) -> Result<OptimizationResult> {
    let problem = VcqaProblem::new(instance, total_time, aux, config, 1.0)?;
    minimize_problem(&problem, config)
}

pub fn minimize_problem(problem: &VcqaProblem, config: &OptimizerConfig) -> Result<OptimizationResult> {
    let integrator = config.cost_integrator;
    let f = |x: &[f64]| problem.cost(x, &integrator).unwrap_or(f64::INFINITY);
    let seed = child_seed(config.seed, problem.instance.seed);
    minimize_with(f, &problem.lower(), &problem.upper(), &problem.ramp_equivalent(), seed, config)
}

/// Optimizes, then propagates once more at the best knots and scores the result.
pub fn vcqa_run(
    instance: &ProblemInstance,
    total_time: f64,
    aux: Option<Axis>,
    config: &OptimizerConfig,
    integrator: &IntegratorConfig,
) -> Result<(OptimizationResult, EvolutionMetrics)> {
    let problem = VcqaProblem::new(instance, total_time, aux, config, 1.0)?;
    let result = minimize_problem(&problem, config)?;
    let (_, metrics) = evaluate(&problem.setup(&result.best_params)?, integrator)?;
    Ok((result, metrics))
}

/// Linear ramp without auxiliary term.
pub fn ramp_run(instance: &ProblemInstance, total_time: f64, integrator: &IntegratorConfig) -> Result<EvolutionMetrics> {
    let setup = AnnealSetup::for_instance(instance, ramp_profile(), None, total_time, 1.0)?;
    Ok(evaluate(&setup, integrator)?.1)
}

/// Runs one strategy; the optimization result is absent for the ramp.
pub fn run_strategy(
    strategy: Strategy,
    instance: &ProblemInstance,
    total_time: f64,
    config: &OptimizerConfig,
    integrator: &IntegratorConfig,
) -> Result<(Option<OptimizationResult>, EvolutionMetrics)> {
    match strategy {
        Strategy::Ramp => Ok((None, ramp_run(instance, total_time, integrator)?)),
        Strategy::Vcqa(aux) => {
            let (r, m) = vcqa_run(instance, total_time, aux, config, integrator)?;
            Ok((Some(r), m))
        }
    }
}
