//! Time-dependent Schrodinger propagation and the figures of merit.
//!
//! Each step applies `exp(-i H(t_n + dt/2) dt)` through a Lanczos projection
//! of the matrix-free operator. The step is halved until the final energy
//! `<H_f>` moves by less than the observable tolerance between successive
//! refinements.

use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{minus_state, AnnealSetup};
use crate::linalg::KrylovPropagator;
use crate::pauli::{CompiledOperator, PauliSum};
use crate::state::{norm, StateVector};

/// Default energy floor below which the percentage error is undefined.
pub const ENERGY_FLOOR: f64 = 1e-8;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorConfig {
    /// Initial step in units of the inverse field scale; `None` means `T / 500`.
    pub dt: Option<f64>,
    /// Convergence tolerance on the final `<H_f>` between refinements.
    pub tol: f64,
    pub max_refinements: usize,
    /// Uniform sample count including both endpoints (at least 2).
    pub n_samples: usize,
    /// Keep sampled state vectors, not only expectations.
    pub keep_states: bool,
    pub krylov_tol: f64,
    pub krylov_max_dim: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            dt: None,
            tol: 1e-6,
            max_refinements: 12,
            n_samples: 101,
            keep_states: false,
            krylov_tol: 1e-13,
            krylov_max_dim: 40,
        }
    }
}

impl IntegratorConfig {
    fn initial_steps(&self, total_time: f64) -> Result<usize> {
        let dt = self.dt.unwrap_or(total_time / 500.0);
        if !(dt > 0.0) || !(self.tol > 0.0) {
            return Err(Error::Domain(format!("step {dt} and tolerance {} must be positive", self.tol)));
        }
        if self.n_samples < 2 {
            return Err(Error::Domain("need at least 2 trajectory samples".into()));
        }
        let intervals = self.n_samples - 1;
        let raw = (total_time / dt).ceil().max(1.0) as usize;
        Ok(raw.div_ceil(intervals) * intervals)
    }
}

/// Observables recorded at one sample time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub e_initial: f64,
    pub e_final: f64,
    pub e_aux: f64,
    pub norm: f64,
    /// `i <[H_f, H_i]>`
    pub comm_final_initial: f64,
    /// `i <[H_aux, H_i]>`
    pub comm_aux_initial: f64,
    /// `i <[H_aux, H_f]>`
    pub comm_aux_final: f64,
}

/// Sampled record of one propagation.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub total_time: f64,
    pub samples: Vec<Sample>,
    pub states: Option<Vec<StateVector>>,
    pub final_state: StateVector,
    pub dt: f64,
    pub n_steps: usize,
    pub refinements: usize,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    /// `(t, <H_i>, <H_f>, <H_aux>, norm)` rows.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        out.write_record(["t", "e_initial", "e_final", "e_aux", "norm"])?;
        for s in &self.samples {
            out.write_record([s.t, s.e_initial, s.e_final, s.e_aux, s.norm].map(|v| v.to_string()))?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Figures of merit of one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolutionMetrics {
    pub final_energy: f64,
    pub ground_energy: f64,
    pub percent_error: f64,
    pub fidelity: f64,
    pub wall_time_s: f64,
    pub dt: f64,
    pub refinements: usize,
}

/// `F1 A_i + F2 A_f + F3 A_aux` with the diagonal parts pre-summed per step.
pub(crate) struct MixedOperator {
    parts: [CompiledOperator; 3],
    diagonal: Vec<f64>,
    weights: [f64; 3],
}

impl MixedOperator {
    pub(crate) fn new(setup: &AnnealSetup) -> Self {
        let parts = [
            CompiledOperator::new(&setup.h_initial),
            CompiledOperator::new(&setup.h_final),
            CompiledOperator::new(&setup.h_aux),
        ];
        let dim = parts[0].dim();
        Self { parts, diagonal: vec![0.0; dim], weights: [0.0; 3] }
    }

    pub(crate) fn set_weights(&mut self, weights: [f64; 3]) {
        self.weights = weights;
        self.diagonal.fill(0.0);
        for (part, &w) in self.parts.iter().zip(&weights) {
            if let (Some(d), true) = (part.diagonal(), w != 0.0) {
                self.diagonal.iter_mut().zip(d).for_each(|(a, b)| *a += w * b);
            }
        }
    }

    pub(crate) fn apply(&self, psi: &[Complex64], out: &mut [Complex64]) {
        out.iter_mut().zip(psi).zip(&self.diagonal).for_each(|((o, p), d)| *o = p * d);
        for (part, &w) in self.parts.iter().zip(&self.weights) {
            part.add_flips(w, psi, out);
        }
    }

    pub(crate) fn parts(&self) -> &[CompiledOperator; 3] {
        &self.parts
    }
}

struct Observers {
    commutators: [CompiledOperator; 3],
    scratch: Vec<Complex64>,
}

impl Observers {
    fn new(setup: &AnnealSetup) -> Result<Self> {
        let c = |a: &PauliSum, b: &PauliSum| PauliSum::i_commutator(a, b).map(|op| CompiledOperator::new(&op));
        Ok(Self {
            commutators: [
                c(&setup.h_final, &setup.h_initial)?,
                c(&setup.h_aux, &setup.h_initial)?,
                c(&setup.h_aux, &setup.h_final)?,
            ],
            scratch: vec![ZERO; setup.h_initial.dim()],
        })
    }

    fn sample(&mut self, t: f64, ops: &MixedOperator, psi: &[Complex64]) -> Sample {
        let mut e = [0.0; 3];
        for (v, part) in e.iter_mut().zip(ops.parts()) {
            *v = part.expectation(psi, &mut self.scratch).re;
        }
        let mut c = [0.0; 3];
        for (v, op) in c.iter_mut().zip(&self.commutators) {
            *v = op.expectation(psi, &mut self.scratch).re;
        }
        Sample {
            t,
            e_initial: e[0],
            e_final: e[1],
            e_aux: e[2],
            norm: norm(psi),
            comm_final_initial: c[0],
            comm_aux_initial: c[1],
            comm_aux_final: c[2],
        }
    }
}

struct FixedRun {
    final_state: Vec<Complex64>,
    samples: Vec<Sample>,
    states: Vec<StateVector>,
}

fn run_fixed(
    setup: &AnnealSetup,
    ops: &mut MixedOperator,
    krylov: &mut KrylovPropagator,
    initial: &[Complex64],
    n_steps: usize,
    sampling: Option<(&mut Observers, usize, bool)>,
) -> FixedRun {
    let t_total = setup.total_time;
    let dt = t_total / n_steps as f64;
    let n = setup.n_qubits();
    let mut psi = initial.to_vec();
    let mut samples = Vec::new();
    let mut states = Vec::new();
    let (mut observers, stride, keep) = match sampling {
        Some((o, stride, keep)) => (Some(o), stride, keep),
        None => (None, usize::MAX, false),
    };
    let mut record = |step: usize, psi: &[Complex64], ops: &mut MixedOperator| {
        if let Some(obs) = observers.as_deref_mut() {
            let s = step as f64 / n_steps as f64;
            ops.set_weights(setup.schedules.weights(s));
            samples.push(obs.sample(s * t_total, ops, psi));
            if keep {
                states.push(StateVector::from_amplitudes(n, psi.to_vec()).expect("dimension"));
            }
        }
    };
    record(0, &psi, ops);
    for step in 0..n_steps {
        let s_mid = (step as f64 + 0.5) / n_steps as f64;
        ops.set_weights(setup.schedules.weights(s_mid));
        let ops_ref: &MixedOperator = ops;
        krylov.step(&mut |x: &[Complex64], y: &mut [Complex64]| ops_ref.apply(x, y), &mut psi, dt);
        if (step + 1) % stride == 0 {
            record(step + 1, &psi, ops);
        }
    }
    FixedRun { final_state: psi, samples, states }
}

/// Propagates `|-...->` under the setup, refining the step until the final
/// energy is converged, and samples observables at `n_samples` uniform times.
pub fn propagate(setup: &AnnealSetup, config: &IntegratorConfig) -> Result<Trajectory> {
    propagate_from(setup, config, &minus_state(setup.n_qubits()), true)
}

/// Final state only, with the same refinement rule as [`propagate`].
pub fn final_state(setup: &AnnealSetup, config: &IntegratorConfig) -> Result<(StateVector, f64, usize)> {
    let traj = propagate_from(setup, config, &minus_state(setup.n_qubits()), false)?;
    Ok((traj.final_state, traj.dt, traj.refinements))
}

pub fn propagate_from(
    setup: &AnnealSetup,
    config: &IntegratorConfig,
    initial: &StateVector,
    sample: bool,
) -> Result<Trajectory> {
    if initial.n_qubits() != setup.n_qubits() {
        return Err(Error::Validation("initial state size does not match the setup".into()));
    }
    let mut n_steps = config.initial_steps(setup.total_time)?;
    let mut ops = MixedOperator::new(setup);
    let mut krylov = KrylovPropagator::new(setup.h_initial.dim(), config.krylov_max_dim, config.krylov_tol);
    let mut observers = if sample { Some(Observers::new(setup)?) } else { None };
    let mut scratch = vec![ZERO; setup.h_initial.dim()];

    let coarse = run_fixed(setup, &mut ops, &mut krylov, initial.amplitudes(), n_steps, None);
    let mut previous = ops.parts()[1].expectation(&coarse.final_state, &mut scratch).re;
    let mut last = previous;
    for refinement in 1..=config.max_refinements {
        n_steps *= 2;
        let stride = n_steps / (config.n_samples - 1);
        let sampling = observers.as_mut().map(|o| (o, stride, config.keep_states));
        let fine = run_fixed(setup, &mut ops, &mut krylov, initial.amplitudes(), n_steps, sampling);
        let energy = ops.parts()[1].expectation(&fine.final_state, &mut scratch).re;
        if (energy - previous).abs() < config.tol {
            return Ok(Trajectory {
                total_time: setup.total_time,
                samples: fine.samples,
                states: config.keep_states.then_some(fine.states),
                final_state: StateVector::from_amplitudes(setup.n_qubits(), fine.final_state)?,
                dt: setup.total_time / n_steps as f64,
                n_steps,
                refinements: refinement,
            });
        }
        last = previous;
        previous = energy;
    }
    Err(Error::IntegrationFailure { refinements: config.max_refinements, previous: last, last: previous })
}

/// `<psi|H|psi>`; the imaginary part must vanish to 1e-10.
pub fn expectation(h: &PauliSum, psi: &StateVector) -> Result<f64> {
    let hpsi = h.apply(psi)?;
    let e = psi.inner(&hpsi);
    if e.im.abs() > 1e-10 {
        return Err(Error::Validation(format!("expectation has imaginary part {}", e.im)));
    }
    Ok(e.re)
}

/// `|(E0 - <psi|H_f|psi>) / E0| * 100`.
pub fn percent_error(psi: &StateVector, h_final: &PauliSum, ground_energy: f64) -> Result<f64> {
    percent_error_with_floor(psi, h_final, ground_energy, ENERGY_FLOOR)
}

pub fn percent_error_with_floor(psi: &StateVector, h_final: &PauliSum, ground_energy: f64, floor: f64) -> Result<f64> {
    percent_error_of_energy(expectation(h_final, psi)?, ground_energy, floor)
}

pub fn percent_error_of_energy(energy: f64, ground_energy: f64, floor: f64) -> Result<f64> {
    if !(ground_energy.abs() > floor) {
        return Err(Error::UndefinedMetric(format!(
            "ground energy {ground_energy} is within {floor} of zero"
        )));
    }
    Ok(((ground_energy - energy) / ground_energy).abs() * 100.0)
}

/// Squared norm of the projection of `psi` onto the span of `ground_basis`.
pub fn fidelity(psi: &StateVector, ground_basis: &[StateVector]) -> f64 {
    let f: f64 = ground_basis.iter().map(|g| g.inner(psi).norm_sqr()).sum();
    f.clamp(0.0, 1.0)
}

/// Propagates and scores against the exact ground state of `H_f`.
pub fn evaluate(setup: &AnnealSetup, config: &IntegratorConfig) -> Result<(Trajectory, EvolutionMetrics)> {
    let ground = crate::hamiltonian::ground_state(&setup.h_final)?;
    let start = Instant::now();
    let traj = propagate(setup, config)?;
    let final_energy = expectation(&setup.h_final, &traj.final_state)?;
    let metrics = EvolutionMetrics {
        final_energy,
        ground_energy: ground.energy,
        percent_error: percent_error_of_energy(final_energy, ground.energy, ENERGY_FLOOR)?,
        fidelity: fidelity(&traj.final_state, &ground.basis),
        wall_time_s: start.elapsed().as_secs_f64(),
        dt: traj.dt,
        refinements: traj.refinements,
    };
    Ok((traj, metrics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{initial_hamiltonian, spin_glass, Connectivity, ProblemInstance};
    use crate::linalg::dense_eigh;
    use crate::schedule::{ramp_profile, Schedule, ScheduleSet};
    use approx::assert_abs_diff_eq;

    fn two_qubit_instance() -> ProblemInstance {
        ProblemInstance::spin_glass(Connectivity::Linear, vec![0.37, 0.81], &[0.64], 11).unwrap()
    }

    fn ramp_setup(inst: &ProblemInstance, t: f64) -> AnnealSetup {
        AnnealSetup::for_instance(inst, ramp_profile(), None, t, 1.0).unwrap()
    }

    #[test]
    fn stationary_state_under_constant_initial_hamiltonian() {
        let h = initial_hamiltonian(3, 1.0).unwrap();
        let sched = ScheduleSet {
            initial: Schedule::Constant(1.0),
            final_: Schedule::Constant(0.0),
            auxiliary: Schedule::Constant(0.0),
        };
        let setup = AnnealSetup::relaxed(h.clone(), h.clone(), PauliSum::zero(3), sched, 2.0, 1.0).unwrap();
        let traj = propagate(&setup, &IntegratorConfig::default()).unwrap();
        assert_abs_diff_eq!(fidelity(&traj.final_state, &[minus_state(3)]), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn norm_is_preserved_at_every_sample() {
        let setup = ramp_setup(&two_qubit_instance(), 5.0);
        let traj = propagate(&setup, &IntegratorConfig::default()).unwrap();
        assert_eq!(traj.samples.len(), 101);
        assert_eq!(traj.samples[0].t, 0.0);
        assert_abs_diff_eq!(traj.samples.last().unwrap().t, 5.0, epsilon = 1e-12);
        for s in &traj.samples {
            assert!((s.norm - 1.0).abs() < 1e-9);
        }
        assert_abs_diff_eq!(traj.samples[0].e_initial, -2.0, epsilon = 1e-12);
    }

    #[test]
    fn matches_fine_step_reference() {
        let setup = ramp_setup(&two_qubit_instance(), 5.0);
        let config = IntegratorConfig { tol: 1e-8, ..Default::default() };
        let (psi, dt, _) = final_state(&setup, &config).unwrap();
        let e = expectation(&setup.h_final, &psi).unwrap();
        // one refinement from dt/64 is accepted as soon as it completes
        let reference = IntegratorConfig { dt: Some(dt / 64.0), tol: 1.0, ..Default::default() };
        let (psi_ref, _, _) = final_state(&setup, &reference).unwrap();
        let e_ref = expectation(&setup.h_final, &psi_ref).unwrap();
        assert!((e - e_ref).abs() < 1e-8, "{e} vs {e_ref}");
    }

    #[test]
    fn expectation_examples() {
        let h = initial_hamiltonian(4, 1.0).unwrap();
        assert_abs_diff_eq!(expectation(&h, &minus_state(4)).unwrap(), -4.0, epsilon = 1e-12);
        let inst = two_qubit_instance();
        let hf = spin_glass(&inst).unwrap();
        // |01>: qubit 0 up (+1), qubit 1 down (-1)
        let e = expectation(&hf, &StateVector::basis(2, 0b01)).unwrap();
        assert_abs_diff_eq!(e, 0.37 - 0.81 - 0.64, epsilon = 1e-15);
    }

    #[test]
    fn percent_error_examples() {
        assert_abs_diff_eq!(percent_error_of_energy(-1.9, -2.0, ENERGY_FLOOR).unwrap(), 5.0, epsilon = 1e-12);
        assert!(matches!(percent_error_of_energy(-1.0, 1e-9, ENERGY_FLOOR), Err(Error::UndefinedMetric(_))));
        let inst = two_qubit_instance();
        let hf = spin_glass(&inst).unwrap();
        let gs = crate::hamiltonian::ground_state(&hf).unwrap();
        assert_eq!(percent_error(&gs.basis[0], &hf, gs.energy).unwrap(), 0.0);
    }

    #[test]
    fn fidelity_examples() {
        let a = StateVector::basis(2, 0b01);
        let b = StateVector::basis(2, 0b10);
        assert_eq!(fidelity(&a, std::slice::from_ref(&a)), 1.0);
        assert_eq!(fidelity(&a, &[StateVector::basis(2, 0)]), 0.0);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let sup = StateVector::from_amplitudes(
            2,
            vec![ZERO, Complex64::new(r, 0.0), Complex64::new(r, 0.0), ZERO],
        )
        .unwrap();
        assert_abs_diff_eq!(fidelity(&sup, &[a, b]), 1.0, epsilon = 1e-15);
    }

    /// Independent dense pipeline: explicit matrix exponentials at each midpoint.
    #[test]
    fn percent_error_matches_dense_pipeline() {
        let inst = two_qubit_instance();
        let setup = ramp_setup(&inst, 5.0);
        let (traj, metrics) = evaluate(&setup, &IntegratorConfig { tol: 1e-10, ..Default::default() }).unwrap();
        let n_steps = traj.n_steps;
        let dt = 5.0 / n_steps as f64;
        let mut psi = nalgebra::DVector::from_column_slice(minus_state(2).amplitudes());
        for k in 0..n_steps {
            let s = (k as f64 + 0.5) / n_steps as f64;
            let (vals, vecs) = dense_eigh(setup.assemble(s).unwrap().to_dense());
            let mut next = nalgebra::DVector::from_element(4, ZERO);
            for (lam, v) in vals.iter().zip(&vecs) {
                let v = nalgebra::DVector::from_column_slice(v);
                let c = v.dotc(&psi) * Complex64::from_polar(1.0, -lam * dt);
                next += v * c;
            }
            psi = next;
        }
        let hf = setup.h_final.to_dense();
        let e = (psi.adjoint() * &hf * &psi)[(0, 0)].re;
        let (vals, _) = dense_eigh(hf);
        let pct = ((vals[0] - e) / vals[0]).abs() * 100.0;
        assert!((pct - metrics.percent_error).abs() < 1e-8, "{pct} vs {}", metrics.percent_error);
    }

    #[test]
    fn rejects_bad_integrator_settings() {
        let setup = ramp_setup(&two_qubit_instance(), 1.0);
        assert!(propagate(&setup, &IntegratorConfig { dt: Some(-1.0), ..Default::default() }).is_err());
        assert!(propagate(&setup, &IntegratorConfig { n_samples: 1, ..Default::default() }).is_err());
        let stuck = IntegratorConfig { tol: 1e-30, max_refinements: 2, ..Default::default() };
        assert!(matches!(propagate(&setup, &stuck), Err(Error::IntegrationFailure { .. })));
    }
}
