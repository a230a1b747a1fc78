//! Model Hamiltonians, problem instances and the three-term annealing setup.
//!
//! Energies are in units of the transverse-field scale and `hbar = 1`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dense_eigh, lanczos_lowest, LanczosOptions};
use crate::pauli::{CompiledOperator, Pauli, PauliString, PauliSum};
use crate::schedule::ScheduleSet;
use crate::state::StateVector;

/// Default largest register handled by exact ground-state searches.
pub const DEFAULT_QUBIT_CAP: usize = 14;
/// Largest register diagonalized densely; bigger non-diagonal operators use Lanczos.
pub const DENSE_QUBIT_LIMIT: usize = 10;
/// Relative energy window treated as one degenerate level.
pub const DEGENERACY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum Connectivity {
    Linear,
    Cyclic,
    Star,
    Full,
    Heisenberg,
}

impl Connectivity {
    /// Two-body edges of the spin-glass graph (0-based, `i < j` except the
    /// ring-closing edge of a cycle). Heisenberg chains carry no spin-glass edges.
    pub fn edges(self, n: usize) -> Vec<(usize, usize)> {
        match self {
            Connectivity::Linear => (0..n.saturating_sub(1)).map(|j| (j, j + 1)).collect(),
            Connectivity::Cyclic => {
                let mut e: Vec<_> = (0..n.saturating_sub(1)).map(|j| (j, j + 1)).collect();
                if n >= 2 {
                    e.push((n - 1, 0));
                }
                e
            }
            Connectivity::Star => (1..n).map(|j| (0, j)).collect(),
            Connectivity::Full => (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect(),
            Connectivity::Heisenberg => Vec::new(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Connectivity::Linear => "linear",
            Connectivity::Cyclic => "cyclic",
            Connectivity::Star => "star",
            Connectivity::Full => "full",
            Connectivity::Heisenberg => "heisenberg",
        }
    }
}

impl fmt::Display for Connectivity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Connectivity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" | "l" => Ok(Connectivity::Linear),
            "cyclic" | "c" => Ok(Connectivity::Cyclic),
            "star" | "s" => Ok(Connectivity::Star),
            "full" => Ok(Connectivity::Full),
            "heisenberg" => Ok(Connectivity::Heisenberg),
            _ => Err(Error::Validation(format!("unknown connectivity {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub i: usize,
    pub j: usize,
    pub g: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeisenbergParams {
    pub omega: f64,
    pub g: f64,
    pub delta: f64,
}

/// One random (or hand-specified) problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemInstance {
    pub connectivity: Connectivity,
    #[serde(rename = "N")]
    pub n: usize,
    pub seed: u64,
    pub omegas: Vec<f64>,
    pub couplings: Vec<Coupling>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heisenberg: Option<HeisenbergParams>,
}

impl ProblemInstance {
    /// Spin-glass instance whose couplings follow `connectivity.edges(n)` in order.
    pub fn spin_glass(connectivity: Connectivity, omegas: Vec<f64>, gs: &[f64], seed: u64) -> Result<Self> {
        let n = omegas.len();
        let edges = connectivity.edges(n);
        if edges.len() != gs.len() {
            return Err(Error::Validation(format!(
                "{} graph on {n} sites has {} edges, got {} couplings",
                connectivity,
                edges.len(),
                gs.len()
            )));
        }
        let couplings = edges.iter().zip(gs).map(|(&(i, j), &g)| Coupling { i, j, g }).collect();
        Ok(Self { connectivity, n, seed, omegas, couplings, heisenberg: None })
    }

    /// Open Heisenberg chain; local frequencies are all `omega` so the
    /// z-local auxiliary term matches the final Hamiltonian's field.
    pub fn heisenberg(n: usize, params: HeisenbergParams) -> Self {
        Self {
            connectivity: Connectivity::Heisenberg,
            n,
            seed: 0,
            omegas: vec![params.omega; n],
            couplings: Vec::new(),
            heisenberg: Some(params),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::Domain("instance needs at least one qubit".into()));
        }
        if self.omegas.len() != self.n {
            return Err(Error::Validation(format!("{} frequencies for {} qubits", self.omegas.len(), self.n)));
        }
        if self.connectivity == Connectivity::Heisenberg && self.heisenberg.is_none() {
            return Err(Error::Validation("heisenberg instance without chain parameters".into()));
        }
        let norm = |(a, b): (usize, usize)| (a.min(b), a.max(b));
        let mut want: Vec<_> = self.connectivity.edges(self.n).into_iter().map(norm).collect();
        let mut have: Vec<_> = self.couplings.iter().map(|c| norm((c.i, c.j))).collect();
        want.sort_unstable();
        have.sort_unstable();
        if want != have {
            let missing: Vec<_> = want.iter().filter(|e| !have.contains(e)).collect();
            let extra: Vec<_> = have.iter().filter(|e| !want.contains(e)).collect();
            return Err(Error::Validation(format!(
                "couplings do not match the {} edge set (missing {missing:?}, unexpected {extra:?})",
                self.connectivity
            )));
        }
        Ok(())
    }
}

/// `H_i = eps * sum_j X_j`.
pub fn initial_hamiltonian(n: usize, epsilon: f64) -> Result<PauliSum> {
    if n < 1 {
        return Err(Error::Domain("initial Hamiltonian needs at least one qubit".into()));
    }
    let terms = (0..n).map(|q| PauliString::single(n, q, Pauli::X).map(|s| (epsilon, s)));
    PauliSum::from_terms(n, terms.collect::<Result<Vec<_>>>()?)
}

/// Product of `|->` on every qubit, the ground state of `H_i` for `eps > 0`.
pub fn minus_state(n: usize) -> StateVector {
    let dim = 1usize << n;
    let a = (dim as f64).sqrt().recip();
    let amps = (0..dim)
        .map(|b| Complex64::new(if (b as u32).count_ones().is_multiple_of(2) { a } else { -a }, 0.0))
        .collect();
    StateVector::from_amplitudes(n, amps).expect("length matches")
}

/// `sum_j w_j Z_j + sum_(j,k) g_jk Z_j Z_k` on the instance's graph.
pub fn spin_glass(instance: &ProblemInstance) -> Result<PauliSum> {
    instance.validate()?;
    if instance.connectivity == Connectivity::Heisenberg {
        return Err(Error::Validation("heisenberg instance is not a spin glass".into()));
    }
    let n = instance.n;
    let mut terms = Vec::with_capacity(n + instance.couplings.len());
    for (q, &w) in instance.omegas.iter().enumerate() {
        terms.push((w, PauliString::single(n, q, Pauli::Z)?));
    }
    for c in &instance.couplings {
        terms.push((c.g, PauliString::from_ops(n, &[(c.i, Pauli::Z), (c.j, Pauli::Z)])?));
    }
    PauliSum::from_terms(n, terms)
}

/// Open chain `w sum Z + g sum (XX + delta YY + ZZ)`.
pub fn heisenberg_chain(n: usize, omega: f64, g: f64, delta: f64) -> Result<PauliSum> {
    if n < 1 {
        return Err(Error::Domain("chain needs at least one qubit".into()));
    }
    let mut terms = Vec::new();
    for q in 0..n {
        terms.push((omega, PauliString::single(n, q, Pauli::Z)?));
    }
    for q in 0..n.saturating_sub(1) {
        for (p, w) in [(Pauli::X, g), (Pauli::Y, g * delta), (Pauli::Z, g)] {
            terms.push((w, PauliString::from_ops(n, &[(q, p), (q + 1, p)])?));
        }
    }
    PauliSum::from_terms(n, terms)
}

/// Problem Hamiltonian of an instance: spin glass or Heisenberg chain.
pub fn final_hamiltonian(instance: &ProblemInstance) -> Result<PauliSum> {
    match (instance.connectivity, instance.heisenberg) {
        (Connectivity::Heisenberg, Some(p)) => {
            instance.validate()?;
            heisenberg_chain(instance.n, p.omega, p.g, p.delta)
        }
        _ => spin_glass(instance),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    fn pauli(self) -> Pauli {
        match self {
            Axis::X => Pauli::X,
            Axis::Y => Pauli::Y,
            Axis::Z => Pauli::Z,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "x" => Ok(Axis::X),
            "y" => Ok(Axis::Y),
            "z" => Ok(Axis::Z),
            _ => Err(Error::Validation(format!("unknown axis {s:?}"))),
        }
    }
}

/// `sum_j w_j sigma^axis_j` with the instance's local frequencies.
pub fn aux_hamiltonian(instance: &ProblemInstance, axis: Axis) -> Result<PauliSum> {
    let n = instance.n;
    if instance.omegas.len() != n || n < 1 {
        return Err(Error::Validation("instance frequencies do not match its size".into()));
    }
    let terms = instance
        .omegas
        .iter()
        .enumerate()
        .map(|(q, &w)| PauliString::single(n, q, axis.pauli()).map(|s| (w, s)));
    PauliSum::from_terms(n, terms.collect::<Result<Vec<_>>>()?)
}

/// One complete evolution: `H(t) = F1 H_i + F2 H_f + F3 H_aux` over `[0, T]`.
#[derive(Debug, Clone)]
pub struct AnnealSetup {
    pub h_initial: PauliSum,
    pub h_final: PauliSum,
    pub h_aux: PauliSum,
    pub schedules: ScheduleSet,
    pub total_time: f64,
    pub epsilon: f64,
}

impl AnnealSetup {
    /// Validating constructor; enforces shared qubit count, `T > 0` and the
    /// schedule boundary conditions.
    pub fn new(
        h_initial: PauliSum,
        h_final: PauliSum,
        h_aux: PauliSum,
        schedules: ScheduleSet,
        total_time: f64,
        epsilon: f64,
    ) -> Result<Self> {
        let setup = Self::relaxed(h_initial, h_final, h_aux, schedules, total_time, epsilon)?;
        let start = setup.schedules.weights(0.0);
        let end = setup.schedules.weights(1.0);
        if start != [1.0, 0.0, 0.0] || end != [0.0, 1.0, 0.0] {
            return Err(Error::Validation(format!(
                "schedules violate boundary conditions: F(0) = {start:?}, F(1) = {end:?}"
            )));
        }
        Ok(setup)
    }

    /// Like [`AnnealSetup::new`] but without the boundary-condition check.
    pub fn relaxed(
        h_initial: PauliSum,
        h_final: PauliSum,
        h_aux: PauliSum,
        schedules: ScheduleSet,
        total_time: f64,
        epsilon: f64,
    ) -> Result<Self> {
        let n = h_initial.n_qubits();
        if h_final.n_qubits() != n || h_aux.n_qubits() != n {
            return Err(Error::Validation("H_i, H_f and H_aux act on different qubit counts".into()));
        }
        if !(total_time > 0.0) || !total_time.is_finite() {
            return Err(Error::Domain(format!("total time {total_time} must be positive")));
        }
        Ok(Self { h_initial, h_final, h_aux, schedules, total_time, epsilon })
    }

    /// Setup for a problem instance with the given schedules and auxiliary axis
    /// (`None` leaves `H_aux = 0`).
    pub fn for_instance(
        instance: &ProblemInstance,
        schedules: ScheduleSet,
        aux: Option<Axis>,
        total_time: f64,
        epsilon: f64,
    ) -> Result<Self> {
        let n = instance.n;
        let h_aux = match aux {
            Some(axis) => aux_hamiltonian(instance, axis)?,
            None => PauliSum::zero(n),
        };
        Self::new(initial_hamiltonian(n, epsilon)?, final_hamiltonian(instance)?, h_aux, schedules, total_time, epsilon)
    }

    pub fn n_qubits(&self) -> usize {
        self.h_initial.n_qubits()
    }

    /// `H` at normalized time `s`.
    pub fn assemble(&self, s: f64) -> Result<PauliSum> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::Domain(format!("normalized time {s} outside [0, 1]")));
        }
        let w = self.schedules.weights(s);
        PauliSum::linear_combination(&[&self.h_initial, &self.h_final, &self.h_aux], &w)
    }
}

/// Lowest energy and an orthonormal basis of its eigenspace.
#[derive(Debug, Clone)]
pub struct GroundState {
    pub energy: f64,
    pub basis: Vec<StateVector>,
}

fn same_level(e: f64, e0: f64) -> bool {
    (e - e0).abs() <= DEGENERACY_TOL * e0.abs().max(1.0)
}

pub fn ground_state(h: &PauliSum) -> Result<GroundState> {
    ground_state_with_cap(h, DEFAULT_QUBIT_CAP)
}

pub fn ground_state_with_cap(h: &PauliSum, cap: usize) -> Result<GroundState> {
    let n = h.n_qubits();
    if n > cap {
        return Err(Error::Resource { n_qubits: n, cap });
    }
    if h.is_diagonal() {
        let d = h.diagonal();
        let energy = d.iter().copied().fold(f64::INFINITY, f64::min);
        let basis = d
            .iter()
            .enumerate()
            .filter(|(_, &e)| same_level(e, energy))
            .map(|(b, _)| StateVector::basis(n, b))
            .collect();
        return Ok(GroundState { energy, basis });
    }
    if n <= DENSE_QUBIT_LIMIT {
        let (vals, vecs) = dense_eigh(h.to_dense());
        let energy = vals[0];
        let basis = vals
            .iter()
            .zip(vecs)
            .take_while(|(e, _)| same_level(**e, energy))
            .map(|(_, v)| StateVector::from_amplitudes(n, v))
            .collect::<Result<Vec<_>>>()?;
        return Ok(GroundState { energy, basis });
    }
    let compiled = CompiledOperator::new(h);
    let mut apply = |x: &[Complex64], y: &mut [Complex64]| compiled.apply_into(x, y);
    let mut found: Vec<Vec<Complex64>> = Vec::new();
    let (energy, v, _) = lanczos_lowest(h.dim(), &mut apply, &found, LanczosOptions::default())?;
    found.push(v);
    while found.len() < h.dim() {
        let (e, v, _) = lanczos_lowest(h.dim(), &mut apply, &found, LanczosOptions::default())?;
        if !same_level(e, energy) {
            break;
        }
        found.push(v);
    }
    let basis = found.into_iter().map(|v| StateVector::from_amplitudes(n, v)).collect::<Result<Vec<_>>>()?;
    Ok(GroundState { energy, basis })
}
