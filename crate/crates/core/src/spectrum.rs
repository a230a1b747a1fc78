//! Instantaneous spectrum along the anneal: lowest two levels and the gap.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{AnnealSetup, DEFAULT_QUBIT_CAP, DENSE_QUBIT_LIMIT};
use crate::linalg::{dense_eigh, lanczos_lowest, LanczosOptions};
use crate::pauli::{CompiledOperator, Pauli, PauliString, PauliSum};

/// Two smallest eigenvalues `(E0, E1)`, degenerate copies counted separately.
pub fn lowest_two(h: &PauliSum) -> Result<(f64, f64)> {
    let n = h.n_qubits();
    if n > DEFAULT_QUBIT_CAP {
        return Err(Error::Resource { n_qubits: n, cap: DEFAULT_QUBIT_CAP });
    }
    if h.dim() < 2 {
        return Err(Error::Domain("operator has a single level".into()));
    }
    if let Some(d) = diagonal_form(h)? {
        let mut d = d.diagonal();
        d.sort_by(f64::total_cmp);
        return Ok((d[0], d[1]));
    }
    if n <= DENSE_QUBIT_LIMIT {
        return Ok(lowest_two_dense(h));
    }
    lowest_two_iterative(h)
}

/// An isospectral diagonal operator when `h` is diagonal in the
/// computational or the Hadamard basis.
fn diagonal_form(h: &PauliSum) -> Result<Option<PauliSum>> {
    if h.is_diagonal() {
        return Ok(Some(h.clone()));
    }
    if h.terms().iter().any(|(_, p)| p.z_mask() != 0) {
        return Ok(None);
    }
    let n = h.n_qubits();
    let terms = h
        .terms()
        .iter()
        .map(|(w, p)| {
            let ops: Vec<(usize, Pauli)> = (0..n).filter(|&q| p.get(q) == Pauli::X).map(|q| (q, Pauli::Z)).collect();
            PauliString::from_ops(n, &ops).map(|z| (*w, z))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Some(PauliSum::from_terms(n, terms)?))
}

pub fn lowest_two_dense(h: &PauliSum) -> (f64, f64) {
    let (vals, _) = dense_eigh(h.to_dense());
    (vals[0], vals[1])
}

/// Lanczos for the ground level, then again on its orthogonal complement.
pub fn lowest_two_iterative(h: &PauliSum) -> Result<(f64, f64)> {
    let op = CompiledOperator::new(h);
    let mut apply = |x: &[Complex64], y: &mut [Complex64]| op.apply_into(x, y);
    let opts = LanczosOptions { tol: 1e-11, ..Default::default() };
    let (e0, v0, _) = lanczos_lowest(h.dim(), &mut apply, &[], opts)?;
    let (e1, _, _) = lanczos_lowest(h.dim(), &mut apply, &[v0], opts)?;
    Ok((e0, e1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapProfile {
    pub strategy: String,
    pub grid: Vec<f64>,
    pub gaps: Vec<f64>,
}

impl GapProfile {
    /// Grid point of the smallest gap (first one on ties).
    pub fn argmin(&self) -> (f64, f64) {
        let mut best = (self.grid[0], self.gaps[0]);
        for (&s, &g) in self.grid.iter().zip(&self.gaps).skip(1) {
            if g < best.1 {
                best = (s, g);
            }
        }
        best
    }
}

/// `n` equally spaced points covering `[0, 1]`.
pub fn uniform_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|k| k as f64 / (n - 1) as f64).collect(),
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 2 || grid[0] != 0.0 || *grid.last().unwrap() != 1.0 {
        return Err(Error::Domain("gap grid must start at 0 and end at 1".into()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("gap grid must be strictly increasing".into()));
    }
    Ok(())
}

/// `E1(s) - E0(s)` of the assembled Hamiltonian at every grid point.
pub fn gap_profile(setup: &AnnealSetup, grid: &[f64], strategy: &str) -> Result<GapProfile> {
    check_grid(grid)?;
    let gaps = grid
        .iter()
        .map(|&s| {
            let (e0, e1) = lowest_two(&setup.assemble(s)?)?;
            Ok((e1 - e0).max(0.0))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GapProfile { strategy: strategy.to_string(), grid: grid.to_vec(), gaps })
}

/// Pointwise mean of per-instance profiles.
pub fn average_gap_profile(setups: &[AnnealSetup], grid: &[f64], strategy: &str) -> Result<GapProfile> {
    let profiles = setups.iter().map(|s| gap_profile(s, grid, strategy)).collect::<Result<Vec<_>>>()?;
    mean_profile(&profiles, strategy)
}

pub fn mean_profile(profiles: &[GapProfile], strategy: &str) -> Result<GapProfile> {
    let first = profiles.first().ok_or_else(|| Error::Domain("no profiles to average".into()))?;
    if profiles.iter().any(|p| p.grid != first.grid) {
        return Err(Error::Validation("profiles use different grids".into()));
    }
    let count = profiles.len() as f64;
    let gaps = (0..first.grid.len())
        .map(|k| profiles.iter().map(|p| p.gaps[k]).sum::<f64>() / count)
        .collect();
    Ok(GapProfile { strategy: strategy.to_string(), grid: first.grid.clone(), gaps })
}
