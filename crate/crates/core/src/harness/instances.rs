//! Seeded random problem instances.
//!
//! Instance `i` of an ensemble with master seed `m` is drawn from a ChaCha8
//! stream seeded with `child_seed(m, i)`: frequencies first, then one
//! coupling per edge in `Connectivity::edges` order. The rule depends only
//! on `(m, i)`, so serial and parallel generation agree.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{Connectivity, HeisenbergParams, ProblemInstance};
use crate::seeding::{child_seed, rng};

/// Range of the uniform draws for frequencies and couplings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DrawRange {
    /// `(0, 1]`
    #[default]
    HalfOpen,
    /// `[0, 1]`
    Closed,
}

impl DrawRange {
    pub fn draw<R: Rng>(self, rng: &mut R) -> f64 {
        match self {
            DrawRange::HalfOpen => 1.0 - rng.gen::<f64>(),
            DrawRange::Closed => rng.gen_range(0.0..=1.0),
        }
    }
}

pub const DEFAULT_HEISENBERG: HeisenbergParams = HeisenbergParams { omega: 1.0, g: 0.1, delta: 5.0 };

/// The instance with child seed `seed`. Heisenberg chains are fixed by
/// their parameters and only carry the seed.
pub fn instance_from_seed(
    connectivity: Connectivity,
    n: usize,
    seed: u64,
    range: DrawRange,
    heisenberg: HeisenbergParams,
) -> Result<ProblemInstance> {
    if n == 0 {
        return Err(Error::Domain("instances need at least one qubit".into()));
    }
    if connectivity == Connectivity::Heisenberg {
        return Ok(ProblemInstance { seed, ..ProblemInstance::heisenberg(n, heisenberg) });
    }
    let mut r = rng(seed);
    let omegas = (0..n).map(|_| range.draw(&mut r)).collect();
    let gs: Vec<f64> = connectivity.edges(n).iter().map(|_| range.draw(&mut r)).collect();
    ProblemInstance::spin_glass(connectivity, omegas, &gs, seed)
}

pub fn generate_instances(
    connectivity: Connectivity,
    n: usize,
    count: usize,
    seed: u64,
    range: DrawRange,
) -> Result<Vec<ProblemInstance>> {
    generate_instances_with(connectivity, n, count, seed, range, DEFAULT_HEISENBERG)
}

pub fn generate_instances_with(
    connectivity: Connectivity,
    n: usize,
    count: usize,
    seed: u64,
    range: DrawRange,
    heisenberg: HeisenbergParams,
) -> Result<Vec<ProblemInstance>> {
    (0..count as u64)
        .map(|i| instance_from_seed(connectivity, n, child_seed(seed, i), range, heisenberg))
        .collect()
}
