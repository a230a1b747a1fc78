//! Experiment configuration, read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::instances::{DrawRange, DEFAULT_HEISENBERG};
use crate::error::{Error, Result};
use crate::evolve::IntegratorConfig;
use crate::hamiltonian::{Connectivity, HeisenbergParams, DEFAULT_QUBIT_CAP};
use crate::optimize::{OptimizerConfig, Strategy};

/// Gap-study settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GapConfig {
    pub grid_points: usize,
    /// Anneal time used when optimizing schedules for the gap profiles.
    pub optimize_time: f64,
    /// Ensemble prefix used for optimized strategies; all instances when absent.
    pub optimized_instances: Option<usize>,
}

impl Default for GapConfig {
    fn default() -> Self {
        Self { grid_points: 101, optimize_time: 5.0, optimized_instances: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub connectivity: Connectivity,
    /// System sizes.
    pub n: Vec<usize>,
    pub instance_count: usize,
    pub seed: u64,
    /// Anneal times in units of the inverse transverse-field scale.
    pub t_grid: Vec<f64>,
    pub strategies: Vec<Strategy>,
    pub draw_range: DrawRange,
    pub epsilon: f64,
    pub output_dir: PathBuf,
    pub heisenberg: HeisenbergParams,
    pub optimizer: OptimizerConfig,
    pub integrator: IntegratorConfig,
    pub gap: GapConfig,
}

/// `count` points log-spaced over `[lo, hi]`, endpoints exact.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![hi];
    }
    (0..count)
        .map(|k| match k {
            0 => lo,
            k if k == count - 1 => hi,
            k => lo * (hi / lo).powf(k as f64 / (count - 1) as f64),
        })
        .collect()
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            connectivity: Connectivity::Linear,
            n: vec![2, 4, 7, 10],
            instance_count: 20,
            seed: 2024,
            t_grid: log_grid(0.5, 5.0, 10),
            strategies: vec![Strategy::Ramp, Strategy::Vcqa(Some(crate::hamiltonian::Axis::Z))],
            draw_range: DrawRange::HalfOpen,
            epsilon: 1.0,
            output_dir: PathBuf::from("results"),
            heisenberg: DEFAULT_HEISENBERG,
            optimizer: OptimizerConfig::default(),
            integrator: IntegratorConfig::default(),
            gap: GapConfig::default(),
        }
    }
}

/// Instance count of the full-size ensembles.
pub const FULL_SCALE_INSTANCES: usize = 100;

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.instance_count == 0 {
            return Err(Error::Validation("instance_count must be at least 1".into()));
        }
        if self.n.is_empty() || self.n.iter().any(|&n| n == 0 || n > DEFAULT_QUBIT_CAP) {
            return Err(Error::Validation(format!("sizes {:?} must lie in 1..={DEFAULT_QUBIT_CAP}", self.n)));
        }
        if self.t_grid.is_empty()
            || self.t_grid.iter().any(|&t| !(t > 0.0) || !t.is_finite())
            || self.t_grid.windows(2).any(|w| !(w[1] > w[0]))
        {
            return Err(Error::Validation(format!("t_grid {:?} must be positive and ascending", self.t_grid)));
        }
        if self.strategies.is_empty() {
            return Err(Error::Validation("at least one strategy is required".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Validation(format!("epsilon {} must be positive", self.epsilon)));
        }
        if self.gap.grid_points < 2 || !(self.gap.optimize_time > 0.0) {
            return Err(Error::Validation("gap grid needs 2 points and a positive optimize_time".into()));
        }
        self.optimizer.validate(3 * self.optimizer.params_per_schedule)
    }

    /// SHA-256 of the canonical TOML serialization.
    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_toml_string()?.as_bytes())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::Axis;

    #[test]
    fn toml_round_trip() {
        let c = ExperimentConfig::default();
        let text = c.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), c);
    }

    #[test]
    fn partial_file_fills_defaults() {
        let c = ExperimentConfig::from_toml_str(
            r#"
            connectivity = "star"
            n = [2, 7]
            strategies = ["ramp", "vcqa-z", "vcqa-no-aux"]
            t_grid = [1.0, 5.0]

            [optimizer]
            max_evals = 100
            "#,
        )
        .unwrap();
        assert_eq!(c.connectivity, Connectivity::Star);
        assert_eq!(c.strategies[1], Strategy::Vcqa(Some(Axis::Z)));
        assert_eq!(c.optimizer.max_evals, 100);
        assert_eq!(c.optimizer.restarts, 3);
        assert_eq!(c.instance_count, 20);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        for text in [
            "instance_count = 0",
            "t_grid = [2.0, 1.0]",
            "t_grid = [-1.0]",
            "strategies = []",
            "n = [40]",
            "bogus = 1",
            "strategies = [\"vcqa-w\"]",
        ] {
            assert!(ExperimentConfig::from_toml_str(text).is_err(), "{text}");
        }
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash().unwrap(), b.hash().unwrap());
        b.seed += 1;
        assert_ne!(a.hash().unwrap(), b.hash().unwrap());
    }

    #[test]
    fn default_time_grid() {
        let g = log_grid(0.5, 5.0, 10);
        assert_eq!(g.len(), 10);
        assert_eq!((g[0], g[9]), (0.5, 5.0));
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }
}
