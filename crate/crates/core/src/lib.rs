//! Variational coherent quantum annealing laboratory.
//!
//! Schedules `F1, F2, F3` drive `H(t) = F1 H_i + F2 H_f + F3 H_aux`; this crate
//! parametrizes them with monotone cubic Hermite interpolants, propagates small
//! spin registers under the resulting Hamiltonian, optimizes the schedule
//! parameters against the final energy, studies instantaneous spectral gaps
//! and evaluates the annealing-time relation including its schedule-shape
//! correction.

// negated comparisons reject NaN together with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod annealtime;
pub mod error;
pub mod evolve;
pub mod hamiltonian;
pub mod harness;
pub mod linalg;
pub mod pauli;
pub mod optimize;
pub mod schedule;
pub mod seeding;
pub mod simplex;
pub mod spectrum;
pub mod state;

pub use error::{Error, Result};
pub use evolve::{EvolutionMetrics, IntegratorConfig, Sample, Trajectory};
pub use annealtime::{annealing_time_prediction, AnnealTimeReport};
pub use harness::{DrawRange, ExperimentConfig, ResultRecord};
pub use optimize::{OptimizationResult, OptimizerConfig, Strategy};
pub use spectrum::GapProfile;
pub use hamiltonian::{AnnealSetup, Axis, Connectivity, Coupling, HeisenbergParams, ProblemInstance};
pub use pauli::{Pauli, PauliString, PauliSum};
pub use schedule::{EndpointSlopes, PiecewiseHermite, Schedule, ScheduleRole, ScheduleSet, ScheduleSpec};
pub use state::StateVector;
