//! Instance generation, experiment orchestration and result emission.

pub mod config;
pub mod emit;
pub mod instances;
pub mod sweep;

pub use config::{log_grid, ExperimentConfig, GapConfig, FULL_SCALE_INSTANCES};
pub use emit::{emit_gap_study, emit_sweep, Manifest, StoredRun};
pub use instances::{generate_instances, generate_instances_with, instance_from_seed, DrawRange, DEFAULT_HEISENBERG};
pub use sweep::{
    aggregate, ensemble, instance_seed, replay_record, run_gap_study, run_sweep, run_task, strategy_setup, Aggregate,
    Conventions, GapStudy, ResultRecord, SweepOutput, WORKERS_ENV,
};
