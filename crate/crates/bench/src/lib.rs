//! Fixtures shared by the benchmarks.

use vcqa_core::harness::{generate_instances, DrawRange};
use vcqa_core::schedule::ramp_profile;
use vcqa_core::{AnnealSetup, Connectivity, ProblemInstance};

pub fn instance(connectivity: Connectivity, n: usize) -> ProblemInstance {
    generate_instances(connectivity, n, 1, 7, DrawRange::HalfOpen).expect("valid instance").remove(0)
}

pub fn ramp_setup(connectivity: Connectivity, n: usize, total_time: f64) -> AnnealSetup {
    AnnealSetup::for_instance(&instance(connectivity, n), ramp_profile(), None, total_time, 1.0).expect("valid setup")
}
