use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use num_complex::Complex64;

use vcqa_bench::ramp_setup;
use vcqa_core::evolve::{final_state, IntegratorConfig};
use vcqa_core::pauli::CompiledOperator;
use vcqa_core::schedule::ScheduleSet;
use vcqa_core::{Connectivity, EndpointSlopes};

fn apply(c: &mut Criterion) {
    let mut group = c.benchmark_group("apply");
    for n in [4usize, 8, 12] {
        let h = ramp_setup(Connectivity::Full, n, 1.0).assemble(0.5).unwrap();
        let op = CompiledOperator::new(&h);
        let x = vec![Complex64::new(1.0 / (op.dim() as f64).sqrt(), 0.0); op.dim()];
        let mut y = vec![Complex64::new(0.0, 0.0); op.dim()];
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| b.iter(|| op.apply_into(&x, &mut y)));
    }
    group.finish();
}

fn propagate(c: &mut Criterion) {
    let mut group = c.benchmark_group("propagate");
    group.sample_size(10);
    let config = IntegratorConfig { n_samples: 2, ..Default::default() };
    for n in [2usize, 4, 7] {
        let setup = ramp_setup(Connectivity::Linear, n, 5.0);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| final_state(&setup, &config).unwrap())
        });
    }
    group.finish();
}

fn build_schedule(c: &mut Criterion) {
    let params = [0.8, 0.3, 0.2, 0.7, 0.5, 0.4];
    c.bench_function("build_schedule", |b| {
        b.iter(|| ScheduleSet::from_params(&params, [2, 2, 2], [(0.0, 1.0); 3], EndpointSlopes::Flat).unwrap())
    });
}

criterion_group!(benches, apply, propagate, build_schedule);
criterion_main!(benches);
