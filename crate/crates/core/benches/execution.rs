use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use uos_core::analysis::{exhaustive_bilipschitz_sparse, monte_carlo_bilipschitz};
use uos_core::models::sample_from_model;
use uos_core::operators::make_gaussian;
use uos_core::parallel::map_indexed;
use uos_core::{ipa_run, ExecMode, IpaConfig, LinearOperator, MeasurementVector, SignalVector, UnionModel};

const MODES: [(&str, ExecMode); 2] = [("sequential", ExecMode::Sequential), ("parallel", ExecMode::Parallel)];

fn monte_carlo(c: &mut Criterion) {
    let op = make_gaussian(32, 64, 1).unwrap();
    let model = UnionModel::k_sparse(64, 2).unwrap();
    let mut group = c.benchmark_group("monte_carlo_2000_pairs");
    for (name, mode) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| monte_carlo_bilipschitz(&op, &model, black_box(2000), 7, mode).unwrap())
        });
    }
    group.finish();
}

fn exhaustive(c: &mut Criterion) {
    let phi = make_gaussian(10, 16, 2).unwrap().into_matrix();
    let mut group = c.benchmark_group("exhaustive_n16_order4");
    for (name, mode) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| exhaustive_bilipschitz_sparse(black_box(&phi), 2, mode).unwrap())
        });
    }
    group.finish();
}

fn trial_sweep(c: &mut Criterion) {
    let model = UnionModel::k_sparse(64, 4).unwrap();
    let mut group = c.benchmark_group("recovery_sweep_32_trials");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                map_indexed(mode, 32, |t| {
                    let op = make_gaussian(32, 64, 100 + t as u64).unwrap();
                    let x: SignalVector = sample_from_model(&model, 200 + t as u64, 1.0).unwrap();
                    let y = MeasurementVector::new(op.apply(&x)).unwrap();
                    let cfg = IpaConfig::for_operator(&op).unwrap().with_fixed_iterations(100);
                    ipa_run(None, &y, &op, &model, &cfg).unwrap().final_residual
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, monte_carlo, exhaustive, trial_sweep);
criterion_main!(benches);
