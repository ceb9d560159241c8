use criterion::{criterion_group, criterion_main, Criterion};
use restraint_core::lyapunov::{build_decrease_modulus, verify_mrf_band, BandSpec, ModulusParams};
use restraint_core::oracle::examples::{min_time_mrf, min_time_system, spiral_mrf, spiral_system, spiral_target};
use restraint_core::oracle::{hjb_value_iteration, HjbConfig, SweepMode};
use restraint_core::synthesis::{synthesize, SynthesisConfig};
use restraint_core::{TargetSet, UniformGrid};
use std::hint::black_box;

fn band(c: &mut Criterion) {
    let sys = spiral_system(1.0);
    let target = spiral_target();
    let mrf = spiral_mrf(0.5, 1.0);
    let grid = UniformGrid::with_spacing(vec![-4.0, -4.0], vec![4.0, 4.0], 0.02).unwrap();
    let spec = BandSpec {
        delta: 0.05,
        ..Default::default()
    };
    c.bench_function("band_spiral_401x401", |b| {
        b.iter(|| verify_mrf_band(&sys, &target, &mrf, black_box(&grid), &spec).unwrap())
    });
}

fn leg(c: &mut Criterion) {
    let sys = min_time_system();
    let target = TargetSet::point(vec![0.0]);
    let mrf = min_time_mrf(0.9);
    let grid = UniformGrid::with_counts(vec![-2.0], vec![2.0], vec![401]).unwrap();
    let spec = BandSpec {
        delta: 1e-4,
        sigma: Some(1.5),
        ..Default::default()
    };
    let report = verify_mrf_band(&sys, &target, &mrf, &grid, &spec).unwrap();
    let modulus = build_decrease_modulus(&report.m_hat_pairs(), &ModulusParams::default()).unwrap();
    let cfg = SynthesisConfig::default();
    c.bench_function("synthesize_min_time", |b| {
        b.iter(|| synthesize(&sys, &target, &mrf, &modulus, black_box(&[1.0]), report.sigma, &cfg).unwrap())
    });
}

fn hjb(c: &mut Criterion) {
    let sys = min_time_system();
    let target = TargetSet::point(vec![0.0]);
    let grid = UniformGrid::with_counts(vec![-2.0], vec![2.0], vec![401]).unwrap();
    let mut group = c.benchmark_group("hjb_min_time_401");
    for mode in [SweepMode::GaussSeidel, SweepMode::Jacobi] {
        let cfg = HjbConfig {
            mode,
            ..Default::default()
        };
        group.bench_function(format!("{mode:?}"), |b| {
            b.iter(|| hjb_value_iteration(&sys, &target, black_box(&grid), &cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group! {
    name = kernels;
    config = Criterion::default().sample_size(10);
    targets = band, leg, hjb
}
criterion_main!(kernels);
