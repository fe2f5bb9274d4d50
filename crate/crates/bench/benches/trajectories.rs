use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion};
use qtraj_core::decay::{self, photon_counting_ops, unravel_ensemble};
use qtraj_core::modal::{three_level_toy, PointerModel, RateSchedule};
use qtraj_core::statmech::{simulate_ising, IsingLattice};
use qtraj_core::{c64, OperatorMatrix, RngStream};

fn counting_ensemble(c: &mut Criterion) {
    let ops = photon_counting_ops(0.5, 0.01, &OperatorMatrix::zeros(2)).unwrap();
    let psi = decay::excited();
    let mut group = c.benchmark_group("counting_ensemble");
    group.sample_size(20);
    for paths in [100usize, 1000] {
        group.bench_with_input(BenchmarkId::from_parameter(paths), &paths, |b, &n| {
            b.iter(|| unravel_ensemble(&ops, &psi, 1000, 0.01, n, 7, 10).unwrap())
        });
    }
    group.finish();
}

fn bell_paths(c: &mut Criterion) {
    let (h, cut, psi) = three_level_toy();
    c.bench_function("rate_schedule/three_level_2000_steps", |b| b.iter(|| RateSchedule::compute(&h, &cut, &psi, 0.0, 0.005, 2000).unwrap()));
    let schedule = RateSchedule::compute(&h, &cut, &psi, 0.0, 0.005, 2000).unwrap();
    c.bench_function("rate_schedule/sample_1000_paths", |b| b.iter(|| schedule.sample_ensemble(1000, None, 7).unwrap()));

    let model = PointerModel::new(c64(0.7f64.sqrt(), 0.0), c64(0.3f64.sqrt(), 0.0), 1.0).unwrap();
    c.bench_function("rate_schedule/pointer_4000_steps", |b| {
        b.iter(|| RateSchedule::compute(&model.hamiltonian(), &model.cut(), &model.initial_state(), 0.0, 0.002, 4000).unwrap())
    });
}

fn ising_sweeps(c: &mut Criterion) {
    let mut group = c.benchmark_group("ising_100_sweeps");
    for l in [16usize, 64] {
        group.bench_with_input(BenchmarkId::from_parameter(l), &l, |b, &l| {
            b.iter_batched(
                || (IsingLattice::all_up(l, 2.0).unwrap(), RngStream::new(7, 0)),
                |(mut lattice, mut rng)| simulate_ising(&mut lattice, 100, &mut rng),
                BatchSize::SmallInput,
            )
        });
    }
    group.finish();
}

criterion_group!(benches, counting_ensemble, bell_paths, ising_sweeps);
criterion_main!(benches);
