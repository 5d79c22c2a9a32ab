//! Compares the rayon replica fan-out against the sequential fallback on
//! the two workloads that dominate wall time: particle-system sweeps and
//! coupled chaos replicas.
//!
//! Run with `cargo bench -p mflab-core`. Building with
//! `--no-default-features` exercises the sequential path inside
//! `map_indexed` as well; the explicit `*_seq` benchmarks below make the
//! comparison visible in a single default build.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use mflab_core::engine::{run_chaos_coupling, run_particles, MeasureFlowSource};
use mflab_core::models::{make_langevin, McKeanVlasovModel, Potential, PotentialPair};
use mflab_core::parallel;
use mflab_core::rng::{self, NoiseStream};

fn quadratic_langevin(d: usize) -> McKeanVlasovModel {
    let pair = PotentialPair::new(
        Potential::quadratic(d, 1.0),
        Potential::quadratic_interaction(d, 0.5),
        1.0,
    )
    .unwrap();
    make_langevin(pair).unwrap()
}

fn particle_replica(model: &McKeanVlasovModel, rep: usize) -> f64 {
    let mut init = NoiseStream::new(7, rng::substream_id(rng::role::INIT, rep as u64, 0));
    let n = 32;
    let z0: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let mut x = vec![0.0; model.dim()];
            init.fill_normal(&mut x);
            x
        })
        .collect();
    let run = run_particles(model, z0, 0.0, 0.5, 1e-2, 7, rep as u64, 50).unwrap();
    run.final_states.iter().map(|p| p[0]).sum()
}

fn chaos_replica(model: &McKeanVlasovModel, rep: usize) -> f64 {
    let mut init = NoiseStream::new(11, rng::substream_id(rng::role::INIT, rep as u64, 0));
    let n = 16;
    let z0: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let mut x = vec![0.0; model.dim()];
            init.fill_normal(&mut x);
            x
        })
        .collect();
    let mut src = MeasureFlowSource::exact_mean_linear(model, vec![0.0; model.dim()]).unwrap();
    let run = run_chaos_coupling(model, &mut src, z0, 0.0, 0.5, 1e-2, 11, rep as u64, 50).unwrap();
    *run.mean_sq_gap.last().unwrap()
}

fn bench_replica_sweeps(c: &mut Criterion) {
    let model = quadratic_langevin(1);
    let replicas = 32;

    let mut group = c.benchmark_group("particle_replica_sweep");
    group.bench_with_input(BenchmarkId::new("parallel", replicas), &replicas, |b, &n| {
        b.iter(|| parallel::map_indexed(n, |rep| particle_replica(&model, rep)))
    });
    group.bench_with_input(BenchmarkId::new("sequential", replicas), &replicas, |b, &n| {
        b.iter(|| parallel::map_indexed_seq(n, |rep| particle_replica(&model, rep)))
    });
    group.finish();

    let mut group = c.benchmark_group("chaos_replica_sweep");
    group.bench_with_input(BenchmarkId::new("parallel", replicas), &replicas, |b, &n| {
        b.iter(|| parallel::map_indexed(n, |rep| chaos_replica(&model, rep)))
    });
    group.bench_with_input(BenchmarkId::new("sequential", replicas), &replicas, |b, &n| {
        b.iter(|| parallel::map_indexed_seq(n, |rep| chaos_replica(&model, rep)))
    });
    group.finish();
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = bench_replica_sweeps
}
criterion_main!(benches);
