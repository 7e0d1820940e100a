//! Data-parallel helpers against plain sequential iteration on the two
//! workloads that use them: batches of forward solves and the direct
//! convolution. Build with `--no-default-features` to time the fallback.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use onco::forward::{cost, solve_forward, ControlProfile, Normalization, Problem, Storage};
use onco::{parallel, Kernel, Mesh, ModelParams};

fn forward_batch(c: &mut Criterion) {
    let params = ModelParams::default();
    let pr = Problem::new(params.clone(), 41, 0.1, Normalization::default()).unwrap();
    let levels: Vec<f64> = (0..8).map(|k| 0.5 * k as f64).collect();
    let run = |&level: &f64| {
        let u = ControlProfile::constant(&pr.grid, &params, level).unwrap();
        let traj = solve_forward(&pr, &u, Storage::Endpoints).unwrap();
        cost(&pr, &u, &traj)
    };
    let mut group = c.benchmark_group("forward_batch");
    group.sample_size(10);
    group.bench_function("map_slice", |b| {
        b.iter(|| black_box(parallel::map_slice(&levels, run)))
    });
    group.bench_function("sequential", |b| {
        b.iter(|| black_box(levels.iter().map(run).collect::<Vec<_>>()))
    });
    group.finish();
}

fn direct_convolution(c: &mut Criterion) {
    let params = ModelParams::default();
    let mut group = c.benchmark_group("convolution");
    for n_x in [200, 800] {
        let mesh = Mesh::new(&params, n_x).unwrap();
        let kernel = Kernel::gaussian(params.sigma, &mesh);
        let f: Vec<f64> = (0..n_x).map(|i| (i as f64 * 0.37).sin().abs()).collect();
        group.bench_with_input(BenchmarkId::new("direct", n_x), &f, |b, f| {
            b.iter(|| black_box(kernel.convolve_direct(f)))
        });
        group.bench_with_input(BenchmarkId::new("fft", n_x), &f, |b, f| {
            b.iter(|| black_box(kernel.convolve(f)))
        });
    }
    group.finish();
}

criterion_group!(benches, forward_batch, direct_convolution);
criterion_main!(benches);
