use std::f64::consts::PI;
use std::hint::black_box;

use colombeau::linalg::{eigen_sym, GenMatrix};
use colombeau::par;
use colombeau::wave::{solve, wave_grid, CauchyData, SolveOptions, StaticMetricFamily, Torus};
use colombeau::{EpsilonGrid, GeneralizedNumber, Thresholds};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pools() -> [(&'static str, rayon::ThreadPool); 2] {
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let all = rayon::ThreadPoolBuilder::new().build().unwrap();
    [("sequential", single), ("parallel", all)]
}

fn eigen_batch(c: &mut Criterion) {
    let grid = EpsilonGrid::standard();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let coeffs: Vec<f64> = (0..10).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let a = GenMatrix::from_fn(&grid, 4, |_, eps| {
        let mut m = nalgebra::DMatrix::zeros(4, 4);
        let mut idx = 0;
        for i in 0..4 {
            for j in i..4 {
                m[(i, j)] = coeffs[idx] * eps.powi((i + j) as i32 % 3);
                m[(j, i)] = m[(i, j)];
                idx += 1;
            }
        }
        m
    })
    .unwrap();
    let mut group = c.benchmark_group("eigen_batch");
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pool.install(|| eigen_sym(black_box(&a)).unwrap()))
        });
    }
    group.finish();
}

fn wave_solve(c: &mut Criterion) {
    let torus = Torus::unit_line(256);
    let grid = wave_grid();
    let metric = StaticMetricFamily::bump_family(torus.clone(), grid.clone(), 0.5).unwrap();
    let data = CauchyData::from_fn(&grid, &torus, |_, x| (2.0 * PI * x[0]).sin(), |_, _| 0.0);
    let opts = SolveOptions { t_final: 0.25, ..Default::default() };
    let mut group = c.benchmark_group("wave_solve");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pool.install(|| solve(black_box(&metric), &data, &opts).unwrap()))
        });
    }
    group.finish();
}

fn valuation_sweep(c: &mut Criterion) {
    let grid = EpsilonGrid::standard();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let nets: Vec<GeneralizedNumber> = (0..2000)
        .map(|_| {
            let (c, a) = (rng.gen_range(0.1..10.0), rng.gen_range(-6.0..6.0));
            GeneralizedNumber::power(c, a, &grid).unwrap()
        })
        .collect();
    let th = Thresholds::default();
    let mut group = c.benchmark_group("valuation_sweep");
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pool.install(|| par::map_indices(nets.len(), |i| th.classify(black_box(&nets[i])))))
        });
    }
    group.finish();
}

criterion_group!(benches, eigen_batch, wave_solve, valuation_sweep);
criterion_main!(benches);
