use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use wbsense::harness::run_trials;
use wbsense::recovery::SensingOperator;
use wbsense::{Execution, Preset, RowBlock};

const MODES: [(&str, Execution); 2] = [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)];

fn operator(c: &mut Criterion) {
    let (rows, cols) = (1000, 4000);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let data: Vec<f64> = (0..rows * cols).map(|_| StandardNormal.sample(&mut rng)).collect();
    let x: Vec<Complex64> = (0..cols)
        .map(|_| Complex64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
        .collect();
    let u: Vec<Complex64> = (0..rows)
        .map(|_| Complex64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
        .collect();
    let mut group = c.benchmark_group("operator_1000x4000");
    for (name, exec) in MODES {
        let op = SensingOperator::with_execution(RowBlock::new(&data, cols), exec).unwrap();
        group.bench_function(BenchmarkId::new("apply", name), |b| b.iter(|| op.apply(&x).unwrap()));
        group.bench_function(BenchmarkId::new("adjoint", name), |b| b.iter(|| op.adjoint(&u).unwrap()));
    }
    group.finish();
}

fn trials(c: &mut Criterion) {
    let config = Preset::Tiny.config();
    let mut group = c.benchmark_group("tiny_trials");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new("8_trials", name), |b| {
            b.iter(|| run_trials(&config, 8, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, operator, trials);
criterion_main!(benches);
