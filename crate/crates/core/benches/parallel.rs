use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hashgp::diversity::{distance_matrix, distance_matrix_sequential};
use hashgp::evolve::fitness;
use hashgp::expr::{ptc2, ExpressionTree, Grammar};
use hashgp::hash::{HashMode, TreeHasher};
use hashgp::par;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn population(n: usize, size: usize) -> Vec<ExpressionTree> {
    let grammar = Grammar::new(5);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    (0..n).map(|_| ptc2(&mut rng, &grammar, size, 12).unwrap()).collect()
}

fn distances(c: &mut Criterion) {
    let mut group = c.benchmark_group("distance_matrix");
    group.sample_size(10);
    for n in [200, 1000] {
        let trees = population(n, 50);
        let hasher = TreeHasher::new(HashMode::Strict);
        group.bench_with_input(BenchmarkId::new("par", n), &trees, |b, t| {
            b.iter(|| distance_matrix(&hasher, t))
        });
        group.bench_with_input(BenchmarkId::new("sequential", n), &trees, |b, t| {
            b.iter(|| distance_matrix_sequential(&hasher, t))
        });
    }
    group.finish();
}

fn evaluation(c: &mut Criterion) {
    let trees = population(500, 50);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = Array2::from_shape_fn((1000, 5), |_| rng.random_range(-1.0..1.0));
    let y: Vec<f64> = (0..1000).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut group = c.benchmark_group("fitness_500x1000");
    group.sample_size(10);
    group.bench_function("par", |b| b.iter(|| par::map(&trees, |t| fitness(t, x.view(), &y))));
    group.bench_function("sequential", |b| {
        b.iter(|| par::sequential::map(&trees, |t| fitness(t, x.view(), &y)))
    });
    group.finish();
}

criterion_group!(benches, distances, evaluation);
criterion_main!(benches);
