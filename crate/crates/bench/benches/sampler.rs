use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion, Throughput};
use hypersparse::{
    generate_hypergraph, optimal_reweighting, run, GenSpec, Hyperedge, Model, OptimizerConfig, RankDist,
    RidgedLaplacianState, SparsifierConfig, WeightDist,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn warmed_state(n: usize, updates: usize) -> RidgedLaplacianState {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut s = RidgedLaplacianState::new(n, 0.5).unwrap();
    for _ in 0..updates {
        let u = rng.random_range(0..n);
        let v = (u + rng.random_range(1..n)) % n;
        s.add_pair(u, v, rng.random_range(0.1..2.0)).unwrap();
    }
    s
}

fn add_pair(c: &mut Criterion) {
    let mut group = c.benchmark_group("add_pair");
    for n in [20, 50, 100, 200] {
        let state = warmed_state(n, 4 * n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter_batched_ref(
                || state.clone(),
                |s| s.add_pair(0, n - 1, 0.7).unwrap(),
                BatchSize::LargeInput,
            )
        });
    }
    group.finish();
}

fn reweighting(c: &mut Criterion) {
    let mut group = c.benchmark_group("optimal_reweighting");
    let state = warmed_state(40, 400);
    let cfg = OptimizerConfig::default();
    for k in [3, 5, 8] {
        let e = Hyperedge::new((0..k).map(|i| i * 4), 1.3, 40).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(k), &e, |b, e| {
            b.iter(|| optimal_reweighting(&state, e, &cfg).unwrap())
        });
    }
    group.finish();
}

fn throughput(c: &mut Criterion) {
    let mut group = c.benchmark_group("sparsify_stream");
    group.sample_size(10);
    for n in [20, 60] {
        let m = 2000;
        let h = generate_hypergraph(&GenSpec {
            n,
            m,
            rank: RankDist::Uniform(4),
            weights: WeightDist::LogUniform { min: 0.01, max: 0.1 },
            model: Model::PlantedClusters { blocks: 4 },
            seed: 3,
        })
        .unwrap();
        let eta = 0.05 * h.total_weight() / n as f64;
        let cfg = SparsifierConfig::new(0.5, 0.5 * eta, 4);
        group.throughput(Throughput::Elements(m as u64));
        group.bench_with_input(BenchmarkId::from_parameter(n), &h, |b, h| {
            b.iter(|| run(h.n, h.edges.iter().cloned().map(Ok), &cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, add_pair, reweighting, throughput);
criterion_main!(benches);
