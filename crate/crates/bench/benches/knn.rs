use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use linkforge_core::candidates::{knn_brute_force, knn_indices};
use linkforge_core::synth::generate_benchmark;
use linkforge_core::GeneratorConfig;

fn knn(c: &mut Criterion) {
    let mut group = c.benchmark_group("knn");
    group.sample_size(10);
    for (n_base, dim) in [(500, 10), (1000, 100)] {
        let bench = generate_benchmark(&GeneratorConfig {
            n_base,
            dim,
            seed: 1,
            ..GeneratorConfig::default()
        })
        .expect("valid generator settings");
        let table = &bench.embeddings;
        let label = format!("{}x{dim}", table.len());
        group.bench_with_input(BenchmarkId::new("kd_tree", &label), table, |b, t| {
            b.iter(|| knn_indices(t, 3).expect("k below table size"))
        });
        group.bench_with_input(BenchmarkId::new("brute_force", &label), table, |b, t| {
            b.iter(|| knn_brute_force(t, 3).expect("k below table size"))
        });
    }
    group.finish();
}

criterion_group!(benches, knn);
criterion_main!(benches);
