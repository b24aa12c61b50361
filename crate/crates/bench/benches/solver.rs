use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use linkforge_bench::noisy_component;
use linkforge_core::editing::{solve_with, SolverOptions};

fn solver(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_exact");
    for n in [10, 20, 30] {
        let inst = noisy_component(n, 4, 0.1, n as u64);
        for kernelize in [true, false] {
            if !kernelize && n > 20 {
                continue;
            }
            let opts = SolverOptions {
                kernelize,
                ..SolverOptions::default()
            };
            let name = if kernelize { "kernel" } else { "plain" };
            group.bench_with_input(BenchmarkId::new(name, n), &inst, |b, inst| {
                b.iter(|| solve_with(inst, &opts).expect("within budget"))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, solver);
criterion_main!(benches);
