use std::hint::black_box;

use capsim::{make_strassen_winograd, recursive_multiply};
use capsim_bench::pair;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn local_multiply(c: &mut Criterion) {
    let sw = make_strassen_winograd();
    let mut group = c.benchmark_group("local");
    for n in [64usize, 128, 256] {
        let (a, b) = pair(n, 1);
        group.bench_with_input(BenchmarkId::new("classical", n), &n, |bch, _| {
            bch.iter(|| black_box(&a).classical_mul(black_box(&b)).unwrap())
        });
        for cutoff in [8usize, 32] {
            group.bench_with_input(
                BenchmarkId::new(format!("winograd/cutoff{cutoff}"), n),
                &n,
                |bch, _| bch.iter(|| recursive_multiply(&sw, black_box(&a), black_box(&b), cutoff).unwrap()),
            );
        }
    }
    group.finish();
}

criterion_group!(benches, local_multiply);
criterion_main!(benches);
