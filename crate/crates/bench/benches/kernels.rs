use criterion::{black_box, criterion_group, criterion_main, Criterion};
use scint_core::{build_grid, phi1_markovian, KernelPair, SpectrumModel};

fn kernel_pair(c: &mut Criterion) {
    let model = SpectrumModel::von_karman(1e-7, 10.0, 2.0).unwrap();
    let mut g = c.benchmark_group("kernel_pair");
    for n in [2usize, 4] {
        let grid = build_grid(n, 2.0, 50.0).unwrap();
        g.bench_function(format!("{n}x{n}"), |b| {
            b.iter(|| KernelPair::new(black_box(&grid), &model, 5.0, 0.0).unwrap())
        });
    }
    g.finish();
    let grid = build_grid(16, 8.0, 50.0).unwrap();
    c.bench_function("phi1_markovian_16x16", |b| {
        b.iter(|| phi1_markovian(black_box(&grid), &model).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = kernel_pair
}
criterion_main!(benches);
