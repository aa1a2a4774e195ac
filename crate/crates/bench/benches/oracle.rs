use criterion::{black_box, criterion_group, criterion_main, Criterion};
use scint_core::oracle::{medium_box, sample_medium_with};
use scint_core::{build_grid, propagate_classical, FieldRealization, SpectrumModel};

fn propagation(c: &mut Criterion) {
    let model = SpectrumModel::von_karman(1e-7, 20.0, 5.0).unwrap();
    let grid = build_grid(8, 4.0, 100.0).unwrap();
    let (n, dx) = medium_box(&grid);
    let (dims, spacings) = ([n, n, 64], [dx, dx, 0.125]);
    c.bench_function("sample_medium_64_slabs", |b| {
        b.iter(|| sample_medium_with(&model, dims, spacings, black_box(1), 0, false).unwrap())
    });
    let medium = sample_medium_with(&model, dims, spacings, 1, 0, false).unwrap();
    let launch = FieldRealization::gaussian(&grid, 1.0, 0.0).unwrap();
    c.bench_function("propagate_8x8_64_steps", |b| {
        b.iter(|| propagate_classical(black_box(&launch), &medium, &grid, 8.0).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = propagation
}
criterion_main!(benches);
