use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ticl_bench::uniform_matrix;
use ticl_core::curation::{dbscan, snr_estimate};
use ticl_core::{DbscanConfig, GrayImage};

fn bench_dbscan(c: &mut Criterion) {
    let mut group = c.benchmark_group("dbscan");
    group.sample_size(20);
    let cfg = DbscanConfig { epsilon: 0.5, min_pts: 8 };
    for n in [500usize, 2_000] {
        let points = uniform_matrix(n, 8, 3);
        group.bench_with_input(BenchmarkId::from_parameter(n), &points, |b, p| b.iter(|| dbscan(p.view(), &cfg).unwrap()));
    }
    group.finish();
}

fn bench_snr(c: &mut Criterion) {
    let noise = uniform_matrix(512, 512, 4);
    let img = GrayImage::from_fn(512, 512, |x, y| 128.0 + 20.0 * noise[[y, x]]).unwrap();
    c.bench_function("snr_512x512", |b| b.iter(|| snr_estimate(&img).unwrap()));
}

criterion_group!(benches, bench_dbscan, bench_snr);
criterion_main!(benches);
