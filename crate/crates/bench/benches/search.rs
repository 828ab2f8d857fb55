use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ticl_bench::random_dataset;
use ticl_core::metrics::knn_predict;
use ticl_core::model::init_params;
use ticl_core::retrieval::{build_index, query};
use ticl_core::{ModelConfig, TimeLabelSpace};

fn bench_search(c: &mut Criterion) {
    let mut group = c.benchmark_group("search");
    let params = init_params(0, &ModelConfig::new(24, 64, 128).with_hidden(vec![128], vec![256])).unwrap();
    let space = TimeLabelSpace::new(24).unwrap();
    let probe = random_dataset(1, 64, 9).records()[0].features.clone();
    for n in [1_000usize, 10_000] {
        let index = build_index(&params, &random_dataset(n, 64, 2)).unwrap();
        group.bench_with_input(BenchmarkId::new("query_top10", n), &index, |b, index| {
            b.iter(|| query(index, &probe, &params, 10).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("knn_k5", n), &index, |b, index| {
            b.iter(|| knn_predict(index, &probe, &params, &space, 5).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_search);
criterion_main!(benches);
