//! Seeded inputs shared by the benchmarks.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ticl_core::{ClockTime, Dataset, FeatureRecord};

pub fn uniform_matrix(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-1.0..1.0))
}

/// `n` records of dimension `dim` with uniformly random times.
pub fn random_dataset(n: usize, dim: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let records = (0..n)
        .map(|i| {
            let f = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let t = ClockTime::from_minutes(rng.random_range(0..1440)).unwrap();
            FeatureRecord::new(format!("b{i}"), f, t)
        })
        .collect();
    Dataset::new(dim, records).unwrap()
}

/// Labels cycling through every class, so each class appears in a batch.
pub fn cycling_labels(n: usize, classes: usize) -> Vec<usize> {
    (0..n).map(|i| i % classes).collect()
}
