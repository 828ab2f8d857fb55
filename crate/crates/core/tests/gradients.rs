//! Analytic gradients against central finite differences.
//!
//! The oracle is the fourth-order central stencil
//! `(f(x-2h) - 8f(x-h) + 8f(x+h) - f(x+2h)) / 12h` with `h = 1e-4`. The
//! two-point stencil's `h^2 f''' / 6` truncation term alone exceeds the 1e-5
//! relative budget on small coordinates when tau = 0.07.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ticl_core::model::{init_params, Activation, ModelConfig, ModelParams};
use ticl_core::train::{batch_loss, loss_and_grads, LossMode};

const STEP: f64 = 1e-4;

/// Central-difference gradient of the loss for every scalar parameter.
fn numeric_grads(params: &ModelParams, x: &Array2<f64>, y: &[usize], mode: LossMode) -> Vec<Vec<f64>> {
    let shapes: Vec<usize> = params.tensors().iter().map(|t| t.len()).collect();
    let mut out = Vec::new();
    for (ti, &len) in shapes.iter().enumerate() {
        let mut g = vec![0.0; len];
        for (k, gk) in g.iter_mut().enumerate() {
            let at = |offset: f64| {
                let mut q = params.clone();
                q.tensors_mut()[ti][k] += offset;
                batch_loss(&q, x.view(), y, mode).unwrap()
            };
            *gk = ((at(-2.0 * STEP) - at(2.0 * STEP)) + 8.0 * (at(STEP) - at(-STEP))) / (12.0 * STEP);
        }
        out.push(g);
    }
    out
}

/// Relative error with an absolute floor: the oracle's own round-off is
/// about `18 * L * eps / 12h ~ 6e-11`, so coordinates below 1e-5 are compared
/// at an absolute 1e-10.
fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-5)
}

/// Random small configuration; biases are perturbed away from zero so the
/// bias paths are exercised.
fn random_case(seed: u64) -> (ModelParams, Array2<f64>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = [4usize, 6][rng.random_range(0..2)];
    let d = [6usize, 8][rng.random_range(0..2)];
    let k = [6usize, 8][rng.random_range(0..2)];
    let b = [2usize, 4][rng.random_range(0..2)];
    let mut cfg = ModelConfig::new(c, d, k).with_hidden(vec![5], vec![7]);
    cfg.activation = if seed.is_multiple_of(2) { Activation::GeluApprox } else { Activation::Relu };
    let mut p = init_params(seed, &cfg).unwrap();
    for t in p.tensors_mut() {
        for v in t.iter_mut() {
            *v += rng.random_range(-0.1..0.1);
        }
    }
    let x = Array2::from_shape_simple_fn((b, d), || rng.random_range(-1.0..1.0));
    let mut y: Vec<usize> = (0..b).map(|_| rng.random_range(0..c)).collect();
    y[0] = 0;
    y[b - 1] = 1;
    (p, x, y)
}

fn max_rel_error(params: &ModelParams, x: &Array2<f64>, y: &[usize], mode: LossMode) -> f64 {
    let analytic = loss_and_grads(params, x.view(), y, mode).unwrap().grads;
    let numeric = numeric_grads(params, x, y, mode);
    let mut worst: f64 = 0.0;
    for (a, n) in analytic.tensors().iter().zip(&numeric) {
        for (&ai, &ni) in a.iter().zip(n) {
            worst = worst.max(rel_err(ai, ni));
        }
    }
    worst
}

#[test]
fn analytic_gradients_match_finite_differences() {
    let mut worst: f64 = 0.0;
    for seed in 0..24 {
        let (p, x, y) = random_case(seed);
        for mode in [LossMode::Class, LossMode::Batch] {
            let err = max_rel_error(&p, &x, &y, mode);
            worst = worst.max(err);
            assert!(err < 1e-5, "seed {seed} {mode:?}: max rel err {err:.3e}");
        }
    }
    println!("worst relative error over 24 configurations: {worst:.3e}");
}

#[test]
fn residual_adaptor_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let cfg = ModelConfig::new(4, 6, 6).with_hidden(vec![5], vec![7]);
    let mut p = init_params(3, &cfg).unwrap();
    assert!(p.adaptor.residual());
    for t in p.tensors_mut() {
        for v in t.iter_mut() {
            *v += rng.random_range(-0.1..0.1);
        }
    }
    let x = Array2::from_shape_simple_fn((4, 6), || rng.random_range(-1.0..1.0));
    let y = [0, 1, 2, 1];
    for mode in [LossMode::Class, LossMode::Batch] {
        let err = max_rel_error(&p, &x, &y, mode);
        assert!(err < 1e-5, "{mode:?}: {err:.3e}");
    }
}

#[test]
fn permuting_the_batch_leaves_loss_and_grads_unchanged() {
    let (p, x, y) = random_case(5);
    let b = x.nrows();
    let perm: Vec<usize> = (0..b).rev().collect();
    let xp = x.select(ndarray::Axis(0), &perm);
    let yp: Vec<usize> = perm.iter().map(|&i| y[i]).collect();
    for mode in [LossMode::Class, LossMode::Batch] {
        let a = loss_and_grads(&p, x.view(), &y, mode).unwrap();
        let bq = loss_and_grads(&p, xp.view(), &yp, mode).unwrap();
        assert!((a.loss - bq.loss).abs() < 1e-12);
        for (ta, tb) in a.grads.tensors().iter().zip(bq.grads.tensors()) {
            for (u, v) in ta.iter().zip(tb) {
                assert!((u - v).abs() <= 1e-12 * (1.0 + u.abs()));
            }
        }
    }
}

#[test]
fn loss_is_strictly_positive_for_distinct_targets() {
    for seed in 0..10 {
        let (p, x, y) = random_case(seed);
        for mode in [LossMode::Class, LossMode::Batch] {
            assert!(loss_and_grads(&p, x.view(), &y, mode).unwrap().loss > 0.0);
        }
    }
}



