//! Contrastive objective, analytic gradients and the Adam training loop.
//!
//! The loss for a batch of adapted image embeddings `I` and target class
//! embeddings `T` is
//!
//! ```text
//! L = -sum_i log( exp(I_i . T_i / tau) / sum_j exp(I_i . T_j / tau) )
//! ```
//!
//! [`LossMode::Batch`] uses the batch targets as the denominator set exactly
//! as written. [`LossMode::Class`] takes the denominator over all `C` class
//! embeddings instead, which avoids same-class false negatives when
//! `B >> C`.

use ndarray::{Array2, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{init_params, normalize_rows, ModelConfig, ModelParams};
use crate::time::{Dataset, TimeLabelSpace};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LossMode {
    /// Denominator over the other targets in the batch.
    Batch,
    /// Denominator over every class embedding.
    #[default]
    Class,
}

impl std::str::FromStr for LossMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "batch" => Ok(LossMode::Batch),
            "class" => Ok(LossMode::Class),
            other => Err(Error::invalid("loss_mode", format!("{other:?} is not batch or class"))),
        }
    }
}

/// Missing fields in serialized form take the [`Default`] values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr0: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub halve_every: usize,
    pub seed: u64,
    pub loss_mode: LossMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr0: 5e-4,
            weight_decay: 1e-6,
            epochs: 20,
            batch_size: 512,
            halve_every: 2,
            seed: 0,
            loss_mode: LossMode::Class,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return Err(Error::invalid("lr0", format!("{} must be positive", self.lr0)));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::invalid("weight_decay", "must be non-negative"));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs", "must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size", "must be at least 1"));
        }
        if self.halve_every == 0 {
            return Err(Error::invalid("halve_every", "must be at least 1"));
        }
        Ok(())
    }
}

/// Step schedule: `lr0 * 0.5^floor(epoch / halve_every)`.
pub fn lr_at_epoch(config: &TrainConfig, epoch: usize) -> f64 {
    config.lr0 * 0.5f64.powi((epoch / config.halve_every) as i32)
}

/// Row-wise `log_softmax(logits)[i, target_i]` summed with a minus sign.
/// Returns the loss and, in place, `softmax - onehot(target)`.
fn cross_entropy_rows(logits: &mut Array2<f64>, targets: impl Fn(usize) -> usize) -> f64 {
    let mut loss = 0.0;
    for (i, mut row) in logits.rows_mut().into_iter().enumerate() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let mut sum = 0.0;
        row.mapv_inplace(|v| {
            let e = (v - max).exp();
            sum += e;
            e
        });
        let t = targets(i);
        // -log(p_t) = lse - logit_t
        loss -= (row[t] / sum).ln();
        row /= sum;
        row[t] -= 1.0;
    }
    loss
}

fn check_finite(a: ArrayView2<f64>, what: &str) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

/// Contrastive loss summed over the batch; row `i` of `targets` is the
/// positive for row `i` of `images`.
pub fn infonce_loss(images: ArrayView2<f64>, targets: ArrayView2<f64>, tau: f64) -> Result<f64> {
    if images.nrows() == 0 {
        return Err(Error::Empty("batch"));
    }
    if images.dim() != targets.dim() {
        return Err(Error::DimensionMismatch {
            context: "infonce targets",
            expected: images.nrows(),
            actual: targets.nrows(),
        });
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::invalid("tau", format!("{tau} must be positive")));
    }
    check_finite(images, "infonce images")?;
    check_finite(targets, "infonce targets")?;
    let mut logits = images.dot(&targets.t()) / tau;
    Ok(cross_entropy_rows(&mut logits, |i| i))
}

/// Backprop through `y = u / |u|` row-wise.
fn normalize_backward(unit: &Array2<f64>, norms: &ndarray::Array1<f64>, d_unit: &Array2<f64>) -> Array2<f64> {
    let mut du = d_unit.clone();
    for ((mut g, y), &n) in du.rows_mut().into_iter().zip(unit.rows()).zip(norms.iter()) {
        if n == 0.0 {
            g.fill(0.0);
            continue;
        }
        let proj = y.dot(&g);
        Zip::from(&mut g).and(&y).for_each(|gi, &yi| *gi = (*gi - yi * proj) / n);
    }
    du
}

/// Loss value (the batch sum) and its exact gradient for every parameter.
#[derive(Debug, Clone)]
pub struct LossGrads {
    pub loss: f64,
    pub grads: ModelParams,
    /// Batch mode with a single class in the batch: every denominator term
    /// is a positive, so the loss carries no contrastive signal.
    pub degenerate: bool,
}

pub fn loss_and_grads(
    params: &ModelParams,
    features: ArrayView2<f64>,
    labels: &[usize],
    mode: LossMode,
) -> Result<LossGrads> {
    let b = features.nrows();
    if b == 0 {
        return Err(Error::Empty("batch"));
    }
    if labels.len() != b {
        return Err(Error::DimensionMismatch {
            context: "batch labels",
            expected: b,
            actual: labels.len(),
        });
    }
    if features.ncols() != params.feature_dim() {
        return Err(Error::DimensionMismatch {
            context: "batch features",
            expected: params.feature_dim(),
            actual: features.ncols(),
        });
    }
    let c = params.num_classes();
    if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
        return Err(Error::invalid("labels", format!("class {bad} out of range for C={c}")));
    }
    check_finite(features, "batch features")?;

    let tau = params.tau();
    let (u, adaptor_cache) = params.adaptor.forward_cached(features);
    let (img, img_norms) = normalize_rows(u);

    let class_inputs = params.class_inputs();
    let time_inputs = match mode {
        LossMode::Class => class_inputs,
        LossMode::Batch => class_inputs.select(Axis(0), labels),
    };
    let (v, time_cache) = params.time_encoder.forward_cached(time_inputs.view());
    let (tgt, tgt_norms) = normalize_rows(v);

    let sims = img.dot(&tgt.t());
    let mut g = &sims / tau;
    let loss = match mode {
        LossMode::Class => cross_entropy_rows(&mut g, |i| labels[i]),
        LossMode::Batch => cross_entropy_rows(&mut g, |i| i),
    };
    if !loss.is_finite() {
        return Err(Error::NonFinite("loss".into()));
    }
    // g now holds dL/dlogits.
    let d_log_tau = -(&g * &sims).sum() / tau;
    let d_sims = g / tau;
    let d_img = d_sims.dot(&tgt);
    let d_tgt = d_sims.t().dot(&img);

    let mut grads = params.zeros_like();
    let du = normalize_backward(&img, &img_norms, &d_img);
    params.adaptor.backward(&adaptor_cache, du.view(), &mut grads.adaptor);
    let dv = normalize_backward(&tgt, &tgt_norms, &d_tgt);
    params.time_encoder.backward(&time_cache, dv.view(), &mut grads.time_encoder);
    grads.log_tau = d_log_tau;

    let degenerate = mode == LossMode::Batch && b > 1 && labels.iter().all(|&l| l == labels[0]);
    Ok(LossGrads { loss, grads, degenerate })
}

/// Loss only, same conventions as [`loss_and_grads`].
pub fn batch_loss(params: &ModelParams, features: ArrayView2<f64>, labels: &[usize], mode: LossMode) -> Result<f64> {
    let img = params.image_embed_batch(features);
    let table = params.class_embedding_table();
    match mode {
        LossMode::Batch => {
            let tgt = table.select(Axis(0), labels);
            infonce_loss(img.view(), tgt.view(), params.tau())
        }
        LossMode::Class => {
            let mut logits = img.dot(&table.t()) / params.tau();
            Ok(cross_entropy_rows(&mut logits, |i| labels[i]))
        }
    }
}

/// Adam moments, one buffer per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub step: u64,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        let zeros: Vec<Vec<f64>> = params.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }
}

/// One bias-corrected Adam update; weight decay is added to the gradient.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &ModelParams,
    state: &mut AdamState,
    lr: f64,
    weight_decay: f64,
) -> Result<()> {
    let grad_tensors = grads.tensors();
    if let Some((i, _)) = grad_tensors
        .iter()
        .enumerate()
        .find(|(_, t)| t.iter().any(|g| !g.is_finite()))
    {
        return Err(Error::NonFinite(format!("gradient tensor {i}; step aborted")));
    }
    let mut param_tensors = params.tensors_mut();
    if param_tensors.len() != state.m.len() || param_tensors.len() != grad_tensors.len() {
        return Err(Error::DimensionMismatch {
            context: "adam tensors",
            expected: state.m.len(),
            actual: grad_tensors.len(),
        });
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - ADAM_BETA1.powi(t);
    let bc2 = 1.0 - ADAM_BETA2.powi(t);
    for (((p, g), m), v) in param_tensors
        .iter_mut()
        .zip(&grad_tensors)
        .zip(&mut state.m)
        .zip(&mut state.v)
    {
        for i in 0..p.len() {
            let gi = g[i] + weight_decay * p[i];
            m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * gi;
            v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * gi * gi;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub lr: f64,
    /// Summed loss over the epoch divided by the number of samples.
    pub mean_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub trace: Vec<EpochStats>,
    pub steps: u64,
}

/// Stacks record features into an `N x D` matrix.
pub fn feature_matrix(dataset: &Dataset) -> Array2<f64> {
    let d = dataset.dim();
    let mut flat = Vec::with_capacity(dataset.len() * d);
    for r in dataset.records() {
        flat.extend_from_slice(&r.features);
    }
    Array2::from_shape_vec((dataset.len(), d), flat).expect("records validated against dim")
}

/// Initializes from `train_config.seed` and trains.
pub fn train(
    dataset: &Dataset,
    space: &TimeLabelSpace,
    model_config: &ModelConfig,
    train_config: &TrainConfig,
) -> Result<TrainOutcome> {
    let params = init_params(train_config.seed, model_config)?;
    train_from(params, dataset, space, train_config)
}

/// Trains existing parameters. The run is a pure function of its inputs:
/// batch order comes only from `config.seed`.
pub fn train_from(
    mut params: ModelParams,
    dataset: &Dataset,
    space: &TimeLabelSpace,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::Empty("training dataset"));
    }
    if dataset.dim() != params.feature_dim() {
        return Err(Error::DimensionMismatch {
            context: "dataset feature dim",
            expected: params.feature_dim(),
            actual: dataset.dim(),
        });
    }
    if space.num_classes() != params.num_classes() {
        return Err(Error::DimensionMismatch {
            context: "label space classes",
            expected: params.num_classes(),
            actual: space.num_classes(),
        });
    }
    let labels = space.labels(dataset)?;
    let features = feature_matrix(dataset);
    let n = dataset.len();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut state = AdamState::new(&params);
    let mut order: Vec<usize> = (0..n).collect();
    let mut trace = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let lr = lr_at_epoch(config, epoch);
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let x = features.select(Axis(0), chunk);
            let y: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let mut out = loss_and_grads(&params, x.view(), &y, config.loss_mode)?;
            if out.degenerate {
                log::warn!("epoch {epoch}: batch of {} samples contains a single class", chunk.len());
            }
            // Optimize the batch mean so lr does not depend on batch size.
            let scale = 1.0 / chunk.len() as f64;
            for t in out.grads.tensors_mut() {
                t.iter_mut().for_each(|g| *g *= scale);
            }
            adam_step(&mut params, &out.grads, &mut state, lr, config.weight_decay)?;
            total += out.loss;
        }
        let stats = EpochStats {
            epoch,
            lr,
            mean_loss: total / n as f64,
        };
        log::info!("epoch {epoch:>3}  lr {lr:.3e}  loss {:.6}  tau {:.4}", stats.mean_loss, params.tau());
        trace.push(stats);
    }
    Ok(TrainOutcome {
        params,
        trace,
        steps: state.step,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn single_sample_loss_is_zero() {
        let i = array![[0.6, 0.8]];
        let t = array![[1.0, 0.0]];
        assert_eq!(infonce_loss(i.view(), t.view(), 0.07).unwrap(), 0.0);
    }

    #[test]
    fn uniform_logits_give_b_log_b() {
        let i = Array2::from_elem((4, 3), 1.0 / 3f64.sqrt());
        let t = i.clone();
        let loss = infonce_loss(i.view(), t.view(), 0.07).unwrap();
        assert!((loss - 4.0 * 4f64.ln()).abs() < 1e-9);
        assert!((loss - 5.545177).abs() < 1e-6);
    }

    #[test]
    fn two_sample_orthonormal_matches_scalar_evaluation() {
        let tau: f64 = 0.07;
        let e = array![[1.0, 0.0], [0.0, 1.0]];
        let loss = infonce_loss(e.view(), e.view(), tau).unwrap();
        let p = (1.0 / tau).exp() / ((1.0 / tau).exp() + 1.0);
        assert!((loss - 2.0 * -p.ln()).abs() < 1e-15);
    }

    #[test]
    fn infonce_rejects_bad_inputs() {
        let e = array![[1.0, 0.0], [0.0, f64::NAN]];
        assert!(matches!(infonce_loss(e.view(), e.view(), 1.0), Err(Error::NonFinite(_))));
        let ok = array![[1.0, 0.0]];
        assert!(infonce_loss(ok.view(), ok.view(), 0.0).is_err());
        assert!(infonce_loss(Array2::<f64>::zeros((0, 2)).view(), Array2::zeros((0, 2)).view(), 1.0).is_err());
    }

    #[test]
    fn lr_schedule_examples() {
        let c = TrainConfig::default();
        assert_eq!(lr_at_epoch(&c, 0), 5e-4);
        assert_eq!(lr_at_epoch(&c, 1), 5e-4);
        assert_eq!(lr_at_epoch(&c, 3), 2.5e-4);
        assert_eq!(lr_at_epoch(&c, 4), 1.25e-4);
    }

    #[test]
    fn train_config_validation() {
        let mut c = TrainConfig::default();
        assert!(c.validate().is_ok());
        c.batch_size = 0;
        assert!(c.validate().is_err());
        c = TrainConfig { lr0: 0.0, ..Default::default() };
        assert!(c.validate().is_err());
        c = TrainConfig { epochs: 0, ..Default::default() };
        assert!(c.validate().is_err());
    }

    fn tiny_params() -> ModelParams {
        init_params(11, &ModelConfig::new(4, 3, 5).with_hidden(vec![6], vec![4])).unwrap()
    }

    #[test]
    fn adam_zero_grad_no_decay_is_fixed_point() {
        let mut p = tiny_params();
        let before = p.clone();
        let g = p.zeros_like();
        let mut s = AdamState::new(&p);
        adam_step(&mut p, &g, &mut s, 1e-3, 0.0).unwrap();
        assert_eq!(p, before);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut p = tiny_params();
        let start = p.log_tau;
        let mut g = p.zeros_like();
        g.log_tau = 1.0;
        let mut s = AdamState::new(&p);
        adam_step(&mut p, &g, &mut s, 1e-3, 0.0).unwrap();
        // m_hat = 1, v_hat = 1 -> delta = -lr / (1 + eps)
        let expected = -1e-3 / (1.0 + ADAM_EPS);
        assert!((p.log_tau - start - expected).abs() < 1e-15);
    }

    #[test]
    fn adam_aborts_on_non_finite_gradient() {
        let mut p = tiny_params();
        let before = p.clone();
        let mut g = p.zeros_like();
        g.log_tau = f64::INFINITY;
        let mut s = AdamState::new(&p);
        assert!(adam_step(&mut p, &g, &mut s, 1e-3, 0.0).is_err());
        assert_eq!(p, before);
        assert_eq!(s.step, 0);
    }

    #[test]
    fn log_tau_gradient_sign_on_two_sample_toy() {
        // Aligned pairs: positives dominate, so dL/dlog_tau = -sum g*logit > 0
        // (sharpening lowers the loss, i.e. loss grows with tau).
        let mut p = init_params(1, &ModelConfig::new(2, 2, 2).with_hidden(vec![], vec![])).unwrap();
        p.time_encoder.layers_mut()[0].weights = Array2::eye(2);
        let mut cfg = p.config.clone();
        cfg.residual_adaptor = false;
        p.config = cfg;
        p.adaptor = crate::model::Mlp::new(
            vec![crate::model::DenseLayer::new(Array2::eye(2), ndarray::Array1::zeros(2)).unwrap()],
            crate::model::Activation::Relu,
            false,
        )
        .unwrap();
        let x = array![[1.0, 0.0], [0.0, 1.0]];
        let out = loss_and_grads(&p, x.view(), &[0, 1], LossMode::Batch).unwrap();
        // L(s) = 2 log(1 + e^{-1/tau}); dL/dlog_tau = 2 (1/tau) e^{-1/tau}/(1+e^{-1/tau})
        let tau = p.tau();
        let e = (-1.0 / tau).exp();
        let expected = 2.0 * (1.0 / tau) * e / (1.0 + e);
        assert!(out.grads.log_tau > 0.0);
        assert!((out.grads.log_tau - expected).abs() < 1e-8 * expected);
        // Misaligned pairs flip the sign.
        let out = loss_and_grads(&p, x.view(), &[1, 0], LossMode::Batch).unwrap();
        assert!(out.grads.log_tau < 0.0);
    }

    #[test]
    fn batch_loss_matches_loss_and_grads() {
        let p = tiny_params();
        let x = array![[0.1, -0.3, 1.0], [2.0, 0.5, -1.0], [0.0, 1.0, 1.0]];
        let y = [0, 3, 3];
        for mode in [LossMode::Batch, LossMode::Class] {
            let a = loss_and_grads(&p, x.view(), &y, mode).unwrap().loss;
            let b = batch_loss(&p, x.view(), &y, mode).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_batch_is_flagged() {
        let p = tiny_params();
        let x = array![[0.1, -0.3, 1.0], [2.0, 0.5, -1.0]];
        assert!(loss_and_grads(&p, x.view(), &[2, 2], LossMode::Batch).unwrap().degenerate);
        assert!(!loss_and_grads(&p, x.view(), &[2, 2], LossMode::Class).unwrap().degenerate);
    }
}
