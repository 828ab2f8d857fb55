//! Time Encoder, Image-Time Adaptor and the learnable temperature.
//!
//! Both encoders are plain MLPs over `f64`. Their outputs are L2-normalized,
//! so every similarity in the crate is a cosine similarity. The temperature
//! is stored as `log_tau` and is therefore always positive.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoders::{RffParams, Time2VecParams};
use crate::error::{Error, Result};
use crate::time::TimeLabelSpace;

/// Temperature at initialization.
pub const INITIAL_TAU: f64 = 0.07;

/// Default embedding width shared by both encoders.
pub const DEFAULT_EMBED_DIM: usize = 768;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Activation {
    #[default]
    #[serde(rename = "relu")]
    Relu,
    /// tanh approximation of GELU.
    #[serde(rename = "gelu-approx")]
    GeluApprox,
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::GeluApprox => {
                let u = GELU_C * (x + 0.044715 * x * x * x);
                0.5 * x * (1.0 + u.tanh())
            }
        }
    }

    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::GeluApprox => {
                let u = GELU_C * (x + 0.044715 * x * x * x);
                let th = u.tanh();
                let du = GELU_C * (1.0 + 3.0 * 0.044715 * x * x);
                0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * du
            }
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "gelu" | "gelu-approx" => Ok(Activation::GeluApprox),
            other => Err(Error::invalid("activation", format!("{other:?} is not relu or gelu-approx"))),
        }
    }
}

/// Fully connected layer; `weights` is `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl DenseLayer {
    pub fn new(weights: Array2<f64>, bias: Array1<f64>) -> Result<Self> {
        if weights.nrows() != bias.len() {
            return Err(Error::DimensionMismatch {
                context: "layer bias",
                expected: weights.nrows(),
                actual: bias.len(),
            });
        }
        if weights.iter().chain(bias.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("layer parameters".into()));
        }
        Ok(Self { weights, bias })
    }

    /// Glorot-uniform weights, zero bias.
    fn glorot(rng: &mut ChaCha8Rng, in_dim: usize, out_dim: usize) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let weights = Array2::from_shape_simple_fn((out_dim, in_dim), || rng.random_range(-limit..=limit));
        Self {
            weights,
            bias: Array1::zeros(out_dim),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.nrows()
    }

    fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        x.dot(&self.weights.t()) + &self.bias
    }
}

/// Cached activations from [`Mlp::forward_cached`].
#[derive(Debug)]
pub struct MlpCache {
    inputs: Vec<Array2<f64>>,
    pre_activations: Vec<Array2<f64>>,
}

/// Feed-forward stack with an activation between layers (none after the
/// last one) and an optional identity skip from input to output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<DenseLayer>,
    activation: Activation,
    residual: bool,
}

impl Mlp {
    pub fn new(layers: Vec<DenseLayer>, activation: Activation, residual: bool) -> Result<Self> {
        let first = layers.first().ok_or(Error::Empty("mlp layer list"))?;
        for pair in layers.windows(2) {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::DimensionMismatch {
                    context: "consecutive mlp layers",
                    expected: pair[0].out_dim(),
                    actual: pair[1].in_dim(),
                });
            }
        }
        let last = layers.last().expect("non-empty");
        if residual && first.in_dim() != last.out_dim() {
            return Err(Error::invalid(
                "residual",
                format!("skip needs in-dim == out-dim, got {} vs {}", first.in_dim(), last.out_dim()),
            ));
        }
        Ok(Self {
            layers,
            activation,
            residual,
        })
    }

    fn init(rng: &mut ChaCha8Rng, dims: &[usize], activation: Activation, residual: bool) -> Result<Self> {
        let layers = dims
            .windows(2)
            .map(|w| DenseLayer::glorot(rng, w[0], w[1]))
            .collect();
        Self::new(layers, activation, residual)
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn residual(&self) -> bool {
        self.residual
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut a = self.layers[0].forward(x);
        for layer in &self.layers[1..] {
            a.mapv_inplace(|v| self.activation.apply(v));
            a = layer.forward(a.view());
        }
        if self.residual {
            a += &x;
        }
        a
    }

    pub fn forward_cached(&self, x: ArrayView2<f64>) -> (Array2<f64>, MlpCache) {
        let n = self.layers.len();
        let mut inputs = Vec::with_capacity(n);
        let mut pre_activations = Vec::with_capacity(n - 1);
        let mut a = x.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            let z = layer.forward(a.view());
            inputs.push(a);
            if i + 1 < n {
                a = z.mapv(|v| self.activation.apply(v));
                pre_activations.push(z);
            } else {
                a = z;
            }
        }
        if self.residual {
            a += &x;
        }
        (
            a,
            MlpCache {
                inputs,
                pre_activations,
            },
        )
    }

    /// Accumulates parameter gradients for upstream gradient `d_out` into
    /// `grad`, which must have this network's shapes.
    pub fn backward(&self, cache: &MlpCache, d_out: ArrayView2<f64>, grad: &mut Mlp) {
        let mut dz = d_out.to_owned();
        for i in (0..self.layers.len()).rev() {
            let g = &mut grad.layers[i];
            g.weights += &dz.t().dot(&cache.inputs[i]);
            g.bias += &dz.sum_axis(Axis(0));
            if i > 0 {
                let mut da = dz.dot(&self.layers[i].weights);
                da.zip_mut_with(&cache.pre_activations[i - 1], |d, &z| *d *= self.activation.derivative(z));
                dz = da;
            }
        }
    }

    fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| DenseLayer {
                    weights: Array2::zeros(l.weights.raw_dim()),
                    bias: Array1::zeros(l.bias.len()),
                })
                .collect(),
            activation: self.activation,
            residual: self.residual,
        }
    }

    fn tensors(&self) -> impl Iterator<Item = &[f64]> {
        self.layers.iter().flat_map(|l| {
            [
                l.weights.as_slice().expect("standard layout"),
                l.bias.as_slice().expect("standard layout"),
            ]
        })
    }

    fn tensors_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        self.layers.iter_mut().flat_map(|l| {
            [
                l.weights.as_slice_mut().expect("standard layout"),
                l.bias.as_slice_mut().expect("standard layout"),
            ]
        })
    }
}

/// What the Time Encoder consumes for each class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TimeInputKind {
    #[default]
    OneHot,
    /// Random Fourier features of the class midpoint `(hour, minute)`.
    Rff { dim: usize, sigma: f64 },
    /// Time2Vec of the class midpoint minute.
    Time2Vec { dim: usize },
}

/// Sampled encoder state for the chosen [`TimeInputKind`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TimeInput {
    OneHot,
    Rff(RffParams),
    Time2Vec(Time2VecParams),
}

impl TimeInput {
    fn sample(kind: &TimeInputKind, seed: u64) -> Result<Self> {
        Ok(match kind {
            TimeInputKind::OneHot => TimeInput::OneHot,
            TimeInputKind::Rff { dim, sigma } => TimeInput::Rff(RffParams::sample(seed, *dim, *sigma)?),
            TimeInputKind::Time2Vec { dim } => TimeInput::Time2Vec(Time2VecParams::sample(seed, *dim)?),
        })
    }

    pub fn dim(&self, num_classes: usize) -> usize {
        match self {
            TimeInput::OneHot => num_classes,
            TimeInput::Rff(p) => p.dim(),
            TimeInput::Time2Vec(p) => p.dim(),
        }
    }
}

/// Shapes and options of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub num_classes: usize,
    pub feature_dim: usize,
    pub embed_dim: usize,
    pub time_hidden: Vec<usize>,
    pub adaptor_hidden: Vec<usize>,
    #[serde(default)]
    pub activation: Activation,
    /// Identity skip in the adaptor; only honoured when `feature_dim == embed_dim`.
    #[serde(default = "default_true")]
    pub residual_adaptor: bool,
    #[serde(default)]
    pub zero_init_adaptor_output: bool,
    #[serde(default)]
    pub time_input: TimeInputKind,
}

fn default_true() -> bool {
    true
}

impl ModelConfig {
    /// Default shapes: Time Encoder `C -> 512 -> K`, adaptor `D -> 1024 -> K`.
    pub fn new(num_classes: usize, feature_dim: usize, embed_dim: usize) -> Self {
        Self {
            num_classes,
            feature_dim,
            embed_dim,
            time_hidden: vec![512],
            adaptor_hidden: vec![1024],
            activation: Activation::Relu,
            residual_adaptor: true,
            zero_init_adaptor_output: false,
            time_input: TimeInputKind::OneHot,
        }
    }

    pub fn with_hidden(mut self, time_hidden: Vec<usize>, adaptor_hidden: Vec<usize>) -> Self {
        self.time_hidden = time_hidden;
        self.adaptor_hidden = adaptor_hidden;
        self
    }

    pub fn adaptor_is_residual(&self) -> bool {
        self.residual_adaptor && self.feature_dim == self.embed_dim
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("num_classes", self.num_classes),
            ("feature_dim", self.feature_dim),
            ("embed_dim", self.embed_dim),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(Error::invalid(name, "must be at least 1"));
            }
        }
        if self.time_hidden.iter().chain(&self.adaptor_hidden).any(|&h| h == 0) {
            return Err(Error::invalid("hidden dims", "every hidden width must be at least 1"));
        }
        if !matches!(self.time_input, TimeInputKind::OneHot) {
            TimeLabelSpace::new(self.num_classes)?;
        }
        Ok(())
    }
}

/// All trainable state: both encoders and the log-temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub time_input: TimeInput,
    pub time_encoder: Mlp,
    pub adaptor: Mlp,
    pub log_tau: f64,
}

/// Deterministic initialization from `seed`.
pub fn init_params(seed: u64, config: &ModelConfig) -> Result<ModelParams> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let time_input = TimeInput::sample(&config.time_input, seed ^ 0x5eed_7153)?;

    let mut time_dims = vec![time_input.dim(config.num_classes)];
    time_dims.extend(&config.time_hidden);
    time_dims.push(config.embed_dim);
    let time_encoder = Mlp::init(&mut rng, &time_dims, config.activation, false)?;

    let mut adaptor_dims = vec![config.feature_dim];
    adaptor_dims.extend(&config.adaptor_hidden);
    adaptor_dims.push(config.embed_dim);
    let mut adaptor = Mlp::init(&mut rng, &adaptor_dims, config.activation, config.adaptor_is_residual())?;
    if config.zero_init_adaptor_output {
        let last = adaptor.layers.last_mut().expect("non-empty");
        last.weights.fill(0.0);
    }

    Ok(ModelParams {
        config: config.clone(),
        time_input,
        time_encoder,
        adaptor,
        log_tau: INITIAL_TAU.ln(),
    })
}

/// Normalizes each row to unit L2 norm, returning the original norms.
/// Zero rows are left at zero.
pub(crate) fn normalize_rows(mut a: Array2<f64>) -> (Array2<f64>, Array1<f64>) {
    let norms = a.map_axis(Axis(1), |r| r.dot(&r).sqrt());
    for (mut row, &n) in a.rows_mut().into_iter().zip(norms.iter()) {
        if n > 0.0 {
            row /= n;
        }
    }
    (a, norms)
}

impl ModelParams {
    pub fn tau(&self) -> f64 {
        self.log_tau.exp()
    }

    pub fn num_classes(&self) -> usize {
        self.config.num_classes
    }

    pub fn feature_dim(&self) -> usize {
        self.config.feature_dim
    }

    pub fn embed_dim(&self) -> usize {
        self.config.embed_dim
    }

    pub fn num_params(&self) -> usize {
        self.time_encoder.num_params() + self.adaptor.num_params() + 1
    }

    /// Time Encoder inputs for every class, one row per class.
    pub fn class_inputs(&self) -> Array2<f64> {
        let c = self.num_classes();
        match &self.time_input {
            TimeInput::OneHot => Array2::eye(c),
            TimeInput::Rff(_) | TimeInput::Time2Vec(_) => {
                let space = TimeLabelSpace::new(c).expect("validated at init");
                let rows: Vec<Vec<f64>> = (0..c)
                    .map(|i| {
                        let t = space.class_midpoint(i);
                        match &self.time_input {
                            TimeInput::Rff(p) => p.encode(t),
                            TimeInput::Time2Vec(p) => p.encode(t),
                            TimeInput::OneHot => unreachable!(),
                        }
                    })
                    .collect();
                let width = rows[0].len();
                Array2::from_shape_vec((c, width), rows.concat()).expect("consistent widths")
            }
        }
    }

    /// Unit-norm embedding of one class.
    pub fn time_embed(&self, class: usize) -> Array1<f64> {
        assert!(class < self.num_classes(), "class {class} out of range");
        self.class_embedding_table().row(class).to_owned()
    }

    /// Unit-norm embedding of an explicit Time Encoder input (e.g. a one-hot row).
    pub fn time_embed_input(&self, input: &[f64]) -> Result<Array1<f64>> {
        let want = self.time_encoder.in_dim();
        if input.len() != want {
            return Err(Error::DimensionMismatch {
                context: "time encoder input",
                expected: want,
                actual: input.len(),
            });
        }
        let x = ArrayView2::from_shape((1, want), input).expect("shape checked");
        unit_row(self.time_encoder.forward(x))
    }

    /// `C x K` table of unit class embeddings.
    pub fn class_embedding_table(&self) -> Array2<f64> {
        let raw = self.time_encoder.forward(self.class_inputs().view());
        normalize_rows(raw).0
    }

    /// Unit-norm adapted embedding of one feature vector.
    pub fn image_embed(&self, features: &[f64]) -> Result<Array1<f64>> {
        if features.len() != self.feature_dim() {
            return Err(Error::DimensionMismatch {
                context: "image features",
                expected: self.feature_dim(),
                actual: features.len(),
            });
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("image features".into()));
        }
        let x = ArrayView2::from_shape((1, features.len()), features).expect("shape checked");
        unit_row(self.adaptor.forward(x))
    }

    /// Adapted embeddings of a batch (rows), normalized.
    pub fn image_embed_batch(&self, features: ArrayView2<f64>) -> Array2<f64> {
        normalize_rows(self.adaptor.forward(features)).0
    }

    /// Same shapes, all zeros (gradient accumulator).
    pub fn zeros_like(&self) -> Self {
        Self {
            config: self.config.clone(),
            time_input: self.time_input.clone(),
            time_encoder: self.time_encoder.zeros_like(),
            adaptor: self.adaptor.zeros_like(),
            log_tau: 0.0,
        }
    }

    /// Trainable tensors in a fixed order; the last one is `[log_tau]`.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut v: Vec<&[f64]> = self.time_encoder.tensors().chain(self.adaptor.tensors()).collect();
        v.push(std::slice::from_ref(&self.log_tau));
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v: Vec<&mut [f64]> = self
            .time_encoder
            .tensors_mut()
            .chain(self.adaptor.tensors_mut())
            .collect();
        v.push(std::slice::from_mut(&mut self.log_tau));
        v
    }
}

fn unit_row(out: Array2<f64>) -> Result<Array1<f64>> {
    let row = out.row(0);
    let norm = row.dot(&row).sqrt();
    if !norm.is_finite() {
        return Err(Error::NonFinite("embedding".into()));
    }
    if norm == 0.0 {
        return Err(Error::invalid("embedding", "network output is the zero vector"));
    }
    Ok(&row / norm)
}

/// `logit_j = <embedding, table_j> / tau`.
pub fn similarity_logits(embedding: ArrayView1<f64>, table: ArrayView2<f64>, tau: f64) -> Array1<f64> {
    assert!(tau > 0.0, "temperature must be positive");
    table.dot(&embedding) / tau
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn small(seed: u64) -> ModelParams {
        let cfg = ModelConfig::new(6, 5, 8).with_hidden(vec![7], vec![9]);
        init_params(seed, &cfg).unwrap()
    }

    #[test]
    fn init_is_deterministic() {
        assert_eq!(small(3), small(3));
        assert_ne!(small(3), small(4));
    }

    #[test]
    fn init_temperature_and_biases() {
        let p = small(1);
        assert!((p.tau() - 0.07).abs() < 1e-15);
        for l in p.time_encoder.layers().iter().chain(p.adaptor.layers()) {
            assert!(l.bias.iter().all(|&b| b == 0.0));
            let limit = (6.0 / (l.in_dim() + l.out_dim()) as f64).sqrt();
            assert!(l.weights.iter().all(|w| w.abs() <= limit));
        }
    }

    #[test]
    fn init_rejects_zero_dims() {
        assert!(init_params(0, &ModelConfig::new(0, 4, 4)).is_err());
        assert!(init_params(0, &ModelConfig::new(4, 4, 4).with_hidden(vec![0], vec![])).is_err());
    }

    #[test]
    fn default_table_shape() {
        let p = init_params(0, &ModelConfig::new(24, 16, DEFAULT_EMBED_DIM)).unwrap();
        let table = p.class_embedding_table();
        assert_eq!(table.dim(), (24, 768));
        for row in table.rows() {
            assert!((row.dot(&row).sqrt() - 1.0).abs() < 1e-9);
        }
        assert_eq!(table, p.class_embedding_table());
    }

    #[test]
    fn time_embeddings_are_unit_distinct_and_repeatable() {
        let p = small(2);
        let a = p.time_embed(1);
        let b = p.time_embed(4);
        assert!((a.dot(&a) - 1.0).abs() < 1e-9);
        assert!((a.clone() - &b).iter().any(|v| v.abs() > 1e-6));
        assert_eq!(a, p.time_embed(1));
        let via_one_hot = p.time_embed_input(&crate::time::one_hot(1, 6)).unwrap();
        assert!((via_one_hot - &a).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn image_embed_unit_and_errors() {
        let mut p = small(5);
        let e = p.image_embed(&[0.3, -1.0, 2.0, 0.0, 0.5]).unwrap();
        assert!((e.dot(&e).sqrt() - 1.0).abs() < 1e-9);
        assert_eq!(e, p.image_embed(&[0.3, -1.0, 2.0, 0.0, 0.5]).unwrap());
        assert!(matches!(p.image_embed(&[1.0]), Err(Error::DimensionMismatch { .. })));

        // With non-zero biases the zero vector still maps to a unit vector.
        for l in p.adaptor.layers_mut() {
            l.bias.fill(0.25);
        }
        let z = p.image_embed(&[0.0; 5]).unwrap();
        assert!((z.dot(&z).sqrt() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn residual_adaptor_with_zero_output_layer_is_identity() {
        let mut cfg = ModelConfig::new(4, 6, 6).with_hidden(vec![5], vec![11]);
        cfg.zero_init_adaptor_output = true;
        let p = init_params(9, &cfg).unwrap();
        assert!(p.adaptor.residual());
        let x = [1.0, -2.0, 0.5, 0.0, 3.0, 1.5];
        let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let e = p.image_embed(&x).unwrap();
        for (a, b) in e.iter().zip(x) {
            assert!((a - b / n).abs() < 1e-12);
        }
    }

    #[test]
    fn mlp_rejects_inconsistent_shapes() {
        let l1 = DenseLayer::new(Array2::zeros((3, 2)), Array1::zeros(3)).unwrap();
        let l2 = DenseLayer::new(Array2::zeros((2, 4)), Array1::zeros(2)).unwrap();
        assert!(Mlp::new(vec![l1.clone(), l2], Activation::Relu, false).is_err());
        assert!(Mlp::new(vec![l1], Activation::Relu, true).is_err());
        assert!(Mlp::new(vec![], Activation::Relu, false).is_err());
        assert!(DenseLayer::new(Array2::zeros((3, 2)), Array1::zeros(2)).is_err());
    }

    #[test]
    fn logits_examples() {
        let table = Array2::<f64>::eye(8);
        let i = table.row(5).to_owned();
        let l = similarity_logits(i.view(), table.view(), 1.0);
        assert_eq!(l, Array1::from_iter((0..8).map(|j| if j == 5 { 1.0 } else { 0.0 })));

        let e = array![0.6, 0.8];
        let t = array![[1.0, 0.0], [0.0, 1.0], [0.6, -0.8]];
        let l1 = similarity_logits(e.view(), t.view(), 0.5);
        let l2 = similarity_logits(e.view(), t.view(), 1.0);
        for (a, b) in l1.iter().zip(&l2) {
            assert!((a / 2.0 - b).abs() < 1e-15);
        }
    }

    #[test]
    fn gelu_derivative_matches_finite_difference() {
        for &x in &[-3.0, -0.7, 0.0, 0.4, 2.5] {
            let h = 1e-6;
            let fd = (Activation::GeluApprox.apply(x + h) - Activation::GeluApprox.apply(x - h)) / (2.0 * h);
            assert!((fd - Activation::GeluApprox.derivative(x)).abs() < 1e-8);
        }
    }

    #[test]
    fn alternate_time_inputs() {
        let mut cfg = ModelConfig::new(24, 4, 8).with_hidden(vec![16], vec![8]);
        cfg.time_input = TimeInputKind::Rff { dim: 32, sigma: 1.0 };
        let p = init_params(1, &cfg).unwrap();
        assert_eq!(p.class_inputs().dim(), (24, 32));
        cfg.time_input = TimeInputKind::Time2Vec { dim: 12 };
        let p = init_params(1, &cfg).unwrap();
        assert_eq!(p.class_embedding_table().dim(), (24, 8));
        cfg.num_classes = 7;
        assert!(init_params(1, &cfg).is_err());
    }

    use proptest::prelude::*;

    proptest! {
        #[test]
        fn argmax_is_temperature_invariant(
            seed in 0u64..1000,
            tau_a in 0.01f64..10.0,
            tau_b in 0.01f64..10.0,
            x in proptest::collection::vec(-3.0f64..3.0, 5),
        ) {
            let mut p = small(seed);
            for l in p.adaptor.layers_mut() {
                l.bias.fill(0.1);
            }
            let e = p.image_embed(&x).unwrap();
            let table = p.class_embedding_table();
            let argmax = |l: Array1<f64>| l.iter().enumerate().fold((0, f64::MIN), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc }).0;
            prop_assert_eq!(
                argmax(similarity_logits(e.view(), table.view(), tau_a)),
                argmax(similarity_logits(e.view(), table.view(), tau_b))
            );
        }
    }
}
