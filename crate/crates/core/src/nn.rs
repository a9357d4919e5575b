//! Two-layer perceptron with sigmoid heads, trained with Adam on the
//! BCE, assume-negative (AN) or weak-assume-negative (WAN) losses.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::calibrate::Scorer;
use crate::data::{MultiLabelDataset, SinglePositiveView};
use crate::error::{Error, Result};
use crate::seed;

/// Scores are clamped to `[LOG_CLAMP, 1 - LOG_CLAMP]` before taking logs.
pub const LOG_CLAMP: f64 = 1e-7;

pub const DEFAULT_HIDDEN: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, a: f64) -> f64 {
        match self {
            Activation::Relu => a.max(0.0),
            Activation::Tanh => a.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation `a` and output `h`.
    fn derivative(self, a: f64, h: f64) -> f64 {
        match self {
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - h * h,
        }
    }
}

/// Logistic function kept strictly inside (0, 1).
pub fn sigmoid(z: f64) -> f64 {
    let s = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    s.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// Training loss over sigmoid scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LossKind {
    /// Binary cross-entropy against a full label vector. On a
    /// single-positive view the label vector is one-hot, which is AN.
    Bce,
    /// Unobserved labels are treated as negatives.
    An,
    /// AN with the negative terms weighted by `gamma`.
    Wan { gamma: f64 },
}

impl LossKind {
    /// WAN with the default weight `1 / (k - 1)`.
    pub fn wan(n_classes: usize) -> Self {
        LossKind::Wan {
            gamma: 1.0 / (n_classes as f64 - 1.0),
        }
    }

    pub fn negative_weight(&self) -> f64 {
        match *self {
            LossKind::Bce | LossKind::An => 1.0,
            LossKind::Wan { gamma } => gamma,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LossKind::Bce => "BCE",
            LossKind::An => "AN",
            LossKind::Wan { .. } => "WAN",
        }
    }
}

fn clamp_score(f: f64) -> f64 {
    f.clamp(LOG_CLAMP, 1.0 - LOG_CLAMP)
}

/// `-(1/K) Σ [pos_i log f_i + (1 - pos_i) w log(1 - f_i)]`; every public
/// loss goes through here so the AN/BCE/WAN identities hold bit-for-bit.
fn weighted_bce(scores: &[f64], is_positive: impl Fn(usize) -> bool, neg_weight: f64) -> f64 {
    let mut sum = 0.0;
    for (i, &f) in scores.iter().enumerate() {
        let f = clamp_score(f);
        sum += if is_positive(i) {
            f.ln()
        } else {
            neg_weight * (1.0 - f).ln()
        };
    }
    -sum / scores.len() as f64
}

/// Derivative of [`weighted_bce`] with respect to the logits.
fn weighted_bce_logit_grad(
    scores: &[f64],
    is_positive: impl Fn(usize) -> bool,
    neg_weight: f64,
    out: &mut [f64],
) {
    let k = scores.len() as f64;
    for (i, (&f, g)) in scores.iter().zip(out.iter_mut()).enumerate() {
        *g = if !(LOG_CLAMP..=1.0 - LOG_CLAMP).contains(&f) {
            0.0
        } else if is_positive(i) {
            -(1.0 - f) / k
        } else {
            neg_weight * f / k
        };
    }
}

fn check_index(positive: usize, k: usize) -> Result<()> {
    if positive >= k {
        return Err(Error::IndexOutOfRange {
            index: positive,
            len: k,
        });
    }
    Ok(())
}

/// Binary cross-entropy against a full binary label vector.
pub fn loss_bce(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Shape {
            what: "labels",
            expected: scores.len(),
            found: labels.len(),
        });
    }
    Ok(weighted_bce(scores, |i| labels[i] == 1, 1.0))
}

/// Assume-negative loss with a zero-based observed positive.
pub fn loss_an(scores: &[f64], positive: usize) -> Result<f64> {
    check_index(positive, scores.len())?;
    Ok(weighted_bce(scores, |i| i == positive, 1.0))
}

/// Weak-assume-negative loss with a zero-based observed positive.
pub fn loss_wan(scores: &[f64], positive: usize, gamma: f64) -> Result<f64> {
    check_index(positive, scores.len())?;
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Config(format!("WAN weight must be positive, got {gamma}")));
    }
    Ok(weighted_bce(scores, |i| i == positive, gamma))
}

/// Gradient-shaped buffers for [`Mlp`] parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

impl Gradients {
    pub fn zeros_like(model: &Mlp) -> Self {
        Self {
            w1: Array2::zeros(model.w1.raw_dim()),
            b1: Array1::zeros(model.b1.raw_dim()),
            w2: Array2::zeros(model.w2.raw_dim()),
            b2: Array1::zeros(model.b2.raw_dim()),
        }
    }

    /// Flat views in the order w1, b1, w2, b2.
    pub fn tensors(&self) -> [&[f64]; 4] {
        [
            self.w1.as_slice().unwrap(),
            self.b1.as_slice().unwrap(),
            self.w2.as_slice().unwrap(),
            self.b2.as_slice().unwrap(),
        ]
    }

    fn tensors_mut(&mut self) -> [&mut [f64]; 4] {
        [
            self.w1.as_slice_mut().unwrap(),
            self.b1.as_slice_mut().unwrap(),
            self.w2.as_slice_mut().unwrap(),
            self.b2.as_slice_mut().unwrap(),
        ]
    }
}

/// `sigmoid(W2 · act(W1 · x + b1) + b2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    w1: Array2<f64>,
    b1: Array1<f64>,
    w2: Array2<f64>,
    b2: Array1<f64>,
    activation: Activation,
}

struct ForwardCache {
    pre: Array2<f64>,
    hidden: Array2<f64>,
    scores: Array2<f64>,
}

impl Mlp {
    pub fn zeros(input_dim: usize, hidden_dim: usize, n_classes: usize) -> Self {
        Self {
            w1: Array2::zeros((hidden_dim, input_dim)),
            b1: Array1::zeros(hidden_dim),
            w2: Array2::zeros((n_classes, hidden_dim)),
            b2: Array1::zeros(n_classes),
            activation: Activation::Relu,
        }
    }

    /// Glorot-uniform weights and zero biases.
    pub fn glorot(input_dim: usize, hidden_dim: usize, n_classes: usize, seed: u64) -> Self {
        let mut rng = seed::rng(seed);
        let mut m = Self::zeros(input_dim, hidden_dim, n_classes);
        let limit1 = (6.0 / (input_dim + hidden_dim) as f64).sqrt();
        m.w1.mapv_inplace(|_| rng.random_range(-limit1..limit1));
        let limit2 = (6.0 / (hidden_dim + n_classes) as f64).sqrt();
        m.w2.mapv_inplace(|_| rng.random_range(-limit2..limit2));
        m
    }

    pub fn from_parts(
        w1: Array2<f64>,
        b1: Array1<f64>,
        w2: Array2<f64>,
        b2: Array1<f64>,
        activation: Activation,
    ) -> Result<Self> {
        let h = w1.nrows();
        if h == 0 || w1.ncols() == 0 || w2.nrows() == 0 {
            return Err(Error::Config("model dimensions must be positive".into()));
        }
        let shape = |what, expected, found| {
            if expected == found {
                Ok(())
            } else {
                Err(Error::Shape {
                    what,
                    expected,
                    found,
                })
            }
        };
        shape("b1", h, b1.len())?;
        shape("w2 columns", h, w2.ncols())?;
        shape("b2", w2.nrows(), b2.len())?;
        let m = Self {
            w1: w1.as_standard_layout().into_owned(),
            b1,
            w2: w2.as_standard_layout().into_owned(),
            b2,
            activation,
        };
        if !m.is_finite() {
            return Err(Error::Config("model parameters must be finite".into()));
        }
        Ok(m)
    }

    pub fn with_activation(mut self, activation: Activation) -> Self {
        self.activation = activation;
        self
    }

    pub fn input_dim(&self) -> usize {
        self.w1.ncols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.nrows()
    }

    pub fn n_classes(&self) -> usize {
        self.w2.nrows()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn w1(&self) -> &Array2<f64> {
        &self.w1
    }

    pub fn b1(&self) -> &Array1<f64> {
        &self.b1
    }

    pub fn w2(&self) -> &Array2<f64> {
        &self.w2
    }

    pub fn b2(&self) -> &Array1<f64> {
        &self.b2
    }

    pub fn n_parameters(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    /// Flat views in the order w1, b1, w2, b2.
    pub fn tensors(&self) -> [&[f64]; 4] {
        [
            self.w1.as_slice().unwrap(),
            self.b1.as_slice().unwrap(),
            self.w2.as_slice().unwrap(),
            self.b2.as_slice().unwrap(),
        ]
    }

    /// Mutable flat views in the order w1, b1, w2, b2.
    pub fn tensors_mut(&mut self) -> [&mut [f64]; 4] {
        [
            self.w1.as_slice_mut().unwrap(),
            self.b1.as_slice_mut().unwrap(),
            self.w2.as_slice_mut().unwrap(),
            self.b2.as_slice_mut().unwrap(),
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    fn check_input(&self, cols: usize) -> Result<()> {
        if cols != self.input_dim() {
            return Err(Error::Shape {
                what: "input features",
                expected: self.input_dim(),
                found: cols,
            });
        }
        Ok(())
    }

    /// Scores for a single input vector.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x.len())?;
        let x = ArrayView2::from_shape((1, x.len()), x).expect("row vector");
        Ok(self.forward_cached(x).scores.into_raw_vec_and_offset().0)
    }

    /// Scores for each row of `x`.
    pub fn forward_batch(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_input(x.ncols())?;
        Ok(self.forward_cached(x).scores)
    }

    fn forward_cached(&self, x: ArrayView2<'_, f64>) -> ForwardCache {
        let pre = x.dot(&self.w1.t()) + &self.b1;
        let act = self.activation;
        let hidden = pre.mapv(|a| act.apply(a));
        let mut scores = hidden.dot(&self.w2.t()) + &self.b2;
        scores.mapv_inplace(sigmoid);
        ForwardCache {
            pre,
            hidden,
            scores,
        }
    }

    /// Mean weighted-BCE loss over the rows of `x` and its parameter
    /// gradient. `targets` holds 0/1 per class; negatives are scaled by
    /// `neg_weight`.
    pub fn loss_and_grad(
        &self,
        x: ArrayView2<'_, f64>,
        targets: ArrayView2<'_, u8>,
        neg_weight: f64,
    ) -> Result<(f64, Gradients)> {
        let mut grads = Gradients::zeros_like(self);
        let loss = self.loss_and_grad_into(x, targets, neg_weight, &mut grads)?;
        Ok((loss, grads))
    }

    fn loss_and_grad_into(
        &self,
        x: ArrayView2<'_, f64>,
        targets: ArrayView2<'_, u8>,
        neg_weight: f64,
        grads: &mut Gradients,
    ) -> Result<f64> {
        self.check_input(x.ncols())?;
        if targets.dim() != (x.nrows(), self.n_classes()) {
            return Err(Error::Shape {
                what: "targets",
                expected: x.nrows() * self.n_classes(),
                found: targets.len(),
            });
        }
        let batch = x.nrows() as f64;
        let cache = self.forward_cached(x);
        let mut loss = 0.0;
        let mut d_logits = Array2::<f64>::zeros(cache.scores.raw_dim());
        for ((s, t), mut g) in cache
            .scores
            .rows()
            .into_iter()
            .zip(targets.rows())
            .zip(d_logits.rows_mut())
        {
            let s = s.as_slice().unwrap();
            loss += weighted_bce(s, |i| t[i] == 1, neg_weight);
            weighted_bce_logit_grad(s, |i| t[i] == 1, neg_weight, g.as_slice_mut().unwrap());
        }
        d_logits /= batch;

        grads.w2.assign(&d_logits.t().dot(&cache.hidden));
        grads.b2.assign(&d_logits.sum_axis(Axis(0)));
        let mut d_pre = d_logits.dot(&self.w2);
        let act = self.activation;
        Zip::from(&mut d_pre)
            .and(&cache.pre)
            .and(&cache.hidden)
            .for_each(|d, &a, &h| *d *= act.derivative(a, h));
        grads.w1.assign(&d_pre.t().dot(&x));
        grads.b1.assign(&d_pre.sum_axis(Axis(0)));
        Ok(loss / batch)
    }
}

impl Scorer for Mlp {
    fn n_classes(&self) -> usize {
        self.w2.nrows()
    }

    fn score_batch(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.forward_batch(x)
    }
}

/// Adam moments and hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Gradients,
    v: Gradients,
}

impl AdamState {
    /// Zeroed moments with β1 = 0.9, β2 = 0.999, ε = 1e-8.
    pub fn new(model: &Mlp, learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: Gradients::zeros_like(model),
            v: Gradients::zeros_like(model),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &Gradients {
        &self.m
    }

    pub fn second_moment(&self) -> &Gradients {
        &self.v
    }

    pub fn update(&mut self, model: &mut Mlp, grads: &Gradients) {
        self.step += 1;
        let t = self.step as i32;
        let (b1, b2, eps, lr) = (self.beta1, self.beta2, self.eps, self.learning_rate);
        let c1 = 1.0 - b1.powi(t);
        let c2 = 1.0 - b2.powi(t);
        let params = model.tensors_mut();
        let ms = self.m.tensors_mut();
        let vs = self.v.tensors_mut();
        for (((p, m), v), g) in params.into_iter().zip(ms).zip(vs).zip(grads.tensors()) {
            for (((p, m), v), &g) in p.iter_mut().zip(m.iter_mut()).zip(v.iter_mut()).zip(g) {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

/// Trains on a single-positive view. Returns the mean training loss of
/// every epoch.
pub fn train(
    model: &mut Mlp,
    view: &SinglePositiveView<'_>,
    loss: LossKind,
    adam: &mut AdamState,
    cfg: &TrainConfig,
) -> Result<Vec<f64>> {
    if view.is_empty() {
        return Err(Error::EmptyView {
            dropped: view.dropped(),
        });
    }
    let mut targets = Array2::<u8>::zeros((view.len(), view.n_labels()));
    for (n, &p) in view.positive_index().iter().enumerate() {
        targets[[n, p]] = 1;
    }
    fit(model, view.features().view(), targets.view(), loss.negative_weight(), adam, cfg)
}

/// Trains with BCE on fully observed labels.
pub fn train_full(
    model: &mut Mlp,
    ds: &MultiLabelDataset,
    adam: &mut AdamState,
    cfg: &TrainConfig,
) -> Result<Vec<f64>> {
    fit(model, ds.features(), ds.labels(), 1.0, adam, cfg)
}

fn fit(
    model: &mut Mlp,
    x: ArrayView2<'_, f64>,
    targets: ArrayView2<'_, u8>,
    neg_weight: f64,
    adam: &mut AdamState,
    cfg: &TrainConfig,
) -> Result<Vec<f64>> {
    if cfg.epochs == 0 || cfg.batch_size == 0 {
        return Err(Error::Config("epochs and batch size must be positive".into()));
    }
    model.check_input(x.ncols())?;
    if targets.ncols() != model.n_classes() {
        return Err(Error::Shape {
            what: "target classes",
            expected: model.n_classes(),
            found: targets.ncols(),
        });
    }
    let n = x.nrows();
    let mut rng = seed::rng(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut grads = Gradients::zeros_like(model);
    let mut trace = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (batch, idx) in order.chunks(cfg.batch_size).enumerate() {
            let xb = x.select(Axis(0), idx);
            let tb = targets.select(Axis(0), idx);
            let loss = model.loss_and_grad_into(xb.view(), tb.view(), neg_weight, &mut grads)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch, loss });
            }
            adam.update(model, &grads);
            if !model.is_finite() {
                return Err(Error::NonFiniteParameters { epoch, batch });
            }
            total += loss * idx.len() as f64;
        }
        trace.push(total / n as f64);
    }
    Ok(trace)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TensorRecord {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

/// Serializable model snapshot with free-form provenance metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub activation: Activation,
    pub metadata: BTreeMap<String, String>,
    tensors: Vec<TensorRecord>,
}

impl Checkpoint {
    pub fn new(model: &Mlp, metadata: BTreeMap<String, String>) -> Self {
        let record = |name: &str, shape: &[usize], data: &[f64]| TensorRecord {
            name: name.into(),
            shape: shape.to_vec(),
            data: data.to_vec(),
        };
        let [w1, b1, w2, b2] = model.tensors();
        Self {
            activation: model.activation,
            metadata,
            tensors: vec![
                record("w1", model.w1.shape(), w1),
                record("b1", model.b1.shape(), b1),
                record("w2", model.w2.shape(), w2),
                record("b2", model.b2.shape(), b2),
            ],
        }
    }

    pub fn to_model(&self) -> Result<Mlp> {
        let find = |name: &str| {
            self.tensors
                .iter()
                .find(|t| t.name == name)
                .ok_or_else(|| Error::Serialization(format!("checkpoint lacks tensor {name}")))
        };
        let matrix = |name: &str| -> Result<Array2<f64>> {
            let t = find(name)?;
            let [r, c] = t.shape[..] else {
                return Err(Error::Serialization(format!("{name} must be 2-d")));
            };
            Array2::from_shape_vec((r, c), t.data.clone())
                .map_err(|e| Error::Serialization(format!("{name}: {e}")))
        };
        let vector = |name: &str| -> Result<Array1<f64>> {
            let t = find(name)?;
            if t.shape != [t.data.len()] {
                return Err(Error::Serialization(format!("{name} shape mismatch")));
            }
            Ok(Array1::from(t.data.clone()))
        };
        Mlp::from_parts(
            matrix("w1")?,
            vector("b1")?,
            matrix("w2")?,
            vector("b2")?,
            self.activation,
        )
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text =
            serde_json::to_string(self).map_err(|e| Error::Serialization(e.to_string()))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Serialization(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, project_single_positive, SyntheticSpec};
    use ndarray::array;
    use proptest::prelude::*;

    const LN2: f64 = std::f64::consts::LN_2;

    #[test]
    fn zero_model_scores_half() {
        let m = Mlp::zeros(3, 4, 5);
        assert_eq!(m.forward(&[1.0, -2.0, 7.0]).unwrap(), vec![0.5; 5]);
    }

    #[test]
    fn forward_checks_dimensions() {
        let m = Mlp::zeros(3, 4, 2);
        assert!(matches!(m.forward(&[1.0]), Err(Error::Shape { .. })));
    }

    #[test]
    fn scores_saturate_monotonically_below_one() {
        let w1 = array![[1.0]];
        let mut prev = 0.0;
        for scale in [1.0, 10.0, 100.0, 1e3, 1e6, 1e300] {
            let m = Mlp::from_parts(w1.clone(), array![0.0], array![[scale], [0.0]], array![0.0, 0.0], Activation::Relu)
                .unwrap();
            let s = m.forward(&[1.0]).unwrap()[0];
            assert!(s >= prev && s < 1.0, "{s}");
            prev = s;
        }
        assert!(prev > 1.0 - 1e-15);
    }

    #[test]
    fn sigmoid_is_open_interval() {
        assert!(sigmoid(1e4) < 1.0);
        assert!(sigmoid(-1e4) > 0.0);
        assert_eq!(sigmoid(0.0), 0.5);
    }

    #[test]
    fn bce_known_values() {
        assert!((loss_bce(&[0.5, 0.5], &[1, 0]).unwrap() - LN2).abs() < 1e-15);
        assert!(loss_bce(&[1.0, 0.0, 1.0], &[1, 0, 1]).unwrap() <= 1e-6);
        assert!(loss_bce(&[0.0, 1.0], &[1, 0]).unwrap().is_finite());
        assert!(loss_bce(&[0.5], &[1, 0]).is_err());
    }

    #[test]
    fn an_known_value() {
        let v = loss_an(&[0.9, 0.1], 0).unwrap();
        assert!((v - 0.105_360_515_657_826_3).abs() < 1e-12, "{v}");
        assert!(matches!(loss_an(&[0.9, 0.1], 2), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn wan_known_value() {
        let v = loss_wan(&[0.5, 0.5, 0.5], 0, 0.5).unwrap();
        assert!((v - 2.0 / 3.0 * LN2).abs() < 1e-15, "{v}");
        assert!(loss_wan(&[0.5, 0.5], 0, 0.0).is_err());
        assert_eq!(LossKind::wan(3), LossKind::Wan { gamma: 0.5 });
    }

    #[test]
    fn losses_are_finite_at_extremes() {
        for s in [[0.0, 1.0], [1.0, 0.0], [0.0, 0.0], [1.0, 1.0]] {
            assert!(loss_an(&s, 0).unwrap().is_finite());
            assert!(loss_wan(&s, 1, 0.3).unwrap().is_finite());
            assert!(loss_bce(&s, &[1, 1]).unwrap().is_finite());
        }
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        let mut m = Mlp::zeros(1, 1, 2);
        let mut adam = AdamState::new(&m, 0.01);
        let mut g = Gradients::zeros_like(&m);
        g.b2[0] = 3.0;
        g.b2[1] = -1e-3;
        adam.update(&mut m, &g);
        assert_eq!(adam.step_count(), 1);
        assert!((m.b2()[0] + 0.01).abs() < 1e-9);
        assert!((m.b2()[1] - 0.01).abs() < 2e-7);
        assert_eq!(m.w1()[[0, 0]], 0.0);
    }

    fn small_task() -> MultiLabelDataset {
        generate_synthetic(&SyntheticSpec {
            n: 200,
            d: 6,
            k: 4,
            cardinality: 1.5,
            noise: 0.0,
            seed: 4,
        })
        .unwrap()
    }

    #[test]
    fn training_reduces_loss_and_is_deterministic() {
        let ds = small_task();
        let view = project_single_positive(&ds, 1).unwrap();
        let cfg = TrainConfig {
            epochs: 10,
            batch_size: 16,
            seed: 3,
        };
        let run = || {
            let mut m = Mlp::glorot(6, 32, 4, 8);
            let mut adam = AdamState::new(&m, 1e-2);
            let trace = train(&mut m, &view, LossKind::wan(4), &mut adam, &cfg).unwrap();
            (m, trace)
        };
        let (m1, t1) = run();
        let (m2, t2) = run();
        assert_eq!(t1.len(), 10);
        assert!(t1.last().unwrap() < t1.first().unwrap(), "{t1:?}");
        let bits = |m: &Mlp| m.tensors().iter().flat_map(|t| t.iter().map(|v| v.to_bits())).collect::<Vec<_>>();
        assert_eq!(bits(&m1), bits(&m2));
        assert_eq!(t1, t2);
    }

    #[test]
    fn overfits_one_instance() {
        let ds = MultiLabelDataset::new(array![[0.3, -1.2, 0.8]], array![[0, 1, 1]]).unwrap();
        let view = project_single_positive(&ds, 0).unwrap();
        let p = view.positive_index()[0];
        let mut m = Mlp::glorot(3, 16, 3, 1);
        let mut adam = AdamState::new(&m, 1e-2);
        let cfg = TrainConfig {
            epochs: 200,
            batch_size: 16,
            seed: 0,
        };
        train(&mut m, &view, LossKind::An, &mut adam, &cfg).unwrap();
        assert_eq!(adam.step_count(), 200);
        assert!(m.forward(&[0.3, -1.2, 0.8]).unwrap()[p] > 0.95);
    }

    #[test]
    fn absurd_learning_rate_is_reported_not_panicking() {
        let ds = small_task();
        let view = project_single_positive(&ds, 1).unwrap();
        let mut m = Mlp::glorot(6, 8, 4, 8);
        let mut adam = AdamState::new(&m, 1e300);
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 16,
            seed: 3,
        };
        match train(&mut m, &view, LossKind::An, &mut adam, &cfg) {
            Ok(trace) => assert!(trace.iter().all(|l| l.is_finite())),
            Err(e) => assert!(matches!(
                e,
                Error::NonFiniteLoss { .. } | Error::NonFiniteParameters { .. }
            )),
        }
    }

    #[test]
    fn checkpoint_round_trips_bit_exactly() {
        let m = Mlp::glorot(5, 7, 3, 99).with_activation(Activation::Tanh);
        let mut meta = BTreeMap::new();
        meta.insert("seed".to_string(), "99".to_string());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        Checkpoint::new(&m, meta.clone()).save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back.metadata, meta);
        let restored = back.to_model().unwrap();
        let bits = |m: &Mlp| m.tensors().iter().flat_map(|t| t.iter().map(|v| v.to_bits())).collect::<Vec<_>>();
        assert_eq!(bits(&restored), bits(&m));
        assert_eq!(restored.activation(), Activation::Tanh);
    }

    fn numeric_grad(model: &Mlp, x: &Array2<f64>, t: &Array2<u8>, w: f64) -> Vec<f64> {
        let h = 1e-5;
        let mut probe = model.clone();
        let mut out = Vec::new();
        for tensor in 0..4 {
            for i in 0..model.tensors()[tensor].len() {
                let orig = probe.tensors()[tensor][i];
                probe.tensors_mut()[tensor][i] = orig + h;
                let up = probe.loss_and_grad(x.view(), t.view(), w).unwrap().0;
                probe.tensors_mut()[tensor][i] = orig - h;
                let down = probe.loss_and_grad(x.view(), t.view(), w).unwrap().0;
                probe.tensors_mut()[tensor][i] = orig;
                out.push((up - down) / (2.0 * h));
            }
        }
        out
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for (seed, activation) in [(1, Activation::Tanh), (2, Activation::Relu)] {
            let m = Mlp::glorot(3, 5, 4, seed).with_activation(activation);
            let x = array![[0.3, -1.2, 0.8], [1.1, 0.4, -0.6]];
            let t = array![[1, 0, 0, 1], [0, 1, 0, 0]];
            let (_, g) = m.loss_and_grad(x.view(), t.view(), 0.5).unwrap();
            let analytic: Vec<f64> = g.tensors().concat();
            let numeric = numeric_grad(&m, &x, &t, 0.5);
            let diff: f64 = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let norm: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
            assert!(diff / norm < 1e-6, "{activation:?}: {}", diff / norm);
        }
    }

    proptest! {
        #[test]
        fn loss_identities(
            scores in prop::collection::vec(0.0f64..=1.0, 2..10),
            pick in any::<prop::sample::Index>(),
        ) {
            let p = pick.index(scores.len());
            let mut onehot = vec![0u8; scores.len()];
            onehot[p] = 1;
            let an = loss_an(&scores, p).unwrap();
            prop_assert_eq!(an.to_bits(), loss_bce(&scores, &onehot).unwrap().to_bits());
            prop_assert_eq!(an.to_bits(), loss_wan(&scores, p, 1.0).unwrap().to_bits());
            prop_assert!(an.is_finite() && an >= 0.0);
        }

        #[test]
        fn losses_permutation_invariant(
            scores in prop::collection::vec(0.01f64..0.99, 2..8),
            pick in any::<prop::sample::Index>(),
            rot in any::<prop::sample::Index>(),
        ) {
            let k = scores.len();
            let p = pick.index(k);
            let r = rot.index(k);
            let mut rotated = scores.clone();
            rotated.rotate_left(r);
            let q = (p + k - r) % k;
            let a = loss_wan(&scores, p, 0.25).unwrap();
            let b = loss_wan(&rotated, q, 0.25).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }
}
