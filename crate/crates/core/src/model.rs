//! Multiclass softmax linear classifier trained by (weighted) SGD with momentum.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{all_finite, Scalar};
use crate::simplex::SimplexVector;

/// Features stored row-major with one label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    dim: usize,
    features: Vec<T>,
    labels: Vec<usize>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            features: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn with_capacity(dim: usize, n: usize) -> Self {
        Self {
            dim,
            features: Vec::with_capacity(dim * n),
            labels: Vec::with_capacity(n),
        }
    }

    pub fn push(&mut self, x: &[T], y: usize) {
        assert_eq!(x.len(), self.dim, "feature dimension mismatch");
        self.features.extend_from_slice(x);
        self.labels.push(y);
    }

    pub fn extend(&mut self, other: &Dataset<T>) {
        assert_eq!(other.dim, self.dim, "feature dimension mismatch");
        self.features.extend_from_slice(&other.features);
        self.labels.extend_from_slice(&other.labels);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    #[inline]
    pub fn x(&self, i: usize) -> &[T] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn y(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Rows `range` as a new dataset.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            dim: self.dim,
            features: self.features[range.start * self.dim..range.end * self.dim].to_vec(),
            labels: self.labels[range].to_vec(),
        }
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        let mut out = Self::with_capacity(self.dim, indices.len());
        for &i in indices {
            out.push(self.x(i), self.y(i));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainerConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub l2: f64,
    pub epochs: usize,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            momentum: 0.9,
            batch_size: 200,
            l2: 1e-4,
            epochs: 1,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter("learning rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidParameter("momentum must lie in [0, 1)".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter("batch size must be at least 1".into()));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::InvalidParameter("L2 coefficient must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxLinear<T> {
    classes: usize,
    dim: usize,
    weights: Vec<T>,
    bias: Vec<T>,
}

/// Gradient of the training objective, laid out like the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient<T> {
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> SoftmaxLinear<T> {
    pub fn zeros(classes: usize, dim: usize) -> Self {
        Self {
            classes,
            dim,
            weights: vec![T::zero(); classes * dim],
            bias: vec![T::zero(); classes],
        }
    }

    pub fn from_parts(classes: usize, dim: usize, weights: Vec<T>, bias: Vec<T>) -> Result<Self> {
        if weights.len() != classes * dim || bias.len() != classes {
            return Err(Error::InvalidInput("parameter shapes do not match".into()));
        }
        Ok(Self {
            classes,
            dim,
            weights,
            bias,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn bias(&self) -> &[T] {
        &self.bias
    }

    pub fn weights_mut(&mut self) -> &mut [T] {
        &mut self.weights
    }

    pub fn bias_mut(&mut self) -> &mut [T] {
        &mut self.bias
    }

    fn logits_into(&self, x: &[T], out: &mut [T]) {
        for (k, o) in out.iter_mut().enumerate() {
            let row = &self.weights[k * self.dim..(k + 1) * self.dim];
            *o = self.bias[k] + row.iter().zip(x).map(|(&w, &xi)| w * xi).sum::<T>();
        }
    }

    /// Softmax in place, shifted by the maximum logit. Returns log-sum-exp.
    fn softmax_in_place(z: &mut [T]) -> T {
        let max = z.iter().copied().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for v in z.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        z.iter_mut().for_each(|v| *v /= sum);
        max + sum.ln()
    }

    pub fn predict_proba(&self, x: &[T]) -> Result<SimplexVector<T>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        if !all_finite(x) {
            return Err(Error::InvalidInput("non-finite features".into()));
        }
        let mut p = vec![T::zero(); self.classes];
        self.logits_into(x, &mut p);
        Self::softmax_in_place(&mut p);
        Ok(SimplexVector::normalized(p).expect("softmax output is a distribution"))
    }

    pub fn predict(&self, x: &[T]) -> Result<usize> {
        Ok(self.predict_proba(x)?.argmax())
    }

    /// Mean weighted cross-entropy over `indices` plus `l2/2 |W|^2`, and its gradient.
    ///
    /// `weights` of `None` means every example has weight one.
    pub fn loss_gradient(
        &self,
        data: &Dataset<T>,
        indices: &[usize],
        weights: Option<&[T]>,
        l2: T,
    ) -> (T, Gradient<T>) {
        let (k, d) = (self.classes, self.dim);
        let mut grad = Gradient {
            weights: vec![T::zero(); k * d],
            bias: vec![T::zero(); k],
        };
        let mut loss = T::zero();
        let mut p = vec![T::zero(); k];
        for &i in indices {
            let w = weights.map_or(T::one(), |ws| ws[i]);
            if w == T::zero() {
                continue;
            }
            let x = data.x(i);
            let y = data.y(i);
            self.logits_into(x, &mut p);
            let logit_y = p[y];
            let lse = Self::softmax_in_place(&mut p);
            loss += w * (lse - logit_y);
            p[y] -= T::one();
            for (c, &pc) in p.iter().enumerate() {
                let g = w * pc;
                grad.bias[c] += g;
                let row = &mut grad.weights[c * d..(c + 1) * d];
                row.iter_mut().zip(x).for_each(|(gw, &xi)| *gw += g * xi);
            }
        }
        let n = T::from_usize_lossy(indices.len().max(1));
        loss /= n;
        grad.weights.iter_mut().for_each(|g| *g /= n);
        grad.bias.iter_mut().for_each(|g| *g /= n);
        if l2 > T::zero() {
            let sq: T = self.weights.iter().map(|&w| w * w).sum();
            loss += l2 * sq / T::c(2.0);
            grad.weights
                .iter_mut()
                .zip(&self.weights)
                .for_each(|(g, &w)| *g += l2 * w);
        }
        (loss, grad)
    }

    /// Training objective over the whole dataset.
    pub fn objective(&self, data: &Dataset<T>, weights: Option<&[T]>, l2: T) -> T {
        let idx: Vec<usize> = (0..data.len()).collect();
        self.loss_gradient(data, &idx, weights, l2).0
    }

    /// Fraction of rows whose argmax prediction differs from the label.
    pub fn error_rate(&self, data: &Dataset<T>) -> f64 {
        if data.is_empty() {
            return 0.0;
        }
        let mut p = vec![T::zero(); self.classes];
        let wrong = (0..data.len())
            .filter(|&i| {
                self.logits_into(data.x(i), &mut p);
                crate::simplex::argmax(&p) != data.y(i)
            })
            .count();
        wrong as f64 / data.len() as f64
    }
}

/// Momentum SGD on a [`SoftmaxLinear`] model: `v <- m v + g`, `theta <- theta - lr v`.
#[derive(Debug, Clone)]
pub struct Sgd<T> {
    config: TrainerConfig,
    velocity: Gradient<T>,
}

impl<T: Scalar> Sgd<T> {
    pub fn new(config: TrainerConfig, model: &SoftmaxLinear<T>) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            velocity: Gradient {
                weights: vec![T::zero(); model.weights.len()],
                bias: vec![T::zero(); model.bias.len()],
            },
        })
    }

    pub fn config(&self) -> &TrainerConfig {
        &self.config
    }

    /// One update on the minibatch `batch`; returns the minibatch objective before the step.
    pub fn step(
        &mut self,
        model: &mut SoftmaxLinear<T>,
        data: &Dataset<T>,
        batch: &[usize],
        weights: Option<&[T]>,
    ) -> T {
        let lr = T::c(self.config.learning_rate);
        let mom = T::c(self.config.momentum);
        let (loss, grad) = model.loss_gradient(data, batch, weights, T::c(self.config.l2));
        for ((v, g), p) in self
            .velocity
            .weights
            .iter_mut()
            .zip(&grad.weights)
            .zip(model.weights.iter_mut())
        {
            *v = mom * *v + *g;
            *p -= lr * *v;
        }
        for ((v, g), p) in self.velocity.bias.iter_mut().zip(&grad.bias).zip(model.bias.iter_mut()) {
            *v = mom * *v + *g;
            *p -= lr * *v;
        }
        loss
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport<T> {
    /// Mean minibatch objective per epoch.
    pub epoch_losses: Vec<T>,
}

/// Minibatch SGD with momentum for `cfg.epochs` shuffled passes over `data`.
///
/// Each minibatch minimizes `(1/|B|) sum_i w_i CE_i + (l2/2) |W|^2`.
pub fn train_weighted<T: Scalar, R: Rng + ?Sized>(
    model: &mut SoftmaxLinear<T>,
    data: &Dataset<T>,
    weights: Option<&[T]>,
    cfg: &TrainerConfig,
    rng: &mut R,
) -> Result<TrainReport<T>> {
    if let Some(w) = weights {
        if w.len() != data.len() {
            return Err(Error::DimensionMismatch {
                expected: data.len(),
                got: w.len(),
            });
        }
        if w.iter().any(|&x| !(x >= T::zero()) || !x.is_finite()) {
            return Err(Error::InvalidInput(
                "example weights must be finite and non-negative".into(),
            ));
        }
        if w.iter().all(|&x| x == T::zero()) {
            return Err(Error::InvalidInput("all example weights are zero".into()));
        }
    }
    if data.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: data.dim(),
        });
    }
    let mut sgd = Sgd::new(*cfg, model)?;
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(rng);
        let mut total = T::zero();
        let mut batches = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            total += sgd.step(model, data, batch, weights);
            batches += 1;
        }
        let mean = total / T::from_usize_lossy(batches.max(1));
        if !mean.is_finite() || !all_finite(&model.weights) || !all_finite(&model.bias) {
            return Err(Error::TrainingDiverged { epoch });
        }
        epoch_losses.push(mean);
    }
    Ok(TrainReport { epoch_losses })
}
