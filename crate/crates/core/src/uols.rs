//! Unsupervised online label shift: track the target marginal from unlabeled
//! covariates and reweight a frozen classifier toward it.
//!
//! Each round the learner fixes `q_hat` from its marginal source, reweights
//! every softmax output by `q_hat / q0`, predicts, and only then feeds the
//! round's confusion-inverted estimate back to the tracker. Labels never reach
//! [`UolsLearner::step`]; they are only compared against predictions by the
//! scoring loop in [`run_uols`].

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{ConfusionMatrix, MarginalEstimate};
use crate::metrics::ScoredRound;
use crate::regression::OnlineRegressor;
use crate::scalar::Scalar;
use crate::shift::StreamRound;
use crate::simplex::{project_simplex, SimplexVector};

/// `out[i] ∝ (q_hat[i] / q0[i]) softmax[i]`.
pub fn reweight<T: Scalar>(softmax: &[T], q0: &[T], q_hat: &[T]) -> Result<SimplexVector<T>> {
    let k = softmax.len();
    for v in [q0, q_hat] {
        if v.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: v.len(),
            });
        }
    }
    if q0.iter().any(|&x| !(x > T::zero())) {
        return Err(Error::InvalidInput("source marginal must be strictly positive".into()));
    }
    if q_hat.iter().any(|&x| !(x >= T::zero())) {
        return Err(Error::InvalidInput("target estimate must be non-negative".into()));
    }
    let raw: Vec<T> = softmax
        .iter()
        .zip(q0)
        .zip(q_hat)
        .map(|((&p, &a), &b)| b / a * p)
        .collect();
    let total: T = raw.iter().copied().sum();
    if !(total > T::zero()) || !total.is_finite() {
        return Err(Error::DegenerateReweight);
    }
    SimplexVector::normalized(raw)
}

/// How the tracker's raw prediction becomes `q_hat`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Projection {
    /// Euclidean projection onto the simplex.
    #[default]
    Simplex,
    /// Negative entries set to zero; reweighting normalizes the rest.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Prediction {
    #[default]
    Argmax,
    /// Draw the label from the reweighted distribution.
    Sample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateMode {
    /// One tracker update per round with the batch-mean estimate.
    #[default]
    PerRound,
    /// One tracker update per sample.
    PerSample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct UolsConfig {
    pub projection: Projection,
    pub prediction: Prediction,
    pub update: UpdateMode,
}

/// Where a learner's `q_hat` comes from.
pub enum MarginalSource<T> {
    /// No adaptation: `q_hat = q0`.
    Base,
    /// The true marginal of the round.
    Oracle,
    Tracker(Box<dyn OnlineRegressor<T>>),
}

impl<T> std::fmt::Debug for MarginalSource<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MarginalSource::Base => f.write_str("Base"),
            MarginalSource::Oracle => f.write_str("Oracle"),
            MarginalSource::Tracker(_) => f.write_str("Tracker"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UolsStep<T> {
    pub q_hat: SimplexVector<T>,
    pub predictions: Vec<usize>,
    /// Batch-mean confusion-inverted estimate fed to the tracker.
    pub s_t: MarginalEstimate<T>,
    /// Samples whose reweighting was degenerate and fell back to the raw softmax.
    pub fallbacks: usize,
}

#[derive(Debug)]
pub struct UolsLearner<T: Scalar> {
    confusion: ConfusionMatrix<T>,
    q0: SimplexVector<T>,
    source: MarginalSource<T>,
    config: UolsConfig,
    round: usize,
}

impl<T: Scalar> UolsLearner<T> {
    pub fn new(
        confusion: ConfusionMatrix<T>,
        q0: SimplexVector<T>,
        source: MarginalSource<T>,
        config: UolsConfig,
    ) -> Result<Self> {
        let k = confusion.num_classes();
        if q0.dim() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: q0.dim(),
            });
        }
        if q0.iter().any(|&x| !(x > T::zero())) {
            return Err(Error::InvalidInput(
                "source marginal has a zero entry; reweighting is undefined".into(),
            ));
        }
        if let MarginalSource::Tracker(r) = &source {
            if r.dim() != k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    got: r.dim(),
                });
            }
        }
        Ok(Self {
            confusion,
            q0,
            source,
            config,
            round: 0,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.q0.dim()
    }

    pub fn confusion(&self) -> &ConfusionMatrix<T> {
        &self.confusion
    }

    pub fn source_marginal(&self) -> &SimplexVector<T> {
        &self.q0
    }

    pub fn config(&self) -> &UolsConfig {
        &self.config
    }

    pub fn round(&self) -> usize {
        self.round
    }

    /// Reweighting target and the simplex vector reported for it.
    fn current_estimate(&self, q_true: Option<&SimplexVector<T>>) -> Result<(Vec<T>, SimplexVector<T>)> {
        match &self.source {
            MarginalSource::Base => Ok((self.q0.to_vec(), self.q0.clone())),
            MarginalSource::Oracle => {
                let q =
                    q_true.ok_or_else(|| Error::InvalidInput("oracle reweighting needs the true marginal".into()))?;
                Ok((q.to_vec(), q.clone()))
            }
            MarginalSource::Tracker(r) => {
                let raw = r.predict();
                match self.config.projection {
                    Projection::Simplex => {
                        let q = project_simplex(&raw)?;
                        Ok((q.to_vec(), q))
                    }
                    Projection::None => {
                        let clamped: Vec<T> = raw.iter().map(|&x| x.max(T::zero())).collect();
                        let reported = SimplexVector::normalized(clamped.clone())
                            .unwrap_or_else(|_| SimplexVector::uniform(clamped.len()));
                        Ok((clamped, reported))
                    }
                }
            }
        }
    }

    /// One round on the classifier outputs of the revealed covariates.
    ///
    /// `q_true` is consulted only by [`MarginalSource::Oracle`].
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        softmaxes: &[SimplexVector<T>],
        q_true: Option<&SimplexVector<T>>,
        rng: &mut R,
    ) -> Result<UolsStep<T>> {
        if softmaxes.is_empty() {
            return Err(Error::InvalidInput("empty batch".into()));
        }
        let k = self.num_classes();
        if let Some(p) = softmaxes.iter().find(|p| p.dim() != k) {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: p.dim(),
            });
        }
        let (target, q_hat) = self.current_estimate(q_true)?;

        let mut fallbacks = 0;
        let mut predictions = Vec::with_capacity(softmaxes.len());
        for p in softmaxes {
            let adapted = match reweight(p, &self.q0, &target) {
                Ok(v) => v,
                Err(Error::DegenerateReweight) => {
                    fallbacks += 1;
                    p.clone()
                }
                Err(e) => return Err(e),
            };
            predictions.push(match self.config.prediction {
                Prediction::Argmax => adapted.argmax(),
                Prediction::Sample => adapted.sample(rng),
            });
        }

        let s_t = self.confusion.batch_estimate(softmaxes)?;
        if let MarginalSource::Tracker(r) = &mut self.source {
            match self.config.update {
                UpdateMode::PerRound => r.update(&s_t)?,
                UpdateMode::PerSample => {
                    for p in softmaxes {
                        r.update(&self.confusion.estimate_marginal(p))?;
                    }
                }
            }
        }
        self.round += 1;
        Ok(UolsStep {
            q_hat,
            predictions,
            s_t,
            fallbacks,
        })
    }
}

/// Classifier outputs of one round; `labels` are for scoring only.
pub type UolsRound<T> = StreamRound<T, SimplexVector<T>>;

#[derive(Debug, Clone, PartialEq)]
pub struct UolsRoundRecord<T> {
    /// 1-based round index.
    pub t: usize,
    pub q_true: SimplexVector<T>,
    pub q_hat: SimplexVector<T>,
    pub predictions: Vec<usize>,
    pub labels: Vec<usize>,
    pub s_t: MarginalEstimate<T>,
    pub fallbacks: usize,
}

impl<T: Scalar> UolsRoundRecord<T> {
    pub fn n_correct(&self) -> usize {
        self.predictions
            .iter()
            .zip(&self.labels)
            .filter(|(p, y)| p == y)
            .count()
    }
}

impl<T: Scalar> ScoredRound<T> for UolsRoundRecord<T> {
    fn q_true(&self) -> &[T] {
        &self.q_true
    }

    fn q_hat(&self) -> &[T] {
        &self.q_hat
    }

    fn n_correct(&self) -> usize {
        UolsRoundRecord::n_correct(self)
    }

    fn n_total(&self) -> usize {
        self.labels.len()
    }
}

/// Runs a learner over a prepared stream.
pub fn run_uols<T: Scalar, R: Rng + ?Sized>(
    learner: &mut UolsLearner<T>,
    rounds: &[UolsRound<T>],
    rng: &mut R,
) -> Result<Vec<UolsRoundRecord<T>>> {
    rounds
        .iter()
        .enumerate()
        .map(|(i, round)| {
            let step = learner.step(&round.items, Some(&round.q_true), rng)?;
            Ok(UolsRoundRecord {
                t: i + 1,
                q_true: round.q_true.clone(),
                q_hat: step.q_hat,
                predictions: step.predictions,
                labels: round.labels.clone(),
                s_t: step.s_t,
                fallbacks: step.fallbacks,
            })
        })
        .collect()
}
