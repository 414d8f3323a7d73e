//! Supervised online label shift: labels arrive after each prediction round.
//!
//! Learners share a two-phase round. [`SolsLearner::predict`] fixes `q_hat_t`
//! from the marginal tracker, prepares the round's model and scores the
//! covariates; [`SolsLearner::reveal`] then adds the labels to the pool, feeds
//! their histogram to the tracker and, for the continual learners, trains.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::ScoredRound;
use crate::model::{train_weighted, Dataset, Sgd, SoftmaxLinear, TrainerConfig};
use crate::regression::OnlineRegressor;
use crate::scalar::Scalar;
use crate::shift::StreamRound;
use crate::simplex::{clip_floor, project_simplex, SimplexVector};
use crate::uols::reweight;

/// Normalized label histogram.
pub fn empirical_marginal<T: Scalar>(labels: &[usize], k: usize) -> Result<SimplexVector<T>> {
    if labels.is_empty() {
        return Err(Error::InvalidInput("no labels to count".into()));
    }
    let mut counts = vec![0usize; k];
    for &y in labels {
        if y >= k {
            return Err(Error::InvalidInput(format!("label {y} outside 0..{k}")));
        }
        counts[y] += 1;
    }
    let n = T::from_usize_lossy(labels.len());
    SimplexVector::normalized(counts.into_iter().map(|c| T::from_usize_lossy(c) / n).collect())
}

/// Every labelled example seen so far, with the round it arrived in and the
/// marginal estimate that was current at that round.
#[derive(Debug, Clone)]
pub struct LabeledPool<T> {
    data: Dataset<T>,
    rounds: Vec<usize>,
    marginals: Vec<SimplexVector<T>>,
    estimates: Vec<SimplexVector<T>>,
}

impl<T: Scalar> LabeledPool<T> {
    pub fn new(dim: usize) -> Self {
        Self {
            data: Dataset::new(dim),
            rounds: Vec::new(),
            marginals: Vec::new(),
            estimates: Vec::new(),
        }
    }

    /// Appends round `self.num_rounds() + 1`.
    pub fn push_round(&mut self, batch: &Dataset<T>, q_hat: SimplexVector<T>) -> Result<()> {
        if batch.dim() != self.data.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.data.dim(),
                got: batch.dim(),
            });
        }
        let round = self.estimates.len() + 1;
        self.marginals.push(empirical_marginal(batch.labels(), q_hat.dim())?);
        self.data.extend(batch);
        self.rounds.extend(std::iter::repeat_n(round, batch.len()));
        self.estimates.push(q_hat);
        Ok(())
    }

    pub fn data(&self) -> &Dataset<T> {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn num_rounds(&self) -> usize {
        self.estimates.len()
    }

    /// Round (1-based) in which example `i` arrived.
    pub fn round_of(&self, i: usize) -> usize {
        self.rounds[i]
    }

    /// Label histogram of round `i`, 1-based.
    pub fn marginal(&self, i: usize) -> &SimplexVector<T> {
        &self.marginals[i - 1]
    }

    /// Marginal estimate frozen at round `i`, 1-based.
    pub fn estimate(&self, i: usize) -> &SimplexVector<T> {
        &self.estimates[i - 1]
    }
}

/// Importance weight `q_hat_t(y) / q_hat_i(y)` for every pooled example.
pub fn werm_weights<T: Scalar>(pool: &LabeledPool<T>, q_hat_t: &SimplexVector<T>) -> Result<Vec<T>> {
    (0..pool.len())
        .map(|j| {
            let y = pool.data.y(j);
            let round = pool.rounds[j];
            let denom = pool.estimate(round)[y];
            if !(denom > T::zero()) {
                return Err(Error::DegenerateWeight { class: y, round });
            }
            Ok(q_hat_t[y] / denom)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LearnerKind {
    /// Weighted ERM refit every round.
    Werm,
    /// Weighted ERM refit only when the marginal estimate changes.
    Lazy,
    /// Unweighted ERM refit every round.
    Erm,
    /// Persistent model trained on uniformly resampled pool batches.
    Ct,
    /// Persistent model trained on class-balanced batches, predictions reweighted.
    CtRs,
}

impl LearnerKind {
    pub const ALL: [LearnerKind; 5] = [
        LearnerKind::Werm,
        LearnerKind::Lazy,
        LearnerKind::Erm,
        LearnerKind::Ct,
        LearnerKind::CtRs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LearnerKind::Werm => "werm",
            LearnerKind::Lazy => "lazy",
            LearnerKind::Erm => "erm",
            LearnerKind::Ct => "ct",
            LearnerKind::CtRs => "ct-rs",
        }
    }

    fn continual(self) -> bool {
        matches!(self, LearnerKind::Ct | LearnerKind::CtRs)
    }
}

impl std::fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for LearnerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LearnerKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown learner `{s}`")))
    }
}

/// Early stopping for the continual learners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinualConfig {
    /// Fraction of each round's examples held out for validation.
    pub validation_fraction: f64,
    /// Consecutive non-improving evaluations before stopping.
    pub patience: usize,
    /// Cap on gradient steps per round.
    pub max_steps: usize,
}

impl Default for ContinualConfig {
    fn default() -> Self {
        Self {
            validation_fraction: 0.2,
            patience: 2,
            max_steps: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolsConfig {
    pub learner: LearnerKind,
    /// Clip floor for `q_hat`; 0 projects onto the simplex without clipping.
    pub mu: f64,
    /// Optimizer settings; `epochs` is the budget of each from-scratch refit.
    pub trainer: TrainerConfig,
    pub continual: ContinualConfig,
    /// Seeds refit shuffles and continual resampling.
    pub seed: u64,
}

impl SolsConfig {
    pub fn new(learner: LearnerKind) -> Self {
        Self {
            learner,
            mu: 0.0,
            trainer: TrainerConfig {
                epochs: 30,
                ..TrainerConfig::default()
            },
            continual: ContinualConfig::default(),
            seed: 0,
        }
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        self.trainer.validate()?;
        if !(self.mu >= 0.0) || self.mu * k as f64 > 1.0 + 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "clip floor {} outside [0, 1/{k}]",
                self.mu
            )));
        }
        let f = self.continual.validation_fraction;
        if !(0.0..1.0).contains(&f) {
            return Err(Error::InvalidParameter(format!(
                "validation fraction {f} outside [0, 1)"
            )));
        }
        if self.continual.patience == 0 || self.continual.max_steps == 0 {
            return Err(Error::InvalidParameter(
                "patience and step cap must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolsPrediction<T> {
    pub q_hat: SimplexVector<T>,
    pub predictions: Vec<usize>,
    /// The model was refit from scratch for this round.
    pub refit: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RevealReport {
    /// Gradient steps kept by the continual learners.
    pub train_steps: usize,
    /// Classes absent from the training pool during balanced resampling.
    pub skipped_classes: usize,
}

struct Pending<T> {
    features: Vec<Vec<T>>,
    q_hat: SimplexVector<T>,
}

pub struct SolsLearner<T: Scalar> {
    config: SolsConfig,
    classes: usize,
    oracle: Box<dyn OnlineRegressor<T>>,
    init: SoftmaxLinear<T>,
    model: SoftmaxLinear<T>,
    pool: LabeledPool<T>,
    // Continual learners: 80:20 split of every round.
    train: Dataset<T>,
    train_by_class: Vec<Vec<usize>>,
    validation: Dataset<T>,
    last_q_hat: Option<SimplexVector<T>>,
    pending: Option<Pending<T>>,
    round: usize,
    refits: usize,
}

impl<T: Scalar> SolsLearner<T> {
    /// `init` is the starting model of every refit and of the continual learners.
    pub fn new(config: SolsConfig, oracle: Box<dyn OnlineRegressor<T>>, init: SoftmaxLinear<T>) -> Result<Self> {
        let classes = init.num_classes();
        config.validate(classes)?;
        if oracle.dim() != classes {
            return Err(Error::DimensionMismatch {
                expected: classes,
                got: oracle.dim(),
            });
        }
        let dim = init.dim();
        Ok(Self {
            config,
            classes,
            oracle,
            model: init.clone(),
            init,
            pool: LabeledPool::new(dim),
            train: Dataset::new(dim),
            train_by_class: vec![Vec::new(); classes],
            validation: Dataset::new(dim),
            last_q_hat: None,
            pending: None,
            round: 0,
            refits: 0,
        })
    }

    pub fn config(&self) -> &SolsConfig {
        &self.config
    }

    pub fn model(&self) -> &SoftmaxLinear<T> {
        &self.model
    }

    pub fn pool(&self) -> &LabeledPool<T> {
        &self.pool
    }

    /// Completed rounds.
    pub fn round(&self) -> usize {
        self.round
    }

    pub fn refits(&self) -> usize {
        self.refits
    }

    fn round_rng(&self, t: usize, purpose: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed ^ purpose.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        rng.set_stream(t as u64);
        rng
    }

    fn estimate(&self) -> Result<SimplexVector<T>> {
        let q = project_simplex(&self.oracle.predict())?;
        if self.config.mu > 0.0 {
            clip_floor(&q, T::c(self.config.mu))
        } else {
            Ok(q)
        }
    }

    fn refit(&mut self, q_hat: &SimplexVector<T>, weighted: bool, t: usize) -> Result<()> {
        self.model = self.init.clone();
        self.refits += 1;
        if self.pool.is_empty() {
            return Ok(());
        }
        let weights = if weighted {
            Some(werm_weights(&self.pool, q_hat)?)
        } else {
            None
        };
        let mut rng = self.round_rng(t, 1);
        train_weighted(
            &mut self.model,
            self.pool.data(),
            weights.as_deref(),
            &self.config.trainer,
            &mut rng,
        )?;
        Ok(())
    }

    /// Scores the round's covariates before any of their labels are seen.
    pub fn predict(&mut self, features: &[Vec<T>]) -> Result<SolsPrediction<T>> {
        if self.pending.is_some() {
            return Err(Error::InvalidInput("previous round's labels were not revealed".into()));
        }
        if features.is_empty() {
            return Err(Error::InvalidInput("empty batch".into()));
        }
        let t = self.round + 1;
        let q_hat = self.estimate()?;
        let refit = match self.config.learner {
            LearnerKind::Werm => true,
            LearnerKind::Erm => true,
            LearnerKind::Lazy => self.last_q_hat.as_ref() != Some(&q_hat),
            LearnerKind::Ct | LearnerKind::CtRs => false,
        };
        if refit {
            let weighted = self.config.learner != LearnerKind::Erm;
            self.refit(&q_hat, weighted, t)?;
        }

        let uniform = SimplexVector::uniform(self.classes);
        let predictions = features
            .iter()
            .map(|x| {
                let p = self.model.predict_proba(x)?;
                if self.config.learner == LearnerKind::CtRs {
                    match reweight(&p, &uniform, &q_hat) {
                        Ok(r) => return Ok(r.argmax()),
                        Err(Error::DegenerateReweight) => {}
                        Err(e) => return Err(e),
                    }
                }
                Ok(p.argmax())
            })
            .collect::<Result<Vec<_>>>()?;

        self.pending = Some(Pending {
            features: features.to_vec(),
            q_hat: q_hat.clone(),
        });
        Ok(SolsPrediction {
            q_hat,
            predictions,
            refit,
        })
    }

    /// Reveals the labels of the covariates passed to the last [`predict`](Self::predict).
    pub fn reveal(&mut self, labels: &[usize]) -> Result<RevealReport> {
        let pending = self
            .pending
            .take()
            .ok_or_else(|| Error::InvalidInput("no prediction awaiting labels".into()))?;
        if labels.len() != pending.features.len() {
            let expected = pending.features.len();
            self.pending = Some(pending);
            return Err(Error::DimensionMismatch {
                expected,
                got: labels.len(),
            });
        }
        let t = self.round + 1;
        let mut batch = Dataset::with_capacity(self.pool.data().dim(), labels.len());
        for (x, &y) in pending.features.iter().zip(labels) {
            if y >= self.classes {
                return Err(Error::InvalidInput(format!("label {y} outside 0..{}", self.classes)));
            }
            batch.push(x, y);
        }
        self.pool.push_round(&batch, pending.q_hat.clone())?;
        self.oracle.update(self.pool.marginal(t))?;

        let mut report = RevealReport::default();
        if self.config.learner.continual() {
            self.absorb_split(&batch, t);
            report = self.continual_train(t)?;
        }
        self.last_q_hat = Some(pending.q_hat);
        self.round = t;
        Ok(report)
    }

    fn absorb_split(&mut self, batch: &Dataset<T>, t: usize) {
        let mut order: Vec<usize> = (0..batch.len()).collect();
        order.shuffle(&mut self.round_rng(t, 2));
        let n_val = (batch.len() as f64 * self.config.continual.validation_fraction).floor() as usize;
        for (pos, &i) in order.iter().enumerate() {
            if pos < n_val {
                self.validation.push(batch.x(i), batch.y(i));
            } else {
                self.train_by_class[batch.y(i)].push(self.train.len());
                self.train.push(batch.x(i), batch.y(i));
            }
        }
    }

    fn validation_loss(&self, model: &SoftmaxLinear<T>, weights: Option<&[T]>) -> T {
        model.objective(&self.validation, weights, T::zero())
    }

    /// Continual training with early stopping on the validation loss.
    fn continual_train(&mut self, t: usize) -> Result<RevealReport> {
        let balanced = self.config.learner == LearnerKind::CtRs;
        let present: Vec<usize> = (0..self.classes)
            .filter(|&c| !self.train_by_class[c].is_empty())
            .collect();
        let skipped_classes = if balanced { self.classes - present.len() } else { 0 };
        if self.train.is_empty() {
            return Ok(RevealReport {
                train_steps: 0,
                skipped_classes,
            });
        }
        // Balanced learners validate on the class-balanced loss.
        let val_weights: Option<Vec<T>> = if balanced && !self.validation.is_empty() {
            let mut counts = vec![0usize; self.classes];
            self.validation.labels().iter().for_each(|&y| counts[y] += 1);
            let present_val = counts.iter().filter(|&&c| c > 0).count();
            let n = T::from_usize_lossy(self.validation.len());
            Some(
                self.validation
                    .labels()
                    .iter()
                    .map(|&y| n / T::from_usize_lossy(present_val * counts[y]))
                    .collect(),
            )
        } else {
            None
        };

        let cfg = self.config.continual;
        let mut rng = self.round_rng(t, 3);
        let mut sgd = Sgd::new(self.config.trainer, &self.model)?;
        let batch_size = self.config.trainer.batch_size;
        let draw = |rng: &mut ChaCha8Rng| -> Vec<usize> {
            (0..batch_size)
                .map(|_| {
                    if balanced {
                        let c = present[rng.random_range(0..present.len())];
                        let members = &self.train_by_class[c];
                        members[rng.random_range(0..members.len())]
                    } else {
                        rng.random_range(0..self.train.len())
                    }
                })
                .collect()
        };

        let mut model = self.model.clone();
        if self.validation.is_empty() {
            let batch = draw(&mut rng);
            sgd.step(&mut model, &self.train, &batch, None);
            self.model = model;
            return Ok(RevealReport {
                train_steps: 1,
                skipped_classes,
            });
        }
        let mut best = model.clone();
        let mut best_loss = self.validation_loss(&model, val_weights.as_deref());
        let mut best_steps = 0;
        let mut stale = 0;
        for step in 1..=cfg.max_steps {
            let batch = draw(&mut rng);
            sgd.step(&mut model, &self.train, &batch, None);
            let loss = self.validation_loss(&model, val_weights.as_deref());
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged { epoch: step });
            }
            if loss < best_loss {
                best_loss = loss;
                best.clone_from(&model);
                best_steps = step;
                stale = 0;
            } else {
                stale += 1;
                if stale >= cfg.patience {
                    break;
                }
            }
        }
        self.model = best;
        Ok(RevealReport {
            train_steps: best_steps,
            skipped_classes,
        })
    }
}

pub type SolsRound<T> = StreamRound<T, Vec<T>>;

#[derive(Debug, Clone, PartialEq)]
pub struct SolsRoundRecord<T> {
    pub t: usize,
    pub q_true: SimplexVector<T>,
    pub q_hat: SimplexVector<T>,
    pub predictions: Vec<usize>,
    pub labels: Vec<usize>,
    pub refit: bool,
    pub train_steps: usize,
    pub skipped_classes: usize,
}

impl<T: Scalar> ScoredRound<T> for SolsRoundRecord<T> {
    fn q_true(&self) -> &[T] {
        &self.q_true
    }

    fn q_hat(&self) -> &[T] {
        &self.q_hat
    }

    fn n_correct(&self) -> usize {
        self.predictions
            .iter()
            .zip(&self.labels)
            .filter(|(p, y)| p == y)
            .count()
    }

    fn n_total(&self) -> usize {
        self.labels.len()
    }
}

/// Runs a learner over a prepared labelled stream.
pub fn run_sols<T: Scalar>(learner: &mut SolsLearner<T>, rounds: &[SolsRound<T>]) -> Result<Vec<SolsRoundRecord<T>>> {
    rounds
        .iter()
        .enumerate()
        .map(|(i, round)| {
            let pred = learner.predict(&round.items)?;
            let report = learner.reveal(&round.labels)?;
            Ok(SolsRoundRecord {
                t: i + 1,
                q_true: round.q_true.clone(),
                q_hat: pred.q_hat,
                predictions: pred.predictions,
                labels: round.labels.clone(),
                refit: pred.refit,
                train_steps: report.train_steps,
                skipped_classes: report.skipped_classes,
            })
        })
        .collect()
}
