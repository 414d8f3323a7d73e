//! The synthetic Gaussian benchmark and the softmax-stream bridge.
//!
//! Three unit-norm class centers in R^12 with covariance 0.215 I. A balanced
//! 60k source sample is split 48k/12k into training and holdout data; a
//! fraction of the holdout estimates the confusion matrix of a softmax model
//! trained for one epoch. A separate balanced 12k sample forms the target pools.

use labelshift_core::data::{ClassPools, Exhaustion, GaussianMixtureSource, SoftmaxStream};
use labelshift_core::estimation::{ConfusionMatrix, HoldoutSet, DEFAULT_SIGMA_FLOOR};
use labelshift_core::model::{train_weighted, Dataset, SoftmaxLinear, TrainerConfig};
use labelshift_core::simplex::SimplexVector;
use labelshift_core::Result;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SOURCE_SIZE: usize = 60_000;
pub const TRAIN_SIZE: usize = 48_000;
pub const TARGET_SIZE: usize = 12_000;

/// Class centers drawn from `data_seed`, independent of the run seed.
pub fn gaussian_source(data_seed: u64) -> Result<GaussianMixtureSource<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(data_seed);
    GaussianMixtureSource::random(
        GaussianMixtureSource::<f64>::CLASSES,
        GaussianMixtureSource::<f64>::DIM,
        GaussianMixtureSource::<f64>::SCALE,
        &mut rng,
    )
}

/// Frozen source classifier with everything the unsupervised learners need.
#[derive(Debug, Clone)]
pub struct SourceSetup {
    pub model: SoftmaxLinear<f64>,
    pub confusion: ConfusionMatrix<f64>,
    /// Label marginal of the training data.
    pub q0: SimplexVector<f64>,
    pub holdout_size: usize,
    /// Accuracy on the full source holdout.
    pub holdout_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct SyntheticBenchmark {
    pub source: GaussianMixtureSource<f64>,
    pub setup: SourceSetup,
    pub target: Dataset<f64>,
}

impl SyntheticBenchmark {
    pub fn build<R: Rng + ?Sized>(
        source: GaussianMixtureSource<f64>,
        holdout_frac: f64,
        trainer: &TrainerConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let k = source.num_classes();
        let all = source.balanced_dataset(SOURCE_SIZE / k, rng);
        let train = all.slice(0..TRAIN_SIZE);
        let holdout_all = all.slice(TRAIN_SIZE..all.len());
        let used = ((holdout_all.len() as f64 * holdout_frac).round() as usize).clamp(1, holdout_all.len());
        let holdout = holdout_all.slice(0..used);

        let mut model = SoftmaxLinear::zeros(k, source.dim());
        train_weighted(&mut model, &train, None, trainer, rng)?;

        let q0 = label_marginal(train.labels(), k)?;
        let examples = (0..holdout.len())
            .map(|i| (holdout.x(i).to_vec(), holdout.y(i)))
            .collect();
        let holdout_set = HoldoutSet::new(examples, k)?;
        let confusion = ConfusionMatrix::build(&holdout_set, |x| model.predict_proba(x), DEFAULT_SIGMA_FLOOR)?;
        let holdout_accuracy = 1.0 - model.error_rate(&holdout_all);

        let target = source.balanced_dataset(TARGET_SIZE / k, rng);
        Ok(Self {
            source,
            setup: SourceSetup {
                model,
                confusion,
                q0,
                holdout_size: used,
                holdout_accuracy,
            },
            target,
        })
    }

    /// Target pools of classifier outputs, for the unsupervised protocol.
    pub fn softmax_pools<R: Rng + ?Sized>(
        &self,
        policy: Exhaustion,
        rng: &mut R,
    ) -> Result<ClassPools<SimplexVector<f64>>> {
        let items = (0..self.target.len())
            .map(|i| Ok((self.target.y(i), self.setup.model.predict_proba(self.target.x(i))?)))
            .collect::<Result<Vec<_>>>()?;
        ClassPools::from_labelled(items, self.source.num_classes(), policy, rng)
    }
}

/// Target pools of raw features, for the supervised protocol.
pub fn feature_pools<R: Rng + ?Sized>(
    source: &GaussianMixtureSource<f64>,
    policy: Exhaustion,
    rng: &mut R,
) -> Result<ClassPools<Vec<f64>>> {
    let k = source.num_classes();
    let target = source.balanced_dataset(TARGET_SIZE / k, rng);
    let items = (0..target.len()).map(|i| (target.y(i), target.x(i).to_vec()));
    ClassPools::from_labelled(items, k, policy, rng)
}

fn label_marginal(labels: &[usize], k: usize) -> Result<SimplexVector<f64>> {
    labelshift_core::sols::empirical_marginal(labels, k)
}

/// Confusion matrix, source marginal and target pools of a softmax stream.
pub type StreamSetup = (ConfusionMatrix<f64>, SimplexVector<f64>, ClassPools<SimplexVector<f64>>);

/// Splits a softmax stream into a holdout (a `holdout_frac` share of one fifth
/// of the rows) and target pools (the remaining four fifths).
pub fn stream_setup<R: Rng + ?Sized>(
    stream: SoftmaxStream<f64>,
    holdout_frac: f64,
    policy: Exhaustion,
    rng: &mut R,
) -> Result<StreamSetup> {
    let k = stream.num_classes();
    let mut rows = stream.into_rows();
    rows.shuffle(rng);
    let split = rows.len() / 5;
    let target = rows.split_off(split);
    let used = ((rows.len() as f64 * holdout_frac).round() as usize).clamp(1, rows.len().max(1));
    rows.truncate(used);
    let q0 = label_marginal(&rows.iter().map(|(y, _)| *y).collect::<Vec<_>>(), k)?;
    let confusion = ConfusionMatrix::from_predictions(k, &rows, DEFAULT_SIGMA_FLOOR)?;
    let pools = ClassPools::from_labelled(target, k, policy, rng)?;
    Ok((confusion, q0, pools))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn benchmark_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let b =
            SyntheticBenchmark::build(gaussian_source(1).unwrap(), 0.1, &TrainerConfig::default(), &mut rng).unwrap();
        assert_eq!(b.setup.holdout_size, 1200);
        assert_eq!(b.target.len(), TARGET_SIZE);
        assert_eq!(b.setup.confusion.num_classes(), 3);
        let pools = b.softmax_pools(Exhaustion::Fail, &mut rng).unwrap();
        assert_eq!(pools.pool_sizes(), vec![4000; 3]);
    }

    #[test]
    fn centers_depend_only_on_data_seed() {
        assert_eq!(
            gaussian_source(3).unwrap().centers(),
            gaussian_source(3).unwrap().centers()
        );
        assert_ne!(
            gaussian_source(3).unwrap().centers(),
            gaussian_source(4).unwrap().centers()
        );
    }
}
