//! Confusion matrices and confusion-inverted label-marginal estimates.
//!
//! Column `j` of the confusion matrix is the mean classifier output over holdout
//! examples of class `j`. Under label shift, `C^{-1} f(x)` for a single target
//! covariate is an unbiased estimate of the target label marginal, with norm at
//! most `1 / sigma_min(C)` for probability-vector outputs.

use crate::error::{Error, Result};
use crate::linalg::SquareMatrix;
use crate::scalar::Scalar;
use crate::simplex::SimplexVector;

/// Smallest singular value accepted by default when building a confusion matrix.
pub const DEFAULT_SIGMA_FLOOR: f64 = 1e-6;

/// Unconstrained estimate of a label marginal; may leave the simplex.
pub type MarginalEstimate<T> = Vec<T>;

/// Labelled holdout examples, labels in `0..k`.
#[derive(Debug, Clone)]
pub struct HoldoutSet<F> {
    examples: Vec<(F, usize)>,
    counts: Vec<usize>,
}

impl<F> HoldoutSet<F> {
    pub fn new(examples: Vec<(F, usize)>, k: usize) -> Result<Self> {
        let mut counts = vec![0; k];
        for (_, y) in &examples {
            if *y >= k {
                return Err(Error::InvalidInput(format!("label {y} outside 0..{k}")));
            }
            counts[*y] += 1;
        }
        if let Some(class) = counts.iter().position(|&c| c == 0) {
            return Err(Error::InsufficientHoldout { class });
        }
        Ok(Self { examples, counts })
    }

    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn examples(&self) -> &[(F, usize)] {
        &self.examples
    }

    /// Empirical label marginal of the holdout.
    pub fn label_marginal<T: Scalar>(&self) -> SimplexVector<T> {
        let n = T::from_usize_lossy(self.examples.len());
        let v = self.counts.iter().map(|&c| T::from_usize_lossy(c) / n).collect();
        SimplexVector::normalized(v).expect("holdout counts are positive")
    }
}

#[derive(Debug, Clone)]
pub struct ConfusionMatrix<T> {
    entries: SquareMatrix<T>,
    inverse: SquareMatrix<T>,
    sigma_min: T,
}

impl<T: Scalar> ConfusionMatrix<T> {
    /// Builds the matrix from holdout examples classified by `classify`.
    pub fn build<F>(
        holdout: &HoldoutSet<F>,
        mut classify: impl FnMut(&F) -> Result<SimplexVector<T>>,
        sigma_floor: T,
    ) -> Result<Self> {
        let k = holdout.num_classes();
        let mut sums = SquareMatrix::<T>::zeros(k);
        for (x, y) in holdout.examples() {
            let p = classify(x)?;
            if p.dim() != k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    got: p.dim(),
                });
            }
            for (i, &pi) in p.iter().enumerate() {
                sums.set(i, *y, sums.get(i, *y) + pi);
            }
        }
        let mut entries = SquareMatrix::zeros(k);
        for j in 0..k {
            let n = T::from_usize_lossy(holdout.counts()[j]);
            for i in 0..k {
                entries.set(i, j, sums.get(i, j) / n);
            }
        }
        Self::from_matrix(entries, sigma_floor)
    }

    /// Builds the matrix from pairs of (true label, classifier output).
    pub fn from_predictions(k: usize, predictions: &[(usize, SimplexVector<T>)], sigma_floor: T) -> Result<Self> {
        let holdout = HoldoutSet::new(predictions.iter().map(|(y, p)| (p, *y)).collect(), k)?;
        Self::build(&holdout, |p| Ok((*p).clone()), sigma_floor)
    }

    /// Wraps a precomputed matrix with `entries[i][j] = E[f(i|x) | y = j]`.
    pub fn from_matrix(entries: SquareMatrix<T>, sigma_floor: T) -> Result<Self> {
        let sigma_min = *entries
            .singular_values()
            .last()
            .ok_or_else(|| Error::InvalidInput("empty confusion matrix".into()))?;
        if !(sigma_min >= sigma_floor) {
            return Err(Error::SingularConfusion {
                sigma_min: sigma_min.as_f64(),
                floor: sigma_floor.as_f64(),
            });
        }
        let inverse = entries.inverse().map_err(|_| Error::SingularConfusion {
            sigma_min: sigma_min.as_f64(),
            floor: sigma_floor.as_f64(),
        })?;
        Ok(Self {
            entries,
            inverse,
            sigma_min,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.entries.dim()
    }

    pub fn entries(&self) -> &SquareMatrix<T> {
        &self.entries
    }

    pub fn inverse(&self) -> &SquareMatrix<T> {
        &self.inverse
    }

    pub fn sigma_min(&self) -> T {
        self.sigma_min
    }

    /// `C^{-1} f(x)` for a single classifier output.
    pub fn estimate_marginal(&self, softmax: &[T]) -> MarginalEstimate<T> {
        self.inverse.mul_vec(softmax)
    }

    /// Mean of the per-sample estimates over a batch.
    pub fn batch_estimate<V: AsRef<[T]>>(&self, softmaxes: &[V]) -> Result<MarginalEstimate<T>> {
        if softmaxes.is_empty() {
            return Err(Error::InvalidInput("empty batch".into()));
        }
        let k = self.num_classes();
        let mut mean = vec![T::zero(); k];
        for p in softmaxes {
            let s = self.estimate_marginal(p.as_ref());
            mean.iter_mut().zip(&s).for_each(|(m, &x)| *m += x);
        }
        let n = T::from_usize_lossy(softmaxes.len());
        mean.iter_mut().for_each(|m| *m /= n);
        Ok(mean)
    }
}
