use super::{check_observation, OnlineRegressor};
use crate::error::{Error, Result};
use crate::scalar::{sq_dist, Scalar};

#[derive(Debug, Clone)]
struct Expert<T> {
    start: usize,
    sum: Vec<T>,
    count: usize,
}

impl<T: Scalar> Expert<T> {
    fn prediction(&self) -> Vec<T> {
        if self.count == 0 {
            return vec![T::zero(); self.sum.len()];
        }
        let n = T::from_usize_lossy(self.count);
        self.sum.iter().map(|&s| s / n).collect()
    }
}

/// Follow-the-leading-history over running-average experts, with squared loss.
///
/// Round `t` runs `t` experts; expert `j` predicts the mean of the
/// observations `z_j, ..., z_{t-1}` (zero before it has seen any). The played
/// estimate mixes the experts with multiplicative weights `exp(-alpha * loss)`;
/// after each round a fresh expert joins with weight `1/(t+1)` and the others
/// are scaled by `1 - 1/(t+1)`.
///
/// Weights are kept as normalized log-weights. Every expert is retained, so a
/// round costs `O(t K)`.
#[derive(Debug, Clone)]
pub struct FlhFtl<T> {
    dim: usize,
    learning_rate: T,
    experts: Vec<Expert<T>>,
    log_weights: Vec<T>,
}

impl<T: Scalar> FlhFtl<T> {
    pub fn new(dim: usize, learning_rate: T) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        if !(learning_rate >= T::zero()) || !learning_rate.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "learning rate must be finite and non-negative, got {learning_rate}"
            )));
        }
        let mut flh = Self {
            dim,
            learning_rate,
            experts: Vec::new(),
            log_weights: Vec::new(),
        };
        flh.reset();
        Ok(flh)
    }

    /// Exp-concavity rate for observations bounded by `sqrt(K)`: `1/(8K)`.
    pub fn supervised_rate(k: usize) -> T {
        T::one() / T::from_usize_lossy(8 * k)
    }

    /// Exp-concavity rate for confusion-inverted estimates: `sigma_min^2 / (8K)`.
    pub fn unsupervised_rate(k: usize, sigma_min: T) -> T {
        sigma_min * sigma_min / T::from_usize_lossy(8 * k)
    }

    /// The faster `1/K` rate used for benchmark runs.
    pub fn experimental_rate(k: usize) -> T {
        T::one() / T::from_usize_lossy(k)
    }

    pub fn learning_rate(&self) -> T {
        self.learning_rate
    }

    /// Current round, 1-based; equals the number of experts.
    pub fn round(&self) -> usize {
        self.experts.len()
    }

    pub fn weights(&self) -> Vec<T> {
        self.log_weights.iter().map(|&lw| lw.exp()).collect()
    }

    /// Start rounds of the experts, in the same order as [`Self::weights`].
    pub fn expert_starts(&self) -> Vec<usize> {
        self.experts.iter().map(|e| e.start).collect()
    }

    pub fn expert_predictions(&self) -> Vec<Vec<T>> {
        self.experts.iter().map(Expert::prediction).collect()
    }

    fn normalize_log_weights(&mut self) {
        let max = self.log_weights.iter().copied().fold(T::neg_infinity(), T::max);
        let lse = max + self.log_weights.iter().map(|&lw| (lw - max).exp()).sum::<T>().ln();
        self.log_weights.iter_mut().for_each(|lw| *lw -= lse);
    }
}

impl<T: Scalar> OnlineRegressor<T> for FlhFtl<T> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn predict(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim];
        for (expert, &lw) in self.experts.iter().zip(&self.log_weights) {
            if expert.count == 0 {
                continue;
            }
            let w = lw.exp() / T::from_usize_lossy(expert.count);
            out.iter_mut().zip(&expert.sum).for_each(|(o, &s)| *o += w * s);
        }
        out
    }

    fn update(&mut self, z: &[T]) -> Result<()> {
        check_observation(z, self.dim)?;

        for (expert, lw) in self.experts.iter().zip(self.log_weights.iter_mut()) {
            let loss = sq_dist(&expert.prediction(), z);
            *lw -= self.learning_rate * loss;
        }
        self.normalize_log_weights();

        let t = self.experts.len();
        let next = T::from_usize_lossy(t + 1);
        let keep = (-(T::one() / next)).ln_1p();
        self.log_weights.iter_mut().for_each(|lw| *lw += keep);
        for expert in &mut self.experts {
            expert.sum.iter_mut().zip(z).for_each(|(s, &x)| *s += x);
            expert.count += 1;
        }
        self.experts.push(Expert {
            start: t + 1,
            sum: vec![T::zero(); self.dim],
            count: 0,
        });
        self.log_weights.push(-next.ln());
        Ok(())
    }

    fn reset(&mut self) {
        self.experts.clear();
        self.experts.push(Expert {
            start: 1,
            sum: vec![T::zero(); self.dim],
            count: 0,
        });
        self.log_weights.clear();
        self.log_weights.push(T::zero());
    }
}
