//! Run scoring: classification error, marginal-estimation MSE and drift.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{sq_dist, Scalar};
use crate::simplex::total_variation;

/// What a round contributes to the run metrics.
pub trait ScoredRound<T> {
    fn q_true(&self) -> &[T];
    fn q_hat(&self) -> &[T];
    fn n_correct(&self) -> usize;
    fn n_total(&self) -> usize;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    /// Mispredicted samples over all samples.
    pub error: f64,
    /// `(1/T) sum_t |q_hat_t - q_t|^2`.
    pub mse: f64,
    /// Total variation of the realized marginals.
    pub v_t: f64,
    pub rounds: usize,
    pub samples: usize,
}

pub fn score_run<T: Scalar, R: ScoredRound<T>>(records: &[R]) -> Result<RunMetrics> {
    if records.is_empty() {
        return Err(Error::InvalidInput("cannot score an empty run".into()));
    }
    let mut wrong = 0usize;
    let mut samples = 0usize;
    let mut sq = 0.0;
    for r in records {
        if r.n_correct() > r.n_total() {
            return Err(Error::InvalidInput(format!(
                "{} correct out of {} samples",
                r.n_correct(),
                r.n_total()
            )));
        }
        wrong += r.n_total() - r.n_correct();
        samples += r.n_total();
        sq += sq_dist(r.q_hat(), r.q_true()).as_f64();
    }
    let marginals: Vec<&[T]> = records.iter().map(|r| r.q_true()).collect();
    Ok(RunMetrics {
        error: if samples == 0 {
            0.0
        } else {
            wrong as f64 / samples as f64
        },
        mse: sq / records.len() as f64,
        v_t: total_variation(&marginals)?.as_f64(),
        rounds: records.len(),
        samples,
    })
}
