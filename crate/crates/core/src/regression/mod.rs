//! Online regression oracles: track a drifting vector from noisy observations.
//!
//! Every oracle answers `predict` with its estimate of the current ground
//! truth given the observations fed so far, then absorbs the next observation
//! through `update`. Before the first update every oracle predicts zero.

mod average;
mod flh;

pub use average::{RunningAverage, WindowAverage};
pub use flh::FlhFtl;

use crate::error::{Error, Result};
use crate::scalar::{all_finite, Scalar};

pub trait OnlineRegressor<T: Scalar>: Send {
    fn dim(&self) -> usize;

    fn predict(&self) -> Vec<T>;

    fn update(&mut self, z: &[T]) -> Result<()>;

    /// Forgets every observation.
    fn reset(&mut self);
}

impl<T: Scalar, R: OnlineRegressor<T> + ?Sized> OnlineRegressor<T> for Box<R> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn predict(&self) -> Vec<T> {
        (**self).predict()
    }

    fn update(&mut self, z: &[T]) -> Result<()> {
        (**self).update(z)
    }

    fn reset(&mut self) {
        (**self).reset()
    }
}

/// An oracle that ignores its observations and always reports the same vector.
#[derive(Debug, Clone)]
pub struct FixedEstimate<T> {
    value: Vec<T>,
}

impl<T: Scalar> FixedEstimate<T> {
    pub fn new(value: Vec<T>) -> Self {
        Self { value }
    }
}

impl<T: Scalar> OnlineRegressor<T> for FixedEstimate<T> {
    fn dim(&self) -> usize {
        self.value.len()
    }

    fn predict(&self) -> Vec<T> {
        self.value.clone()
    }

    fn update(&mut self, z: &[T]) -> Result<()> {
        check_observation(z, self.value.len())
    }

    fn reset(&mut self) {}
}

pub(crate) fn check_observation<T: Scalar>(z: &[T], dim: usize) -> Result<()> {
    if z.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: z.len(),
        });
    }
    if !all_finite(z) {
        return Err(Error::InvalidInput("non-finite observation".into()));
    }
    Ok(())
}
