use std::collections::VecDeque;

use super::{check_observation, OnlineRegressor};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Follow-the-history: the mean of every observation so far.
#[derive(Debug, Clone)]
pub struct RunningAverage<T> {
    sum: Vec<T>,
    count: usize,
}

impl<T: Scalar> RunningAverage<T> {
    pub fn new(dim: usize) -> Self {
        Self {
            sum: vec![T::zero(); dim],
            count: 0,
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }
}

impl<T: Scalar> OnlineRegressor<T> for RunningAverage<T> {
    fn dim(&self) -> usize {
        self.sum.len()
    }

    fn predict(&self) -> Vec<T> {
        if self.count == 0 {
            return vec![T::zero(); self.sum.len()];
        }
        let n = T::from_usize_lossy(self.count);
        self.sum.iter().map(|&s| s / n).collect()
    }

    fn update(&mut self, z: &[T]) -> Result<()> {
        check_observation(z, self.sum.len())?;
        self.sum.iter_mut().zip(z).for_each(|(s, &x)| *s += x);
        self.count += 1;
        Ok(())
    }

    fn reset(&mut self) {
        self.sum.iter_mut().for_each(|s| *s = T::zero());
        self.count = 0;
    }
}

/// Follow-the-fixed-window-history: the mean of the last `window` observations.
#[derive(Debug, Clone)]
pub struct WindowAverage<T> {
    dim: usize,
    window: usize,
    buffer: VecDeque<Vec<T>>,
}

impl<T: Scalar> WindowAverage<T> {
    pub fn new(dim: usize, window: usize) -> Result<Self> {
        if window == 0 {
            return Err(Error::InvalidParameter("window size must be positive".into()));
        }
        Ok(Self {
            dim,
            window,
            buffer: VecDeque::with_capacity(window),
        })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }
}

impl<T: Scalar> OnlineRegressor<T> for WindowAverage<T> {
    fn dim(&self) -> usize {
        self.dim
    }

    // Summed afresh on every call so no rounding drift builds up.
    fn predict(&self) -> Vec<T> {
        let mut mean = vec![T::zero(); self.dim];
        if self.buffer.is_empty() {
            return mean;
        }
        for z in &self.buffer {
            mean.iter_mut().zip(z).for_each(|(m, &x)| *m += x);
        }
        let n = T::from_usize_lossy(self.buffer.len());
        mean.iter_mut().for_each(|m| *m /= n);
        mean
    }

    fn update(&mut self, z: &[T]) -> Result<()> {
        check_observation(z, self.dim)?;
        if self.buffer.len() == self.window {
            self.buffer.pop_front();
        }
        self.buffer.push_back(z.to_vec());
        Ok(())
    }

    fn reset(&mut self) {
        self.buffer.clear();
    }
}
