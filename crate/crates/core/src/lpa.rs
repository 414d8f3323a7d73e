//! Low switching through phased averaging.
//!
//! Wraps any [`OnlineRegressor`] and emits a piecewise-constant estimate.
//! Within a segment starting at round `b` the output is refreshed to the mean
//! of `z_b..z_t` whenever `t - b + 1` is a power of two. The wrapped oracle runs
//! alongside; when the squared distance between the held output and the
//! oracle's estimates over the segment exceeds `5 K sigma^2 ln(2T/delta)`, the
//! segment restarts at `t + 1` with the output set to `z_t` and the oracle reset.

use crate::error::{Error, Result};
use crate::regression::{check_observation, OnlineRegressor};
use crate::scalar::{dot, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpaConfig<T> {
    /// Failure probability, in (0, 1).
    pub delta: T,
    /// Per-coordinate noise variance bound.
    pub sigma_sq: T,
    pub horizon: usize,
}

impl<T: Scalar> LpaConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > T::zero() && self.delta < T::one()) {
            return Err(Error::InvalidParameter(format!(
                "delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        if !(self.sigma_sq >= T::zero()) || !self.sigma_sq.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "sigma^2 must be finite and non-negative, got {}",
                self.sigma_sq
            )));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidParameter("horizon must be at least 1".into()));
        }
        Ok(())
    }

    /// Restart threshold `5 K sigma^2 ln(2T / delta)`.
    pub fn threshold(&self, dim: usize) -> T {
        let two_t = T::from_usize_lossy(2 * self.horizon);
        T::c(5.0) * T::from_usize_lossy(dim) * self.sigma_sq * (two_t / self.delta).ln()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwitchReason {
    Restart,
    Refresh,
}

/// The held output changed after observing round `round`; the new value is
/// emitted from round `round + 1` on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SwitchEvent {
    pub round: usize,
    pub reason: SwitchReason,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpaStep<T> {
    /// Estimate emitted for this round, fixed before `z_t` was seen.
    pub output: Vec<T>,
    /// The emitted estimate differs from the previous round's.
    pub switched: bool,
    /// The non-stationarity test fired on this round's observation.
    pub restart: bool,
}

#[derive(Debug, Clone)]
pub struct Lpa<R, T> {
    config: LpaConfig<T>,
    threshold: T,
    inner: R,
    prev: Vec<T>,
    last_output: Vec<T>,
    round: usize,
    segment_start: usize,
    segment_sum: Vec<T>,
    segment_len: usize,
    // Sufficient statistics of the oracle estimates for rounds b+1..t.
    estimate_count: usize,
    estimate_sum: Vec<T>,
    estimate_sq_sum: T,
    drift_stat: T,
    switch_log: Vec<SwitchEvent>,
    restarts: Vec<usize>,
    switches: usize,
}

impl<R: OnlineRegressor<T>, T: Scalar> Lpa<R, T> {
    pub fn new(inner: R, config: LpaConfig<T>) -> Result<Self> {
        config.validate()?;
        let dim = inner.dim();
        Ok(Self {
            threshold: config.threshold(dim),
            config,
            inner,
            prev: vec![T::zero(); dim],
            last_output: vec![T::zero(); dim],
            round: 0,
            segment_start: 1,
            segment_sum: vec![T::zero(); dim],
            segment_len: 0,
            estimate_count: 0,
            estimate_sum: vec![T::zero(); dim],
            estimate_sq_sum: T::zero(),
            drift_stat: T::zero(),
            switch_log: Vec::new(),
            restarts: Vec::new(),
            switches: 0,
        })
    }

    pub fn config(&self) -> &LpaConfig<T> {
        &self.config
    }

    pub fn threshold(&self) -> T {
        self.threshold
    }

    pub fn inner(&self) -> &R {
        &self.inner
    }

    /// Rounds observed so far.
    pub fn round(&self) -> usize {
        self.round
    }

    pub fn segment_start(&self) -> usize {
        self.segment_start
    }

    /// Value of the non-stationarity statistic at the last round.
    pub fn drift_stat(&self) -> T {
        self.drift_stat
    }

    pub fn switch_log(&self) -> &[SwitchEvent] {
        &self.switch_log
    }

    /// Rounds at which the segment was restarted.
    pub fn restarts(&self) -> &[usize] {
        &self.restarts
    }

    /// Rounds whose emitted estimate differed from the previous round's.
    pub fn count_switches(&self) -> usize {
        self.switches
    }

    /// Runs one round: emits the held estimate, then absorbs `z`.
    pub fn step(&mut self, z: &[T]) -> Result<LpaStep<T>> {
        let dim = self.prev.len();
        check_observation(z, dim)?;
        let t = self.round + 1;
        if t > self.config.horizon {
            return Err(Error::HorizonExceeded {
                round: t,
                horizon: self.config.horizon,
            });
        }
        self.round = t;

        let output = self.prev.clone();
        let switched = output != self.last_output;
        if switched {
            self.switches += 1;
        }
        self.last_output.clone_from(&output);

        let estimate = self.inner.predict();
        self.segment_sum.iter_mut().zip(z).for_each(|(s, &x)| *s += x);
        self.segment_len += 1;
        if t > self.segment_start {
            self.estimate_count += 1;
            self.estimate_sum.iter_mut().zip(&estimate).for_each(|(s, &x)| *s += x);
            self.estimate_sq_sum += dot(&estimate, &estimate);
        }

        // sum_j |prev - e_j|^2 = n |prev|^2 - 2 prev . sum_j e_j + sum_j |e_j|^2
        let n = T::from_usize_lossy(self.estimate_count);
        self.drift_stat = (n * dot(&self.prev, &self.prev) - T::c(2.0) * dot(&self.prev, &self.estimate_sum)
            + self.estimate_sq_sum)
            .max(T::zero());

        let mut restart = false;
        let mut next = None;
        if self.drift_stat > self.threshold {
            restart = true;
            self.restarts.push(t);
            self.segment_start = t + 1;
            self.segment_sum.iter_mut().for_each(|s| *s = T::zero());
            self.segment_len = 0;
            self.estimate_count = 0;
            self.estimate_sum.iter_mut().for_each(|s| *s = T::zero());
            self.estimate_sq_sum = T::zero();
            self.drift_stat = T::zero();
            self.inner.reset();
            next = Some((z.to_vec(), SwitchReason::Restart));
        } else if (t + 1 - self.segment_start).is_power_of_two() {
            let len = T::from_usize_lossy(self.segment_len);
            let mean = self.segment_sum.iter().map(|&s| s / len).collect();
            next = Some((mean, SwitchReason::Refresh));
        }
        if let Some((value, reason)) = next {
            if value != self.prev {
                self.switch_log.push(SwitchEvent { round: t, reason });
                self.prev = value;
            }
        }

        self.inner.update(z)?;
        Ok(LpaStep {
            output,
            switched,
            restart,
        })
    }
}

impl<R: OnlineRegressor<T>, T: Scalar> OnlineRegressor<T> for Lpa<R, T> {
    fn dim(&self) -> usize {
        self.prev.len()
    }

    fn predict(&self) -> Vec<T> {
        self.prev.clone()
    }

    fn update(&mut self, z: &[T]) -> Result<()> {
        self.step(z).map(|_| ())
    }

    fn reset(&mut self) {
        self.inner.reset();
        let zero = T::zero();
        self.prev.iter_mut().for_each(|x| *x = zero);
        self.last_output.iter_mut().for_each(|x| *x = zero);
        self.round = 0;
        self.segment_start = 1;
        self.segment_sum.iter_mut().for_each(|x| *x = zero);
        self.segment_len = 0;
        self.estimate_count = 0;
        self.estimate_sum.iter_mut().for_each(|x| *x = zero);
        self.estimate_sq_sum = zero;
        self.drift_stat = zero;
        self.switch_log.clear();
        self.restarts.clear();
        self.switches = 0;
    }
}
