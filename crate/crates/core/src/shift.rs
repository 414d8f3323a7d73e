//! Simulated label shift: mixtures of two anchor marginals with a time-varying
//! coefficient, `q_t = (1 - alpha_t) mu_1 + alpha_t mu_2`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::ClassPools;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::simplex::{total_variation, SimplexVector};

/// Off-corner mass of the default anchors.
pub const DEFAULT_ANCHOR_EPS: f64 = 0.06;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ShiftKind {
    /// `alpha_t = t / T`.
    #[serde(rename = "mon")]
    Monotone,
    /// `alpha_t = sin(i pi / L)` with `i = t mod L`.
    #[serde(rename = "sin")]
    Sinusoidal,
    /// `alpha_t` flips to `1 - alpha_{t-1}` with probability `p`.
    #[serde(rename = "ber")]
    Bernoulli,
    /// `alpha_t` flips every `L` rounds.
    #[serde(rename = "squ")]
    Square,
}

impl ShiftKind {
    pub const ALL: [ShiftKind; 4] = [
        ShiftKind::Monotone,
        ShiftKind::Sinusoidal,
        ShiftKind::Bernoulli,
        ShiftKind::Square,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ShiftKind::Monotone => "mon",
            ShiftKind::Sinusoidal => "sin",
            ShiftKind::Bernoulli => "ber",
            ShiftKind::Square => "squ",
        }
    }
}

impl fmt::Display for ShiftKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ShiftKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ShiftKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown shift kind `{s}`")))
    }
}

/// Optional overrides; unset values use `L = floor(sqrt(T))`, `p = 1/sqrt(T)`, `alpha_0 = 0`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ShiftParams {
    pub period: Option<usize>,
    pub flip_prob: Option<f64>,
    pub initial_alpha: Option<f64>,
}

/// `mu_1` puts `1 - (K-1) eps` on the first class, `mu_2` on the last; `eps` elsewhere.
pub fn corner_anchors<T: Scalar>(k: usize, eps: f64) -> Result<(SimplexVector<T>, SimplexVector<T>)> {
    if k < 2 {
        return Err(Error::InvalidParameter("anchors need at least two classes".into()));
    }
    if !(0.0..=1.0 / (k as f64 - 1.0)).contains(&eps) {
        return Err(Error::InvalidParameter(format!("anchor eps {eps} out of range")));
    }
    let heavy = 1.0 - (k as f64 - 1.0) * eps;
    let make = |at: usize| {
        let v = (0..k).map(|i| T::c(if i == at { heavy } else { eps })).collect();
        SimplexVector::normalized(v)
    };
    Ok((make(0)?, make(k - 1)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftSchedule<T> {
    kind: ShiftKind,
    anchors: (SimplexVector<T>, SimplexVector<T>),
    period: usize,
    flip_prob: f64,
    alphas: Vec<T>,
    marginals: Vec<SimplexVector<T>>,
}

/// Realizes a schedule of `horizon` rounds. Only the Bernoulli kind consumes randomness.
pub fn make_schedule<T: Scalar, R: Rng + ?Sized>(
    kind: ShiftKind,
    horizon: usize,
    anchors: (SimplexVector<T>, SimplexVector<T>),
    params: ShiftParams,
    rng: &mut R,
) -> Result<ShiftSchedule<T>> {
    if horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be at least 1".into()));
    }
    if anchors.0.dim() != anchors.1.dim() {
        return Err(Error::DimensionMismatch {
            expected: anchors.0.dim(),
            got: anchors.1.dim(),
        });
    }
    let sqrt_t = (horizon as f64).sqrt();
    let period = params.period.unwrap_or((sqrt_t.floor() as usize).max(1));
    if period == 0 {
        return Err(Error::InvalidParameter("period must be at least 1".into()));
    }
    let flip_prob = params.flip_prob.unwrap_or(1.0 / sqrt_t);
    if !(0.0..=1.0).contains(&flip_prob) {
        return Err(Error::InvalidParameter(format!(
            "flip probability {flip_prob} outside [0, 1]"
        )));
    }
    let alpha0 = params.initial_alpha.unwrap_or(0.0);
    if !(0.0..=1.0).contains(&alpha0) {
        return Err(Error::InvalidParameter(format!(
            "initial alpha {alpha0} outside [0, 1]"
        )));
    }

    let mut alphas = Vec::with_capacity(horizon);
    let mut prev = alpha0;
    for t in 1..=horizon {
        let a = match kind {
            ShiftKind::Monotone => t as f64 / horizon as f64,
            ShiftKind::Sinusoidal => {
                let i = t % period;
                (i as f64 * std::f64::consts::PI / period as f64).sin().clamp(0.0, 1.0)
            }
            ShiftKind::Bernoulli => {
                if rng.random::<f64>() < flip_prob {
                    1.0 - prev
                } else {
                    prev
                }
            }
            ShiftKind::Square => {
                if t % period == 0 {
                    1.0 - prev
                } else {
                    prev
                }
            }
        };
        prev = a;
        alphas.push(T::c(a));
    }

    let marginals = alphas
        .iter()
        .map(|&a| mixture(&anchors.0, &anchors.1, a))
        .collect::<Result<Vec<_>>>()?;
    Ok(ShiftSchedule {
        kind,
        anchors,
        period,
        flip_prob,
        alphas,
        marginals,
    })
}

/// `(1 - alpha) mu_1 + alpha mu_2`.
pub fn mixture<T: Scalar>(mu1: &SimplexVector<T>, mu2: &SimplexVector<T>, alpha: T) -> Result<SimplexVector<T>> {
    let v = mu1
        .iter()
        .zip(mu2.iter())
        .map(|(&a, &b)| ((T::one() - alpha) * a + alpha * b).max(T::zero()))
        .collect();
    SimplexVector::normalized(v)
}

impl<T: Scalar> ShiftSchedule<T> {
    pub fn kind(&self) -> ShiftKind {
        self.kind
    }

    pub fn horizon(&self) -> usize {
        self.alphas.len()
    }

    pub fn num_classes(&self) -> usize {
        self.anchors.0.dim()
    }

    pub fn anchors(&self) -> (&SimplexVector<T>, &SimplexVector<T>) {
        (&self.anchors.0, &self.anchors.1)
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn flip_prob(&self) -> f64 {
        self.flip_prob
    }

    /// Mixing coefficients for rounds `1..=T` (index `t - 1`).
    pub fn alphas(&self) -> &[T] {
        &self.alphas
    }

    pub fn marginals(&self) -> &[SimplexVector<T>] {
        &self.marginals
    }

    /// Label marginal of round `t`, 1-based.
    pub fn marginal_at(&self, t: usize) -> Result<&SimplexVector<T>> {
        if t == 0 || t > self.marginals.len() {
            return Err(Error::InvalidInput(format!(
                "round {t} outside 1..={}",
                self.marginals.len()
            )));
        }
        Ok(&self.marginals[t - 1])
    }

    pub fn total_variation(&self) -> T {
        total_variation(&self.marginals).expect("schedule is non-empty")
    }

    /// Number of rounds whose coefficient differs from the previous one (from `alpha_0`).
    pub fn alpha_changes(&self) -> usize {
        self.alphas.windows(2).filter(|w| w[0] != w[1]).count()
    }
}

/// One round of a simulated target stream.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamRound<T, I> {
    pub q_true: SimplexVector<T>,
    pub items: Vec<I>,
    pub labels: Vec<usize>,
}

/// Per round, draws `per_step` labels from `q_t` and one pooled item per label.
pub fn draw_stream<T: Scalar, I: Clone, R: Rng + ?Sized>(
    schedule: &ShiftSchedule<T>,
    pools: &mut ClassPools<I>,
    per_step: usize,
    rng: &mut R,
) -> Result<Vec<StreamRound<T, I>>> {
    if per_step == 0 {
        return Err(Error::InvalidParameter("samples per step must be at least 1".into()));
    }
    if pools.num_classes() != schedule.num_classes() {
        return Err(Error::DimensionMismatch {
            expected: schedule.num_classes(),
            got: pools.num_classes(),
        });
    }
    schedule
        .marginals()
        .iter()
        .map(|q| {
            let labels: Vec<usize> = (0..per_step).map(|_| q.sample(rng)).collect();
            let items = labels.iter().map(|&y| pools.draw(y, rng)).collect::<Result<Vec<_>>>()?;
            Ok(StreamRound {
                q_true: q.clone(),
                items,
                labels,
            })
        })
        .collect()
}
