//! Probability-vector primitives.

use std::ops::Deref;

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::{all_finite, Scalar};

/// A point of the probability simplex: non-negative entries summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexVector<T>(Vec<T>);

impl<T: Scalar> SimplexVector<T> {
    /// Validates `values` as a probability vector.
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("empty probability vector".into()));
        }
        if !all_finite(&values) {
            return Err(Error::InvalidInput("non-finite probability".into()));
        }
        let tol = T::c(T::SIMPLEX_TOL);
        if values.iter().any(|&p| p < -tol || p > T::one() + tol) {
            return Err(Error::InvalidInput(format!(
                "probability entries must lie in [0, 1]: {values:?}"
            )));
        }
        let sum: T = values.iter().copied().sum();
        if (sum - T::one()).abs() > tol {
            return Err(Error::InvalidInput(format!("probabilities sum to {sum}, expected 1")));
        }
        Ok(Self(values))
    }

    /// Divides by the sum. Entries must be non-negative with a positive sum.
    pub fn normalized(values: Vec<T>) -> Result<Self> {
        if !all_finite(&values) || values.iter().any(|&p| p < T::zero()) {
            return Err(Error::InvalidInput(
                "normalization needs finite non-negative entries".into(),
            ));
        }
        let sum: T = values.iter().copied().sum();
        if sum <= T::zero() {
            return Err(Error::InvalidInput("cannot normalize a zero vector".into()));
        }
        Ok(Self(values.into_iter().map(|p| p / sum).collect()))
    }

    pub fn uniform(k: usize) -> Self {
        assert!(k > 0, "uniform distribution needs at least one class");
        Self(vec![T::one() / T::from_usize_lossy(k); k])
    }

    /// The vertex `e_k` of the simplex.
    pub fn vertex(k: usize, dim: usize) -> Self {
        assert!(k < dim);
        let mut v = vec![T::zero(); dim];
        v[k] = T::one();
        Self(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }

    /// Index of the largest entry; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }

    /// Draws an index with probability equal to its entry.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u = T::c(rng.random::<f64>());
        let mut acc = T::zero();
        for (i, &p) in self.0.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        // Rounding left `u` above the cumulative sum: take the last positive entry.
        self.0.iter().rposition(|&p| p > T::zero()).unwrap_or(0)
    }
}

impl<T> Deref for SimplexVector<T> {
    type Target = [T];

    fn deref(&self) -> &[T] {
        &self.0
    }
}

impl<T> AsRef<[T]> for SimplexVector<T> {
    fn as_ref(&self) -> &[T] {
        &self.0
    }
}

pub(crate) fn argmax<T: Scalar>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Euclidean projection onto the probability simplex.
///
/// Sorts the entries in decreasing order and finds the largest prefix whose
/// shifted entries stay positive; the shift is then applied to every entry.
pub fn project_simplex<T: Scalar>(v: &[T]) -> Result<SimplexVector<T>> {
    if v.is_empty() {
        return Err(Error::InvalidInput("cannot project an empty vector".into()));
    }
    if !all_finite(v) {
        return Err(Error::InvalidInput("cannot project a non-finite vector".into()));
    }
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite entries"));

    let mut cumsum = T::zero();
    let mut threshold = T::zero();
    for (j, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - T::one()) / T::from_usize_lossy(j + 1);
        if u - candidate > T::zero() {
            threshold = candidate;
        }
    }
    let mut out: Vec<T> = v.iter().map(|&x| (x - threshold).max(T::zero())).collect();
    // Rounding can leave the sum a few ulps away from one.
    let sum: T = out.iter().copied().sum();
    if sum > T::zero() {
        out.iter_mut().for_each(|x| *x /= sum);
    }
    Ok(SimplexVector(out))
}

/// Raises every entry of `q` to at least `mu` while keeping a probability vector.
///
/// Entries below the floor are pinned at `mu` and the remaining entries are
/// rescaled proportionally to absorb the difference; this repeats until no
/// rescaled entry falls below the floor. Inputs already above the floor are
/// returned unchanged, and `mu = 1/K` yields the uniform vector.
pub fn clip_floor<T: Scalar>(q: &SimplexVector<T>, mu: T) -> Result<SimplexVector<T>> {
    let k = q.dim();
    let kmu = mu * T::from_usize_lossy(k);
    let tol = T::c(T::SIMPLEX_TOL);
    if !(mu > T::zero()) || kmu > T::one() + tol {
        return Err(Error::InvalidParameter(format!(
            "clip floor must lie in (0, 1/K], got {mu} with K = {k}"
        )));
    }
    if q.iter().all(|&p| p >= mu) {
        return Ok(q.clone());
    }
    if kmu >= T::one() - tol {
        return Ok(SimplexVector::uniform(k));
    }

    let mut pinned = vec![false; k];
    loop {
        let n_pinned = pinned.iter().filter(|&&p| p).count();
        let free_mass: T = q.iter().zip(&pinned).filter(|(_, &p)| !p).map(|(&x, _)| x).sum();
        let budget = T::one() - mu * T::from_usize_lossy(n_pinned);
        let mut changed = false;
        let out: Vec<T> = q
            .iter()
            .zip(pinned.iter_mut())
            .map(|(&x, p)| {
                if *p {
                    return mu;
                }
                let scaled = if free_mass > T::zero() {
                    x * budget / free_mass
                } else {
                    T::zero()
                };
                if scaled < mu {
                    *p = true;
                    changed = true;
                }
                scaled
            })
            .collect();
        if !changed {
            return Ok(SimplexVector(out));
        }
    }
}

/// Sum of L1 distances between consecutive vectors.
pub fn total_variation<T: Scalar, V: AsRef<[T]>>(schedule: &[V]) -> Result<T> {
    if schedule.is_empty() {
        return Err(Error::InvalidInput("total variation of an empty sequence".into()));
    }
    Ok(schedule
        .windows(2)
        .map(|w| l1_distance(w[0].as_ref(), w[1].as_ref()))
        .sum())
}

pub fn l1_distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y).abs()).sum()
}
