//! Data sources: the Gaussian mixture generator, per-class sample pools and
//! precomputed softmax streams.

use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::Dataset;
use crate::scalar::Scalar;
use crate::simplex::SimplexVector;

/// Isotropic Gaussian class conditionals `N(center_k, c I)` with unit-norm centers.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixtureSource<T> {
    centers: Vec<Vec<T>>,
    scale: T,
}

impl<T: Scalar> GaussianMixtureSource<T> {
    /// Default dimension of the synthetic benchmark.
    pub const DIM: usize = 12;
    /// Default number of classes of the synthetic benchmark.
    pub const CLASSES: usize = 3;
    /// Default covariance scale of the synthetic benchmark.
    pub const SCALE: f64 = 0.215;

    /// Draws each center from a standard Gaussian and normalizes it.
    pub fn random<R: Rng + ?Sized>(classes: usize, dim: usize, scale: T, rng: &mut R) -> Result<Self> {
        if classes == 0 || dim == 0 {
            return Err(Error::InvalidParameter(
                "need at least one class and one dimension".into(),
            ));
        }
        let centers = (0..classes)
            .map(|_| loop {
                let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 1e-12 {
                    break v.into_iter().map(|x| T::c(x / norm)).collect();
                }
            })
            .collect();
        Self::new(centers, scale)
    }

    pub fn new(centers: Vec<Vec<T>>, scale: T) -> Result<Self> {
        if !(scale >= T::zero()) || !scale.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "covariance scale must be non-negative, got {scale}"
            )));
        }
        let dim = centers.first().map_or(0, Vec::len);
        if centers.is_empty() || dim == 0 || centers.iter().any(|c| c.len() != dim) {
            return Err(Error::InvalidParameter(
                "centers must share a positive dimension".into(),
            ));
        }
        Ok(Self { centers, scale })
    }

    pub fn num_classes(&self) -> usize {
        self.centers.len()
    }

    pub fn dim(&self) -> usize {
        self.centers[0].len()
    }

    pub fn scale(&self) -> T {
        self.scale
    }

    pub fn centers(&self) -> &[Vec<T>] {
        &self.centers
    }

    pub fn sample<R: Rng + ?Sized>(&self, label: usize, rng: &mut R) -> Vec<T> {
        let sd = self.scale.sqrt();
        self.centers[label]
            .iter()
            .map(|&m| {
                let z: f64 = StandardNormal.sample(rng);
                m + sd * T::c(z)
            })
            .collect()
    }

    /// `per_class` draws from every class, shuffled.
    pub fn balanced_dataset<R: Rng + ?Sized>(&self, per_class: usize, rng: &mut R) -> Dataset<T> {
        let k = self.num_classes();
        let mut labels: Vec<usize> = (0..k).flat_map(|y| std::iter::repeat_n(y, per_class)).collect();
        labels.shuffle(rng);
        let mut data = Dataset::with_capacity(self.dim(), labels.len());
        for y in labels {
            let x = self.sample(y, rng);
            data.push(&x, y);
        }
        data
    }
}

/// What a [`ClassPools`] does once a class has been drawn dry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Exhaustion {
    /// Report [`Error::DataExhausted`].
    Fail,
    /// Reshuffle the class pool and start another pass.
    #[default]
    Recycle,
}

/// Per-class pools sampled without replacement.
#[derive(Debug, Clone)]
pub struct ClassPools<I> {
    pools: Vec<Vec<I>>,
    cursors: Vec<usize>,
    drawn: Vec<usize>,
    policy: Exhaustion,
}

impl<I: Clone> ClassPools<I> {
    pub fn new<R: Rng + ?Sized>(mut pools: Vec<Vec<I>>, policy: Exhaustion, rng: &mut R) -> Result<Self> {
        if let Some(class) = pools.iter().position(Vec::is_empty) {
            return Err(Error::IncompleteStream(format!("class {} has no rows", class + 1)));
        }
        pools.iter_mut().for_each(|p| p.shuffle(rng));
        let k = pools.len();
        Ok(Self {
            pools,
            cursors: vec![0; k],
            drawn: vec![0; k],
            policy,
        })
    }

    /// Splits labelled items into pools by label (labels in `0..k`).
    pub fn from_labelled<R: Rng + ?Sized>(
        items: impl IntoIterator<Item = (usize, I)>,
        k: usize,
        policy: Exhaustion,
        rng: &mut R,
    ) -> Result<Self> {
        let mut pools = vec![Vec::new(); k];
        for (y, item) in items {
            if y >= k {
                return Err(Error::InvalidInput(format!("label {y} outside 0..{k}")));
            }
            pools[y].push(item);
        }
        Self::new(pools, policy, rng)
    }

    pub fn num_classes(&self) -> usize {
        self.pools.len()
    }

    pub fn pool_sizes(&self) -> Vec<usize> {
        self.pools.iter().map(Vec::len).collect()
    }

    pub fn draw<R: Rng + ?Sized>(&mut self, label: usize, rng: &mut R) -> Result<I> {
        let pool = &mut self.pools[label];
        if self.cursors[label] == pool.len() {
            match self.policy {
                Exhaustion::Fail => {
                    return Err(Error::DataExhausted {
                        class: label,
                        drawn: self.drawn[label],
                    })
                }
                Exhaustion::Recycle => {
                    pool.shuffle(rng);
                    self.cursors[label] = 0;
                }
            }
        }
        let item = pool[self.cursors[label]].clone();
        self.cursors[label] += 1;
        self.drawn[label] += 1;
        Ok(item)
    }
}

/// Precomputed classifier outputs with their true labels (0-based internally).
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxStream<T> {
    classes: usize,
    rows: Vec<(usize, SimplexVector<T>)>,
}

impl<T: Scalar> SoftmaxStream<T> {
    pub fn num_classes(&self) -> usize {
        self.classes
    }

    pub fn rows(&self) -> &[(usize, SimplexVector<T>)] {
        &self.rows
    }

    pub fn into_rows(self) -> Vec<(usize, SimplexVector<T>)> {
        self.rows
    }

    pub fn into_pools<R: Rng + ?Sized>(self, policy: Exhaustion, rng: &mut R) -> Result<ClassPools<SimplexVector<T>>> {
        let k = self.classes;
        ClassPools::from_labelled(self.rows, k, policy, rng)
    }
}

/// Reads a softmax-stream CSV: header `label,p1,...,pK`, 1-based labels.
///
/// Rows whose probabilities sum to within 1% of one are renormalized; other
/// rows are rejected with their line number. Every class must appear.
pub fn load_softmax_stream<T: Scalar, R: Read>(reader: R) -> Result<SoftmaxStream<T>> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = csv
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(Error::IncompleteStream("file is empty".into()));
    }
    if header.len() < 3 || !header[0].eq_ignore_ascii_case("label") {
        return Err(Error::Parse {
            line: 1,
            message: "header must be `label,p1,...,pK` with K >= 2".into(),
        });
    }
    let k = header.len() - 1;
    let mut rows = Vec::new();
    let mut counts = vec![0usize; k];
    for record in csv.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let bad = |message: String| Error::Parse { line, message };
        if record.len() != k + 1 {
            return Err(bad(format!("expected {} fields, found {}", k + 1, record.len())));
        }
        let label: usize = record[0]
            .parse()
            .map_err(|_| bad(format!("label `{}` is not a positive integer", &record[0])))?;
        if label == 0 || label > k {
            return Err(bad(format!("label {label} outside 1..={k}")));
        }
        let mut probs = Vec::with_capacity(k);
        for field in record.iter().skip(1) {
            let p: f64 = field
                .parse()
                .map_err(|_| bad(format!("probability `{field}` is not a number")))?;
            if !p.is_finite() || p < 0.0 {
                return Err(bad(format!("probability {p} is not a finite non-negative number")));
            }
            probs.push(p);
        }
        let sum: f64 = probs.iter().sum();
        if !(0.99..=1.01).contains(&sum) {
            return Err(bad(format!("probabilities sum to {sum}, outside [0.99, 1.01]")));
        }
        let v = SimplexVector::normalized(probs.into_iter().map(T::c).collect()).map_err(|e| bad(e.to_string()))?;
        counts[label - 1] += 1;
        rows.push((label - 1, v));
    }
    if rows.is_empty() {
        return Err(Error::IncompleteStream("no data rows".into()));
    }
    if let Some(class) = counts.iter().position(|&c| c == 0) {
        return Err(Error::IncompleteStream(format!("class {} has no rows", class + 1)));
    }
    Ok(SoftmaxStream { classes: k, rows })
}

pub fn load_softmax_stream_path<T: Scalar>(path: impl AsRef<Path>) -> Result<SoftmaxStream<T>> {
    let file = std::fs::File::open(path)?;
    load_softmax_stream(std::io::BufReader::new(file))
}
