//! Online label-shift adaptation.
//!
//! Tracks drifting class marginals with online regression oracles and adapts
//! classifiers to them, either by reweighting a frozen model from unlabeled
//! data ([`uols`]) or by retraining on labelled rounds ([`sols`]).
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root fix it to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod estimation;
pub mod linalg;
pub mod lpa;
pub mod metrics;
pub mod model;
pub mod regression;
mod scalar;
pub mod shift;
pub mod simplex;
pub mod sols;
pub mod uols;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Simplex = simplex::SimplexVector<f64>;
pub type Confusion = estimation::ConfusionMatrix<f64>;
pub type Matrix = linalg::SquareMatrix<f64>;
pub type Model = model::SoftmaxLinear<f64>;
pub type Samples = model::Dataset<f64>;
pub type Flh = regression::FlhFtl<f64>;
pub type Fth = regression::RunningAverage<f64>;
pub type Ftfwh = regression::WindowAverage<f64>;
pub type LowSwitch<R> = lpa::Lpa<R, f64>;
pub type Schedule = shift::ShiftSchedule<f64>;
pub type Uols = uols::UolsLearner<f64>;
pub type Sols = sols::SolsLearner<f64>;
pub type GaussianSource = data::GaussianMixtureSource<f64>;
