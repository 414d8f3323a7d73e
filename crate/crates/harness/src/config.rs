//! Experiment configuration, loaded from JSON and overridden by CLI flags.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context};
use labelshift_core::data::Exhaustion;
use labelshift_core::model::TrainerConfig;
use labelshift_core::shift::{ShiftKind, ShiftParams, DEFAULT_ANCHOR_EPS};
use labelshift_core::sols::{ContinualConfig, LearnerKind};
use labelshift_core::uols::{Prediction, Projection, UpdateMode};
use serde::{Deserialize, Serialize};

/// Seed of the class centers of the synthetic benchmark.
pub const DEFAULT_DATA_SEED: u64 = 33;

/// Marginal trackers and reference pipelines of the unsupervised protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UolsMethod {
    Base,
    Oracle,
    Fth,
    Ftfwh,
    FlhFtl,
    /// FLH-FTL inside the low-switching wrapper.
    Lpa,
}

impl UolsMethod {
    pub const ALL: [UolsMethod; 6] = [
        UolsMethod::Base,
        UolsMethod::Oracle,
        UolsMethod::Fth,
        UolsMethod::Ftfwh,
        UolsMethod::FlhFtl,
        UolsMethod::Lpa,
    ];

    pub fn name(self) -> &'static str {
        match self {
            UolsMethod::Base => "base",
            UolsMethod::Oracle => "oracle",
            UolsMethod::Fth => "fth",
            UolsMethod::Ftfwh => "ftfwh",
            UolsMethod::FlhFtl => "flh-ftl",
            UolsMethod::Lpa => "lpa",
        }
    }
}

impl fmt::Display for UolsMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for UolsMethod {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        UolsMethod::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .with_context(|| format!("unknown method `{s}`"))
    }
}

/// Online regression oracles usable as marginal trackers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrackerKind {
    Fth,
    Ftfwh,
    FlhFtl,
}

impl FromStr for TrackerKind {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fth" => Ok(TrackerKind::Fth),
            "ftfwh" => Ok(TrackerKind::Ftfwh),
            "flh-ftl" | "flh" => Ok(TrackerKind::FlhFtl),
            _ => bail!("unknown oracle `{s}`"),
        }
    }
}

/// Every experiment knob; unset optional values take protocol-specific defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub shift: ShiftKind,
    /// Rounds; 1000 for the unsupervised and 200 for the supervised protocol.
    pub horizon: Option<usize>,
    /// Samples per round; 10 unsupervised, 50 supervised.
    pub per_step: Option<usize>,
    /// Fraction of the 12k source holdout used to estimate the confusion matrix.
    pub holdout_frac: f64,
    pub seeds: Vec<u64>,
    /// Seeds the class centers; fixed across run seeds.
    pub data_seed: u64,
    /// Off-corner mass of the default anchors.
    pub anchor_eps: f64,
    /// Explicit anchors `[mu_1, mu_2]`, overriding `anchor_eps`.
    pub anchors: Option<[Vec<f64>; 2]>,
    pub period: Option<usize>,
    pub flip_prob: Option<f64>,
    pub initial_alpha: Option<f64>,
    pub exhaustion: Exhaustion,

    pub methods: Vec<UolsMethod>,
    pub projection: Projection,
    pub predict: Prediction,
    pub update: UpdateMode,
    /// FLH-FTL learning rate; defaults to `1/K`.
    pub flh_rate: Option<f64>,
    pub window: usize,
    pub lpa_delta: f64,
    /// Per-coordinate noise variance for the LPA threshold; defaults from the protocol.
    pub lpa_sigma_sq: Option<f64>,
    /// Precomputed softmax stream replacing the synthetic source (unsupervised only).
    pub stream: Option<PathBuf>,

    pub learners: Vec<LearnerKind>,
    pub tracker: TrackerKind,
    pub mu: f64,
    /// Clip floor of the lazy learner, whose piecewise-constant estimates can contain zeros.
    pub lazy_mu: f64,
    /// Trainer of the frozen source classifier.
    pub base_trainer: TrainerConfig,
    /// Trainer of the supervised learners; `epochs` is the per-refit budget.
    pub trainer: TrainerConfig,
    pub continual: ContinualConfig,

    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            shift: ShiftKind::Bernoulli,
            horizon: None,
            per_step: None,
            holdout_frac: 0.1,
            seeds: vec![0, 1, 2],
            data_seed: DEFAULT_DATA_SEED,
            anchor_eps: DEFAULT_ANCHOR_EPS,
            anchors: None,
            period: None,
            flip_prob: None,
            initial_alpha: None,
            exhaustion: Exhaustion::Recycle,
            methods: vec![
                UolsMethod::Base,
                UolsMethod::Oracle,
                UolsMethod::Fth,
                UolsMethod::Ftfwh,
                UolsMethod::FlhFtl,
            ],
            projection: Projection::Simplex,
            predict: Prediction::Argmax,
            update: UpdateMode::PerRound,
            flh_rate: None,
            window: 100,
            lpa_delta: 0.05,
            lpa_sigma_sq: None,
            stream: None,
            learners: vec![LearnerKind::Werm, LearnerKind::Lazy, LearnerKind::Ct, LearnerKind::CtRs],
            tracker: TrackerKind::FlhFtl,
            mu: 0.0,
            lazy_mu: 1e-3,
            base_trainer: TrainerConfig::default(),
            trainer: TrainerConfig {
                epochs: 30,
                ..TrainerConfig::default()
            },
            continual: ContinualConfig::default(),
            out: PathBuf::from("results"),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn uols_horizon(&self) -> usize {
        self.horizon.unwrap_or(1000)
    }

    pub fn uols_per_step(&self) -> usize {
        self.per_step.unwrap_or(10)
    }

    pub fn sols_horizon(&self) -> usize {
        self.horizon.unwrap_or(200)
    }

    pub fn sols_per_step(&self) -> usize {
        self.per_step.unwrap_or(50)
    }

    pub fn shift_params(&self) -> ShiftParams {
        ShiftParams {
            period: self.period,
            flip_prob: self.flip_prob,
            initial_alpha: self.initial_alpha,
        }
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.seeds.is_empty() {
            bail!("at least one seed is required");
        }
        if self.horizon == Some(0) {
            bail!("horizon must be at least 1");
        }
        if self.per_step == Some(0) {
            bail!("per-step sample count must be at least 1");
        }
        if !(self.holdout_frac > 0.0 && self.holdout_frac <= 1.0) {
            bail!("holdout fraction must lie in (0, 1]");
        }
        if self.window == 0 {
            bail!("window must be at least 1");
        }
        if let Some(r) = self.flh_rate {
            if !(r > 0.0 && r.is_finite()) {
                bail!("FLH-FTL learning rate must be positive");
            }
        }
        self.base_trainer.validate()?;
        self.trainer.validate()?;
        Ok(())
    }
}
