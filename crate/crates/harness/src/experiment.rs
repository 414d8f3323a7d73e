//! Orchestration of seeds × methods for both protocols.

use std::sync::{Arc, Mutex};
use std::time::Instant;

use anyhow::{bail, Context};
use labelshift_core::data::load_softmax_stream_path;
use labelshift_core::estimation::ConfusionMatrix;
use labelshift_core::lpa::{Lpa, LpaConfig};
use labelshift_core::metrics::{score_run, RunMetrics};
use labelshift_core::model::SoftmaxLinear;
use labelshift_core::regression::{FlhFtl, OnlineRegressor, RunningAverage, WindowAverage};
use labelshift_core::shift::{corner_anchors, draw_stream, make_schedule, ShiftSchedule};
use labelshift_core::simplex::SimplexVector;
use labelshift_core::sols::{run_sols, LearnerKind, SolsConfig, SolsLearner, SolsRound};
use labelshift_core::uols::{run_uols, MarginalSource, UolsConfig, UolsLearner, UolsRound, UpdateMode};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, TrackerKind, UolsMethod};
use crate::synthetic::{feature_pools, gaussian_source, stream_setup, SyntheticBenchmark};
use crate::trace::TraceRow;

/// Lets the harness read an oracle's diagnostics after a learner has consumed it.
pub struct Shared<R>(pub Arc<Mutex<R>>);

impl<R> Shared<R> {
    pub fn new(inner: R) -> (Self, Arc<Mutex<R>>) {
        let arc = Arc::new(Mutex::new(inner));
        (Self(arc.clone()), arc)
    }
}

impl<R: OnlineRegressor<f64>> OnlineRegressor<f64> for Shared<R> {
    fn dim(&self) -> usize {
        self.0.lock().expect("oracle lock").dim()
    }

    fn predict(&self) -> Vec<f64> {
        self.0.lock().expect("oracle lock").predict()
    }

    fn update(&mut self, z: &[f64]) -> labelshift_core::Result<()> {
        self.0.lock().expect("oracle lock").update(z)
    }

    fn reset(&mut self) {
        self.0.lock().expect("oracle lock").reset()
    }
}

type BoxedLpa = Lpa<Box<dyn OnlineRegressor<f64>>, f64>;
type SharedLpa = Arc<Mutex<BoxedLpa>>;

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trace: Vec<TraceRow>,
    pub metrics: RunMetrics,
    /// Changes of the emitted estimate, for low-switching oracles.
    pub switches: Option<usize>,
    pub refits: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct MethodRun {
    pub method: String,
    pub seed: u64,
    pub outcome: Result<RunOutcome, String>,
    pub runtime_ms: f64,
}

pub fn anchors(cfg: &ExperimentConfig, k: usize) -> anyhow::Result<(SimplexVector<f64>, SimplexVector<f64>)> {
    match &cfg.anchors {
        Some([a, b]) => {
            if a.len() != k || b.len() != k {
                bail!("anchors must have {k} entries");
            }
            Ok((
                SimplexVector::new(a.clone()).context("first anchor")?,
                SimplexVector::new(b.clone()).context("second anchor")?,
            ))
        }
        None => Ok(corner_anchors(k, cfg.anchor_eps)?),
    }
}

fn schedule(
    cfg: &ExperimentConfig,
    k: usize,
    horizon: usize,
    rng: &mut ChaCha8Rng,
) -> anyhow::Result<ShiftSchedule<f64>> {
    Ok(make_schedule(
        cfg.shift,
        horizon,
        anchors(cfg, k)?,
        cfg.shift_params(),
        rng,
    )?)
}

fn tracker(cfg: &ExperimentConfig, kind: TrackerKind, k: usize) -> anyhow::Result<Box<dyn OnlineRegressor<f64>>> {
    Ok(match kind {
        TrackerKind::Fth => Box::new(RunningAverage::new(k)),
        TrackerKind::Ftfwh => Box::new(WindowAverage::new(k, cfg.window)?),
        TrackerKind::FlhFtl => {
            let rate = cfg.flh_rate.unwrap_or(FlhFtl::<f64>::experimental_rate(k));
            Box::new(FlhFtl::new(k, rate)?)
        }
    })
}

fn low_switch(
    inner: Box<dyn OnlineRegressor<f64>>,
    cfg: &ExperimentConfig,
    sigma_sq: f64,
    horizon: usize,
) -> anyhow::Result<(Shared<BoxedLpa>, SharedLpa)> {
    let lpa = Lpa::new(
        inner,
        LpaConfig {
            delta: cfg.lpa_delta,
            sigma_sq,
            horizon,
        },
    )?;
    Ok(Shared::new(lpa))
}

fn timed<F: FnOnce() -> anyhow::Result<RunOutcome>>(method: &str, seed: u64, f: F) -> MethodRun {
    let start = Instant::now();
    let outcome = f().map_err(|e| format!("{e:#}"));
    MethodRun {
        method: method.to_string(),
        seed,
        outcome,
        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
    }
}

/// Marks switches (estimate differs from the previous round's) and restarts.
fn low_switch_flags(trace: &mut [TraceRow], restarts: &[usize], per_update: usize) {
    for i in 0..trace.len() {
        let switched = i > 0 && trace[i].q_hat != trace[i - 1].q_hat;
        trace[i].switched = Some(switched);
        trace[i].restart = Some(false);
    }
    for &r in restarts {
        let round = r.div_ceil(per_update);
        if let Some(row) = trace.get_mut(round.wrapping_sub(1)) {
            row.restart = Some(true);
        }
    }
}

/// Everything the unsupervised methods of one seed share.
pub struct UolsSeedData {
    pub confusion: ConfusionMatrix<f64>,
    pub q0: SimplexVector<f64>,
    pub rounds: Vec<UolsRound<f64>>,
    pub info: Value,
}

pub fn prepare_uols(cfg: &ExperimentConfig, seed: u64) -> anyhow::Result<UolsSeedData> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (confusion, q0, mut pools, mut info) = match &cfg.stream {
        Some(path) => {
            let stream = load_softmax_stream_path(path)?;
            let (c, q0, pools) = stream_setup(stream, cfg.holdout_frac, cfg.exhaustion, &mut rng)?;
            (c, q0, pools, json!({ "source": path.display().to_string() }))
        }
        None => {
            let bench = SyntheticBenchmark::build(
                gaussian_source(cfg.data_seed)?,
                cfg.holdout_frac,
                &cfg.base_trainer,
                &mut rng,
            )?;
            let pools = bench.softmax_pools(cfg.exhaustion, &mut rng)?;
            let info = json!({
                "source": "synthetic",
                "holdout_size": bench.setup.holdout_size,
                "source_accuracy": bench.setup.holdout_accuracy,
            });
            (bench.setup.confusion, bench.setup.q0, pools, info)
        }
    };
    info["sigma_min"] = json!(confusion.sigma_min());
    let k = q0.dim();
    let schedule = schedule(cfg, k, cfg.uols_horizon(), &mut rng)?;
    info["v_t"] = json!(schedule.total_variation());
    let rounds = draw_stream(&schedule, &mut pools, cfg.uols_per_step(), &mut rng)?;
    Ok(UolsSeedData {
        confusion,
        q0,
        rounds,
        info,
    })
}

pub fn run_uols_method(
    cfg: &ExperimentConfig,
    data: &UolsSeedData,
    method: UolsMethod,
    seed: u64,
) -> anyhow::Result<RunOutcome> {
    let k = data.q0.dim();
    let per_step = cfg.uols_per_step();
    let per_update = match cfg.update {
        UpdateMode::PerRound => 1,
        UpdateMode::PerSample => per_step,
    };
    let mut lpa_handle = None;
    let source = match method {
        UolsMethod::Base => MarginalSource::Base,
        UolsMethod::Oracle => MarginalSource::Oracle,
        UolsMethod::Fth => MarginalSource::Tracker(tracker(cfg, TrackerKind::Fth, k)?),
        UolsMethod::Ftfwh => MarginalSource::Tracker(tracker(cfg, TrackerKind::Ftfwh, k)?),
        UolsMethod::FlhFtl => MarginalSource::Tracker(tracker(cfg, TrackerKind::FlhFtl, k)?),
        UolsMethod::Lpa => {
            let sm = data.confusion.sigma_min();
            let sigma_sq = cfg
                .lpa_sigma_sq
                .unwrap_or(1.0 / (sm * sm * (per_step / per_update) as f64));
            let horizon = data.rounds.len() * per_update;
            let (shared, handle) = low_switch(tracker(cfg, TrackerKind::FlhFtl, k)?, cfg, sigma_sq, horizon)?;
            lpa_handle = Some(handle);
            MarginalSource::Tracker(Box::new(shared))
        }
    };
    let config = UolsConfig {
        projection: cfg.projection,
        prediction: cfg.predict,
        update: cfg.update,
    };
    let mut learner = UolsLearner::new(data.confusion.clone(), data.q0.clone(), source, config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1 + UolsMethod::ALL.iter().position(|&m| m == method).unwrap_or(0) as u64);
    let records = run_uols(&mut learner, &data.rounds, &mut rng)?;
    let metrics = score_run(&records)?;
    let mut trace: Vec<TraceRow> = records
        .iter()
        .map(|r| TraceRow {
            t: r.t,
            q_true: r.q_true.to_vec(),
            q_hat: r.q_hat.to_vec(),
            n_correct: r.n_correct(),
            n_total: r.labels.len(),
            switched: None,
            restart: None,
            refit: None,
        })
        .collect();
    let mut switches = None;
    if let Some(h) = lpa_handle {
        let lpa = h.lock().expect("oracle lock");
        low_switch_flags(&mut trace, lpa.restarts(), per_update);
        switches = Some(trace.iter().filter(|r| r.switched == Some(true)).count());
    }
    Ok(RunOutcome {
        trace,
        metrics,
        switches,
        refits: None,
    })
}

/// Runs every configured method on every seed; seeds run in parallel.
pub fn run_uols_experiment(cfg: &ExperimentConfig) -> (Vec<MethodRun>, Vec<(u64, Value)>) {
    let per_seed: Vec<(Vec<MethodRun>, (u64, Value))> = cfg
        .seeds
        .par_iter()
        .map(|&seed| match prepare_uols(cfg, seed) {
            Ok(data) => {
                let runs = cfg
                    .methods
                    .iter()
                    .map(|&m| timed(m.name(), seed, || run_uols_method(cfg, &data, m, seed)))
                    .collect();
                (runs, (seed, data.info))
            }
            Err(e) => {
                let msg = format!("setup failed: {e:#}");
                let runs = cfg
                    .methods
                    .iter()
                    .map(|m| MethodRun {
                        method: m.name().to_string(),
                        seed,
                        outcome: Err(msg.clone()),
                        runtime_ms: 0.0,
                    })
                    .collect();
                (runs, (seed, json!({ "error": msg })))
            }
        })
        .collect();
    split(per_seed)
}

fn split(per_seed: Vec<(Vec<MethodRun>, (u64, Value))>) -> (Vec<MethodRun>, Vec<(u64, Value)>) {
    let mut runs = Vec::new();
    let mut info = Vec::new();
    for (r, i) in per_seed {
        runs.extend(r);
        info.push(i);
    }
    (runs, info)
}

pub struct SolsSeedData {
    pub classes: usize,
    pub dim: usize,
    pub rounds: Vec<SolsRound<f64>>,
    pub info: Value,
}

pub fn prepare_sols(cfg: &ExperimentConfig, seed: u64) -> anyhow::Result<SolsSeedData> {
    if cfg.stream.is_some() {
        bail!("the supervised protocol needs features; softmax streams are unsupervised only");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let source = gaussian_source(cfg.data_seed)?;
    let mut pools = feature_pools(&source, cfg.exhaustion, &mut rng)?;
    let k = source.num_classes();
    let schedule = schedule(cfg, k, cfg.sols_horizon(), &mut rng)?;
    let rounds = draw_stream(&schedule, &mut pools, cfg.sols_per_step(), &mut rng)?;
    Ok(SolsSeedData {
        classes: k,
        dim: source.dim(),
        rounds,
        info: json!({ "source": "synthetic", "v_t": schedule.total_variation() }),
    })
}

pub fn run_sols_method(
    cfg: &ExperimentConfig,
    data: &SolsSeedData,
    learner: LearnerKind,
    seed: u64,
) -> anyhow::Result<RunOutcome> {
    let k = data.classes;
    let inner = tracker(cfg, cfg.tracker, k)?;
    let mut lpa_handle = None;
    let mut mu = cfg.mu;
    let oracle: Box<dyn OnlineRegressor<f64>> = if learner == LearnerKind::Lazy {
        let sigma_sq = cfg.lpa_sigma_sq.unwrap_or(1.0 / (4.0 * cfg.sols_per_step() as f64));
        let (shared, handle) = low_switch(inner, cfg, sigma_sq, data.rounds.len())?;
        lpa_handle = Some(handle);
        if mu == 0.0 {
            mu = cfg.lazy_mu;
        }
        Box::new(shared)
    } else {
        inner
    };
    let config = SolsConfig {
        learner,
        mu,
        trainer: cfg.trainer,
        continual: cfg.continual,
        seed,
    };
    let mut sols = SolsLearner::new(config, oracle, SoftmaxLinear::zeros(k, data.dim))?;
    let records = run_sols(&mut sols, &data.rounds)?;
    let metrics = score_run(&records)?;
    let mut trace: Vec<TraceRow> = records
        .iter()
        .map(|r| TraceRow {
            t: r.t,
            q_true: r.q_true.to_vec(),
            q_hat: r.q_hat.to_vec(),
            n_correct: labelshift_core::metrics::ScoredRound::n_correct(r),
            n_total: r.labels.len(),
            switched: None,
            restart: None,
            refit: Some(r.refit),
        })
        .collect();
    let mut switches = None;
    if let Some(h) = lpa_handle {
        let lpa = h.lock().expect("oracle lock");
        low_switch_flags(&mut trace, lpa.restarts(), 1);
        switches = Some(trace.iter().filter(|r| r.switched == Some(true)).count());
    }
    Ok(RunOutcome {
        trace,
        metrics,
        switches,
        refits: Some(sols.refits()),
    })
}

pub fn run_sols_experiment(cfg: &ExperimentConfig) -> (Vec<MethodRun>, Vec<(u64, Value)>) {
    let per_seed: Vec<(Vec<MethodRun>, (u64, Value))> = cfg
        .seeds
        .par_iter()
        .map(|&seed| match prepare_sols(cfg, seed) {
            Ok(data) => {
                let runs = cfg
                    .learners
                    .par_iter()
                    .map(|&l| timed(l.name(), seed, || run_sols_method(cfg, &data, l, seed)))
                    .collect();
                (runs, (seed, data.info))
            }
            Err(e) => {
                let msg = format!("setup failed: {e:#}");
                let runs = cfg
                    .learners
                    .iter()
                    .map(|l| MethodRun {
                        method: l.name().to_string(),
                        seed,
                        outcome: Err(msg.clone()),
                        runtime_ms: 0.0,
                    })
                    .collect();
                (runs, (seed, json!({ "error": msg })))
            }
        })
        .collect();
    split(per_seed)
}
