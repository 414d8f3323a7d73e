//! Mean and sample standard deviation over seeds, and result persistence.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::Context;
use labelshift_core::metrics::score_run;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::ExperimentConfig;
use crate::experiment::MethodRun;
use crate::trace::{parse_trace_file_name, read_trace_path, trace_file_name, write_trace_path};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub error_mean: Option<f64>,
    pub error_std: Option<f64>,
    pub mse_mean: Option<f64>,
    pub mse_std: Option<f64>,
    /// Mean realized drift over seeds.
    pub v_t: Option<f64>,
    /// Mean wall-clock time per seed; absent when summarizing traces.
    pub runtime_ms: Option<f64>,
    /// `ok`, or the failures of individual seeds.
    pub status: String,
    pub seeds: Vec<u64>,
    pub errors: Vec<f64>,
    pub mses: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub switches_mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refits_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub protocol: String,
    pub methods: BTreeMap<String, MethodSummary>,
    /// Setup details per seed.
    #[serde(default)]
    pub setup: BTreeMap<String, Value>,
    #[serde(default)]
    pub config: Option<ExperimentConfig>,
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = if xs.len() < 2 {
        0.0
    } else {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    Some((mean, std))
}

fn mean(xs: &[f64]) -> Option<f64> {
    mean_std(xs).map(|(m, _)| m)
}

/// Groups runs by method.
pub fn summarize_runs(runs: &[MethodRun]) -> BTreeMap<String, MethodSummary> {
    let mut order: Vec<&str> = Vec::new();
    for r in runs {
        if !order.contains(&r.method.as_str()) {
            order.push(&r.method);
        }
    }
    order
        .into_iter()
        .map(|method| {
            let mine: Vec<&MethodRun> = runs.iter().filter(|r| r.method == method).collect();
            let ok: Vec<_> = mine.iter().filter_map(|r| r.outcome.as_ref().ok()).collect();
            let errors: Vec<f64> = ok.iter().map(|o| o.metrics.error).collect();
            let mses: Vec<f64> = ok.iter().map(|o| o.metrics.mse).collect();
            let vts: Vec<f64> = ok.iter().map(|o| o.metrics.v_t).collect();
            let runtimes: Vec<f64> = mine
                .iter()
                .filter(|r| r.outcome.is_ok())
                .map(|r| r.runtime_ms)
                .collect();
            let switches: Vec<f64> = ok.iter().filter_map(|o| o.switches.map(|s| s as f64)).collect();
            let refits: Vec<f64> = ok.iter().filter_map(|o| o.refits.map(|s| s as f64)).collect();
            let failures: Vec<String> = mine
                .iter()
                .filter_map(|r| r.outcome.as_ref().err().map(|e| format!("seed {}: {e}", r.seed)))
                .collect();
            let status = if failures.is_empty() {
                "ok".to_string()
            } else {
                format!("failed {}/{}: {}", failures.len(), mine.len(), failures.join("; "))
            };
            let es = mean_std(&errors);
            let ms = mean_std(&mses);
            (
                method.to_string(),
                MethodSummary {
                    error_mean: es.map(|x| x.0),
                    error_std: es.map(|x| x.1),
                    mse_mean: ms.map(|x| x.0),
                    mse_std: ms.map(|x| x.1),
                    v_t: mean(&vts),
                    runtime_ms: mean(&runtimes),
                    status,
                    seeds: mine.iter().filter(|r| r.outcome.is_ok()).map(|r| r.seed).collect(),
                    errors,
                    mses,
                    switches_mean: mean(&switches),
                    refits_mean: mean(&refits),
                },
            )
        })
        .collect()
}

/// Writes every successful trace, the summary and the resolved config into `cfg.out`.
pub fn write_results(
    cfg: &ExperimentConfig,
    protocol: &str,
    runs: &[MethodRun],
    setup: Vec<(u64, Value)>,
) -> anyhow::Result<Summary> {
    let out = &cfg.out;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    for r in runs {
        if let Ok(o) = &r.outcome {
            write_trace_path(&out.join(trace_file_name(&r.method, r.seed)), &o.trace)?;
        }
    }
    let summary = Summary {
        protocol: protocol.to_string(),
        methods: summarize_runs(runs),
        setup: setup.into_iter().map(|(s, v)| (format!("seed{s}"), v)).collect(),
        config: Some(cfg.clone()),
    };
    write_json(&out.join("summary.json"), &summary)?;
    write_json(&out.join("config.json"), cfg)?;
    Ok(summary)
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

/// Recomputes a summary from the trace files in `dir`.
pub fn summarize_dir(dir: &Path) -> anyhow::Result<Summary> {
    let mut entries: Vec<(String, u64, std::path::PathBuf)> = std::fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let name = e.file_name().to_string_lossy().into_owned();
            parse_trace_file_name(&name).map(|(m, s)| (m, s, e.path()))
        })
        .collect();
    if entries.is_empty() {
        anyhow::bail!("no trace files in {}", dir.display());
    }
    entries.sort();
    let runs = entries
        .into_iter()
        .map(|(method, seed, path)| {
            let outcome = read_trace_path(&path).and_then(|trace| {
                let metrics = score_run(&trace)?;
                let switches = trace
                    .iter()
                    .any(|r| r.switched.is_some())
                    .then(|| trace.iter().filter(|r| r.switched == Some(true)).count());
                let refits = trace
                    .iter()
                    .any(|r| r.refit.is_some())
                    .then(|| trace.iter().filter(|r| r.refit == Some(true)).count());
                Ok(crate::experiment::RunOutcome {
                    trace,
                    metrics,
                    switches,
                    refits,
                })
            });
            MethodRun {
                method,
                seed,
                outcome: outcome.map_err(|e| format!("{e:#}")),
                runtime_ms: 0.0,
            }
        })
        .collect::<Vec<_>>();
    let mut methods = summarize_runs(&runs);
    methods.values_mut().for_each(|m| m.runtime_ms = None);
    Ok(Summary {
        protocol: "traces".into(),
        methods,
        setup: BTreeMap::new(),
        config: None,
    })
}
