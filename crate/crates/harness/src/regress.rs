//! Standalone online regression over a CSV stream of observations.
//!
//! Input: a header row, then one observation `z_t` per row. Output:
//! `t,theta_1..K[,switched,restart]`, where `theta_t` is the estimate the
//! oracle held before seeing `z_t`.

use std::io::{Read, Write};

use anyhow::{bail, Context};
use labelshift_core::lpa::{Lpa, LpaConfig};
use labelshift_core::regression::{FlhFtl, OnlineRegressor, RunningAverage, WindowAverage};

use crate::config::TrackerKind;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressOptions {
    pub oracle: TrackerKind,
    /// FLH-FTL learning rate; defaults to `1/K`.
    pub rate: Option<f64>,
    pub window: usize,
    /// `(delta, sigma^2)` of the low-switching wrapper.
    pub low_switch: Option<(f64, f64)>,
}

pub fn read_observations<R: Read>(reader: R) -> anyhow::Result<Vec<Vec<f64>>> {
    let mut csv = csv::Reader::from_reader(reader);
    let k = csv.headers()?.len();
    let mut rows = Vec::new();
    for (i, rec) in csv.records().enumerate() {
        let line = i + 2;
        let rec = rec.with_context(|| format!("line {line}"))?;
        if rec.len() != k {
            bail!("line {line}: expected {k} values, found {}", rec.len());
        }
        let row = rec
            .iter()
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .with_context(|| format!("line {line}: bad number `{v}`"))
            })
            .collect::<anyhow::Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        bail!("no observations");
    }
    Ok(rows)
}

fn base_oracle(opts: &RegressOptions, k: usize) -> anyhow::Result<Box<dyn OnlineRegressor<f64>>> {
    Ok(match opts.oracle {
        TrackerKind::Fth => Box::new(RunningAverage::new(k)),
        TrackerKind::Ftfwh => Box::new(WindowAverage::new(k, opts.window)?),
        TrackerKind::FlhFtl => Box::new(FlhFtl::new(
            k,
            opts.rate.unwrap_or(FlhFtl::<f64>::experimental_rate(k)),
        )?),
    })
}

pub fn regress<W: Write>(observations: &[Vec<f64>], opts: &RegressOptions, out: W) -> anyhow::Result<()> {
    let k = observations.first().map_or(0, Vec::len);
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend((1..=k).map(|i| format!("theta_{i}")));
    if opts.low_switch.is_some() {
        header.push("switched".into());
        header.push("restart".into());
    }
    w.write_record(&header)?;
    let inner = base_oracle(opts, k)?;
    match opts.low_switch {
        Some((delta, sigma_sq)) => {
            let mut lpa = Lpa::new(
                inner,
                LpaConfig {
                    delta,
                    sigma_sq,
                    horizon: observations.len(),
                },
            )?;
            for (i, z) in observations.iter().enumerate() {
                let step = lpa.step(z)?;
                let mut rec = vec![(i + 1).to_string()];
                rec.extend(step.output.iter().map(f64::to_string));
                rec.push(u8::from(step.switched).to_string());
                rec.push(u8::from(step.restart).to_string());
                w.write_record(&rec)?;
            }
        }
        None => {
            let mut oracle = inner;
            for (i, z) in observations.iter().enumerate() {
                let mut rec = vec![(i + 1).to_string()];
                rec.extend(oracle.predict().iter().map(f64::to_string));
                w.write_record(&rec)?;
                oracle.update(z)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
