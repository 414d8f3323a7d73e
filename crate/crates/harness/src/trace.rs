//! Per-round trace CSVs: `t,q_true_1..K,q_hat_1..K,n_correct,n_total[,switched,restart,refit]`.

use std::io::{Read, Write};
use std::path::Path;

use anyhow::{bail, Context};
use labelshift_core::metrics::ScoredRound;

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: usize,
    pub q_true: Vec<f64>,
    pub q_hat: Vec<f64>,
    pub n_correct: usize,
    pub n_total: usize,
    pub switched: Option<bool>,
    pub restart: Option<bool>,
    pub refit: Option<bool>,
}

impl ScoredRound<f64> for TraceRow {
    fn q_true(&self) -> &[f64] {
        &self.q_true
    }

    fn q_hat(&self) -> &[f64] {
        &self.q_hat
    }

    fn n_correct(&self) -> usize {
        self.n_correct
    }

    fn n_total(&self) -> usize {
        self.n_total
    }
}

/// Optional trailing columns present in a trace.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Columns {
    pub low_switch: bool,
    pub refit: bool,
}

impl Columns {
    pub fn of(rows: &[TraceRow]) -> Self {
        Self {
            low_switch: rows.iter().any(|r| r.switched.is_some() || r.restart.is_some()),
            refit: rows.iter().any(|r| r.refit.is_some()),
        }
    }
}

fn header(k: usize, cols: Columns) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((1..=k).map(|i| format!("q_true_{i}")));
    h.extend((1..=k).map(|i| format!("q_hat_{i}")));
    h.push("n_correct".into());
    h.push("n_total".into());
    if cols.low_switch {
        h.push("switched".into());
        h.push("restart".into());
    }
    if cols.refit {
        h.push("refit".into());
    }
    h
}

fn flag(b: Option<bool>) -> String {
    u8::from(b.unwrap_or(false)).to_string()
}

pub fn write_trace<W: Write>(writer: W, rows: &[TraceRow]) -> anyhow::Result<()> {
    let k = rows.first().map_or(0, |r| r.q_true.len());
    let cols = Columns::of(rows);
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(header(k, cols))?;
    for r in rows {
        if r.q_true.len() != k || r.q_hat.len() != k {
            bail!("round {} has inconsistent class count", r.t);
        }
        let mut rec = vec![r.t.to_string()];
        rec.extend(r.q_true.iter().map(f64::to_string));
        rec.extend(r.q_hat.iter().map(f64::to_string));
        rec.push(r.n_correct.to_string());
        rec.push(r.n_total.to_string());
        if cols.low_switch {
            rec.push(flag(r.switched));
            rec.push(flag(r.restart));
        }
        if cols.refit {
            rec.push(flag(r.refit));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace_path(path: &Path, rows: &[TraceRow]) -> anyhow::Result<()> {
    let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_trace(std::io::BufWriter::new(file), rows)
}

pub fn read_trace<R: Read>(reader: R) -> anyhow::Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_reader(reader);
    let head: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let k = head.iter().filter(|h| h.starts_with("q_true_")).count();
    let cols = Columns {
        low_switch: head.iter().any(|h| h == "switched"),
        refit: head.iter().any(|h| h == "refit"),
    };
    if head != header(k, cols) {
        bail!("unexpected trace header: {}", head.join(","));
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let num = |j: usize| -> anyhow::Result<f64> {
            rec.get(j)
                .with_context(|| format!("line {line}: missing column {j}"))?
                .parse::<f64>()
                .with_context(|| format!("line {line}: bad number in column {}", j + 1))
        };
        let int = |j: usize| -> anyhow::Result<usize> {
            rec.get(j)
                .with_context(|| format!("line {line}: missing column {j}"))?
                .parse::<usize>()
                .with_context(|| format!("line {line}: bad integer in column {}", j + 1))
        };
        let boolean = |j: usize| -> anyhow::Result<bool> {
            match rec.get(j) {
                Some("0") => Ok(false),
                Some("1") => Ok(true),
                other => bail!("line {line}: bad flag {other:?}"),
            }
        };
        let mut j = 1 + 2 * k + 2;
        let (switched, restart) = if cols.low_switch {
            j += 2;
            (Some(boolean(j - 2)?), Some(boolean(j - 1)?))
        } else {
            (None, None)
        };
        let refit = if cols.refit { Some(boolean(j)?) } else { None };
        rows.push(TraceRow {
            t: int(0)?,
            q_true: (1..=k).map(num).collect::<anyhow::Result<_>>()?,
            q_hat: (k + 1..=2 * k).map(num).collect::<anyhow::Result<_>>()?,
            n_correct: int(2 * k + 1)?,
            n_total: int(2 * k + 2)?,
            switched,
            restart,
            refit,
        });
    }
    Ok(rows)
}

pub fn read_trace_path(path: &Path) -> anyhow::Result<Vec<TraceRow>> {
    let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_trace(std::io::BufReader::new(file)).with_context(|| format!("reading {}", path.display()))
}

/// File name of a method's trace for one seed.
pub fn trace_file_name(method: &str, seed: u64) -> String {
    format!("{method}_seed{seed}.csv")
}

/// Inverse of [`trace_file_name`].
pub fn parse_trace_file_name(name: &str) -> Option<(String, u64)> {
    let stem = name.strip_suffix(".csv")?;
    let (method, seed) = stem.rsplit_once("_seed")?;
    Some((method.to_string(), seed.parse().ok()?))
}
