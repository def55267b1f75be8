//! Files written by the CLI. Each starts with a stamp naming the engine
//! version and the hash of the effective configuration.

use std::io::{self, Write};

use hamlearn_core::{RunLog, Trace, VERSION};
use serde::Serialize;

pub const TABLE_COLUMNS: [&str; 10] = [
    "step",
    "tau",
    "datum",
    "mean",
    "sd",
    "covariance_norm",
    "quadratic_loss",
    "ess",
    "resampled",
    "evidence_log_factor",
];

pub const SWEEP_COLUMNS: [&str; 6] = ["step", "runs", "median_loss", "loss_lo", "loss_hi", "median_covariance_norm"];

/// Quantiles bounding the central 67.5% band of a sweep.
pub const BAND: (f64, f64) = (0.1625, 0.8375);

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Stamp {
    pub engine_version: String,
    pub config_sha256: String,
}

impl Stamp {
    pub fn new(config_sha256: String) -> Self {
        Stamp { engine_version: VERSION.to_string(), config_sha256 }
    }

    pub fn comment(&self) -> String {
        format!("# hamlearn {} config-sha256 {}", self.engine_version, self.config_sha256)
    }
}

/// Per-step table in rescaled units. `mean` and `sd` refer to ω.
pub fn write_table<W: Write>(mut out: W, stamp: &Stamp, log: &RunLog) -> io::Result<()> {
    writeln!(out, "{}", stamp.comment())?;
    writeln!(out, "{}", TABLE_COLUMNS.join(","))?;
    for s in &log.steps {
        let loss = s.summary.quadratic_loss.map(|l| l.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            s.record.step,
            s.record.tau,
            u8::from(s.record.datum),
            s.summary.mean.omega,
            s.summary.omega_sd(),
            s.summary.covariance_norm,
            loss,
            s.summary.ess,
            s.resampled as u8,
            s.evidence_log_factor,
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    #[serde(flatten)]
    stamp: &'a Stamp,
    #[serde(flatten)]
    body: &'a T,
}

/// Pretty JSON with the stamp fields merged in at the top level.
pub fn write_json<W: Write, T: Serialize>(mut out: W, stamp: &Stamp, body: &T) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut out, &Envelope { stamp, body })?;
    writeln!(out)
}

pub fn write_trace<W: Write>(mut out: W, stamp: &Stamp, trace: &Trace) -> io::Result<()> {
    writeln!(out, "{}", stamp.comment())?;
    trace.write_jsonl(out).map_err(|e| match e {
        hamlearn_core::Error::Io(e) => e,
        other => io::Error::other(other.to_string()),
    })
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile(&v, 0.5)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub step: usize,
    pub runs: usize,
    pub median_loss: f64,
    pub loss_lo: f64,
    pub loss_hi: f64,
    pub median_covariance_norm: f64,
}

/// Per-step aggregate over runs. Runs stopped early contribute only to
/// the steps they reached.
pub fn aggregate(logs: &[RunLog]) -> Vec<SweepRow> {
    let steps = logs.iter().map(|l| l.steps.len()).max().unwrap_or(0);
    (0..steps)
        .filter_map(|k| {
            let at: Vec<_> = logs.iter().filter_map(|l| l.steps.get(k)).collect();
            let mut losses: Vec<f64> = at.iter().filter_map(|s| s.summary.quadratic_loss).collect();
            if losses.is_empty() {
                return None;
            }
            losses.sort_by(f64::total_cmp);
            let norms: Vec<f64> = at.iter().map(|s| s.summary.covariance_norm).collect();
            Some(SweepRow {
                step: k,
                runs: at.len(),
                median_loss: quantile(&losses, 0.5),
                loss_lo: quantile(&losses, BAND.0),
                loss_hi: quantile(&losses, BAND.1),
                median_covariance_norm: median(&norms),
            })
        })
        .collect()
}

pub fn write_sweep<W: Write>(mut out: W, stamp: &Stamp, rows: &[SweepRow]) -> io::Result<()> {
    writeln!(out, "{}", stamp.comment())?;
    writeln!(out, "{}", SWEEP_COLUMNS.join(","))?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.step, r.runs, r.median_loss, r.loss_lo, r.loss_hi, r.median_covariance_norm
        )?;
    }
    Ok(())
}
