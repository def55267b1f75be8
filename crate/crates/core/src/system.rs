//! The simulated device under test and the trace format that records it.
//!
//! A [`TrueSystem`] holds hidden parameters and produces one binary datum per
//! experiment. The N-shot readout is averaged into an empirical survival
//! frequency, which then decides the datum by a single Bernoulli draw.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::model::{exact_likelihood_iqle, exact_likelihood_qle, ModelDescriptor, ParameterVector};

/// Outcome of one experiment. `Survived` (0) means the system was found in
/// its initial state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Datum {
    Survived,
    Flipped,
}

impl From<Datum> for u8 {
    fn from(d: Datum) -> u8 {
        match d {
            Datum::Survived => 0,
            Datum::Flipped => 1,
        }
    }
}

impl TryFrom<u8> for Datum {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            0 => Ok(Datum::Survived),
            1 => Ok(Datum::Flipped),
            other => Err(format!("datum must be 0 or 1, got {other}")),
        }
    }
}

impl Datum {
    pub fn as_u8(self) -> u8 {
        self.into()
    }

    /// Probability of this datum given the survival probability `survival`.
    pub fn probability(self, survival: f64) -> f64 {
        match self {
            Datum::Survived => survival,
            Datum::Flipped => 1.0 - survival,
        }
    }
}

/// Affine photoluminescence-style distortion `p' = baseline + visibility * p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadoutContrast {
    pub visibility: f64,
    pub baseline: f64,
}

impl ReadoutContrast {
    pub const IDEAL: ReadoutContrast = ReadoutContrast { visibility: 1.0, baseline: 0.0 };

    pub fn new(visibility: f64, baseline: f64) -> Result<Self> {
        let ok = visibility > 0.0 && visibility <= 1.0 && (0.0..1.0).contains(&baseline) && visibility + baseline <= 1.0;
        if !ok {
            return Err(Error::InvalidInput(format!(
                "readout contrast needs v in (0,1], b in [0,1), v+b <= 1; got v={visibility}, b={baseline}"
            )));
        }
        Ok(ReadoutContrast { visibility, baseline })
    }

    pub fn apply(&self, p: f64) -> f64 {
        (self.baseline + self.visibility * p).clamp(0.0, 1.0)
    }
}

impl Default for ReadoutContrast {
    fn default() -> Self {
        Self::IDEAL
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrueSystem {
    pub true_params: ParameterVector,
    pub readout_shots: u64,
    pub contrast: ReadoutContrast,
}

impl TrueSystem {
    pub fn new(true_params: ParameterVector, readout_shots: u64, contrast: ReadoutContrast) -> Result<Self> {
        if readout_shots == 0 {
            return Err(Error::InvalidInput("readout_shots must be at least 1".into()));
        }
        if !true_params.is_finite() {
            return Err(Error::InvalidInput("true parameters must be finite".into()));
        }
        ReadoutContrast::new(contrast.visibility, contrast.baseline)?;
        Ok(TrueSystem { true_params, readout_shots, contrast })
    }

    /// Ideal readout with the given shot count.
    pub fn ideal(true_params: ParameterVector, readout_shots: u64) -> Result<Self> {
        Self::new(true_params, readout_shots, ReadoutContrast::IDEAL)
    }

    fn measure<R: Rng + ?Sized>(&self, survival: f64, rng: &mut R) -> (f64, Datum) {
        let p = self.contrast.apply(survival);
        let count = Binomial::new(self.readout_shots, p)
            .expect("probability clamped to [0,1]")
            .sample(rng);
        let raw_frequency = count as f64 / self.readout_shots as f64;
        let datum = if rng.random::<f64>() < raw_frequency { Datum::Survived } else { Datum::Flipped };
        (raw_frequency, datum)
    }
}

/// One step's design together with what the system returned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub step: usize,
    pub tau: f64,
    pub x_minus: Option<ParameterVector>,
    pub datum: Datum,
    pub raw_frequency: f64,
}

// The truth always evolves under the chirped form; alpha = 0 reproduces the
// plain Rabi angle bit for bit.
const TRUTH_MODEL: ModelDescriptor = ModelDescriptor::CHIRPED_RABI;

pub fn run_qle_experiment<R: Rng + ?Sized>(system: &TrueSystem, step: usize, tau: f64, rng: &mut R) -> ExperimentRecord {
    debug_assert!(tau >= 0.0);
    let p = exact_likelihood_qle(TRUTH_MODEL, &system.true_params, tau);
    let (raw_frequency, datum) = system.measure(p, rng);
    ExperimentRecord { step, tau, x_minus: None, datum, raw_frequency }
}

pub fn run_iqle_experiment<R: Rng + ?Sized>(
    system: &TrueSystem,
    step: usize,
    x_minus: ParameterVector,
    tau: f64,
    rng: &mut R,
) -> ExperimentRecord {
    debug_assert!(tau >= 0.0);
    let p = exact_likelihood_iqle(TRUTH_MODEL, &system.true_params, &x_minus, tau);
    let (raw_frequency, datum) = system.measure(p, rng);
    ExperimentRecord { step, tau, x_minus: Some(x_minus), datum, raw_frequency }
}

/// First line of a trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub model: ModelDescriptor,
    pub seed: u64,
    /// `None` for data imported from real hardware.
    pub true_params: Option<ParameterVector>,
}

/// An ordered, replayable list of experiment records.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub header: TraceHeader,
    records: Vec<ExperimentRecord>,
}

fn check_record(expected_step: usize, r: &ExperimentRecord) -> std::result::Result<(), String> {
    if r.step != expected_step {
        return Err(format!("expected step {expected_step}, found {}", r.step));
    }
    if !(r.tau.is_finite() && r.tau >= 0.0) {
        return Err(format!("tau must be finite and non-negative, got {}", r.tau));
    }
    if !(0.0..=1.0).contains(&r.raw_frequency) {
        return Err(format!("raw_frequency {} outside [0,1]", r.raw_frequency));
    }
    if r.x_minus.is_some_and(|x| !x.is_finite()) {
        return Err("x_minus must be finite".into());
    }
    Ok(())
}

impl Trace {
    /// Builds a trace; step indices must run 0, 1, 2, ...
    pub fn record(header: TraceHeader, records: Vec<ExperimentRecord>) -> Result<Self> {
        for (i, r) in records.iter().enumerate() {
            check_record(i, r).map_err(Error::InvalidInput)?;
        }
        Ok(Trace { header, records })
    }

    pub fn replay(&self, step: usize) -> Result<&ExperimentRecord> {
        self.records.get(step).ok_or(Error::OutOfRange { step, len: self.records.len() })
    }

    pub fn records(&self) -> &[ExperimentRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Whether the records carry inversion parameters (IQLE data).
    pub fn is_interactive(&self) -> bool {
        self.records.first().is_some_and(|r| r.x_minus.is_some())
    }

    /// Appends `other`'s records after this trace's, renumbering steps.
    pub fn concat(&self, other: &Trace) -> Trace {
        let mut records = self.records.clone();
        let offset = records.len();
        records.extend(other.records.iter().map(|r| ExperimentRecord { step: r.step + offset, ..r.clone() }));
        Trace { header: self.header.clone(), records }
    }

    /// One JSON object per line: the header, then each record.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        serde_json::to_writer(&mut out, &self.header).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
        for r in &self.records {
            serde_json::to_writer(&mut out, r).map_err(std::io::Error::from)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Inverse of [`Trace::write_jsonl`]. Blank lines and lines starting
    /// with `#` are skipped.
    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input
            .lines()
            .enumerate()
            .filter(|(_, l)| !matches!(l, Ok(s) if s.trim().is_empty() || s.starts_with('#')));
        let (idx, first) = lines.next().ok_or(Error::MalformedTrace { line: 1, reason: "empty file".into() })?;
        let header: TraceHeader = serde_json::from_str(&first?)
            .map_err(|e| Error::MalformedTrace { line: idx + 1, reason: format!("bad header: {e}") })?;
        let mut records = Vec::new();
        for (idx, line) in lines {
            let line_no = idx + 1;
            let r: ExperimentRecord = serde_json::from_str(&line?)
                .map_err(|e| Error::MalformedTrace { line: line_no, reason: e.to_string() })?;
            check_record(records.len(), &r).map_err(|reason| Error::MalformedTrace { line: line_no, reason })?;
            records.push(r);
        }
        Ok(Trace { header, records })
    }
}
