//! End-to-end learning loops and model comparison.
//!
//! Each step: pick a time, run (or replay) one experiment, score every
//! particle through the likelihood channel, reweight, resample if the ESS
//! has dropped, and summarise. The prior-predictive probability of each
//! datum is logged so that runs double as evidence computations.

use serde::{Deserialize, Serialize};

use crate::channel::{likelihood_for_particle, ShotBudget};
use crate::error::{Error, Result};
use crate::model::{sample_prior, ModelDescriptor, ParameterVector, PriorBox};
use crate::rng::{stream, Purpose};
use crate::smc::{
    choose_time, effective_sample_size, first_saturation, liu_west_resample, summarize, ParticleEnsemble,
    PosteriorSummary, TimeMode,
};
use crate::system::{run_iqle_experiment, run_qle_experiment, ExperimentRecord, Trace, TraceHeader, TrueSystem};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub model: ModelDescriptor,
    pub prior: PriorBox,
    pub n_particles: usize,
    pub n_steps: usize,
    pub budget: ShotBudget,
    /// Resample when `ESS < resample_threshold * n_particles`.
    pub resample_threshold: f64,
    pub liu_west_a: f64,
    pub time_mode: TimeMode,
    pub max_time: f64,
    pub seed: u64,
}

impl ProtocolConfig {
    pub const DEFAULT_PARTICLES: usize = 20;
    pub const DEFAULT_STEPS: usize = 50;
    pub const DEFAULT_MAX_TIME: f64 = 100.0;

    /// 20 particles, 50 steps, 4000 coincidences per basis, Liu-West
    /// `a = 0.98` at `ESS < n/2`, heuristic times capped at 100.
    pub fn new(model: ModelDescriptor, seed: u64) -> Self {
        ProtocolConfig {
            model,
            prior: PriorBox::default_for(model),
            n_particles: Self::DEFAULT_PARTICLES,
            n_steps: Self::DEFAULT_STEPS,
            budget: ShotBudget::default(),
            resample_threshold: 0.5,
            liu_west_a: 0.98,
            time_mode: TimeMode::Pgh,
            max_time: Self::DEFAULT_MAX_TIME,
            seed,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        ProtocolConfig { seed, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        self.prior.validate(self.model)?;
        if self.n_particles < 2 {
            return bad(format!("n_particles must be at least 2, got {}", self.n_particles));
        }
        if self.n_steps < 1 {
            return bad("n_steps must be at least 1".into());
        }
        if self.budget == ShotBudget::PerBasis(0) {
            return bad("shots per basis must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.resample_threshold) {
            return bad(format!("resample_threshold must lie in [0,1], got {}", self.resample_threshold));
        }
        if !(self.liu_west_a > 0.0 && self.liu_west_a <= 1.0) {
            return bad(format!("liu_west_a must lie in (0,1], got {}", self.liu_west_a));
        }
        if !(self.max_time.is_finite() && self.max_time > 0.0) {
            return bad(format!("max_time must be positive, got {}", self.max_time));
        }
        if let TimeMode::FixedSchedule(times) = &self.time_mode {
            if times.len() < self.n_steps {
                return bad(format!("fixed schedule has {} times for {} steps", times.len(), self.n_steps));
            }
            if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
                return bad("schedule times must be finite and non-negative".into());
            }
        }
        Ok(())
    }
}

/// Where the data comes from.
#[derive(Debug, Clone, Copy)]
pub enum DataSource<'a> {
    System(&'a TrueSystem),
    Replay(&'a Trace),
}

/// How IQLE picks the inversion parameters each step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XMinusPolicy {
    /// One weighted draw from the current ensemble.
    Posterior,
    Fixed(ParameterVector),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolKind {
    Qle,
    Iqle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepEntry {
    pub record: ExperimentRecord,
    pub summary: PosteriorSummary,
    pub resampled: bool,
    /// `ln Σ wᵢ ℓᵢ(D)` with pre-update weights.
    pub evidence_log_factor: f64,
}

/// Why a run stopped early.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub step: usize,
    pub reason: String,
    pub record: ExperimentRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalEstimate {
    pub mean: ParameterVector,
    pub sd: ParameterVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub protocol: ProtocolKind,
    pub config: ProtocolConfig,
    pub truth: Option<ParameterVector>,
    /// Summary of the initial ensemble, before any data.
    pub prior_summary: PosteriorSummary,
    pub steps: Vec<StepEntry>,
    pub final_estimate: FinalEstimate,
    pub failure: Option<FailureRecord>,
}

impl RunLog {
    /// Prequential log marginal likelihood; `-inf` once a datum had zero
    /// predictive probability.
    pub fn log_evidence(&self) -> f64 {
        if self.failure.is_some() {
            return f64::NEG_INFINITY;
        }
        self.steps.iter().map(|s| s.evidence_log_factor).sum()
    }

    pub fn is_complete(&self) -> bool {
        self.failure.is_none()
    }

    pub fn last_summary(&self) -> &PosteriorSummary {
        self.steps.last().map_or(&self.prior_summary, |s| &s.summary)
    }

    /// ω variance after each step.
    pub fn variance_history(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.summary.covariance.omega_omega).collect()
    }

    /// The data this run consumed, in trace form.
    pub fn trace(&self) -> Trace {
        let header = TraceHeader { model: self.config.model, seed: self.config.seed, true_params: self.truth };
        let records = self.steps.iter().map(|s| s.record.clone()).collect();
        Trace::record(header, records).expect("run records are numbered contiguously")
    }
}

pub fn run_qle(config: &ProtocolConfig, source: DataSource<'_>, truth: Option<ParameterVector>) -> Result<RunLog> {
    run_protocol(config, source, truth, None)
}

/// IQLE: each step inverts the evolution with `x₋` chosen by `policy`
/// (replayed traces carry their own `x₋`).
pub fn run_iqle(
    config: &ProtocolConfig,
    source: DataSource<'_>,
    truth: Option<ParameterVector>,
    policy: XMinusPolicy,
) -> Result<RunLog> {
    run_protocol(config, source, truth, Some(policy))
}

fn check_replay(config: &ProtocolConfig, trace: &Trace, interactive: bool) -> Result<()> {
    if trace.len() < config.n_steps {
        return Err(Error::TraceMismatch(format!(
            "trace has {} records but {} steps were requested",
            trace.len(),
            config.n_steps
        )));
    }
    for r in &trace.records()[..config.n_steps] {
        match (&r.x_minus, interactive) {
            (Some(_), false) => return Err(Error::TraceMismatch(format!("step {} carries x_minus but protocol is QLE", r.step))),
            (None, true) => return Err(Error::TraceMismatch(format!("step {} lacks x_minus but protocol is IQLE", r.step))),
            (Some(x), true) if !config.model.is_chirped() && x.alpha != 0.0 => {
                return Err(Error::TraceMismatch(format!("step {} has a chirped x_minus for the rabi model", r.step)))
            }
            _ => {}
        }
    }
    Ok(())
}

fn estimate(summary: &PosteriorSummary) -> FinalEstimate {
    FinalEstimate {
        mean: summary.mean,
        sd: ParameterVector {
            omega: summary.covariance.omega_omega.max(0.0).sqrt(),
            alpha: summary.covariance.alpha_alpha.max(0.0).sqrt(),
        },
    }
}

fn run_protocol(
    config: &ProtocolConfig,
    source: DataSource<'_>,
    truth: Option<ParameterVector>,
    policy: Option<XMinusPolicy>,
) -> Result<RunLog> {
    config.validate()?;
    if let DataSource::Replay(trace) = source {
        check_replay(config, trace, policy.is_some())?;
    }
    let model = config.model;
    let seed = config.seed;
    let n = config.n_particles;

    let positions = sample_prior(&config.prior, n, &mut stream(seed, Purpose::Prior, 0, 0))?;
    let mut ensemble = ParticleEnsemble::uniform(positions, model.dimension())?;
    let prior_summary = summarize(&ensemble, truth.as_ref());

    let mut time_rng = stream(seed, Purpose::Time, 0, 0);
    let mut system_rng = stream(seed, Purpose::System, 0, 0);
    let mut draw_rng = stream(seed, Purpose::InversionDraw, 0, 0);
    let mut resample_rng = stream(seed, Purpose::Resample, 0, 0);

    let mut steps = Vec::with_capacity(config.n_steps);
    let mut failure = None;

    for step in 0..config.n_steps {
        let record = match source {
            DataSource::Replay(trace) => trace.replay(step)?.clone(),
            DataSource::System(system) => {
                let tau = choose_time(&ensemble, &config.time_mode, step, config.max_time, &mut time_rng)?;
                match policy {
                    None => run_qle_experiment(system, step, tau, &mut system_rng),
                    Some(p) => {
                        let x_minus = match p {
                            XMinusPolicy::Fixed(x) => x,
                            XMinusPolicy::Posterior => {
                                let u: f64 = rand::Rng::random(&mut draw_rng);
                                pick_by_weight(&ensemble, u)
                            }
                        };
                        run_iqle_experiment(system, step, x_minus, tau, &mut system_rng)
                    }
                }
            }
        };

        let likelihoods: Vec<f64> = ensemble
            .positions()
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let mut rng = stream(seed, Purpose::Channel, step as u64, i as u64);
                likelihood_for_particle(model, x, record.x_minus.as_ref(), record.tau, config.budget, &mut rng).value
            })
            .collect();

        let evidence = match ensemble.update(&likelihoods, record.datum) {
            Ok(z) => z,
            Err(Error::Degenerate) => {
                failure = Some(FailureRecord { step, reason: "degenerate".into(), record });
                break;
            }
            Err(e) => return Err(e),
        };

        let resampled = effective_sample_size(&ensemble) < config.resample_threshold * n as f64;
        if resampled {
            ensemble = liu_west_resample(&ensemble, config.liu_west_a, Some(&config.prior), &mut resample_rng)?;
        }
        let summary = summarize(&ensemble, truth.as_ref());
        steps.push(StepEntry { record, summary, resampled, evidence_log_factor: evidence.ln() });
    }

    let final_estimate = estimate(steps.last().map_or(&prior_summary, |s: &StepEntry| &s.summary));
    Ok(RunLog {
        protocol: if policy.is_some() { ProtocolKind::Iqle } else { ProtocolKind::Qle },
        config: config.clone(),
        truth,
        prior_summary,
        steps,
        final_estimate,
        failure,
    })
}

/// Inverse-CDF pick of one particle position for a uniform `u ∈ [0,1)`.
fn pick_by_weight(ensemble: &ParticleEnsemble, u: f64) -> ParameterVector {
    let mut acc = 0.0;
    for (x, w) in ensemble.positions().iter().zip(ensemble.weights()) {
        acc += w;
        if u < acc {
            return *x;
        }
    }
    *ensemble.positions().last().expect("non-empty ensemble")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelComparisonResult {
    pub model_one: ModelDescriptor,
    pub model_two: ModelDescriptor,
    pub log_evidence_one: f64,
    pub log_evidence_two: f64,
    /// `ln K`, K = evidence of model two over model one.
    pub log_bayes_factor: f64,
    pub bayes_factor: f64,
    pub preferred: ModelDescriptor,
    pub steps: usize,
}

/// Scores both models on the same trace by prequential marginal likelihood.
pub fn compare_models(trace: &Trace, config_one: &ProtocolConfig, config_two: &ProtocolConfig) -> Result<ModelComparisonResult> {
    if trace.is_empty() {
        return Err(Error::TraceMismatch("cannot compare models on an empty trace".into()));
    }
    let steps = trace.len();
    let truth = trace.header.true_params;
    let run = |cfg: &ProtocolConfig| {
        let cfg = ProtocolConfig { n_steps: steps, ..cfg.clone() };
        if trace.is_interactive() {
            run_iqle(&cfg, DataSource::Replay(trace), truth, XMinusPolicy::Posterior)
        } else {
            run_qle(&cfg, DataSource::Replay(trace), truth)
        }
    };
    let log_evidence_one = run(config_one)?.log_evidence();
    let log_evidence_two = run(config_two)?.log_evidence();
    if log_evidence_one == f64::NEG_INFINITY && log_evidence_two == f64::NEG_INFINITY {
        return Err(Error::Degenerate);
    }
    let log_bayes_factor = log_evidence_two - log_evidence_one;
    let bayes_factor = log_bayes_factor.exp();
    Ok(ModelComparisonResult {
        model_one: config_one.model,
        model_two: config_two.model,
        log_evidence_one,
        log_evidence_two,
        log_bayes_factor,
        bayes_factor,
        preferred: if bayes_factor > 1.0 { config_two.model } else { config_one.model },
        steps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaturationSettings {
    pub window: usize,
    pub factor: f64,
}

impl Default for SaturationSettings {
    fn default() -> Self {
        SaturationSettings { window: 10, factor: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaturationReport {
    pub settings: SaturationSettings,
    /// Step index (0-based) of the first detection, if any.
    pub first_detection: Option<usize>,
    /// ω variance at the final step.
    pub final_variance: f64,
}

impl SaturationReport {
    pub fn fired(&self) -> bool {
        self.first_detection.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImprovementReport {
    pub model_one: RunLog,
    pub saturation: SaturationReport,
    pub model_two: RunLog,
    /// Both models re-scored on the first model's trace.
    pub comparison: ModelComparisonResult,
    pub comparison_on_model_two_trace: ModelComparisonResult,
    pub comparison_pooled: ModelComparisonResult,
}

/// Learn with model one, check its variance for saturation, learn again
/// with model two on fresh data from the same system, and compare the two
/// on each trace and on both pooled.
pub fn model_improvement_workflow(
    config_one: &ProtocolConfig,
    config_two: &ProtocolConfig,
    system: &TrueSystem,
    saturation: SaturationSettings,
) -> Result<ImprovementReport> {
    let truth = Some(system.true_params);
    let model_one = run_qle(config_one, DataSource::System(system), truth)?;
    let history = model_one.variance_history();
    let saturation = SaturationReport {
        settings: saturation,
        first_detection: first_saturation(&history, saturation.window, saturation.factor),
        final_variance: history.last().copied().unwrap_or(model_one.prior_summary.covariance.omega_omega),
    };
    let model_two = run_qle(config_two, DataSource::System(system), truth)?;
    let trace_one = model_one.trace();
    let trace_two = model_two.trace();
    let comparison = compare_models(&trace_one, config_one, config_two)?;
    let comparison_on_model_two_trace = compare_models(&trace_two, config_one, config_two)?;
    let comparison_pooled = compare_models(&trace_one.concat(&trace_two), config_one, config_two)?;
    Ok(ImprovementReport { model_one, saturation, model_two, comparison, comparison_on_model_two_trace, comparison_pooled })
}
