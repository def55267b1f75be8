//! Particle approximation of the posterior over Hamiltonian parameters.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::{ParameterVector, PriorBox};
use crate::system::Datum;

/// Weighted point masses. Weights are kept normalised.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    positions: Vec<ParameterVector>,
    weights: Vec<f64>,
    /// Number of active parameter axes (1 = ω, 2 = ω and α).
    dimension: usize,
}

impl ParticleEnsemble {
    /// Equal-weight ensemble.
    pub fn uniform(positions: Vec<ParameterVector>, dimension: usize) -> Result<Self> {
        let n = positions.len();
        Self::new(positions, vec![1.0 / n.max(1) as f64; n], dimension)
    }

    /// Weights are normalised on construction.
    pub fn new(positions: Vec<ParameterVector>, weights: Vec<f64>, dimension: usize) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidInput("ensemble needs at least one particle".into()));
        }
        if positions.len() != weights.len() {
            return Err(Error::InvalidInput(format!(
                "{} positions but {} weights",
                positions.len(),
                weights.len()
            )));
        }
        if !(1..=2).contains(&dimension) {
            return Err(Error::InvalidInput(format!("dimension must be 1 or 2, got {dimension}")));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidInput("weights must be finite and non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidInput("weights sum to zero".into()));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(ParticleEnsemble { positions, weights, dimension })
    }

    pub fn positions(&self) -> &[ParameterVector] {
        &self.positions
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Reweights by the probability each particle gives `datum` and returns
    /// the normalising constant `Σ wᵢ ℓᵢ(D)` (the one-step evidence).
    pub fn update(&mut self, survival_likelihoods: &[f64], datum: Datum) -> Result<f64> {
        if survival_likelihoods.len() != self.len() {
            return Err(Error::InvalidInput(format!(
                "{} likelihoods for {} particles",
                survival_likelihoods.len(),
                self.len()
            )));
        }
        if let Some(bad) = survival_likelihoods.iter().find(|l| !(0.0..=1.0).contains(*l)) {
            return Err(Error::InvalidInput(format!("likelihood {bad} outside [0,1]")));
        }
        let unnormalised: Vec<f64> = self
            .weights
            .iter()
            .zip(survival_likelihoods)
            .map(|(w, &l)| w * datum.probability(l))
            .collect();
        let evidence: f64 = unnormalised.iter().sum();
        if evidence <= 0.0 {
            return Err(Error::Degenerate);
        }
        for (w, u) in self.weights.iter_mut().zip(unnormalised) {
            *w = u / evidence;
        }
        Ok(evidence)
    }

    fn mean(&self) -> ParameterVector {
        let mut mean = ParameterVector::ZERO;
        for (x, w) in self.positions.iter().zip(&self.weights) {
            mean.omega += w * x.omega;
            mean.alpha += w * x.alpha;
        }
        if self.dimension == 1 {
            mean.alpha = 0.0;
        }
        mean
    }

    fn covariance_about(&self, mean: &ParameterVector) -> Covariance {
        let mut cov = Covariance::default();
        for (x, w) in self.positions.iter().zip(&self.weights) {
            let dw = x.omega - mean.omega;
            let da = x.alpha - mean.alpha;
            cov.omega_omega += w * dw * dw;
            if self.dimension == 2 {
                cov.omega_alpha += w * dw * da;
                cov.alpha_alpha += w * da * da;
            }
        }
        cov
    }

    fn ancestor_sampler(&self) -> WeightedIndex<f64> {
        WeightedIndex::new(&self.weights).expect("normalised non-negative weights")
    }
}

/// Symmetric 2x2 covariance over (ω, α). The α entries are zero for
/// one-parameter models.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct Covariance {
    pub omega_omega: f64,
    pub omega_alpha: f64,
    pub alpha_alpha: f64,
}

impl Covariance {
    pub fn trace(&self) -> f64 {
        self.omega_omega + self.alpha_alpha
    }

    /// Largest eigenvalue, which is the spectral norm for a PSD matrix.
    pub fn spectral_norm(&self) -> f64 {
        let half_tr = 0.5 * self.trace();
        let half_diff = 0.5 * (self.omega_omega - self.alpha_alpha);
        half_tr + half_diff.hypot(self.omega_alpha)
    }

    pub fn scaled(&self, k: f64) -> Covariance {
        Covariance {
            omega_omega: k * self.omega_omega,
            omega_alpha: k * self.omega_alpha,
            alpha_alpha: k * self.alpha_alpha,
        }
    }

    /// Lower Cholesky factor `[[l11, 0], [l21, l22]]`, tolerant of
    /// semi-definite input (zero pivots give zero columns).
    pub fn cholesky(&self) -> [[f64; 2]; 2] {
        let l11 = self.omega_omega.max(0.0).sqrt();
        let l21 = if l11 > 0.0 { self.omega_alpha / l11 } else { 0.0 };
        let l22 = (self.alpha_alpha - l21 * l21).max(0.0).sqrt();
        [[l11, 0.0], [l21, l22]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PosteriorSummary {
    pub mean: ParameterVector,
    pub covariance: Covariance,
    pub covariance_norm: f64,
    /// Posterior-expected squared error `Σ wᵢ ‖xᵢ - x₀‖²`.
    pub quadratic_loss: Option<f64>,
    /// `‖μ - x₀‖²`, emitted alongside for comparison.
    pub squared_error_of_mean: Option<f64>,
    pub ess: f64,
}

impl PosteriorSummary {
    pub fn omega_sd(&self) -> f64 {
        self.covariance.omega_omega.max(0.0).sqrt()
    }
}

pub fn bayes_update(ensemble: &ParticleEnsemble, survival_likelihoods: &[f64], datum: Datum) -> Result<ParticleEnsemble> {
    let mut next = ensemble.clone();
    next.update(survival_likelihoods, datum)?;
    Ok(next)
}

/// `1 / Σ wᵢ²`.
pub fn effective_sample_size(ensemble: &ParticleEnsemble) -> f64 {
    1.0 / ensemble.weights.iter().map(|w| w * w).sum::<f64>()
}

const MAX_SUPPORT_RETRIES: usize = 64;

/// Liu-West resampling with contraction `a`.
///
/// Offspring are `a xⱼ + (1-a) μ + ε`, `ε ~ N(0, (1-a²) Σ)`, which keeps the
/// first two moments in expectation. With `support`, jitter is redrawn until
/// the offspring lands inside; after repeated misses the jitter is dropped
/// (the shrunk point is a convex combination of in-support points).
pub fn liu_west_resample<R: Rng + ?Sized>(
    ensemble: &ParticleEnsemble,
    a: f64,
    support: Option<&PriorBox>,
    rng: &mut R,
) -> Result<ParticleEnsemble> {
    if !(a > 0.0 && a <= 1.0) {
        return Err(Error::InvalidInput(format!("Liu-West contraction must lie in (0,1], got {a}")));
    }
    let n = ensemble.len();
    let mean = ensemble.mean();
    let cov = ensemble.covariance_about(&mean);
    let chol = cov.scaled(1.0 - a * a).cholesky();
    if cov.trace() == 0.0 && a < 1.0 {
        log::debug!("Liu-West: singular covariance, offspring are exact copies");
    }
    let ancestors = ensemble.ancestor_sampler();
    let dim = ensemble.dimension;
    let mut positions = Vec::with_capacity(n);
    for _ in 0..n {
        let parent = ensemble.positions[ancestors.sample(rng)];
        let shrunk = ParameterVector {
            omega: a * parent.omega + (1.0 - a) * mean.omega,
            alpha: if dim == 2 { a * parent.alpha + (1.0 - a) * mean.alpha } else { parent.alpha },
        };
        let mut child = shrunk;
        if a < 1.0 {
            let mut placed = false;
            for _ in 0..MAX_SUPPORT_RETRIES {
                let z0: f64 = rng.sample(StandardNormal);
                let z1: f64 = if dim == 2 { rng.sample(StandardNormal) } else { 0.0 };
                let candidate = ParameterVector {
                    omega: shrunk.omega + chol[0][0] * z0,
                    alpha: shrunk.alpha + chol[1][0] * z0 + chol[1][1] * z1,
                };
                if support.is_none_or(|s| s.contains(&candidate)) {
                    child = candidate;
                    placed = true;
                    break;
                }
            }
            if !placed {
                log::debug!("Liu-West: offspring kept without jitter after {MAX_SUPPORT_RETRIES} support misses");
            }
        }
        positions.push(child);
    }
    ParticleEnsemble::uniform(positions, dim)
}

pub fn summarize(ensemble: &ParticleEnsemble, truth: Option<&ParameterVector>) -> PosteriorSummary {
    let mean = ensemble.mean();
    let covariance = ensemble.covariance_about(&mean);
    let dim = ensemble.dimension;
    let sq_dist = |x: &ParameterVector, t: &ParameterVector| {
        let d = (x.omega - t.omega).powi(2);
        if dim == 2 { d + (x.alpha - t.alpha).powi(2) } else { d }
    };
    let quadratic_loss = truth.map(|t| {
        ensemble.positions.iter().zip(&ensemble.weights).map(|(x, w)| w * sq_dist(x, t)).sum()
    });
    PosteriorSummary {
        mean,
        covariance,
        covariance_norm: if dim == 2 { covariance.spectral_norm() } else { covariance.omega_omega },
        quadratic_loss,
        squared_error_of_mean: truth.map(|t| sq_dist(&mean, t)),
        ess: effective_sample_size(ensemble),
    }
}

/// How the next evolution time is picked.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeMode {
    /// Particle guess heuristic: `τ = 1/‖x - x'‖` for two weighted draws.
    Pgh,
    /// Times taken in order from a list.
    FixedSchedule(Vec<f64>),
}

/// Next evolution time, capped at `max_time` under the heuristic.
pub fn choose_time<R: Rng + ?Sized>(
    ensemble: &ParticleEnsemble,
    mode: &TimeMode,
    step: usize,
    max_time: f64,
    rng: &mut R,
) -> Result<f64> {
    match mode {
        TimeMode::FixedSchedule(times) => times
            .get(step)
            .copied()
            .ok_or(Error::OutOfRange { step, len: times.len() }),
        TimeMode::Pgh => {
            let sampler = ensemble.ancestor_sampler();
            for _ in 0..ensemble.len() {
                let x = ensemble.positions[sampler.sample(rng)];
                let y = ensemble.positions[sampler.sample(rng)];
                let d = x.distance(&y);
                if d > 0.0 {
                    return Ok((1.0 / d).min(max_time));
                }
            }
            let sigma = ensemble.covariance_about(&ensemble.mean()).trace().sqrt();
            Ok(if sigma > 0.0 { (1.0 / sigma).min(max_time) } else { max_time })
        }
    }
}

/// True when the latest variance failed to drop below `factor` times the
/// variance `window` steps earlier. Histories shorter than `window + 1`
/// never count as saturated.
pub fn detect_saturation(variance_history: &[f64], window: usize, factor: f64) -> bool {
    let n = variance_history.len();
    if window == 0 || n <= window {
        return false;
    }
    variance_history[n - 1] > factor * variance_history[n - 1 - window]
}

/// First index at which [`detect_saturation`] fires on the history prefix.
pub fn first_saturation(variance_history: &[f64], window: usize, factor: f64) -> Option<usize> {
    (window..variance_history.len()).find(|&k| detect_saturation(&variance_history[..=k], window, factor))
}
