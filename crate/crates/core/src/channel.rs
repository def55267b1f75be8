//! Simulated photonic likelihood estimator.
//!
//! The idler qubit is put through `U` or `V` conditioned on the signal qubit;
//! measuring the signal in the X and Y bases gives the real and imaginary
//! parts of `<ψ|U†V|ψ>`. The likelihood estimate is
//! `(2p̂₊ - 1)² + (2p̂₊ᵢ - 1)²`, clamped to `[0, 1]`.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::linalg::{control_probabilities, entangled_pair_state, QubitState, Unitary2};
use crate::model::{accumulated_phase, ModelDescriptor, ParameterVector};

/// Coincidence events per measurement basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShotBudget {
    /// Infinite-shot limit: analytic probabilities, no sampling.
    Exact,
    /// Finite coincidence count in each of the X and Y bases (at least 1).
    PerBasis(u64),
}

impl ShotBudget {
    pub const DEFAULT_SHOTS: u64 = 4000;

    pub fn shots(&self) -> Option<u64> {
        match *self {
            ShotBudget::Exact => None,
            ShotBudget::PerBasis(n) => Some(n),
        }
    }
}

impl Default for ShotBudget {
    fn default() -> Self {
        ShotBudget::PerBasis(Self::DEFAULT_SHOTS)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LikelihoodEstimate {
    /// Clamped estimate in `[0, 1]`.
    pub value: f64,
    pub p_plus_hat: f64,
    pub p_plus_i_hat: f64,
    /// Total coincidences over both bases; zero on the exact path.
    pub shots_used: u64,
}

fn frequency<R: Rng + ?Sized>(p: f64, shots: u64, rng: &mut R) -> f64 {
    let count = Binomial::new(shots, p).expect("probability in [0,1]").sample(rng);
    count as f64 / shots as f64
}

pub fn estimate_likelihood<R: Rng + ?Sized>(
    u: &Unitary2,
    v: &Unitary2,
    psi: &QubitState,
    budget: ShotBudget,
    rng: &mut R,
) -> LikelihoodEstimate {
    let probs = control_probabilities(&entangled_pair_state(u, v, psi));
    let (p_plus_hat, p_plus_i_hat, shots_used) = match budget {
        ShotBudget::Exact => (probs.p_plus, probs.p_plus_i, 0),
        ShotBudget::PerBasis(0) => panic!("shot budget must be at least 1 per basis"),
        ShotBudget::PerBasis(n) => (frequency(probs.p_plus, n, rng), frequency(probs.p_plus_i, n, rng), 2 * n),
    };
    let re = 2.0 * p_plus_hat - 1.0;
    let im = 2.0 * p_plus_i_hat - 1.0;
    LikelihoodEstimate {
        value: (re * re + im * im).clamp(0.0, 1.0),
        p_plus_hat,
        p_plus_i_hat,
        shots_used,
    }
}

/// Likelihood of survival for hypothesis `x`.
///
/// QLE uses `U = 1`; IQLE uses `U = exp(-iH(x₋)τ)`. Both branches evolve
/// forward in time; the inversion comes from the overlap itself.
pub fn likelihood_for_particle<R: Rng + ?Sized>(
    model: ModelDescriptor,
    x: &ParameterVector,
    x_minus: Option<&ParameterVector>,
    tau: f64,
    budget: ShotBudget,
    rng: &mut R,
) -> LikelihoodEstimate {
    let u = match x_minus {
        None => Unitary2::identity(),
        Some(xm) => Unitary2::x_rotation(accumulated_phase(model, xm, tau)),
    };
    let v = Unitary2::x_rotation(accumulated_phase(model, x, tau));
    estimate_likelihood(&u, &v, &QubitState::ground(), budget, rng)
}
