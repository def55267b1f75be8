//! Hamiltonian families under test and their exact likelihoods.
//!
//! Both families drive the system with `σx/2` times a (possibly chirped)
//! frequency. Parameters are dimensionless: `ω = f/Δf` and time `τ` such that
//! the accumulated angle is `ωτ + ατ²/2`.

use rand::Rng;
use serde::de::{self, SeqAccess, Visitor};
use serde::ser::SerializeSeq;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::Phase;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    /// `H = σx ω / 2`.
    Rabi,
    /// `H(t) = σx (ω + α t) / 2`.
    ChirpedRabi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModelDescriptor {
    pub family: ModelFamily,
}

impl ModelDescriptor {
    pub const RABI: ModelDescriptor = ModelDescriptor { family: ModelFamily::Rabi };
    pub const CHIRPED_RABI: ModelDescriptor = ModelDescriptor { family: ModelFamily::ChirpedRabi };

    pub fn dimension(&self) -> usize {
        match self.family {
            ModelFamily::Rabi => 1,
            ModelFamily::ChirpedRabi => 2,
        }
    }

    pub fn is_chirped(&self) -> bool {
        self.family == ModelFamily::ChirpedRabi
    }
}

impl fmt::Display for ModelDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            ModelFamily::Rabi => f.write_str("rabi"),
            ModelFamily::ChirpedRabi => f.write_str("chirped_rabi"),
        }
    }
}

/// A point in parameter space. `alpha` is zero for the plain Rabi model.
///
/// Serialises as `[omega]` when `alpha == 0` and `[omega, alpha]` otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ParameterVector {
    pub omega: f64,
    pub alpha: f64,
}

impl ParameterVector {
    pub const ZERO: ParameterVector = ParameterVector { omega: 0.0, alpha: 0.0 };

    pub fn rabi(omega: f64) -> Self {
        ParameterVector { omega, alpha: 0.0 }
    }

    pub fn chirped(omega: f64, alpha: f64) -> Self {
        ParameterVector { omega, alpha }
    }

    pub fn get(&self, axis: usize) -> f64 {
        match axis {
            0 => self.omega,
            1 => self.alpha,
            _ => panic!("parameter axis {axis} out of range"),
        }
    }

    pub fn get_mut(&mut self, axis: usize) -> &mut f64 {
        match axis {
            0 => &mut self.omega,
            1 => &mut self.alpha,
            _ => panic!("parameter axis {axis} out of range"),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.omega.is_finite() && self.alpha.is_finite()
    }

    pub fn distance(&self, other: &ParameterVector) -> f64 {
        (self.omega - other.omega).hypot(self.alpha - other.alpha)
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        match *values {
            [omega] => Ok(ParameterVector::rabi(omega)),
            [omega, alpha] => Ok(ParameterVector::chirped(omega, alpha)),
            _ => Err(Error::InvalidInput(format!(
                "parameter vector must have 1 or 2 entries, got {}",
                values.len()
            ))),
        }
    }
}

impl Serialize for ParameterVector {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let len = if self.alpha == 0.0 { 1 } else { 2 };
        let mut seq = serializer.serialize_seq(Some(len))?;
        seq.serialize_element(&self.omega)?;
        if len == 2 {
            seq.serialize_element(&self.alpha)?;
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for ParameterVector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct ParamVisitor;

        impl<'de> Visitor<'de> for ParamVisitor {
            type Value = ParameterVector;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an array [omega] or [omega, alpha]")
            }

            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> std::result::Result<Self::Value, A::Error> {
                let omega: f64 = seq.next_element()?.ok_or_else(|| de::Error::invalid_length(0, &self))?;
                let alpha: f64 = seq.next_element()?.unwrap_or(0.0);
                if seq.next_element::<f64>()?.is_some() {
                    return Err(de::Error::invalid_length(3, &self));
                }
                Ok(ParameterVector { omega, alpha })
            }
        }

        deserializer.deserialize_seq(ParamVisitor)
    }
}

/// Closed interval of one parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidInput(format!("empty interval [{lo}, {hi}]")));
        }
        Ok(Interval { lo, hi })
    }

    pub fn contains(&self, x: f64) -> bool {
        (self.lo..=self.hi).contains(&x)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Uniform prior over an axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorBox {
    pub omega: Interval,
    /// Present only for the chirped model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Interval>,
}

impl PriorBox {
    /// `ω ∈ [0, 1]`.
    pub fn unit_rabi() -> Self {
        PriorBox { omega: Interval { lo: 0.0, hi: 1.0 }, alpha: None }
    }

    /// `ω ∈ [0, 1]`, `α ∈ [-1, 1]`.
    pub fn unit_chirped() -> Self {
        PriorBox {
            omega: Interval { lo: 0.0, hi: 1.0 },
            alpha: Some(Interval { lo: -1.0, hi: 1.0 }),
        }
    }

    pub fn default_for(model: ModelDescriptor) -> Self {
        if model.is_chirped() {
            Self::unit_chirped()
        } else {
            Self::unit_rabi()
        }
    }

    pub fn validate(&self, model: ModelDescriptor) -> Result<()> {
        Interval::new(self.omega.lo, self.omega.hi)?;
        match (model.is_chirped(), self.alpha) {
            (true, Some(a)) => Interval::new(a.lo, a.hi).map(|_| ()),
            (true, None) => Err(Error::InvalidInput("chirped model needs an alpha prior range".into())),
            (false, Some(_)) => Err(Error::InvalidInput("rabi model takes no alpha prior range".into())),
            (false, None) => Ok(()),
        }
    }

    pub fn contains(&self, x: &ParameterVector) -> bool {
        let alpha_ok = match self.alpha {
            Some(a) => a.contains(x.alpha),
            None => x.alpha == 0.0,
        };
        self.omega.contains(x.omega) && alpha_ok
    }
}

/// `θ = ωτ` (Rabi) or `θ = ωτ + ατ²/2` (chirped).
pub fn accumulated_phase(model: ModelDescriptor, x: &ParameterVector, tau: f64) -> Phase {
    match model.family {
        ModelFamily::Rabi => Phase(x.omega * tau),
        ModelFamily::ChirpedRabi => Phase(x.omega * tau + 0.5 * x.alpha * tau * tau),
    }
}

/// Survival probability `|<0|exp(-iH(x)τ)|0>|² = cos²(θ/2)`.
pub fn exact_likelihood_qle(model: ModelDescriptor, x: &ParameterVector, tau: f64) -> f64 {
    let theta = accumulated_phase(model, x, tau).radians();
    (0.5 * theta).cos().powi(2)
}

/// `|<0|exp(iH(x₋)τ) exp(-iH(x)τ)|0>|² = cos²((θ(x) - θ(x₋))/2)`.
pub fn exact_likelihood_iqle(
    model: ModelDescriptor,
    x: &ParameterVector,
    x_minus: &ParameterVector,
    tau: f64,
) -> f64 {
    let theta = accumulated_phase(model, x, tau).radians();
    let theta_minus = accumulated_phase(model, x_minus, tau).radians();
    (0.5 * (theta - theta_minus)).cos().powi(2)
}

/// `n` independent uniform draws from `prior`.
pub fn sample_prior<R: Rng + ?Sized>(prior: &PriorBox, n: usize, rng: &mut R) -> Result<Vec<ParameterVector>> {
    if n == 0 {
        return Err(Error::InvalidInput("cannot draw zero prior samples".into()));
    }
    let draw = |iv: Interval, rng: &mut R| iv.lo + iv.width() * rng.random::<f64>();
    Ok((0..n)
        .map(|_| {
            let omega = draw(prior.omega, rng);
            let alpha = prior.alpha.map_or(0.0, |a| draw(a, rng));
            ParameterVector { omega, alpha }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::propagator;
    use crate::rng::{stream, Purpose};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    const RABI: ModelDescriptor = ModelDescriptor::RABI;
    const CHIRPED: ModelDescriptor = ModelDescriptor::CHIRPED_RABI;

    #[test]
    fn phase_examples() {
        assert_eq!(accumulated_phase(RABI, &ParameterVector::rabi(0.3), 0.0).0, 0.0);
        assert!((accumulated_phase(RABI, &ParameterVector::rabi(0.3), 2.0).0 - 0.6).abs() < 1e-15);
        let x = ParameterVector::chirped(0.4, 0.2);
        assert!((accumulated_phase(CHIRPED, &x, 2.0).0 - 1.2).abs() < 1e-15);
    }

    #[test]
    fn rabi_ignores_alpha() {
        let x = ParameterVector::chirped(0.3, 0.9);
        assert_eq!(accumulated_phase(RABI, &x, 2.0).0, 0.3 * 2.0);
    }

    #[test]
    fn qle_examples() {
        assert_eq!(exact_likelihood_qle(RABI, &ParameterVector::rabi(0.77), 0.0), 1.0);
        assert!(exact_likelihood_qle(RABI, &ParameterVector::rabi(1.0), PI) < 1e-30);
        assert!((exact_likelihood_qle(RABI, &ParameterVector::rabi(0.5), PI) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn iqle_examples() {
        let x = ParameterVector::rabi(0.5);
        assert_eq!(exact_likelihood_iqle(RABI, &x, &x, 17.3), 1.0);
        let p = exact_likelihood_iqle(RABI, &x, &ParameterVector::rabi(0.3), PI);
        assert!((p - (0.1 * PI).cos().powi(2)).abs() < 1e-15);
        assert!((p - 0.904508).abs() < 1e-6);
        let q = exact_likelihood_iqle(RABI, &x, &ParameterVector::ZERO, PI);
        assert_eq!(q, exact_likelihood_qle(RABI, &x, PI));
    }

    #[test]
    fn prior_draws_stay_in_support_and_reproduce() {
        let prior = PriorBox::unit_rabi();
        let a = sample_prior(&prior, 20, &mut stream(11, Purpose::Prior, 0, 0)).unwrap();
        let b = sample_prior(&prior, 20, &mut stream(11, Purpose::Prior, 0, 0)).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|x| prior.contains(x)));
    }

    #[test]
    fn prior_mean_concentrates() {
        let xs = sample_prior(&PriorBox::unit_rabi(), 100_000, &mut stream(3, Purpose::Prior, 0, 0)).unwrap();
        let mean = xs.iter().map(|x| x.omega).sum::<f64>() / xs.len() as f64;
        assert!((mean - 0.5).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn chirped_prior_box() {
        let prior = PriorBox::unit_chirped();
        let xs = sample_prior(&prior, 10, &mut stream(5, Purpose::Prior, 0, 0)).unwrap();
        assert!(xs.iter().all(|x| (0.0..=1.0).contains(&x.omega) && (-1.0..=1.0).contains(&x.alpha)));
    }

    #[test]
    fn zero_draws_rejected() {
        let err = sample_prior(&PriorBox::unit_rabi(), 0, &mut stream(1, Purpose::Prior, 0, 0));
        assert!(matches!(err, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn prior_validation() {
        assert!(PriorBox::unit_rabi().validate(RABI).is_ok());
        assert!(PriorBox::unit_rabi().validate(CHIRPED).is_err());
        assert!(PriorBox::unit_chirped().validate(RABI).is_err());
        let bad = PriorBox { omega: Interval { lo: 1.0, hi: 1.0 }, alpha: None };
        assert!(bad.validate(RABI).is_err());
    }

    #[test]
    fn parameter_vector_json_shape() {
        assert_eq!(serde_json::to_string(&ParameterVector::rabi(0.25)).unwrap(), "[0.25]");
        assert_eq!(serde_json::to_string(&ParameterVector::chirped(0.25, -0.5)).unwrap(), "[0.25,-0.5]");
        let x: ParameterVector = serde_json::from_str("[0.1,0.2]").unwrap();
        assert_eq!(x, ParameterVector::chirped(0.1, 0.2));
        assert!(serde_json::from_str::<ParameterVector>("[]").is_err());
        assert!(serde_json::from_str::<ParameterVector>("[1,2,3]").is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn likelihood_matches_propagator(omega in -2.0..2.0f64, alpha in -1.0..1.0f64, tau in 0.0..100.0f64) {
            let x = ParameterVector::chirped(omega, alpha);
            let l = exact_likelihood_qle(CHIRPED, &x, tau);
            let u = propagator(omega, alpha, tau);
            prop_assert!((l - u.0[0][0].norm_sqr()).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&l));
        }

        #[test]
        fn iqle_reduces_to_qle(omega in -2.0..2.0f64, alpha in -1.0..1.0f64, tau in 0.0..100.0f64) {
            let x = ParameterVector::chirped(omega, alpha);
            prop_assert_eq!(
                exact_likelihood_iqle(CHIRPED, &x, &ParameterVector::ZERO, tau),
                exact_likelihood_qle(CHIRPED, &x, tau)
            );
        }

        #[test]
        fn rabi_likelihood_is_periodic(omega in 0.05..2.0f64, tau in 0.0..50.0f64) {
            let x = ParameterVector::rabi(omega);
            let a = exact_likelihood_qle(RABI, &x, tau);
            let b = exact_likelihood_qle(RABI, &x, tau + 2.0 * PI / omega);
            prop_assert!((a - b).abs() < 1e-10);
        }

        #[test]
        fn iqle_likelihood_in_unit_interval(
            w in -2.0..2.0f64, a in -1.0..1.0f64, wm in -2.0..2.0f64, am in -1.0..1.0f64, tau in 0.0..100.0f64
        ) {
            let l = exact_likelihood_iqle(CHIRPED, &ParameterVector::chirped(w, a), &ParameterVector::chirped(wm, am), tau);
            prop_assert!((0.0..=1.0).contains(&l));
        }
    }
}
