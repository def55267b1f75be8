//! Dense complex algebra for one system qubit and one control qubit.
//!
//! Basis order is `|0>, |1>` for the system and `|c s>` = `|00>, |01>, |10>, |11>`
//! (control first) for the pair.

use num_complex::Complex64;
use std::f64::consts::FRAC_1_SQRT_2;
use std::ops::Mul;

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Accumulated rotation angle of an X-drive, in radians.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Phase(pub f64);

impl Phase {
    pub fn radians(self) -> f64 {
        self.0
    }
}

/// Pure state of the system qubit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitState(pub [C64; 2]);

impl QubitState {
    /// `|0>`, the initial and measured state of every experiment here.
    pub fn ground() -> Self {
        QubitState([ONE, ZERO])
    }

    pub fn excited() -> Self {
        QubitState([ZERO, ONE])
    }

    /// Normalises `amplitudes`; `None` for the zero vector.
    pub fn normalized(amplitudes: [C64; 2]) -> Option<Self> {
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return None;
        }
        Some(QubitState(amplitudes.map(|a| a / norm)))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &QubitState) -> C64 {
        self.0[0].conj() * other.0[0] + self.0[1].conj() * other.0[1]
    }
}

/// Pure state of control ⊗ system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairState(pub [C64; 4]);

impl PairState {
    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|a| a.norm_sqr()).sum()
    }
}

/// A 2x2 unitary, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Unitary2(pub [[C64; 2]; 2]);

impl Unitary2 {
    pub fn identity() -> Self {
        Unitary2([[ONE, ZERO], [ZERO, ONE]])
    }

    pub fn pauli_x() -> Self {
        Unitary2([[ZERO, ONE], [ONE, ZERO]])
    }

    /// `exp(-i σx θ/2)`.
    pub fn x_rotation(theta: Phase) -> Self {
        let half = 0.5 * theta.0;
        let c = C64::new(half.cos(), 0.0);
        let s = C64::new(0.0, -half.sin());
        Unitary2([[c, s], [s, c]])
    }

    pub fn adjoint(&self) -> Self {
        let m = &self.0;
        Unitary2([
            [m[0][0].conj(), m[1][0].conj()],
            [m[0][1].conj(), m[1][1].conj()],
        ])
    }

    pub fn apply(&self, psi: &QubitState) -> QubitState {
        let m = &self.0;
        let v = &psi.0;
        QubitState([
            m[0][0] * v[0] + m[0][1] * v[1],
            m[1][0] * v[0] + m[1][1] * v[1],
        ])
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Unitary2) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..2 {
            for c in 0..2 {
                worst = worst.max((self.0[r][c] - other.0[r][c]).norm());
            }
        }
        worst
    }
}

impl Mul for Unitary2 {
    type Output = Unitary2;

    fn mul(self, rhs: Unitary2) -> Unitary2 {
        let a = &self.0;
        let b = &rhs.0;
        let mut out = [[ZERO; 2]; 2];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, entry) in row.iter_mut().enumerate() {
                *entry = a[r][0] * b[0][c] + a[r][1] * b[1][c];
            }
        }
        Unitary2(out)
    }
}

/// Propagator of `H(t) = σx (ω + α t) / 2` over `[0, τ]`.
///
/// The Hamiltonian commutes with itself at all times, so the time-ordered
/// exponential is the rotation by the integrated angle `ωτ + ατ²/2`.
pub fn propagator(omega: f64, alpha: f64, tau: f64) -> Unitary2 {
    Unitary2::x_rotation(Phase(omega * tau + 0.5 * alpha * tau * tau))
}

/// `(|0> ⊗ U|ψ> + |1> ⊗ V|ψ>) / √2`.
pub fn entangled_pair_state(u: &Unitary2, v: &Unitary2, psi: &QubitState) -> PairState {
    let a = u.apply(psi).0;
    let b = v.apply(psi).0;
    let k = FRAC_1_SQRT_2;
    PairState([a[0] * k, a[1] * k, b[0] * k, b[1] * k])
}

/// Outcome probabilities of measuring the control qubit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlProbabilities {
    /// Probability of `|+>` in the σx eigenbasis.
    pub p_plus: f64,
    /// Probability of `|+i>` in the σy eigenbasis.
    pub p_plus_i: f64,
}

/// For a state built by [`entangled_pair_state`], `2 p_plus - 1` and
/// `2 p_plus_i - 1` are the real and imaginary parts of `<ψ|U†V|ψ>`.
pub fn control_probabilities(state: &PairState) -> ControlProbabilities {
    let c = &state.0;
    let mut p_plus = 0.0;
    let mut p_plus_i = 0.0;
    for s in 0..2 {
        // <+| = (<0| + <1|)/√2 and <+i| = (<0| - i<1|)/√2 on the control.
        p_plus += 0.5 * (c[s] + c[2 + s]).norm_sqr();
        p_plus_i += 0.5 * (c[s] - C64::i() * c[2 + s]).norm_sqr();
    }
    ControlProbabilities {
        p_plus: p_plus.clamp(0.0, 1.0),
        p_plus_i: p_plus_i.clamp(0.0, 1.0),
    }
}
