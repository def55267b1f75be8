//! Physical units at the command-line boundary.
//!
//! The engine works in rescaled quantities: `ω = f/Δf`, `τ = Δf·t` and
//! `α = α_phys/Δf²`, so the accumulated phase `ωτ + ατ²/2` equals
//! `f·t + α_phys·t²/2` with f in MHz and t in µs. f is therefore read as an
//! angular rate (rad/µs). Under the cyclic reading the 2π is absorbed by
//! the default `Δf = 100/2π MHz`, and the conversion itself is unchanged.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitMap {
    pub delta_f_mhz: f64,
}

impl Default for UnitMap {
    fn default() -> Self {
        UnitMap { delta_f_mhz: 100.0 / (2.0 * std::f64::consts::PI) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    /// f (MHz) ↔ ω.
    Frequency,
    /// α_phys (MHz²) ↔ α.
    Chirp,
    /// t (µs) ↔ τ.
    Time,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    ToRescaled,
    ToPhysical,
}

impl UnitMap {
    pub fn new(delta_f_mhz: f64) -> Option<Self> {
        (delta_f_mhz.is_finite() && delta_f_mhz > 0.0).then_some(UnitMap { delta_f_mhz })
    }

    pub fn is_valid(&self) -> bool {
        Self::new(self.delta_f_mhz).is_some()
    }

    fn scale(&self, quantity: Quantity) -> f64 {
        match quantity {
            Quantity::Frequency => self.delta_f_mhz,
            Quantity::Chirp => self.delta_f_mhz * self.delta_f_mhz,
            Quantity::Time => 1.0 / self.delta_f_mhz,
        }
    }

    /// Physical value = rescaled value × scale.
    pub fn convert(&self, quantity: Quantity, value: f64, direction: Direction) -> f64 {
        match direction {
            Direction::ToRescaled => value / self.scale(quantity),
            Direction::ToPhysical => value * self.scale(quantity),
        }
    }

    pub fn omega(&self, f_mhz: f64) -> f64 {
        self.convert(Quantity::Frequency, f_mhz, Direction::ToRescaled)
    }

    pub fn f_mhz(&self, omega: f64) -> f64 {
        self.convert(Quantity::Frequency, omega, Direction::ToPhysical)
    }

    pub fn alpha(&self, chirp_mhz2: f64) -> f64 {
        self.convert(Quantity::Chirp, chirp_mhz2, Direction::ToRescaled)
    }

    pub fn chirp_mhz2(&self, alpha: f64) -> f64 {
        self.convert(Quantity::Chirp, alpha, Direction::ToPhysical)
    }

    pub fn tau(&self, t_us: f64) -> f64 {
        self.convert(Quantity::Time, t_us, Direction::ToRescaled)
    }

    pub fn t_us(&self, tau: f64) -> f64 {
        self.convert(Quantity::Time, tau, Direction::ToPhysical)
    }
}
