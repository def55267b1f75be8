//! Shared fixtures for the criterion benches.

use hamlearn_core::{ModelDescriptor, ParameterVector, ProtocolConfig, TrueSystem};

/// ω₀ for f₀ = 6.90 MHz under Δf = 100/2π MHz.
pub const OMEGA0: f64 = 6.90 * 2.0 * std::f64::consts::PI / 100.0;

pub fn reference_system() -> TrueSystem {
    TrueSystem::ideal(ParameterVector::rabi(OMEGA0), 10_000).expect("valid system")
}

pub fn reference_config(seed: u64) -> ProtocolConfig {
    ProtocolConfig::new(ModelDescriptor::RABI, seed)
}
