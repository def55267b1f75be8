//! Run configuration file (TOML, physical units).
//!
//! ```toml
//! schema_version = 1
//! seed = 7
//!
//! [units]
//! delta_f_mhz = 15.915494309189533
//!
//! [system]
//! f0_mhz = 6.90
//! chirp_mhz2 = -0.28
//! readout_shots = 10000
//!
//! [learning]
//! particles = 20
//! steps = 50
//! shots_per_basis = 4000
//! ```

use std::path::Path;

use hamlearn_core::model::Interval;
use hamlearn_core::{
    ModelDescriptor, ParameterVector, PriorBox, ProtocolConfig, ReadoutContrast, ShotBudget, TimeMode,
    TrueSystem,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;
use crate::units::UnitMap;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub units: UnitMap,
    pub system: SystemSection,
    #[serde(default)]
    pub learning: LearningSection,
    #[serde(default)]
    pub prior: PriorSection,
}

/// The simulated device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub f0_mhz: f64,
    #[serde(default)]
    pub chirp_mhz2: f64,
    #[serde(default = "default_readout_shots")]
    pub readout_shots: u64,
    #[serde(default = "one")]
    pub visibility: f64,
    #[serde(default)]
    pub baseline: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearningSection {
    pub particles: usize,
    pub steps: usize,
    pub shots_per_basis: u64,
    pub exact_channel: bool,
    pub resample_threshold: f64,
    pub liu_west_a: f64,
    /// Coherence cap on the evolution time. Defaults to τ = 100.
    pub max_time_us: Option<f64>,
    /// Replaces the adaptive heuristic with a fixed list of times.
    pub schedule_us: Option<Vec<f64>>,
}

impl Default for LearningSection {
    fn default() -> Self {
        let base = ProtocolConfig::new(ModelDescriptor::RABI, 0);
        LearningSection {
            particles: base.n_particles,
            steps: base.n_steps,
            shots_per_basis: ShotBudget::DEFAULT_SHOTS,
            exact_channel: false,
            resample_threshold: base.resample_threshold,
            liu_west_a: base.liu_west_a,
            max_time_us: None,
            schedule_us: None,
        }
    }
}

/// Uniform prior box. Missing entries default to `ω ∈ [0,1]` and
/// `α ∈ [-1,1]` in rescaled units.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSection {
    pub f_mhz: Option<[f64; 2]>,
    pub chirp_mhz2: Option<[f64; 2]>,
}

fn default_readout_shots() -> u64 {
    10_000
}

fn one() -> f64 {
    1.0
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub shots: Option<u64>,
    pub particles: Option<usize>,
    pub steps: Option<usize>,
    pub exact_channel: bool,
}

impl RunConfig {
    /// Reference NV setup: f₀ = 6.90 MHz, 20 particles, 50 steps.
    pub fn nv_reference(seed: u64) -> Self {
        RunConfig {
            schema_version: SCHEMA_VERSION,
            seed,
            units: UnitMap::default(),
            system: SystemSection {
                f0_mhz: 6.90,
                chirp_mhz2: 0.0,
                readout_shots: default_readout_shots(),
                visibility: 1.0,
                baseline: 0.0,
            },
            learning: LearningSection::default(),
            prior: PriorSection::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    /// SHA-256 of the canonical TOML form, hex encoded.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_toml().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(n) = o.shots {
            self.learning.shots_per_basis = n;
        }
        if let Some(n) = o.particles {
            self.learning.particles = n;
        }
        if let Some(n) = o.steps {
            self.learning.steps = n;
        }
        if o.exact_channel {
            self.learning.exact_channel = true;
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if !self.units.is_valid() {
            return Err(CliError::Config(format!("delta_f_mhz must be positive, got {}", self.units.delta_f_mhz)));
        }
        self.system()?;
        self.protocol(ModelDescriptor::CHIRPED_RABI)?;
        Ok(())
    }

    pub fn truth(&self) -> ParameterVector {
        ParameterVector::chirped(self.units.omega(self.system.f0_mhz), self.units.alpha(self.system.chirp_mhz2))
    }

    pub fn system(&self) -> Result<TrueSystem, CliError> {
        let s = &self.system;
        let contrast = ReadoutContrast::new(s.visibility, s.baseline)?;
        Ok(TrueSystem::new(self.truth(), s.readout_shots, contrast)?)
    }

    pub fn prior(&self, model: ModelDescriptor) -> Result<PriorBox, CliError> {
        let u = &self.units;
        let mut prior = PriorBox::default_for(model);
        if let Some([lo, hi]) = self.prior.f_mhz {
            prior.omega = Interval::new(u.omega(lo), u.omega(hi))?;
        }
        if let (Some(a), Some([lo, hi])) = (prior.alpha.as_mut(), self.prior.chirp_mhz2) {
            *a = Interval::new(u.alpha(lo), u.alpha(hi))?;
        }
        Ok(prior)
    }

    pub fn protocol(&self, model: ModelDescriptor) -> Result<ProtocolConfig, CliError> {
        let l = &self.learning;
        let mut cfg = ProtocolConfig::new(model, self.seed);
        cfg.prior = self.prior(model)?;
        cfg.n_particles = l.particles;
        cfg.n_steps = l.steps;
        cfg.budget = if l.exact_channel { ShotBudget::Exact } else { ShotBudget::PerBasis(l.shots_per_basis) };
        cfg.resample_threshold = l.resample_threshold;
        cfg.liu_west_a = l.liu_west_a;
        if let Some(t) = l.max_time_us {
            cfg.max_time = self.units.tau(t);
        }
        if let Some(ts) = &l.schedule_us {
            cfg.time_mode = TimeMode::FixedSchedule(ts.iter().map(|&t| self.units.tau(t)).collect());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
