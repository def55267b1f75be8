//! Bayesian Hamiltonian learning for a driven two-level system.
//!
//! The crate is organised bottom-up:
//!
//! - [`linalg`]: dense 2x2 / 4x4 complex algebra, Pauli-X propagators and
//!   control-qubit measurement statistics.
//! - [`model`]: the Rabi and chirped-Rabi Hamiltonian families, their priors
//!   and the exact survival-probability likelihoods.
//! - [`system`]: the simulated device under test, which produces binary data,
//!   plus trace record/replay.
//! - [`channel`]: the entanglement-based likelihood estimator with photon
//!   coincidence shot noise.
//! - [`smc`]: the particle approximation of the posterior (Bayes update,
//!   Liu-West resampling, summaries, adaptive time choice).
//! - [`protocol`]: the QLE / IQLE learning loops, Bayes-factor model
//!   comparison and the model-improvement workflow.

pub mod channel;
pub mod error;
pub mod linalg;
pub mod model;
pub mod protocol;
pub mod rng;
pub mod smc;
pub mod system;

pub use channel::{estimate_likelihood, likelihood_for_particle, LikelihoodEstimate, ShotBudget};
pub use error::{Error, Result};
pub use linalg::{
    control_probabilities, entangled_pair_state, propagator, ControlProbabilities, PairState,
    Phase, QubitState, Unitary2, C64,
};
pub use model::{
    accumulated_phase, exact_likelihood_iqle, exact_likelihood_qle, sample_prior,
    ModelDescriptor, ModelFamily, ParameterVector, PriorBox,
};
pub use protocol::{
    compare_models, model_improvement_workflow, run_iqle, run_qle, DataSource, FailureRecord,
    ImprovementReport, ModelComparisonResult, ProtocolConfig, RunLog, SaturationReport,
    StepEntry, XMinusPolicy,
};
pub use smc::{
    bayes_update, choose_time, detect_saturation, effective_sample_size, first_saturation,
    liu_west_resample, summarize, Covariance, ParticleEnsemble, PosteriorSummary, TimeMode,
};
pub use system::{
    run_iqle_experiment, run_qle_experiment, Datum, ExperimentRecord, ReadoutContrast, Trace,
    TraceHeader, TrueSystem,
};

/// Engine version stamped into every output file.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
