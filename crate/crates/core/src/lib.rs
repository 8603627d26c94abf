//! Bayesian model evidence via referenced thermodynamic integration.
//!
//! The normalising constant of an un-normalised density `q` is computed as
//! `log z = log z_ref + integral_0^1 E_{q(lambda)}[log q/q_ref] dlambda`,
//! where `q_ref` is an analytically integrable Gaussian reference and the
//! path `q^lambda q_ref^(1-lambda)` is sampled by MCMC at a grid of coupling
//! parameters. Laplace, power-posterior and model-switch-TI baselines share
//! the same machinery.

pub mod density;
pub mod error;
pub mod estimators;
pub mod io;
pub mod linalg;
pub mod math;
pub mod models;
pub mod oracle;
pub mod reference;
pub mod sampler;
pub mod space;
pub mod spline;
pub mod ti;

pub use density::{log_ratio, Density, TemperedDensity};
pub use error::{EvidenceError, Result};
pub use estimators::{
    bayes_factor_matrix, draws_to_relative_se, laplace_evidence, model_switch_ti,
    power_posterior_evidence, BayesFactorMatrix,
};
pub use reference::{
    log_zref, reference_diagonal_orthant, reference_from_mode, reference_from_samples,
    reference_variational, GaussianReference, ScaleForm, VariationalOptions, VariationalResult,
};
pub use sampler::{
    compute_rhat, expectation_of_log_ratio, sample, ChainSet, Diagnostics, ExpectationEstimate,
    Kernel, SamplerConfig,
};
pub use space::ParamSpace;
pub use ti::{
    referenced_ti, spline_integral, telescopic_ti, EvidenceResult, LambdaSchedule, Method,
    TelescopicSchedule,
};
