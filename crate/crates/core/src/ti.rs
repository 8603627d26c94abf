//! Referenced thermodynamic integration: lambda schedules, per-lambda
//! expectation runs, cubic-spline quadrature over the coupling parameter,
//! and assembly of `log z = log z_ref + correction`, including the
//! telescopic multi-reference generalisation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::Density;
use crate::error::{EvidenceError, Result};
use crate::math::mix_seed;
use crate::reference::GaussianReference;
use crate::sampler::{expectation_run, ExpectationEstimate, ExpectationRun, SamplerConfig};
use crate::spline::{quadrature_weights, NaturalCubicSpline};

/// Sorted coupling-parameter grid over [0, 1] including both endpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSchedule {
    values: Vec<f64>,
}

impl LambdaSchedule {
    /// `n` equidistant values including 0 and 1 (`n >= 2`).
    pub fn equidistant(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(EvidenceError::InvalidArgument(
                "schedule needs at least 2 lambdas".into(),
            ));
        }
        Ok(Self {
            values: (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
        })
    }

    /// The paper-style 5-point pedagogical grid.
    pub fn pedagogical() -> Self {
        Self {
            values: vec![0.0, 0.2, 0.5, 0.8, 1.0],
        }
    }

    /// Canonicalises (sorts) the input; both endpoints must be present and
    /// values strictly increasing after the sort.
    pub fn from_values(mut values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(EvidenceError::InvalidArgument(
                "schedule needs at least 2 lambdas".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite() || !(0.0..=1.0).contains(v)) {
            return Err(EvidenceError::InvalidArgument(
                "lambdas must lie in [0,1]".into(),
            ));
        }
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if values[0] != 0.0 || *values.last().unwrap() != 1.0 {
            return Err(EvidenceError::InvalidArgument(
                "schedule must include both endpoints 0 and 1".into(),
            ));
        }
        if values.windows(2).any(|w| w[0] == w[1]) {
            return Err(EvidenceError::InvalidArgument(
                "schedule values must be distinct".into(),
            ));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ReferencedTi,
    Laplace,
    PowerPosterior,
    ModelSwitchTi,
    Telescopic,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagnosticsSummary {
    pub max_rhat: Option<f64>,
    /// lambdas whose tempered run failed the Rhat gate
    pub non_converged_lambdas: Vec<f64>,
    /// largest |second derivative| of the fitted spline (near-linearity check)
    pub max_spline_curvature: f64,
}

/// Evidence decomposed as `log z = log z_ref + TI correction`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvidenceResult {
    pub log_zref: f64,
    pub ti_correction: f64,
    pub log_z: f64,
    pub interval95: (f64, f64),
    pub per_lambda: Vec<ExpectationEstimate>,
    pub method: Method,
    pub converged: bool,
    pub diagnostics: DiagnosticsSummary,
}

impl EvidenceResult {
    /// Half-width of the 95% interval (1.96 sigma).
    pub fn half_width(&self) -> f64 {
        (self.interval95.1 - self.interval95.0) / 2.0
    }

    pub fn std_error(&self) -> f64 {
        self.half_width() / 1.96
    }
}

/// Rungs for telescopic TI: an analytic head, optional intermediate
/// densities, and the target.
#[derive(Debug, Clone)]
pub struct TelescopicSchedule {
    pub head: GaussianReference,
    pub intermediates: Vec<Density>,
    pub target: Density,
}

/// Per-lambda log-ratio traces of one TI leg (for plot emission).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LambdaTrace {
    pub lambda: f64,
    /// per-chain per-iteration log q/q_ref values
    pub chains: Vec<Vec<f64>>,
}

fn run_leg(
    target: &Density,
    reference: &Density,
    schedule: &LambdaSchedule,
    config: &SamplerConfig,
    rung: u64,
) -> Result<Vec<ExpectationRun>> {
    let runs: Vec<Result<ExpectationRun>> = schedule
        .values()
        .par_iter()
        .enumerate()
        .map(|(i, &lam)| {
            let sub = SamplerConfig {
                seed: mix_seed(&[config.seed, 0x7e11, rung, i as u64, lam.to_bits()]),
                ..config.clone()
            };
            expectation_run(target, reference, lam, &sub)
        })
        .collect();
    if runs.iter().all(|r| r.is_err()) {
        return Err(EvidenceError::EvidenceFailure(
            "every per-lambda run failed".into(),
        ));
    }
    runs.into_iter().collect()
}

struct LegSummary {
    correction: f64,
    variance: f64,
    curvature: f64,
}

fn integrate_leg(estimates: &[ExpectationEstimate]) -> Result<LegSummary> {
    let pts: Vec<(f64, f64)> = estimates.iter().map(|e| (e.lambda, e.mean)).collect();
    let spline = NaturalCubicSpline::fit(&pts)?;
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let w = quadrature_weights(&xs)?;
    let variance = w
        .iter()
        .zip(estimates)
        .map(|(wi, e)| wi * wi * e.mcse * e.mcse)
        .sum::<f64>();
    Ok(LegSummary {
        correction: spline.integral(),
        variance,
        curvature: spline.max_abs_curvature(),
    })
}

pub(crate) fn assemble(
    log_zref: f64,
    legs: Vec<Vec<ExpectationEstimate>>,
    method: Method,
) -> Result<EvidenceResult> {
    let mut correction = 0.0;
    let mut variance = 0.0;
    let mut curvature = 0.0_f64;
    let mut per_lambda = Vec::new();
    for leg in legs {
        let s = integrate_leg(&leg)?;
        correction += s.correction;
        variance += s.variance;
        curvature = curvature.max(s.curvature);
        per_lambda.extend(leg);
    }
    let log_z = log_zref + correction;
    let sigma = variance.sqrt();
    let max_rhat = per_lambda
        .iter()
        .flat_map(|e| e.rhat.iter().copied())
        .fold(None, |acc: Option<f64>, r| {
            Some(acc.map_or(r, |a| a.max(r)))
        });
    let non_converged: Vec<f64> = per_lambda
        .iter()
        .filter(|e| !e.converged)
        .map(|e| e.lambda)
        .collect();
    let converged = non_converged.is_empty();
    Ok(EvidenceResult {
        log_zref,
        ti_correction: correction,
        log_z,
        interval95: (log_z - 1.96 * sigma, log_z + 1.96 * sigma),
        per_lambda,
        method,
        converged,
        diagnostics: DiagnosticsSummary {
            max_rhat,
            non_converged_lambdas: non_converged,
            max_spline_curvature: curvature,
        },
    })
}

/// Integral over [0,1] of the natural cubic spline through `(lambda, mean)`
/// points (the TI correction for one leg).
pub fn spline_integral(points: &[(f64, f64)]) -> Result<f64> {
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    LambdaSchedule::from_values(xs)?;
    crate::spline::spline_integral(points)
}

/// Referenced TI: estimate `E[log q/q_ref]` at every lambda, interpolate
/// with a natural cubic spline, integrate, and add the analytic `log z_ref`.
pub fn referenced_ti(
    target: &Density,
    reference: &GaussianReference,
    schedule: &LambdaSchedule,
    config: &SamplerConfig,
) -> Result<EvidenceResult> {
    referenced_ti_traced(target, reference, schedule, config).map(|(r, _)| r)
}

pub fn referenced_ti_traced(
    target: &Density,
    reference: &GaussianReference,
    schedule: &LambdaSchedule,
    config: &SamplerConfig,
) -> Result<(EvidenceResult, Vec<LambdaTrace>)> {
    if target.space() != reference.space() {
        return Err(EvidenceError::InvalidArgument(
            "target and reference parameter spaces differ".into(),
        ));
    }
    let refd = reference.as_density();
    let runs = run_leg(target, &refd, schedule, config, 0)?;
    let traces: Vec<LambdaTrace> = runs
        .iter()
        .map(|r| LambdaTrace {
            lambda: r.estimate.lambda,
            chains: r.ratio_chains.clone(),
        })
        .collect();
    let ests: Vec<ExpectationEstimate> = runs.into_iter().map(|r| r.estimate).collect();
    let result = assemble(reference.log_zref(), vec![ests], Method::ReferencedTi)?;
    Ok((result, traces))
}

/// TI between two arbitrary densities with a caller-supplied `log z_ref`
/// (power posteriors use the prior with `log z_ref = 0`; model-switch TI
/// uses the competing model).
pub fn ti_between(
    target: &Density,
    reference: &Density,
    log_zref: f64,
    schedule: &LambdaSchedule,
    config: &SamplerConfig,
    method: Method,
) -> Result<EvidenceResult> {
    if target.space() != reference.space() {
        return Err(EvidenceError::InvalidPairing(
            "densities live on different parameter spaces".into(),
        ));
    }
    let runs = run_leg(target, reference, schedule, config, 0)?;
    let ests: Vec<ExpectationEstimate> = runs.into_iter().map(|r| r.estimate).collect();
    assemble(log_zref, vec![ests], method)
}

/// Telescopic TI: chain per-rung corrections from the analytic head through
/// the intermediates onto the target. A single-rung telescope is identical
/// to [`referenced_ti`] (same seeds, same result).
pub fn telescopic_ti(
    telescope: &TelescopicSchedule,
    schedule: &LambdaSchedule,
    config: &SamplerConfig,
) -> Result<EvidenceResult> {
    let head_density = telescope.head.as_density();
    let mut rungs: Vec<&Density> = vec![&head_density];
    rungs.extend(telescope.intermediates.iter());
    rungs.push(&telescope.target);
    for w in rungs.windows(2) {
        if w[0].space() != w[1].space() {
            return Err(EvidenceError::InvalidPairing(
                "telescope rungs live on different parameter spaces".into(),
            ));
        }
    }
    let mut legs = Vec::with_capacity(rungs.len() - 1);
    for (j, w) in rungs.windows(2).enumerate() {
        let runs = run_leg(w[1], w[0], schedule, config, j as u64)?;
        legs.push(runs.into_iter().map(|r| r.estimate).collect());
    }
    let method = if telescope.intermediates.is_empty() {
        Method::ReferencedTi
    } else {
        Method::Telescopic
    };
    let mut result = assemble(telescope.head.log_zref(), legs, method)?;
    if !telescope.intermediates.is_empty() {
        result.method = Method::Telescopic;
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn equidistant_includes_endpoints() {
        let s = LambdaSchedule::equidistant(11).unwrap();
        assert_eq!(s.len(), 11);
        assert_eq!(s.values()[0], 0.0);
        assert_eq!(*s.values().last().unwrap(), 1.0);
        assert_relative_eq!(s.values()[1], 0.1, epsilon = 1e-12);
    }

    #[test]
    fn from_values_canonicalises_order() {
        let a = LambdaSchedule::from_values(vec![0.0, 0.8, 0.2, 1.0, 0.5]).unwrap();
        let b = LambdaSchedule::from_values(vec![0.0, 0.2, 0.5, 0.8, 1.0]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn schedules_must_cover_unit_interval() {
        assert!(LambdaSchedule::from_values(vec![0.0, 0.5]).is_err());
        assert!(LambdaSchedule::from_values(vec![0.5, 1.0]).is_err());
        assert!(LambdaSchedule::from_values(vec![0.0, 0.5, 0.5, 1.0]).is_err());
        assert!(LambdaSchedule::from_values(vec![0.0]).is_err());
    }

    #[test]
    fn spline_integral_checks_schedule() {
        // constant integrand
        let pts: Vec<(f64, f64)> = [0.0, 0.25, 0.5, 0.75, 1.0]
            .iter()
            .map(|&l| (l, 2.0))
            .collect();
        assert_relative_eq!(spline_integral(&pts).unwrap(), 2.0, epsilon = 1e-13);
        assert!(spline_integral(&[(0.0, 1.0), (0.5, 1.0)]).is_err());
    }
}
