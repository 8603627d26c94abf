//! Baseline evidence estimators benchmarked against referenced TI: plain
//! Laplace, power posteriors (prior reference, z_ref = 1), and model-switch
//! TI; plus pairwise Bayes-factor assembly.

use serde::{Deserialize, Serialize};

use crate::density::Density;
use crate::error::{EvidenceError, Result};
use crate::math::mix_seed;
use crate::reference::GaussianReference;
use crate::sampler::SamplerConfig;
use crate::ti::{ti_between, DiagnosticsSummary, EvidenceResult, LambdaSchedule, Method};

/// Evidence from the reference alone: `log z = log z_ref`, zero correction.
pub fn laplace_evidence(reference: &GaussianReference) -> EvidenceResult {
    let log_z = reference.log_zref();
    EvidenceResult {
        log_zref: log_z,
        ti_correction: 0.0,
        log_z,
        interval95: (log_z, log_z),
        per_lambda: Vec::new(),
        method: Method::Laplace,
        converged: true,
        diagnostics: DiagnosticsSummary {
            max_rhat: None,
            non_converged_lambdas: Vec::new(),
            max_spline_curvature: 0.0,
        },
    }
}

/// Power posteriors: referenced TI with the (proper, normalised) prior as
/// the reference, so `log z_ref = 0` and the integrand is the expected
/// log-likelihood. Divergence of the lambda = 0 run shows up as a
/// non-converged flag, not an error.
pub fn power_posterior_evidence(
    posterior: &Density,
    prior: &Density,
    schedule: &LambdaSchedule,
    config: &SamplerConfig,
) -> Result<EvidenceResult> {
    ti_between(posterior, prior, 0.0, schedule, config, Method::PowerPosterior)
}

/// Model-switch TI along a geometric path connecting two models directly;
/// `log_z` of the result is `log BF_ba = log(z_b / z_a)`.
pub fn model_switch_ti(
    model_a: &Density,
    model_b: &Density,
    schedule: &LambdaSchedule,
    config: &SamplerConfig,
) -> Result<EvidenceResult> {
    if model_a.space() != model_b.space() {
        return Err(EvidenceError::InvalidPairing(
            "model-switch TI needs a shared parameter space".into(),
        ));
    }
    ti_between(model_b, model_a, 0.0, schedule, config, Method::ModelSwitchTi)
}

/// Pairwise log-Bayes-factor matrix built from per-model evidences.
/// Entry `(i, j)` is `log z_i - log z_j`, so the matrix is antisymmetric and
/// exactly transitive by construction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BayesFactorMatrix {
    pub model_ids: Vec<String>,
    pub log_z: Vec<f64>,
    pub log_bf: Vec<Vec<f64>>,
    /// 95% half-width per pair from summed variances
    pub half_width95: Vec<Vec<f64>>,
}

impl BayesFactorMatrix {
    /// Index of the highest-evidence model.
    pub fn best(&self) -> usize {
        let mut k = 0;
        for (i, z) in self.log_z.iter().enumerate() {
            if *z > self.log_z[k] {
                k = i;
            }
        }
        k
    }
}

pub fn bayes_factor_matrix(
    results: &[EvidenceResult],
    ids: &[String],
) -> Result<BayesFactorMatrix> {
    if results.len() != ids.len() {
        return Err(EvidenceError::InvalidArgument(
            "one result per model id required".into(),
        ));
    }
    if results.is_empty() {
        return Err(EvidenceError::InvalidArgument("no results".into()));
    }
    let mut seen = std::collections::HashSet::new();
    for id in ids {
        if !seen.insert(id.clone()) {
            return Err(EvidenceError::InvalidArgument(format!(
                "duplicate model id: {id}"
            )));
        }
    }
    let n = results.len();
    let log_z: Vec<f64> = results.iter().map(|r| r.log_z).collect();
    let se: Vec<f64> = results.iter().map(|r| r.std_error()).collect();
    let mut log_bf = vec![vec![0.0; n]; n];
    let mut hw = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            log_bf[i][j] = log_z[i] - log_z[j];
            if i != j {
                hw[i][j] = 1.96 * (se[i] * se[i] + se[j] * se[j]).sqrt();
            }
        }
    }
    Ok(BayesFactorMatrix {
        model_ids: ids.to_vec(),
        log_z,
        log_bf,
        half_width95: hw,
    })
}

/// Outcome of the draws-to-precision protocol.
#[derive(Debug, Clone)]
pub struct ConvergenceCost {
    /// per-chain post-warmup iterations of the final (accepted) run
    pub n_iter: usize,
    /// total post-warmup draws summed over all lambda runs
    pub total_draws: usize,
    pub result: EvidenceResult,
}

/// Grow the per-chain draw budget geometrically (x2) until the propagated
/// standard error of `log z` falls below `rel_threshold * |log z|`, and
/// report the total post-warmup draws summed over lambdas.
pub fn draws_to_relative_se<F>(
    estimate: F,
    rel_threshold: f64,
    start_iters: usize,
    max_iters: usize,
) -> Result<ConvergenceCost>
where
    F: Fn(usize) -> Result<EvidenceResult>,
{
    let mut n = start_iters.max(8);
    loop {
        let result = estimate(n)?;
        let se = result.std_error();
        let target = rel_threshold * result.log_z.abs();
        if se.is_finite() && se < target {
            let total = result.per_lambda.iter().map(|e| e.n_draws).sum();
            return Ok(ConvergenceCost {
                n_iter: n,
                total_draws: total,
                result,
            });
        }
        n *= 2;
        if n > max_iters {
            return Err(EvidenceError::EvidenceFailure(format!(
                "SE target {rel_threshold:.3} x |log z| not reached by {max_iters} iters/chain"
            )));
        }
    }
}

/// Sub-seed helper so repeated protocol runs are independent but reproducible.
pub fn protocol_seed(base: u64, repetition: u64) -> u64 {
    mix_seed(&[base, 0x9e01, repetition])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ti::Method;

    fn fake_result(log_z: f64) -> EvidenceResult {
        EvidenceResult {
            log_zref: log_z,
            ti_correction: 0.0,
            log_z,
            interval95: (log_z - 0.1, log_z + 0.1),
            per_lambda: Vec::new(),
            method: Method::Laplace,
            converged: true,
            diagnostics: DiagnosticsSummary {
                max_rhat: None,
                non_converged_lambdas: Vec::new(),
                max_spline_curvature: 0.0,
            },
        }
    }

    #[test]
    fn matrix_antisymmetry_and_transitivity() {
        let results = vec![fake_result(-703.0), fake_result(-716.0), fake_result(-700.0)];
        let ids = vec!["a".to_string(), "b".to_string(), "c".to_string()];
        let m = bayes_factor_matrix(&results, &ids).unwrap();
        assert_eq!(m.log_bf[0][1], 13.0);
        for i in 0..3 {
            assert_eq!(m.log_bf[i][i], 0.0);
            for j in 0..3 {
                assert_eq!(m.log_bf[i][j], -m.log_bf[j][i]);
                for k in 0..3 {
                    let lhs = m.log_bf[i][k];
                    let rhs = m.log_bf[i][j] + m.log_bf[j][k];
                    assert!((lhs - rhs).abs() < 1e-12);
                }
            }
        }
        assert_eq!(m.best(), 2);
    }

    #[test]
    fn single_model_matrix_is_zero() {
        let m = bayes_factor_matrix(&[fake_result(3.0)], &["only".to_string()]).unwrap();
        assert_eq!(m.log_bf, vec![vec![0.0]]);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let r = vec![fake_result(0.0), fake_result(1.0)];
        let ids = vec!["m".to_string(), "m".to_string()];
        assert!(bayes_factor_matrix(&r, &ids).is_err());
    }
}
