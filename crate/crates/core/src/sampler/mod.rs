//! MCMC engine: multi-chain sampling from any [`Density`] with adaptive
//! random-walk and Hamiltonian kernels, convergence diagnostics, and the
//! per-lambda expectation estimator used by the TI engine.
//!
//! Chains own independent RNG streams derived from `(seed, chain index)` and
//! run concurrently; results are identical regardless of worker count.

mod diagnostics;
mod hmc;
mod rwm;

pub use diagnostics::{compute_rhat, split_rhat_scalar, Diagnostics};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{log_ratio, Density, TemperedDensity};
use crate::error::{EvidenceError, Result};
use crate::math::{batch_means_se, mean, mix_seed, sample_variance};
use crate::oracle::sample_standard_normal;

pub const RHAT_GATE: f64 = 1.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kernel {
    AdaptiveRandomWalk,
    Hamiltonian,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub n_chains: usize,
    /// post-warmup draws per chain
    pub n_iter: usize,
    pub n_warmup: usize,
    pub seed: u64,
    pub kernel: Kernel,
    /// leapfrog steps per Hamiltonian proposal
    pub hmc_leapfrog_steps: usize,
    pub target_accept: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        // default split mirrors "half of iterations used for the burn-in"
        Self {
            n_chains: 4,
            n_iter: 5000,
            n_warmup: 5000,
            seed: 1,
            kernel: Kernel::AdaptiveRandomWalk,
            hmc_leapfrog_steps: 20,
            target_accept: 0.234,
        }
    }
}

impl SamplerConfig {
    /// Random-walk config with `n_iter` post-warmup draws per chain and an
    /// equal warmup.
    pub fn new(n_chains: usize, n_iter: usize) -> Self {
        Self {
            n_chains,
            n_iter,
            n_warmup: n_iter,
            ..Self::default()
        }
    }

    /// Hamiltonian config; dual averaging targets 0.8 acceptance.
    pub fn hamiltonian(n_chains: usize, n_iter: usize) -> Self {
        Self {
            n_chains,
            n_iter,
            n_warmup: n_iter,
            kernel: Kernel::Hamiltonian,
            target_accept: 0.8,
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_chains == 0 || self.n_iter == 0 || self.n_warmup == 0 {
            return Err(EvidenceError::InvalidArgument(
                "n_chains, n_iter and n_warmup must be positive".into(),
            ));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(EvidenceError::InvalidArgument(
                "target_accept must be in (0,1)".into(),
            ));
        }
        if self.hmc_leapfrog_steps == 0 {
            return Err(EvidenceError::InvalidArgument(
                "hmc_leapfrog_steps must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Post-warmup draws from a multi-chain run, laid out `[chain][iter][dim]`.
#[derive(Debug, Clone)]
pub struct ChainSet {
    pub draws: Vec<Vec<Vec<f64>>>,
    pub accept_rate: Vec<f64>,
    pub seed_used: u64,
}

impl ChainSet {
    pub fn n_chains(&self) -> usize {
        self.draws.len()
    }

    pub fn n_iter(&self) -> usize {
        self.draws.first().map_or(0, |c| c.len())
    }

    pub fn dim(&self) -> usize {
        self.draws
            .first()
            .and_then(|c| c.first())
            .map_or(0, |d| d.len())
    }

    /// All draws pooled across chains (chain-major order).
    pub fn pooled(&self) -> Vec<Vec<f64>> {
        self.draws.iter().flatten().cloned().collect()
    }

    /// Per-chain scalar series obtained by mapping each draw.
    pub fn map_scalar<F: Fn(&[f64]) -> f64>(&self, f: F) -> Vec<Vec<f64>> {
        self.draws
            .iter()
            .map(|chain| chain.iter().map(|x| f(x)).collect())
            .collect()
    }

    /// Per-dimension scalar chains (for diagnostics).
    pub fn dimension_chains(&self, d: usize) -> Vec<Vec<f64>> {
        self.draws
            .iter()
            .map(|chain| chain.iter().map(|x| x[d]).collect())
            .collect()
    }
}

/// Per-lambda MCMC expectation of the log-ratio with uncertainty.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExpectationEstimate {
    pub lambda: f64,
    /// mean of log q/q_ref in nats
    pub mean: f64,
    pub variance: f64,
    /// Monte Carlo standard error (batch means)
    pub mcse: f64,
    pub n_draws: usize,
    /// false when any dimension of the tempered run fails the Rhat gate
    pub converged: bool,
    /// per-dimension split-Rhat of the tempered run
    pub rhat: Vec<f64>,
}

pub(crate) fn chain_seed(seed: u64, chain: usize) -> u64 {
    mix_seed(&[seed, 0xC0FFEE, chain as u64])
}

fn initial_point<R: Rng>(density: &Density, rng: &mut R) -> Result<(Vec<f64>, f64)> {
    let d = density.dim();
    let base: Vec<f64> = match density.init_hint() {
        Some(h) => h.to_vec(),
        None => density
            .space()
            .lower_bounds()
            .iter()
            .map(|b| match b {
                Some(lo) => lo + 1.0,
                None => 0.0,
            })
            .collect(),
    };
    let scale: Vec<f64> = density
        .scale_hint()
        .map(|s| s.to_vec())
        .unwrap_or_else(|| vec![1.0; d]);
    for _ in 0..100 {
        let cand: Vec<f64> = (0..d)
            .map(|i| base[i] + 0.1 * scale[i] * sample_standard_normal(rng))
            .collect();
        let lq = density.log_q(&cand);
        if lq.is_finite() {
            return Ok((cand, lq));
        }
    }
    // the hint itself as a last resort
    let lq = density.log_q(&base);
    if lq.is_finite() {
        return Ok((base, lq));
    }
    Err(EvidenceError::InitializationFailed(
        "no finite-log-density start point after 100 jittered tries".into(),
    ))
}

/// Draw `n_chains x n_iter` post-warmup samples from `density`.
///
/// Identical `(density, config)` pairs produce bit-identical draws.
pub fn sample(density: &Density, config: &SamplerConfig) -> Result<ChainSet> {
    config.validate()?;
    let results: Vec<Result<(Vec<Vec<f64>>, f64)>> = (0..config.n_chains)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha12Rng::seed_from_u64(chain_seed(config.seed, c));
            let (x0, lq0) = initial_point(density, &mut rng)?;
            match config.kernel {
                Kernel::AdaptiveRandomWalk => rwm::run_chain(density, config, x0, lq0, &mut rng),
                Kernel::Hamiltonian => hmc::run_chain(density, config, x0, lq0, &mut rng),
            }
        })
        .collect();
    let mut draws = Vec::with_capacity(config.n_chains);
    let mut accept = Vec::with_capacity(config.n_chains);
    for r in results {
        let (d, a) = r?;
        draws.push(d);
        accept.push(a);
    }
    Ok(ChainSet {
        draws,
        accept_rate: accept,
        seed_used: config.seed,
    })
}

/// A full per-lambda expectation run: the estimate plus the per-chain
/// log-ratio series (for trace emission).
#[derive(Debug, Clone)]
pub struct ExpectationRun {
    pub estimate: ExpectationEstimate,
    pub ratio_chains: Vec<Vec<f64>>,
}

pub fn expectation_run(
    target: &Density,
    reference: &Density,
    lambda: f64,
    config: &SamplerConfig,
) -> Result<ExpectationRun> {
    let path = TemperedDensity::new(target.clone(), reference.clone(), lambda)?;
    let tempered = path.as_density();
    let chains = sample(&tempered, config)?;
    let ratio_chains = chains.map_scalar(|x| {
        log_ratio(target, reference, x).expect("draw inside common support")
    });
    let pooled: Vec<f64> = ratio_chains.iter().flatten().copied().collect();
    let m = mean(&pooled);
    let var = sample_variance(&pooled);
    // independent chains: SE of the grand mean from per-chain batch means
    let mcse = {
        let per_chain: Vec<f64> = ratio_chains.iter().map(|c| batch_means_se(c)).collect();
        let k = per_chain.len() as f64;
        (per_chain.iter().map(|se| se * se).sum::<f64>()).sqrt() / k
    };
    let diag = compute_rhat(&chains)?;
    let converged = diag.rhat.iter().all(|&r| r.is_finite() && r <= RHAT_GATE);
    Ok(ExpectationRun {
        estimate: ExpectationEstimate {
            lambda,
            mean: m,
            variance: var,
            mcse,
            n_draws: pooled.len(),
            converged,
            rhat: diag.rhat,
        },
        ratio_chains,
    })
}

/// Mean of `log q/q_ref` under the tempered density at `lambda`.
pub fn expectation_of_log_ratio(
    target: &Density,
    reference: &Density,
    lambda: f64,
    config: &SamplerConfig,
) -> Result<ExpectationEstimate> {
    Ok(expectation_run(target, reference, lambda, config)?.estimate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::ParamSpace;
    use approx::assert_relative_eq;

    fn std_gaussian() -> Density {
        Density::new(ParamSpace::unbounded(1), |t: &[f64]| -0.5 * t[0] * t[0])
            .with_gradient(|t: &[f64]| vec![-t[0]])
            .with_init_hint(vec![0.0])
            .with_scale_hint(vec![1.0])
    }

    #[test]
    fn gaussian_moments_recovered() {
        let cfg = SamplerConfig::new(4, 5000).with_seed(7);
        let chains = sample(&std_gaussian(), &cfg).unwrap();
        let pooled: Vec<f64> = chains.pooled().iter().map(|x| x[0]).collect();
        let m = mean(&pooled);
        let v = sample_variance(&pooled);
        let se = (v / (pooled.len() as f64 / 20.0)).sqrt(); // crude ess guess
        assert!(m.abs() < 3.0 * se.max(0.02), "mean {m} too far from 0");
        assert!((v - 1.0).abs() < 0.05, "variance {v} not within 5% of 1");
    }

    #[test]
    fn support_is_respected() {
        let space = ParamSpace::new(vec!["x", "y"], vec![Some(0.0), None]).unwrap();
        let d = Density::new(space, |t: &[f64]| -0.5 * (t[0] * t[0] + t[1] * t[1]))
            .with_init_hint(vec![0.5, 0.0]);
        let cfg = SamplerConfig::new(2, 2000).with_seed(3);
        let chains = sample(&d, &cfg).unwrap();
        assert!(chains.pooled().iter().all(|x| x[0] >= 0.0));
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let cfg = SamplerConfig::new(2, 500).with_seed(42);
        let a = sample(&std_gaussian(), &cfg).unwrap();
        let b = sample(&std_gaussian(), &cfg).unwrap();
        assert_eq!(a.draws, b.draws);
        let c = sample(&std_gaussian(), &cfg.clone().with_seed(43)).unwrap();
        assert_ne!(a.draws, c.draws);
    }

    #[test]
    fn hamiltonian_kernel_samples_gaussian() {
        let cfg = SamplerConfig::hamiltonian(4, 2000).with_seed(11);
        let chains = sample(&std_gaussian(), &cfg).unwrap();
        let pooled: Vec<f64> = chains.pooled().iter().map(|x| x[0]).collect();
        assert!(mean(&pooled).abs() < 0.05);
        assert!((sample_variance(&pooled) - 1.0).abs() < 0.06);
        let d = compute_rhat(&chains).unwrap();
        assert!(d.rhat[0] < 1.02);
    }

    #[test]
    fn expectation_zero_for_identical_densities() {
        let d = std_gaussian();
        let cfg = SamplerConfig::new(2, 500).with_seed(5);
        for lam in [0.0, 0.5, 1.0] {
            let e = expectation_of_log_ratio(&d, &d.clone(), lam, &cfg).unwrap();
            assert_relative_eq!(e.mean, 0.0);
            assert_relative_eq!(e.variance, 0.0);
        }
    }

    #[test]
    fn expectation_constant_for_scaled_reference() {
        let d = std_gaussian();
        let r = d.scaled(-1.0); // target = e^1 * reference
        let cfg = SamplerConfig::new(2, 500).with_seed(5);
        for lam in [0.0, 0.3, 1.0] {
            let e = expectation_of_log_ratio(&d, &r, lam, &cfg).unwrap();
            assert_relative_eq!(e.mean, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn seed_isolation_between_chains() {
        let cfg = SamplerConfig::new(2, 10_000).with_seed(17);
        let chains = sample(&std_gaussian(), &cfg).unwrap();
        let a: Vec<f64> = chains.draws[0].iter().map(|x| x[0]).collect();
        let b: Vec<f64> = chains.draws[1].iter().map(|x| x[0]).collect();
        let ma = mean(&a);
        let mb = mean(&b);
        let cov = a
            .iter()
            .zip(&b)
            .map(|(x, y)| (x - ma) * (y - mb))
            .sum::<f64>()
            / (a.len() - 1) as f64;
        let rho = cov / (sample_variance(&a) * sample_variance(&b)).sqrt();
        assert!(rho.abs() < 0.05, "cross-chain correlation {rho}");
    }

    #[test]
    fn initialization_failure_is_reported() {
        // empty support
        let d = Density::new(ParamSpace::unbounded(1), |_: &[f64]| f64::NEG_INFINITY);
        let cfg = SamplerConfig::new(1, 10).with_seed(1);
        assert!(matches!(
            sample(&d, &cfg),
            Err(EvidenceError::InitializationFailed(_))
        ));
    }
}
