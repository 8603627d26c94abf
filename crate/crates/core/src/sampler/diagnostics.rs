//! Split-chain potential scale reduction and effective sample size.

use serde::{Deserialize, Serialize};

use crate::error::{EvidenceError, Result};
use crate::math::{mean, sample_variance};
use crate::sampler::ChainSet;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Diagnostics {
    pub rhat: Vec<f64>,
    pub ess: Vec<f64>,
    /// dimensions whose chains were all constant (Rhat reported as 1)
    pub zero_variance: Vec<bool>,
}

/// Split each chain in half and compute the classic potential scale
/// reduction over the resulting 2m chains. Constant chains report 1.0.
pub fn split_rhat_scalar(chains: &[Vec<f64>]) -> f64 {
    let mut split: Vec<&[f64]> = Vec::with_capacity(chains.len() * 2);
    let n = chains.iter().map(|c| c.len()).min().unwrap_or(0);
    let half = n / 2;
    if half < 2 {
        return f64::NAN;
    }
    for c in chains {
        split.push(&c[..half]);
        split.push(&c[n - half..n]);
    }
    let means: Vec<f64> = split.iter().map(|c| mean(c)).collect();
    let vars: Vec<f64> = split.iter().map(|c| sample_variance(c)).collect();
    let w = mean(&vars);
    let b = half as f64 * sample_variance(&means);
    if w <= 0.0 {
        return if b <= 0.0 { 1.0 } else { f64::INFINITY };
    }
    let var_plus = (half as f64 - 1.0) / half as f64 * w + b / half as f64;
    // small-sample noise can push the ratio below 1; report the floor
    (var_plus / w).sqrt().max(1.0)
}

/// Effective sample size via the initial-positive-sequence autocorrelation
/// sum over split chains (combined-chain variance in the denominator).
pub fn ess_scalar(chains: &[Vec<f64>]) -> f64 {
    let n = chains.iter().map(|c| c.len()).min().unwrap_or(0);
    let m = chains.len();
    if n < 4 || m == 0 {
        return f64::NAN;
    }
    let chain_means: Vec<f64> = chains.iter().map(|c| mean(&c[..n])).collect();
    let chain_vars: Vec<f64> = chains.iter().map(|c| sample_variance(&c[..n])).collect();
    let w = mean(&chain_vars);
    if w <= 0.0 {
        return f64::NAN;
    }
    let b_over_n = if m > 1 {
        sample_variance(&chain_means)
    } else {
        0.0
    };
    let var_plus = (n as f64 - 1.0) / n as f64 * w + b_over_n;

    // mean autocovariance across chains at each lag
    let acov = |lag: usize| -> f64 {
        let mut s = 0.0;
        for (c, &mu) in chains.iter().zip(&chain_means) {
            let mut a = 0.0;
            for i in 0..n - lag {
                a += (c[i] - mu) * (c[i + lag] - mu);
            }
            s += a / (n - lag) as f64;
        }
        s / m as f64
    };

    let mut tau = 1.0;
    let mut lag = 1;
    let max_lag = n - 2;
    while lag + 1 <= max_lag {
        let rho_a = 1.0 - (w - acov(lag)) / var_plus;
        let rho_b = 1.0 - (w - acov(lag + 1)) / var_plus;
        if rho_a + rho_b < 0.0 {
            break;
        }
        tau += 2.0 * (rho_a + rho_b);
        lag += 2;
        if lag > 2000 {
            break;
        }
    }
    (m * n) as f64 / tau.max(1.0 / (m * n) as f64)
}

/// Per-dimension split-Rhat and ESS for a chain set.
pub fn compute_rhat(chains: &ChainSet) -> Result<Diagnostics> {
    if chains.n_chains() < 2 {
        return Err(EvidenceError::InvalidArgument(
            "rhat needs at least 2 chains".into(),
        ));
    }
    if chains.n_iter() < 4 {
        return Err(EvidenceError::InvalidArgument(
            "rhat needs at least 4 draws per chain".into(),
        ));
    }
    let d = chains.dim();
    let mut rhat = Vec::with_capacity(d);
    let mut ess = Vec::with_capacity(d);
    let mut zero = Vec::with_capacity(d);
    for k in 0..d {
        let per_dim = chains.dimension_chains(k);
        let constant = per_dim
            .iter()
            .all(|c| c.iter().all(|&x| x == c[0]));
        if constant {
            rhat.push(1.0);
            ess.push(f64::NAN);
            zero.push(true);
        } else {
            rhat.push(split_rhat_scalar(&per_dim));
            ess.push(ess_scalar(&per_dim));
            zero.push(false);
        }
    }
    Ok(Diagnostics { rhat, ess, zero_variance: zero })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn iid_normal_chains(m: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
        (0..m)
            .map(|c| {
                let mut rng = ChaCha12Rng::seed_from_u64(seed + c as u64);
                (0..n)
                    .map(|_| crate::oracle::sample_standard_normal(&mut rng))
                    .collect()
            })
            .collect()
    }

    #[test]
    fn iid_chains_have_rhat_near_one() {
        let chains = iid_normal_chains(4, 2000, 99);
        let r = split_rhat_scalar(&chains);
        assert!((1.0..1.02).contains(&r), "rhat {r}");
        assert!(r >= 1.0);
        let e = ess_scalar(&chains);
        assert!(e > 4000.0, "iid ess should be near m*n, got {e}");
    }

    #[test]
    fn distinct_constant_chains_diverge() {
        let a = vec![1.0; 100];
        let b = vec![2.0; 100];
        let r = split_rhat_scalar(&[a, b]);
        assert!(r.is_infinite() || r > 10.0, "rhat {r} should blow up");
    }

    #[test]
    fn identical_constant_chains_report_one() {
        let chains = ChainSet {
            draws: vec![vec![vec![3.0]; 100], vec![vec![3.0]; 100]],
            accept_rate: vec![0.0, 0.0],
            seed_used: 0,
        };
        let d = compute_rhat(&chains).unwrap();
        assert_eq!(d.rhat[0], 1.0);
        assert!(d.zero_variance[0]);
    }

    #[test]
    fn single_chain_is_an_error() {
        let chains = ChainSet {
            draws: vec![vec![vec![0.0]; 50]],
            accept_rate: vec![0.5],
            seed_used: 0,
        };
        assert!(compute_rhat(&chains).is_err());
    }

    #[test]
    fn correlated_chains_have_lower_ess() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let mut chains = Vec::new();
        for _ in 0..4 {
            let mut x = 0.0;
            let mut c = Vec::with_capacity(2000);
            for _ in 0..2000 {
                x = 0.95 * x + crate::oracle::sample_standard_normal(&mut rng);
                c.push(x);
            }
            chains.push(c);
        }
        let e = ess_scalar(&chains);
        assert!(e < 1500.0, "AR(0.95) ess {e} should be far below 8000");
    }
}
