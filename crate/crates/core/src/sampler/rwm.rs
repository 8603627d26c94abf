//! Adaptive random-walk Metropolis (Haario-style covariance adaptation with
//! a globally adapted scale). Adaptation runs during warmup only and is
//! frozen afterwards.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;

use crate::density::Density;
use crate::error::Result;
use crate::oracle::sample_standard_normal;
use crate::sampler::SamplerConfig;

/// Running mean / scatter accumulator (Welford, matrix form).
struct RunningCov {
    n: usize,
    mean: DVector<f64>,
    scatter: DMatrix<f64>,
}

impl RunningCov {
    fn new(d: usize) -> Self {
        Self {
            n: 0,
            mean: DVector::zeros(d),
            scatter: DMatrix::zeros(d, d),
        }
    }

    fn push(&mut self, x: &[f64]) {
        self.n += 1;
        let xv = DVector::from_column_slice(x);
        let delta = &xv - &self.mean;
        self.mean += &delta / self.n as f64;
        let delta2 = &xv - &self.mean;
        self.scatter += &delta * delta2.transpose();
    }

    fn covariance(&self) -> Option<DMatrix<f64>> {
        if self.n < 2 {
            return None;
        }
        Some(&self.scatter / (self.n - 1) as f64)
    }
}

fn proposal_cholesky(
    cov: &DMatrix<f64>,
    fallback_diag: &[f64],
) -> Cholesky<f64, Dyn> {
    let d = cov.nrows();
    let mut reg = cov.clone();
    let tr = (0..d).map(|i| reg[(i, i)]).sum::<f64>() / d as f64;
    let jitter = (1e-10 * tr).max(1e-300);
    for i in 0..d {
        reg[(i, i)] += jitter;
    }
    match Cholesky::new(reg) {
        Some(ch) => ch,
        None => diag_cholesky(fallback_diag),
    }
}

fn diag_cholesky(diag: &[f64]) -> Cholesky<f64, Dyn> {
    let d = diag.len();
    let mut m = DMatrix::zeros(d, d);
    for i in 0..d {
        m[(i, i)] = diag[i].max(1e-300);
    }
    Cholesky::new(m).expect("diagonal PD")
}

pub(super) fn run_chain<R: Rng>(
    density: &Density,
    config: &SamplerConfig,
    x0: Vec<f64>,
    lq0: f64,
    rng: &mut R,
) -> Result<(Vec<Vec<f64>>, f64)> {
    let d = density.dim();
    let base_scale: Vec<f64> = density
        .scale_hint()
        .map(|s| s.iter().map(|x| (x * x).max(1e-300)).collect())
        .unwrap_or_else(|| vec![1.0; d]);

    let opt_scale = 2.38 * 2.38 / d as f64;
    let mut chol = diag_cholesky(&base_scale);
    // global log-scale, Robbins-Monro adapted toward target_accept
    let mut log_s = (0.1_f64).ln();
    let mut acc = RunningCov::new(d);

    let mut x = x0;
    let mut lq = lq0;
    let mut z = vec![0.0; d];
    let mut accepted_post = 0usize;

    let total = config.n_warmup + config.n_iter;
    let mut out = Vec::with_capacity(config.n_iter);

    for it in 0..total {
        let warmup = it < config.n_warmup;
        for zi in z.iter_mut() {
            *zi = sample_standard_normal(rng);
        }
        let step = chol.l() * DVector::from_column_slice(&z);
        let s = log_s.exp();
        let prop: Vec<f64> = x.iter().zip(step.iter()).map(|(xi, di)| xi + s * di).collect();
        let lq_prop = density.log_q(&prop);
        let log_alpha = lq_prop - lq;
        let alpha = if log_alpha.is_nan() {
            0.0
        } else {
            log_alpha.exp().min(1.0)
        };
        let u: f64 = rng.gen();
        if u < alpha {
            x = prop;
            lq = lq_prop;
            if !warmup {
                accepted_post += 1;
            }
        }
        if warmup {
            // scale adaptation every iteration, covariance refresh periodically
            let gamma = 1.0 / (1.0 + it as f64).powf(0.6);
            log_s += gamma * (alpha - config.target_accept);
            acc.push(&x);
            if it >= 2 * d + 10 && (it + 1) % 100 == 0 {
                if let Some(cov) = acc.covariance() {
                    chol = proposal_cholesky(&(cov * opt_scale), &base_scale);
                }
            }
        } else {
            out.push(x.clone());
        }
    }

    let rate = accepted_post as f64 / config.n_iter as f64;
    Ok((out, rate))
}
