//! Hamiltonian kernel: fixed-length leapfrog trajectories with dual-averaged
//! step size and a diagonal mass matrix re-estimated mid-warmup. For smooth
//! targets only; cusped densities should use the random-walk kernel.

use rand::Rng;

use crate::density::Density;
use crate::error::Result;
use crate::oracle::sample_standard_normal;
use crate::sampler::SamplerConfig;

struct DualAveraging {
    mu: f64,
    log_eps: f64,
    log_eps_bar: f64,
    h_bar: f64,
    t: f64,
}

impl DualAveraging {
    const GAMMA: f64 = 0.05;
    const T0: f64 = 10.0;
    const KAPPA: f64 = 0.75;

    fn new(eps0: f64) -> Self {
        Self {
            mu: (10.0 * eps0).ln(),
            log_eps: eps0.ln(),
            log_eps_bar: eps0.ln(),
            h_bar: 0.0,
            t: 0.0,
        }
    }

    fn update(&mut self, alpha: f64, target: f64) {
        self.t += 1.0;
        let frac = 1.0 / (self.t + Self::T0);
        self.h_bar = (1.0 - frac) * self.h_bar + frac * (target - alpha);
        self.log_eps = self.mu - self.t.sqrt() / Self::GAMMA * self.h_bar;
        let w = self.t.powf(-Self::KAPPA);
        self.log_eps_bar = w * self.log_eps + (1.0 - w) * self.log_eps_bar;
    }

    fn current(&self) -> f64 {
        self.log_eps.exp()
    }

    fn settled(&self) -> f64 {
        self.log_eps_bar.exp()
    }
}

/// One leapfrog trajectory; returns (x', lq', accept_prob).
/// A step into a `-inf` region aborts the trajectory (rejection).
fn trajectory(
    density: &Density,
    x: &[f64],
    lq: f64,
    p0: &[f64],
    m_inv: &[f64],
    eps: f64,
    steps: usize,
) -> (Vec<f64>, f64, f64) {
    let kinetic =
        |p: &[f64]| 0.5 * p.iter().zip(m_inv).map(|(pi, mi)| pi * pi * mi).sum::<f64>();
    let h0 = -lq + kinetic(p0);

    let mut q = x.to_vec();
    let mut p = p0.to_vec();
    let mut grad = density.gradient_at(&q);
    for _ in 0..steps {
        for i in 0..q.len() {
            p[i] += 0.5 * eps * grad[i];
        }
        for i in 0..q.len() {
            q[i] += eps * m_inv[i] * p[i];
        }
        let lq_new = density.log_q(&q);
        if lq_new == f64::NEG_INFINITY || lq_new.is_nan() {
            return (x.to_vec(), lq, 0.0);
        }
        grad = density.gradient_at(&q);
        if grad.iter().any(|g| !g.is_finite()) {
            return (x.to_vec(), lq, 0.0);
        }
        for i in 0..q.len() {
            p[i] += 0.5 * eps * grad[i];
        }
    }
    let lq_new = density.log_q(&q);
    let h1 = -lq_new + kinetic(&p);
    let alpha = if (h0 - h1).is_nan() {
        0.0
    } else {
        (h0 - h1).exp().min(1.0)
    };
    (q, lq_new, alpha)
}

fn draw_momentum<R: Rng>(m_inv: &[f64], rng: &mut R) -> Vec<f64> {
    m_inv
        .iter()
        .map(|mi| sample_standard_normal(rng) / mi.sqrt().max(1e-150))
        .collect()
}

/// Bracket a sensible starting step size: double/halve until the one-step
/// acceptance probability crosses 1/2.
fn find_initial_eps<R: Rng>(
    density: &Density,
    x: &[f64],
    lq: f64,
    m_inv: &[f64],
    rng: &mut R,
) -> f64 {
    let mut eps = 0.1;
    let p = draw_momentum(m_inv, rng);
    let (_, _, a0) = trajectory(density, x, lq, &p, m_inv, eps, 1);
    let going_up = a0 > 0.5;
    for _ in 0..40 {
        eps *= if going_up { 2.0 } else { 0.5 };
        let (_, _, a) = trajectory(density, x, lq, &p, m_inv, eps, 1);
        if (a > 0.5) != going_up {
            break;
        }
        if !(1e-10..=1e4).contains(&eps) {
            break;
        }
    }
    eps.clamp(1e-10, 1e4)
}

pub(super) fn run_chain<R: Rng>(
    density: &Density,
    config: &SamplerConfig,
    x0: Vec<f64>,
    lq0: f64,
    rng: &mut R,
) -> Result<(Vec<Vec<f64>>, f64)> {
    let d = density.dim();
    let mut m_inv: Vec<f64> = density
        .scale_hint()
        .map(|s| s.iter().map(|x| (x * x).max(1e-12)).collect())
        .unwrap_or_else(|| vec![1.0; d]);

    let mut x = x0;
    let mut lq = lq0;
    let mut da = DualAveraging::new(find_initial_eps(density, &x, lq, &m_inv, rng));

    // re-estimate the diagonal mass matrix from the middle of warmup
    let mass_window_start = config.n_warmup / 4;
    let mass_window_end = (3 * config.n_warmup) / 4;
    let mut window: Vec<Vec<f64>> = Vec::new();

    let total = config.n_warmup + config.n_iter;
    let mut out = Vec::with_capacity(config.n_iter);
    let mut accepted = 0usize;
    let mut eps = da.current();

    for it in 0..total {
        let warmup = it < config.n_warmup;
        let p = draw_momentum(&m_inv, rng);
        let (xn, lqn, alpha) = trajectory(
            density,
            &x,
            lq,
            &p,
            &m_inv,
            eps,
            config.hmc_leapfrog_steps,
        );
        let u: f64 = rng.gen();
        if u < alpha {
            x = xn;
            lq = lqn;
            if !warmup {
                accepted += 1;
            }
        }
        if warmup {
            da.update(alpha, config.target_accept);
            eps = da.current().clamp(1e-12, 1e6);
            if it >= mass_window_start && it < mass_window_end {
                window.push(x.clone());
            }
            if it + 1 == mass_window_end && window.len() >= 8 {
                for i in 0..d {
                    let col: Vec<f64> = window.iter().map(|w| w[i]).collect();
                    let v = crate::math::sample_variance(&col);
                    if v.is_finite() && v > 0.0 {
                        m_inv[i] = v + 1e-10;
                    }
                }
                window.clear();
                da = DualAveraging::new(find_initial_eps(density, &x, lq, &m_inv, rng));
                eps = da.current();
            }
            if it + 1 == config.n_warmup {
                eps = da.settled().clamp(1e-12, 1e6);
            }
        } else {
            out.push(x.clone());
        }
    }
    Ok((out, accepted as f64 / config.n_iter as f64))
}
