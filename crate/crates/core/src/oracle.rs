//! Independent ground-truth engines used by tests and acceptance runs:
//! deterministic adaptive quadrature for 1D/2D densities, the closed-form
//! conjugate evidence for the radiata regressions, and brute-force Monte
//! Carlo orthant checks.
//!
//! Nothing in this module may call into the sampler or the TI engine; these
//! are the arbiters the stochastic paths are checked against.

use std::sync::OnceLock;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::density::Density;
use crate::error::{EvidenceError, Result};
use crate::reference::GaussianReference;

#[derive(Debug, Clone, Copy)]
pub struct QuadratureResult {
    pub value: f64,
    pub abs_error_bound: f64,
    pub evaluations: u64,
}

/// Gauss-Legendre nodes and weights on [-1, 1], computed once by Newton
/// iteration on the Legendre recurrence.
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 1..=n {
        let mut x = (std::f64::consts::PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // evaluate P_n(x) and P'_n(x)
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((x, w));
    }
    out
}

fn g7() -> &'static [(f64, f64)] {
    static NODES: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    NODES.get_or_init(|| gauss_legendre(7))
}

fn g15() -> &'static [(f64, f64)] {
    static NODES: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    NODES.get_or_init(|| gauss_legendre(15))
}

/// One panel: 15-point Gauss value plus a 7-vs-15 error estimate.
fn panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, evals: &mut u64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut i7 = 0.0;
    for &(x, w) in g7() {
        i7 += w * f(c + h * x);
    }
    let mut i15 = 0.0;
    for &(x, w) in g15() {
        i15 += w * f(c + h * x);
    }
    *evals += 22;
    (h * i15, (h * (i15 - i7)).abs())
}

struct Adaptive<'a, F: Fn(f64) -> f64> {
    f: &'a F,
    value: f64,
    bound: f64,
    evals: u64,
    max_evals: u64,
    failed: bool,
}

impl<'a, F: Fn(f64) -> f64> Adaptive<'a, F> {
    fn run(&mut self, a: f64, b: f64, tol: f64, depth: u32) {
        if self.failed {
            return;
        }
        let (v, e) = panel(self.f, a, b, &mut self.evals);
        if e <= tol || depth >= 52 {
            if depth >= 52 && e > tol {
                self.failed = true;
            }
            self.value += v;
            self.bound += e;
            return;
        }
        if self.evals > self.max_evals {
            self.failed = true;
            return;
        }
        let c = 0.5 * (a + b);
        self.run(a, c, tol / 2.0, depth + 1);
        self.run(c, b, tol / 2.0, depth + 1);
    }
}

/// Adaptive quadrature of an arbitrary scalar function with optional interior
/// breakpoints (panels never straddle a breakpoint).
pub fn integrate_fn<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    tol: f64,
    breakpoints: &[f64],
) -> Result<QuadratureResult> {
    if !(b > a) || !a.is_finite() || !b.is_finite() {
        return Err(EvidenceError::InvalidArgument(format!(
            "bad integration domain [{a}, {b}]"
        )));
    }
    if !(tol > 0.0) {
        return Err(EvidenceError::InvalidArgument("tol must be positive".into()));
    }
    let mut cuts: Vec<f64> = vec![a];
    let mut interior: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&x| x > a && x < b)
        .collect();
    interior.sort_by(|p, q| p.partial_cmp(q).unwrap());
    cuts.extend(interior);
    cuts.push(b);

    let mut state = Adaptive {
        f: &f,
        value: 0.0,
        bound: 0.0,
        evals: 0,
        max_evals: 50_000_000,
        failed: false,
    };
    let nseg = cuts.len() - 1;
    for w in cuts.windows(2) {
        state.run(w[0], w[1], tol / nseg as f64, 0);
    }
    if state.failed {
        return Err(EvidenceError::QuadratureFailure(format!(
            "no convergence to tol {tol:.3e} within budget ({} evals)",
            state.evals
        )));
    }
    Ok(QuadratureResult {
        value: state.value,
        abs_error_bound: state.bound,
        evaluations: state.evals,
    })
}

/// Integral of `exp(log_q)` for a 1D density over `domain`.
///
/// The density's declared breakpoints (e.g. a cusp location) are honoured so
/// non-smooth points always sit on panel edges.
pub fn quadrature_1d(density: &Density, domain: (f64, f64), tol: f64) -> Result<QuadratureResult> {
    if density.dim() != 1 {
        return Err(EvidenceError::DimensionMismatch {
            expected: 1,
            got: density.dim(),
        });
    }
    let (a, b) = domain;
    // clip at a lower bound so the support edge is exact
    let a = match density.space().lower_bounds()[0] {
        Some(lo) => a.max(lo),
        None => a,
    };
    let d = density.clone();
    integrate_fn(
        move |x| {
            let lq = d.log_q(&[x]);
            if lq == f64::NEG_INFINITY {
                0.0
            } else {
                lq.exp()
            }
        },
        a,
        b,
        tol,
        density.breakpoints(),
    )
}

/// Iterated 2D quadrature of `exp(log_q)` over a rectangle, with any lower
/// bounds applied exactly on the integration domain (the orthant cut).
pub fn quadrature_2d(
    density: &Density,
    xdomain: (f64, f64),
    ydomain: (f64, f64),
    tol: f64,
) -> Result<QuadratureResult> {
    if density.dim() != 2 {
        return Err(EvidenceError::DimensionMismatch {
            expected: 2,
            got: density.dim(),
        });
    }
    let bounds = density.space().lower_bounds();
    let (xa, xb) = (
        match bounds[0] {
            Some(lo) => xdomain.0.max(lo),
            None => xdomain.0,
        },
        xdomain.1,
    );
    let (ya, yb) = (
        match bounds[1] {
            Some(lo) => ydomain.0.max(lo),
            None => ydomain.0,
        },
        ydomain.1,
    );
    if !(xb > xa) || !(yb > ya) {
        return Err(EvidenceError::InvalidArgument(
            "empty 2D integration domain after applying bounds".into(),
        ));
    }
    let inner_tol = tol / (4.0 * (xb - xa));
    let evals = std::sync::atomic::AtomicU64::new(0);
    let d = density.clone();
    let inner = |x: f64| -> f64 {
        let dd = d.clone();
        let r = integrate_fn(
            move |y| {
                let lq = dd.log_q(&[x, y]);
                if lq == f64::NEG_INFINITY {
                    0.0
                } else {
                    lq.exp()
                }
            },
            ya,
            yb,
            inner_tol,
            &[],
        )
        .expect("inner quadrature");
        evals.fetch_add(r.evaluations, std::sync::atomic::Ordering::Relaxed);
        r.value
    };
    let outer = integrate_fn(inner, xa, xb, tol / 2.0, &[])?;
    Ok(QuadratureResult {
        value: outer.value,
        abs_error_bound: outer.abs_error_bound + tol / 4.0,
        evaluations: outer.evaluations + evals.load(std::sync::atomic::Ordering::Relaxed),
    })
}

/// Closed-form log marginal likelihood of a radiata regression model under
/// its normal-gamma prior. Purely analytic; re-derives the ground truth from
/// whatever hyperparameters the model carries.
pub fn radiata_exact_log_evidence(model: &crate::models::radiata::RadiataModel) -> Result<f64> {
    model.exact_log_evidence()
}

#[derive(Debug, Clone, Copy)]
pub struct OrthantCheck {
    /// estimated normalising constant (z domain)
    pub estimate: f64,
    pub std_error: f64,
    pub inside_fraction: f64,
}

/// Brute-force check of a diagonal reference's orthant factor: the fraction
/// of `n` exact Gaussian draws inside the constrained region, times the
/// unconstrained normaliser.
pub fn mc_orthant_check(reference: &GaussianReference, n: u64, seed: u64) -> Result<OrthantCheck> {
    if !reference.is_diagonal() {
        return Err(EvidenceError::InvalidArgument(
            "mc_orthant_check requires a diagonal reference".into(),
        ));
    }
    let loc = reference.location();
    let sds = reference.marginal_sds();
    let bounds = reference.space().lower_bounds();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut inside: u64 = 0;
    for _ in 0..n {
        let mut ok = true;
        for i in 0..loc.len() {
            let z: f64 = sample_standard_normal(&mut rng);
            let x = loc[i] + sds[i] * z;
            if let Some(lo) = bounds[i] {
                if x < lo {
                    ok = false;
                    // keep consuming the remaining dims for stream stability
                }
            }
        }
        if ok {
            inside += 1;
        }
    }
    let frac = inside as f64 / n as f64;
    let unconstrained = reference.log_zref_unconstrained().exp();
    let se = unconstrained * (frac * (1.0 - frac) / n as f64).sqrt();
    Ok(OrthantCheck {
        estimate: unconstrained * frac,
        std_error: se,
        inside_fraction: frac,
    })
}

/// Box-Muller standard normal; deterministic for a given RNG stream.
pub(crate) fn sample_standard_normal<R: Rng>(rng: &mut R) -> f64 {
    // rand_distr would be the usual choice; this avoids the extra dependency
    // and keeps the draw count per variate fixed at two u64s.
    loop {
        let u1: f64 = rng.gen::<f64>();
        let u2: f64 = rng.gen::<f64>();
        if u1 > f64::MIN_POSITIVE {
            let r = (-2.0 * u1.ln()).sqrt();
            return r * (2.0 * std::f64::consts::PI * u2).cos();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::ParamSpace;
    use approx::assert_relative_eq;

    fn std_gaussian_1d() -> Density {
        Density::new(ParamSpace::unbounded(1), |t: &[f64]| -0.5 * t[0] * t[0])
    }

    #[test]
    fn standard_gaussian_normalizer() {
        let d = std_gaussian_1d();
        let r = quadrature_1d(&d, (-40.0, 40.0), 1e-12).unwrap();
        assert_relative_eq!(r.value, (2.0 * std::f64::consts::PI).sqrt(), epsilon = 1e-10);
    }

    #[test]
    fn refining_tol_stays_within_old_bound() {
        let d = std_gaussian_1d();
        let coarse = quadrature_1d(&d, (-20.0, 20.0), 1e-4).unwrap();
        let fine = quadrature_1d(&d, (-20.0, 20.0), 5e-5).unwrap();
        assert!((coarse.value - fine.value).abs() <= coarse.abs_error_bound.max(1e-12));
        assert!(fine.abs_error_bound <= coarse.abs_error_bound + 1e-15);
    }

    #[test]
    fn separable_2d_is_product_of_1d() {
        let d2 = Density::new(ParamSpace::unbounded(2), |t: &[f64]| {
            -0.5 * t[0] * t[0] - 0.5 * t[1] * t[1] / 4.0
        });
        let r = quadrature_2d(&d2, (-30.0, 30.0), (-60.0, 60.0), 1e-9).unwrap();
        let expect = (2.0 * std::f64::consts::PI).sqrt() * (2.0 * std::f64::consts::PI * 4.0).sqrt();
        assert_relative_eq!(r.value, expect, epsilon = 1e-9);
    }

    #[test]
    fn orthant_cut_is_exact() {
        let space = ParamSpace::new(vec!["a", "b"], vec![Some(0.0), None]).unwrap();
        let d = Density::new(space, |t: &[f64]| -0.5 * t[0] * t[0] - 0.5 * t[1] * t[1]);
        let r = quadrature_2d(&d, (-30.0, 30.0), (-30.0, 30.0), 1e-10).unwrap();
        assert_relative_eq!(r.value, std::f64::consts::PI, epsilon = 1e-9);
    }

    #[test]
    fn bad_domain_errors() {
        let d = std_gaussian_1d();
        assert!(quadrature_1d(&d, (1.0, 1.0), 1e-8).is_err());
        assert!(quadrature_1d(&d, (f64::NEG_INFINITY, 1.0), 1e-8).is_err());
    }
}
