use std::sync::Arc;

use crate::error::{EvidenceError, Result};
use crate::space::ParamSpace;

type LogQFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type GradFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// An evaluatable un-normalised log-density over a [`ParamSpace`].
///
/// Evaluations outside the space's support return `-inf`, so samplers reject
/// out-of-bounds proposals naturally. The gradient is optional; callers fall
/// back to central finite differences when it is absent.
///
/// Evaluation is pure and safe to call from concurrent workers.
#[derive(Clone)]
pub struct Density {
    space: ParamSpace,
    log_q: Arc<LogQFn>,
    gradient: Option<Arc<GradFn>>,
    init_hint: Option<Vec<f64>>,
    scale_hint: Option<Vec<f64>>,
    breakpoints: Vec<f64>,
}

impl std::fmt::Debug for Density {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Density")
            .field("space", &self.space)
            .field("has_gradient", &self.gradient.is_some())
            .finish()
    }
}

impl Density {
    pub fn new<F>(space: ParamSpace, log_q: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self {
            space,
            log_q: Arc::new(log_q),
            gradient: None,
            init_hint: None,
            scale_hint: None,
            breakpoints: Vec::new(),
        }
    }

    pub fn with_gradient<G>(mut self, gradient: G) -> Self
    where
        G: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        self.gradient = Some(Arc::new(gradient));
        self
    }

    /// Suggested chain starting point (e.g. a mode or reference location).
    pub fn with_init_hint(mut self, hint: Vec<f64>) -> Self {
        assert_eq!(hint.len(), self.space.dim());
        self.init_hint = Some(hint);
        self
    }

    /// Per-dimension scale guess used to seed proposal covariances.
    pub fn with_scale_hint(mut self, hint: Vec<f64>) -> Self {
        assert_eq!(hint.len(), self.space.dim());
        self.scale_hint = Some(hint);
        self
    }

    /// Known non-smooth points (1D) that quadrature should split at.
    pub fn with_breakpoints(mut self, pts: Vec<f64>) -> Self {
        self.breakpoints = pts;
        self
    }

    pub fn space(&self) -> &ParamSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn init_hint(&self) -> Option<&[f64]> {
        self.init_hint.as_deref()
    }

    pub fn scale_hint(&self) -> Option<&[f64]> {
        self.scale_hint.as_deref()
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn has_gradient(&self) -> bool {
        self.gradient.is_some()
    }

    /// Un-normalised log-density; `-inf` outside the support.
    pub fn log_q(&self, theta: &[f64]) -> f64 {
        assert_eq!(
            theta.len(),
            self.space.dim(),
            "density evaluated with wrong dimension"
        );
        if !self.space.contains_unchecked(theta) {
            return f64::NEG_INFINITY;
        }
        (self.log_q)(theta)
    }

    /// Gradient of `log_q`: analytic when supplied, otherwise central finite
    /// differences with step `~cbrt(eps) * (1 + |x|)`.
    pub fn gradient_at(&self, theta: &[f64]) -> Vec<f64> {
        if let Some(g) = &self.gradient {
            assert_eq!(theta.len(), self.space.dim());
            return g(theta);
        }
        self.fd_gradient(theta)
    }

    /// Central finite-difference gradient, regardless of the analytic one.
    /// The step is scaled per dimension by the scale hint when present, so
    /// coordinates with tiny natural scales (e.g. precisions ~1e-5) stay in
    /// the quadratic regime.
    pub fn fd_gradient(&self, theta: &[f64]) -> Vec<f64> {
        let h0 = f64::EPSILON.cbrt();
        let mut work = theta.to_vec();
        let mut grad = vec![0.0; theta.len()];
        for i in 0..theta.len() {
            let s = self
                .scale_hint
                .as_ref()
                .map(|s| s[i])
                .unwrap_or(1.0)
                .max(1e-12);
            let h = h0 * (s + theta[i].abs());
            let x = theta[i];
            work[i] = x + h;
            let fp = self.log_q(&work);
            work[i] = x - h;
            let fm = self.log_q(&work);
            work[i] = x;
            grad[i] = (fp - fm) / (2.0 * h);
        }
        grad
    }

    /// The same density scaled by `exp(c)` (adds `c` to every log value).
    pub fn scaled(&self, c: f64) -> Density {
        let inner = self.clone();
        let mut d = Density::new(self.space.clone(), move |t: &[f64]| inner.log_q(t) + c);
        if let Some(g) = &self.gradient {
            let g = Arc::clone(g);
            d.gradient = Some(g);
        }
        d.init_hint = self.init_hint.clone();
        d.scale_hint = self.scale_hint.clone();
        d.breakpoints = self.breakpoints.clone();
        d
    }
}

/// Geometric tempered path between a target and a reference density.
///
/// `log q(lambda; theta) = lambda*log q(theta) + (1-lambda)*log q_ref(theta)`.
/// Both endpoints must live on the same `ParamSpace`; mismatches are rejected
/// at construction. The support of the path is the intersection of the
/// endpoint supports: the value is `-inf` as soon as either endpoint is.
#[derive(Clone, Debug)]
pub struct TemperedDensity {
    target: Density,
    reference: Density,
    lambda: f64,
}

impl TemperedDensity {
    pub fn new(target: Density, reference: Density, lambda: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) || lambda.is_nan() {
            return Err(EvidenceError::InvalidArgument(format!(
                "lambda must be in [0,1], got {lambda}"
            )));
        }
        if target.space() != reference.space() {
            return Err(EvidenceError::InvalidArgument(
                "target and reference parameter spaces differ".into(),
            ));
        }
        Ok(Self { target, reference, lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn target(&self) -> &Density {
        &self.target
    }

    pub fn reference(&self) -> &Density {
        &self.reference
    }

    pub fn log_tempered(&self, theta: &[f64]) -> f64 {
        let lt = self.target.log_q(theta);
        let lr = self.reference.log_q(theta);
        if lt == f64::NEG_INFINITY || lr == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        // exact endpoint recovery: avoid 0 * finite rounding entirely
        if self.lambda == 0.0 {
            lr
        } else if self.lambda == 1.0 {
            lt
        } else {
            self.lambda * lt + (1.0 - self.lambda) * lr
        }
    }

    /// View the tempered path as a plain density (for the sampler).
    pub fn as_density(&self) -> Density {
        let this = self.clone();
        let mut d = Density::new(self.target.space().clone(), move |t: &[f64]| {
            this.log_tempered(t)
        });
        if self.target.has_gradient() || self.reference.has_gradient() {
            let tgt = self.target.clone();
            let rf = self.reference.clone();
            let lam = self.lambda;
            d = d.with_gradient(move |t: &[f64]| {
                let gt = tgt.gradient_at(t);
                let gr = rf.gradient_at(t);
                gt.iter()
                    .zip(&gr)
                    .map(|(a, b)| lam * a + (1.0 - lam) * b)
                    .collect()
            });
        }
        if let Some(h) = self.reference.init_hint() {
            d = d.with_init_hint(h.to_vec());
        } else if let Some(h) = self.target.init_hint() {
            d = d.with_init_hint(h.to_vec());
        }
        if let Some(s) = self.reference.scale_hint() {
            d = d.with_scale_hint(s.to_vec());
        } else if let Some(s) = self.target.scale_hint() {
            d = d.with_scale_hint(s.to_vec());
        }
        d
    }
}

/// `log q(theta) - log q_ref(theta)`; errors if either endpoint is `-inf`
/// (or otherwise non-finite) at `theta`.
pub fn log_ratio(target: &Density, reference: &Density, theta: &[f64]) -> Result<f64> {
    let lt = target.log_q(theta);
    let lr = reference.log_q(theta);
    if !lt.is_finite() || !lr.is_finite() {
        return Err(EvidenceError::OutsideSupport);
    }
    Ok(lt - lr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn std_gaussian() -> Density {
        Density::new(ParamSpace::unbounded(1), |t: &[f64]| -0.5 * t[0] * t[0])
    }

    fn half_gaussian() -> Density {
        let space = ParamSpace::new(vec!["x"], vec![Some(0.0)]).unwrap();
        Density::new(space, |t: &[f64]| -0.5 * t[0] * t[0])
    }

    #[test]
    fn out_of_support_is_neg_inf() {
        let d = half_gaussian();
        assert_eq!(d.log_q(&[-0.1]), f64::NEG_INFINITY);
        assert!(d.log_q(&[0.1]).is_finite());
    }

    #[test]
    fn tempered_endpoints_recover_exactly() {
        let target = std_gaussian();
        let reference = Density::new(ParamSpace::unbounded(1), |t: &[f64]| {
            -0.25 * t[0] * t[0] - 1.0
        });
        for &x in &[-2.0, 0.3, 5.0] {
            let p0 = TemperedDensity::new(target.clone(), reference.clone(), 0.0).unwrap();
            let p1 = TemperedDensity::new(target.clone(), reference.clone(), 1.0).unwrap();
            assert_eq!(p0.log_tempered(&[x]), reference.log_q(&[x]));
            assert_eq!(p1.log_tempered(&[x]), target.log_q(&[x]));
        }
    }

    #[test]
    fn tempered_is_affine_in_lambda() {
        let target = std_gaussian();
        let reference = Density::new(ParamSpace::unbounded(1), |t: &[f64]| {
            -0.125 * t[0] * t[0] + 0.7
        });
        for &x in &[-1.3, 0.0, 2.4] {
            let at = |lam: f64| {
                TemperedDensity::new(target.clone(), reference.clone(), lam)
                    .unwrap()
                    .log_tempered(&[x])
            };
            let (a, b, c) = (at(0.1), at(0.5), at(0.9));
            // three-point collinearity
            assert_relative_eq!(b, (a + c) / 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn tempered_mean_of_logs() {
        let target = Density::new(ParamSpace::unbounded(1), |_: &[f64]| -2.0);
        let reference = Density::new(ParamSpace::unbounded(1), |_: &[f64]| -4.0);
        let p = TemperedDensity::new(target, reference, 0.5).unwrap();
        assert_relative_eq!(p.log_tempered(&[0.0]), -3.0);
    }

    #[test]
    fn tempered_rejects_bad_lambda_and_mismatched_spaces() {
        let a = std_gaussian();
        let b = std_gaussian();
        assert!(TemperedDensity::new(a.clone(), b.clone(), 1.5).is_err());
        assert!(TemperedDensity::new(a.clone(), b.clone(), -0.1).is_err());
        let c = half_gaussian();
        assert!(TemperedDensity::new(a, c, 0.5).is_err());
    }

    #[test]
    fn support_symmetry() {
        // same space, target has an interior -inf point
        let space = ParamSpace::unbounded(1);
        let target = Density::new(space.clone(), |t: &[f64]| {
            if t[0] < 0.0 {
                f64::NEG_INFINITY
            } else {
                0.0
            }
        });
        let reference = Density::new(space, |_: &[f64]| 0.0);
        let p = TemperedDensity::new(target, reference, 0.0).unwrap();
        assert_eq!(p.log_tempered(&[-1.0]), f64::NEG_INFINITY);
        assert_eq!(p.log_tempered(&[1.0]), 0.0);
    }

    #[test]
    fn log_ratio_constant_multiple() {
        let a = std_gaussian();
        let b = a.scaled(3.0);
        for &x in &[-0.5, 0.0, 1.7] {
            assert_relative_eq!(log_ratio(&b, &a, &[x]).unwrap(), 3.0);
        }
        assert_relative_eq!(log_ratio(&a, &a, &[0.3]).unwrap(), 0.0);
    }

    #[test]
    fn log_ratio_outside_support_errors() {
        let a = half_gaussian();
        let b = half_gaussian();
        assert!(matches!(
            log_ratio(&a, &b, &[-1.0]),
            Err(EvidenceError::OutsideSupport)
        ));
    }

    #[test]
    fn fd_gradient_matches_analytic() {
        let d = Density::new(ParamSpace::unbounded(2), |t: &[f64]| {
            -0.5 * (t[0] * t[0] + 2.0 * t[1] * t[1]) + 0.3 * t[0] * t[1]
        })
        .with_gradient(|t: &[f64]| vec![-t[0] + 0.3 * t[1], -2.0 * t[1] + 0.3 * t[0]]);
        let x = [0.7, -1.2];
        let fd = d.fd_gradient(&x);
        let an = d.gradient_at(&x);
        for (a, b) in an.iter().zip(&fd) {
            assert_relative_eq!(a, b, max_relative = 1e-6);
        }
    }
}
