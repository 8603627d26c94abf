//! The two radiata-pine compression-strength regressions with conjugate
//! normal-gamma priors. The conjugate structure admits a closed-form
//! marginal likelihood, so these models double as an exact benchmark.
//!
//! Model M1 predicts strength from density, M2 from resin-adjusted density;
//! both centre the predictor. Parameters are (intercept, slope, precision).

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::density::Density;
use crate::error::{EvidenceError, Result};
use crate::space::ParamSpace;

const BUNDLED_CSV: &str = include_str!("../../data/radiata.csv");
const BUNDLED_PRIORS: &str = include_str!("../../data/radiata_priors.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RadiataVariant {
    /// strength ~ density
    M1,
    /// strength ~ resin-adjusted density
    M2,
}

/// Conjugate hyperparameters: `coef | tau ~ N(mu, (tau * diag(precision_scale))^-1)`,
/// `tau ~ Gamma(gamma_shape, rate = gamma_rate)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadiataPrior {
    pub version: u32,
    pub mu: [f64; 2],
    pub precision_scale: [f64; 2],
    pub gamma_shape: f64,
    pub gamma_rate: f64,
}

impl RadiataPrior {
    pub fn bundled() -> Self {
        serde_json::from_str(BUNDLED_PRIORS).expect("bundled prior file parses")
    }

    fn validate(&self) -> Result<()> {
        if self.gamma_shape <= 0.0
            || self.gamma_rate <= 0.0
            || self.precision_scale.iter().any(|q| *q <= 0.0)
        {
            return Err(EvidenceError::UnsupportedPrior(
                "normal-gamma hyperparameters must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RadiataModel {
    pub variant: RadiataVariant,
    pub prior: RadiataPrior,
    /// (strength, density, adjusted density) records
    records: Vec<[f64; 3]>,
}

impl RadiataModel {
    /// The bundled 42-record dataset with the bundled prior file.
    pub fn bundled(variant: RadiataVariant) -> Self {
        let records = parse_csv(BUNDLED_CSV).expect("bundled radiata data parses");
        Self {
            variant,
            prior: RadiataPrior::bundled(),
            records,
        }
    }

    pub fn from_records(
        variant: RadiataVariant,
        records: Vec<[f64; 3]>,
        prior: RadiataPrior,
    ) -> Self {
        Self { variant, prior, records }
    }

    pub fn n(&self) -> usize {
        self.records.len()
    }

    pub fn records(&self) -> &[[f64; 3]] {
        &self.records
    }

    /// Centred predictor column for this variant.
    fn centred_predictor(&self) -> Vec<f64> {
        let col = match self.variant {
            RadiataVariant::M1 => 1,
            RadiataVariant::M2 => 2,
        };
        let raw: Vec<f64> = self.records.iter().map(|r| r[col]).collect();
        let mean = raw.iter().sum::<f64>() / raw.len() as f64;
        raw.into_iter().map(|v| v - mean).collect()
    }

    fn responses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r[0]).collect()
    }

    /// Un-normalised log posterior at (intercept, slope, precision):
    /// Gaussian likelihood times the normal-gamma prior (both normalised, so
    /// the normalising constant is the marginal likelihood).
    pub fn log_posterior(&self, params: &[f64]) -> f64 {
        let (c0, c1, tau) = (params[0], params[1], params[2]);
        if tau <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let xs = self.centred_predictor();
        let ys = self.responses();
        let n = xs.len() as f64;
        let ln2pi = (2.0 * std::f64::consts::PI).ln();

        let mut ss = 0.0;
        for (x, y) in xs.iter().zip(&ys) {
            let r = y - c0 - c1 * x;
            ss += r * r;
        }
        let loglik = 0.5 * n * (tau.ln() - ln2pi) - 0.5 * tau * ss;

        let p = &self.prior;
        let d0 = c0 - p.mu[0];
        let d1 = c1 - p.mu[1];
        let quad = p.precision_scale[0] * d0 * d0 + p.precision_scale[1] * d1 * d1;
        let log_prior_coef = 0.5
            * ((tau * p.precision_scale[0]).ln() + (tau * p.precision_scale[1]).ln()
                - 2.0 * ln2pi)
            - 0.5 * tau * quad;
        let log_prior_tau = p.gamma_shape * p.gamma_rate.ln() - ln_gamma(p.gamma_shape)
            + (p.gamma_shape - 1.0) * tau.ln()
            - p.gamma_rate * tau;

        loglik + log_prior_coef + log_prior_tau
    }

    pub fn gradient(&self, params: &[f64]) -> Vec<f64> {
        let (c0, c1, tau) = (params[0], params[1], params[2]);
        let xs = self.centred_predictor();
        let ys = self.responses();
        let n = xs.len() as f64;
        let p = &self.prior;

        let mut sr = 0.0;
        let mut srx = 0.0;
        let mut ss = 0.0;
        for (x, y) in xs.iter().zip(&ys) {
            let r = y - c0 - c1 * x;
            sr += r;
            srx += r * x;
            ss += r * r;
        }
        let d0 = c0 - p.mu[0];
        let d1 = c1 - p.mu[1];
        let quad = p.precision_scale[0] * d0 * d0 + p.precision_scale[1] * d1 * d1;
        vec![
            tau * sr - tau * p.precision_scale[0] * d0,
            tau * srx - tau * p.precision_scale[1] * d1,
            0.5 * n / tau - 0.5 * ss + 1.0 / tau - 0.5 * quad
                + (p.gamma_shape - 1.0) / tau
                - p.gamma_rate,
        ]
    }

    fn space(&self) -> ParamSpace {
        ParamSpace::new(
            vec!["intercept", "slope", "precision"],
            vec![None, None, Some(0.0)],
        )
        .unwrap()
    }

    /// The posterior as a sampleable density.
    pub fn density(&self) -> Density {
        let model = self.clone();
        let grad_model = self.clone();
        let (mn, _, an, bn, _) = self.conjugate_update();
        let tau_mean = an / bn;
        Density::new(self.space(), move |t: &[f64]| model.log_posterior(t))
            .with_gradient(move |t: &[f64]| grad_model.gradient(t))
            .with_init_hint(vec![mn[0], mn[1], tau_mean])
            .with_scale_hint(vec![60.0, 6.0, tau_mean * 0.3])
    }

    /// The normalised normal-gamma prior as a density (its own integral is 1).
    pub fn prior_density(&self) -> Density {
        let p = self.prior.clone();
        let p2 = self.prior.clone();
        let tau0 = p.gamma_shape / p.gamma_rate;
        let ln2pi = (2.0 * std::f64::consts::PI).ln();
        Density::new(self.space(), move |t: &[f64]| {
            let (c0, c1, tau) = (t[0], t[1], t[2]);
            if tau <= 0.0 {
                return f64::NEG_INFINITY;
            }
            let d0 = c0 - p.mu[0];
            let d1 = c1 - p.mu[1];
            let quad = p.precision_scale[0] * d0 * d0 + p.precision_scale[1] * d1 * d1;
            0.5 * ((tau * p.precision_scale[0]).ln() + (tau * p.precision_scale[1]).ln()
                - 2.0 * ln2pi)
                - 0.5 * tau * quad
                + p.gamma_shape * p.gamma_rate.ln()
                - ln_gamma(p.gamma_shape)
                + (p.gamma_shape - 1.0) * tau.ln()
                - p.gamma_rate * tau
        })
        .with_gradient(move |t: &[f64]| {
            let (c0, c1, tau) = (t[0], t[1], t[2]);
            let d0 = c0 - p2.mu[0];
            let d1 = c1 - p2.mu[1];
            let quad = p2.precision_scale[0] * d0 * d0 + p2.precision_scale[1] * d1 * d1;
            vec![
                -tau * p2.precision_scale[0] * d0,
                -tau * p2.precision_scale[1] * d1,
                1.0 / tau - 0.5 * quad + (p2.gamma_shape - 1.0) / tau - p2.gamma_rate,
            ]
        })
        .with_init_hint(vec![self.prior.mu[0], self.prior.mu[1], tau0])
        .with_scale_hint(vec![
            1.0 / (tau0 * self.prior.precision_scale[0]).sqrt(),
            1.0 / (tau0 * self.prior.precision_scale[1]).sqrt(),
            tau0,
        ])
    }

    /// Posterior normal-gamma parameters `(m_n, Q_n, a_n, b_n, Q_0 det)`.
    fn conjugate_update(&self) -> (Vector2<f64>, Matrix2<f64>, f64, f64, f64) {
        let xs = self.centred_predictor();
        let ys = self.responses();
        let n = xs.len() as f64;
        let p = &self.prior;
        let q0 = Matrix2::new(p.precision_scale[0], 0.0, 0.0, p.precision_scale[1]);
        let m0 = Vector2::new(p.mu[0], p.mu[1]);

        let (mut sxx, mut sx, mut sxy, mut sy, mut syy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (x, y) in xs.iter().zip(&ys) {
            sxx += x * x;
            sx += x;
            sxy += x * y;
            sy += y;
            syy += y * y;
        }
        let xtx = Matrix2::new(n, sx, sx, sxx);
        let xty = Vector2::new(sy, sxy);
        let qn = xtx + q0;
        let mn = qn.try_inverse().expect("posterior precision invertible") * (xty + q0 * m0);
        let an = p.gamma_shape + n / 2.0;
        let bn = p.gamma_rate
            + 0.5 * (syy + (m0.transpose() * q0 * m0)[(0, 0)] - (mn.transpose() * qn * mn)[(0, 0)]);
        (mn, qn, an, bn, q0.determinant())
    }

    /// Closed-form log marginal likelihood from the conjugate integral.
    /// `n = 0` gives log 1 = 0 (the prior predictive of nothing).
    pub fn exact_log_evidence(&self) -> Result<f64> {
        self.prior.validate()?;
        if self.records.is_empty() {
            return Ok(0.0);
        }
        let (_, qn, an, bn, det_q0) = self.conjugate_update();
        let n = self.records.len() as f64;
        let p = &self.prior;
        Ok(-0.5 * n * (2.0 * std::f64::consts::PI).ln()
            + 0.5 * (det_q0.ln() - qn.determinant().ln())
            + p.gamma_shape * p.gamma_rate.ln()
            - an * bn.ln()
            + ln_gamma(an)
            - ln_gamma(p.gamma_shape))
    }
}

fn parse_csv(text: &str) -> Result<Vec<[f64; 3]>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| EvidenceError::Data(e.to_string()))?;
    if headers.iter().collect::<Vec<_>>() != ["y", "x", "z"] {
        return Err(EvidenceError::Data(format!(
            "radiata csv must have header y,x,z; got {headers:?}"
        )));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| EvidenceError::Data(e.to_string()))?;
        let parse = |i: usize| -> Result<f64> {
            rec.get(i)
                .ok_or_else(|| EvidenceError::Data("short radiata row".into()))?
                .trim()
                .parse::<f64>()
                .map_err(|e| EvidenceError::Data(format!("bad radiata value: {e}")))
        };
        out.push([parse(0)?, parse(1)?, parse(2)?]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // frozen from the conjugate formula evaluated independently
    const LOG_Z1: f64 = -310.12781923494515;
    const LOG_Z2: f64 = -301.7044300635898;

    #[test]
    fn bundled_data_shape() {
        let m = RadiataModel::bundled(RadiataVariant::M1);
        assert_eq!(m.n(), 42);
    }

    #[test]
    fn exact_evidence_matches_frozen_values() {
        let m1 = RadiataModel::bundled(RadiataVariant::M1);
        let m2 = RadiataModel::bundled(RadiataVariant::M2);
        assert_relative_eq!(m1.exact_log_evidence().unwrap(), LOG_Z1, epsilon = 1e-9);
        assert_relative_eq!(m2.exact_log_evidence().unwrap(), LOG_Z2, epsilon = 1e-9);
        let bf = (m2.exact_log_evidence().unwrap() - m1.exact_log_evidence().unwrap()).exp();
        // the benchmark pin: BF_21 rounds to 4552 at 4 significant figures
        assert_relative_eq!(bf, 4552.305884416688, max_relative = 1e-9);
    }

    #[test]
    fn empty_data_has_unit_evidence() {
        let m = RadiataModel::from_records(RadiataVariant::M1, vec![], RadiataPrior::bundled());
        assert_eq!(m.exact_log_evidence().unwrap(), 0.0);
    }

    #[test]
    fn invalid_prior_is_unsupported() {
        let mut prior = RadiataPrior::bundled();
        prior.gamma_shape = -1.0;
        let m = RadiataModel::from_records(RadiataVariant::M1, vec![[1.0, 2.0, 3.0]], prior);
        assert!(matches!(
            m.exact_log_evidence(),
            Err(EvidenceError::UnsupportedPrior(_))
        ));
    }

    #[test]
    fn loglik_at_mean_intercept_is_centred_gaussian_sum() {
        // zero slope, intercept = mean(y), unit precision: the likelihood part
        // reduces to a sum of centred Gaussian terms
        let m = RadiataModel::bundled(RadiataVariant::M1);
        let ys = m.responses();
        let ybar = ys.iter().sum::<f64>() / ys.len() as f64;
        let n = ys.len() as f64;
        let ss: f64 = ys.iter().map(|y| (y - ybar) * (y - ybar)).sum();
        let expect_lik = -0.5 * n * (2.0 * std::f64::consts::PI).ln() - 0.5 * ss;
        let full = m.log_posterior(&[ybar, 0.0, 1.0]);
        // subtract the prior parts evaluated at the same point
        let prior_part = full - expect_lik;
        assert!(prior_part.is_finite());
        let direct: f64 = {
            // recompute likelihood directly
            let mut s = 0.0;
            for y in &ys {
                let r = y - ybar;
                s += -0.5 * (2.0 * std::f64::consts::PI).ln() - 0.5 * r * r;
            }
            s
        };
        assert_relative_eq!(expect_lik, direct, max_relative = 1e-12);
    }

    #[test]
    fn gradient_matches_fd() {
        let m = RadiataModel::bundled(RadiataVariant::M2);
        let d = m.density();
        let p = [2990.0, 183.0, 1.2e-5];
        let a = d.gradient_at(&p);
        let f = d.fd_gradient(&p);
        for (x, y) in a.iter().zip(&f) {
            assert_relative_eq!(x, y, max_relative = 2e-4, epsilon = 1e-6);
        }
    }

    #[test]
    fn posterior_mode_matches_weighted_least_squares() {
        // at fixed precision the posterior in (intercept, slope) is Gaussian
        // with mean m_n regardless of tau
        let m = RadiataModel::bundled(RadiataVariant::M1);
        let (mn, _, an, bn, _) = m.conjugate_update();
        let tau = an / bn;
        let g = m.gradient(&[mn[0], mn[1], tau]);
        assert!(g[0].abs() < 1e-6 * tau.recip().max(1.0));
        assert!(g[1].abs() < 1e-6 * tau.recip().max(1.0));
    }

    #[test]
    fn single_point_evidence_cross_checked_by_quadrature() {
        // n = 1: integrate the un-normalised posterior over all three
        // dimensions with nested deterministic quadrature
        let prior = RadiataPrior {
            version: 1,
            mu: [0.0, 0.0],
            precision_scale: [1.0, 1.0],
            gamma_shape: 2.0,
            gamma_rate: 2.0,
        };
        let m = RadiataModel::from_records(RadiataVariant::M1, vec![[1.0, 0.5, 0.5]], prior);
        let exact = m.exact_log_evidence().unwrap();
        let model = m.clone();
        let inner = crate::oracle::integrate_fn(
            |tau| {
                let mm = model.clone();
                let f = crate::oracle::integrate_fn(
                    move |c0| {
                        let mmm = mm.clone();
                        crate::oracle::integrate_fn(
                            move |c1| mmm.log_posterior(&[c0, c1, tau]).exp(),
                            -30.0,
                            30.0,
                            1e-8,
                            &[],
                        )
                        .unwrap()
                        .value
                    },
                    -30.0,
                    30.0,
                    1e-7,
                    &[],
                )
                .unwrap();
                f.value
            },
            1e-9,
            15.0,
            1e-6,
            &[],
        )
        .unwrap();
        assert_relative_eq!(inner.value.ln(), exact, epsilon = 1e-3);
    }
}
