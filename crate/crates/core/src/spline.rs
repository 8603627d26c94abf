//! Natural cubic spline interpolation with a closed-form integral.
//!
//! Used to interpolate the per-lambda TI expectations before quadrature.
//! Natural boundary conditions (zero second derivative at both ends).

use crate::error::{EvidenceError, Result};

#[derive(Debug, Clone)]
pub struct NaturalCubicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// second derivatives at the knots (natural: first and last are 0)
    m: Vec<f64>,
}

impl NaturalCubicSpline {
    pub fn fit(points: &[(f64, f64)]) -> Result<Self> {
        if points.len() < 2 {
            return Err(EvidenceError::InvalidArgument(
                "spline needs at least 2 points".into(),
            ));
        }
        let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
        for w in xs.windows(2) {
            if !(w[1] > w[0]) {
                return Err(EvidenceError::InvalidArgument(
                    "spline abscissae must be strictly increasing".into(),
                ));
            }
        }
        if ys.iter().any(|y| !y.is_finite()) {
            return Err(EvidenceError::InvalidArgument(
                "spline ordinates must be finite".into(),
            ));
        }
        let m = Self::second_derivatives(&xs, &ys);
        Ok(Self { xs, ys, m })
    }

    /// Solve the natural-spline tridiagonal system for second derivatives.
    fn second_derivatives(xs: &[f64], ys: &[f64]) -> Vec<f64> {
        let n = xs.len();
        let mut m = vec![0.0; n];
        if n == 2 {
            return m; // straight line
        }
        let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
        // interior unknowns m[1..n-1]; Thomas algorithm
        let k = n - 2;
        let mut diag = vec![0.0; k];
        let mut rhs = vec![0.0; k];
        let mut sub = vec![0.0; k]; // sub[i] couples unknown i with i-1
        let mut sup = vec![0.0; k];
        for i in 0..k {
            let j = i + 1; // knot index
            diag[i] = 2.0 * (h[j - 1] + h[j]);
            sub[i] = h[j - 1];
            sup[i] = h[j];
            rhs[i] = 6.0 * ((ys[j + 1] - ys[j]) / h[j] - (ys[j] - ys[j - 1]) / h[j - 1]);
        }
        // forward sweep
        for i in 1..k {
            let w = sub[i] / diag[i - 1];
            diag[i] -= w * sup[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        // back substitution
        let mut u = vec![0.0; k];
        u[k - 1] = rhs[k - 1] / diag[k - 1];
        for i in (0..k - 1).rev() {
            u[i] = (rhs[i] - sup[i] * u[i + 1]) / diag[i];
        }
        m[1..=k].copy_from_slice(&u);
        m
    }

    pub fn knots(&self) -> (&[f64], &[f64]) {
        (&self.xs, &self.ys)
    }

    /// Evaluate the spline; clamped-linear extrapolation is not supported,
    /// values outside the knot range evaluate the boundary cubic.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        let i = match self.xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(n - 2),
        };
        let h = self.xs[i + 1] - self.xs[i];
        let a = (self.xs[i + 1] - x) / h;
        let b = (x - self.xs[i]) / h;
        a * self.ys[i]
            + b * self.ys[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }

    /// Integral over the full knot range from the piecewise-cubic
    /// antiderivative: `sum_i h_i (y_i + y_{i+1})/2 - h_i^3 (m_i + m_{i+1})/24`.
    pub fn integral(&self) -> f64 {
        let mut total = 0.0;
        for i in 0..self.xs.len() - 1 {
            let h = self.xs[i + 1] - self.xs[i];
            total += h * (self.ys[i] + self.ys[i + 1]) / 2.0
                - h * h * h * (self.m[i] + self.m[i + 1]) / 24.0;
        }
        total
    }

    /// Largest absolute second derivative over the knots; a cheap curvature
    /// diagnostic for how non-linear the interpolated curve is.
    pub fn max_abs_curvature(&self) -> f64 {
        self.m.iter().fold(0.0_f64, |a, &b| a.max(b.abs()))
    }

    /// `n` evenly spaced (x, spline(x)) samples over the knot range.
    pub fn sample(&self, n: usize) -> Vec<(f64, f64)> {
        let (lo, hi) = (self.xs[0], *self.xs.last().unwrap());
        (0..n)
            .map(|i| {
                let x = lo + (hi - lo) * i as f64 / (n - 1).max(1) as f64;
                (x, self.eval(x))
            })
            .collect()
    }
}

/// Integral of the natural cubic spline through `points` over their x-range.
pub fn spline_integral(points: &[(f64, f64)]) -> Result<f64> {
    Ok(NaturalCubicSpline::fit(points)?.integral())
}

/// Weights `w_i` such that the spline integral equals `sum_i w_i y_i`.
///
/// The natural-spline integral is linear in the ordinates, so the weights are
/// obtained by integrating the cardinal basis splines. Used for Gaussian
/// error propagation of per-lambda Monte Carlo errors.
pub fn quadrature_weights(xs: &[f64]) -> Result<Vec<f64>> {
    if xs.len() < 2 {
        return Err(EvidenceError::InvalidArgument(
            "need at least 2 abscissae".into(),
        ));
    }
    let mut w = vec![0.0; xs.len()];
    let mut pts: Vec<(f64, f64)> = xs.iter().map(|&x| (x, 0.0)).collect();
    for i in 0..xs.len() {
        pts[i].1 = 1.0;
        w[i] = NaturalCubicSpline::fit(&pts)?.integral();
        pts[i].1 = 0.0;
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid(n: usize) -> Vec<f64> {
        (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn constant_integrates_to_constant() {
        let pts: Vec<(f64, f64)> = grid(7).into_iter().map(|x| (x, 3.25)).collect();
        assert_relative_eq!(spline_integral(&pts).unwrap(), 3.25, epsilon = 1e-14);
    }

    #[test]
    fn linear_is_reproduced_exactly() {
        for n in [2, 5, 11] {
            let pts: Vec<(f64, f64)> = grid(n).into_iter().map(|x| (x, x)).collect();
            assert_relative_eq!(spline_integral(&pts).unwrap(), 0.5, epsilon = 1e-14);
        }
    }

    #[test]
    fn quadratic_on_11_point_grid() {
        let pts: Vec<(f64, f64)> = grid(11).into_iter().map(|x| (x, x * x)).collect();
        let i = spline_integral(&pts).unwrap();
        assert!((i - 1.0 / 3.0).abs() < 1e-4, "integral {i}");
    }

    #[test]
    fn too_few_points_is_an_error() {
        assert!(spline_integral(&[(0.0, 1.0)]).is_err());
    }

    #[test]
    fn non_increasing_abscissae_rejected() {
        assert!(spline_integral(&[(0.0, 1.0), (0.0, 2.0)]).is_err());
    }

    #[test]
    fn weights_reproduce_integral() {
        let xs = vec![0.0, 0.2, 0.5, 0.8, 1.0];
        let ys = [0.3, -0.1, 0.05, 0.4, -0.2];
        let w = quadrature_weights(&xs).unwrap();
        let via_weights: f64 = w.iter().zip(&ys).map(|(a, b)| a * b).sum();
        let pts: Vec<(f64, f64)> = xs.iter().cloned().zip(ys.iter().cloned()).collect();
        assert_relative_eq!(via_weights, spline_integral(&pts).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn eval_interpolates_knots() {
        let pts = [(0.0, 1.0), (0.4, -0.3), (1.0, 2.0)];
        let s = NaturalCubicSpline::fit(&pts).unwrap();
        for (x, y) in pts {
            assert_relative_eq!(s.eval(x), y, epsilon = 1e-12);
        }
    }

    #[test]
    fn curvature_zero_for_line() {
        let pts: Vec<(f64, f64)> = grid(6).into_iter().map(|x| (x, 2.0 * x - 1.0)).collect();
        let s = NaturalCubicSpline::fit(&pts).unwrap();
        assert!(s.max_abs_curvature() < 1e-10);
    }
}
