use crate::density::Density;
use crate::space::ParamSpace;

/// 1D density with a cusp at 4: `log q = -sqrt(|t-4|)/2 - (t-4)^4/2`.
///
/// The second-order expansion at the mode is undefined (the cusp), which is
/// exactly why the sampled-covariance reference exists. Symmetric about 4.
pub fn cusp1d() -> Density {
    Density::new(ParamSpace::unbounded(1), |t: &[f64]| {
        let d = t[0] - 4.0;
        -0.5 * d.abs().sqrt() - 0.5 * d.powi(4)
    })
    .with_gradient(|t: &[f64]| {
        let d = t[0] - 4.0;
        if d == 0.0 {
            vec![0.0] // the cusp; any subgradient choice works for rejection
        } else {
            vec![-d.signum() / (4.0 * d.abs().sqrt()) - 2.0 * d.powi(3)]
        }
    })
    .with_init_hint(vec![4.0])
    .with_scale_hint(vec![0.65])
    .with_breakpoints(vec![4.0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn peak_value_is_one() {
        assert_relative_eq!(cusp1d().log_q(&[4.0]), 0.0);
    }

    proptest! {
        #[test]
        fn symmetric_about_four(delta in 1e-6_f64..3.0) {
            let d = cusp1d();
            let lo = d.log_q(&[4.0 - delta]);
            let hi = d.log_q(&[4.0 + delta]);
            prop_assert!((lo - hi).abs() < 1e-12);
        }

        #[test]
        fn gradient_matches_finite_differences(x in -1.0_f64..9.0) {
            // stay away from the cusp where FD is meaningless
            prop_assume!((x - 4.0).abs() > 1e-2);
            let d = cusp1d();
            let a = d.gradient_at(&[x])[0];
            let f = d.fd_gradient(&[x])[0];
            prop_assert!((a - f).abs() <= 1e-4 * (1.0 + a.abs()), "analytic {a} vs fd {f}");
        }
    }
}
