use crate::density::Density;
use crate::space::ParamSpace;

fn log_q_2d(t: &[f64]) -> f64 {
    let a = t[0] + 0.5;
    let b = t[1] + 0.5;
    -0.25 * (a * a + a.powi(4) + b * b + b.powi(4) + 0.5 * t[0] * t[1] * t[1])
}

fn grad_2d(t: &[f64]) -> Vec<f64> {
    let a = t[0] + 0.5;
    let b = t[1] + 0.5;
    vec![
        -0.25 * (2.0 * a + 4.0 * a.powi(3) + 0.5 * t[1] * t[1]),
        -0.25 * (2.0 * b + 4.0 * b.powi(3) + t[0] * t[1]),
    ]
}

/// 2D quartic density with the first parameter constrained to `[0, inf)`:
/// `log q = -[(t1+1/2)^2 + (t1+1/2)^4 + (t2+1/2)^2 + (t2+1/2)^4 + t1 t2^2 / 2]/4`.
pub fn constrained2d() -> Density {
    let space = ParamSpace::new(vec!["theta1", "theta2"], vec![Some(0.0), None]).unwrap();
    Density::new(space, log_q_2d)
        .with_gradient(grad_2d)
        .with_init_hint(vec![0.4, -0.5])
        .with_scale_hint(vec![0.3, 0.75])
}

/// The same functional form on all of R^2 (constraint ignored); used for
/// mode expansions of the smooth surface.
pub fn constrained2d_unbounded() -> Density {
    Density::new(ParamSpace::unbounded(2), log_q_2d)
        .with_gradient(grad_2d)
        .with_init_hint(vec![-0.55, -0.6])
        .with_scale_hint(vec![0.75, 0.77])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn support_cut_applies() {
        let d = constrained2d();
        assert_eq!(d.log_q(&[-0.01, 0.0]), f64::NEG_INFINITY);
        assert!(d.log_q(&[0.0, 0.0]).is_finite());
        let u = constrained2d_unbounded();
        assert!(u.log_q(&[-0.01, 0.0]).is_finite());
    }

    #[test]
    fn value_at_origin() {
        // bracket = 2*(1/4 + 1/16) = 0.625
        assert_relative_eq!(constrained2d().log_q(&[0.0, 0.0]), -0.15625, epsilon = 1e-15);
    }

    #[test]
    fn gradient_matches_fd() {
        let d = constrained2d_unbounded();
        for p in [[0.3, -0.7], [-1.2, 0.4], [1.5, 1.5]] {
            let a = d.gradient_at(&p);
            let f = d.fd_gradient(&p);
            for (x, y) in a.iter().zip(&f) {
                assert_relative_eq!(x, y, max_relative = 1e-5, epsilon = 1e-7);
            }
        }
    }
}
