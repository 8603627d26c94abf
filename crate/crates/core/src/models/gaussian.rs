use crate::density::Density;
use crate::space::ParamSpace;

/// Un-normalised 1D Gaussian with peak 1: `log q = -(t-mean)^2 / (2 sd^2)`.
/// Its normalising constant is `sqrt(2 pi) sd`.
pub fn gaussian1d(mean: f64, sd: f64) -> Density {
    gaussian_diag(vec![mean], vec![sd])
}

/// Un-normalised diagonal Gaussian with peak 1 in any dimension.
pub fn gaussian_diag(means: Vec<f64>, sds: Vec<f64>) -> Density {
    assert_eq!(means.len(), sds.len());
    assert!(sds.iter().all(|s| *s > 0.0));
    let m = means.clone();
    let s = sds.clone();
    let m2 = means.clone();
    let s2 = sds.clone();
    Density::new(ParamSpace::unbounded(means.len()), move |t: &[f64]| {
        -t.iter()
            .zip(&m)
            .zip(&s)
            .map(|((x, mu), sd)| {
                let d = (x - mu) / sd;
                0.5 * d * d
            })
            .sum::<f64>()
    })
    .with_gradient(move |t: &[f64]| {
        t.iter()
            .zip(&m2)
            .zip(&s2)
            .map(|((x, mu), sd)| -(x - mu) / (sd * sd))
            .collect()
    })
    .with_init_hint(means)
    .with_scale_hint(sds)
}

/// Closed-form log normalising constant of [`gaussian_diag`].
pub fn gaussian_diag_log_z(sds: &[f64]) -> f64 {
    sds.iter()
        .map(|s| 0.5 * (2.0 * std::f64::consts::PI * s * s).ln())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn log_z_matches_quadrature() {
        let d = gaussian1d(1.0, 2.0);
        let q = crate::oracle::quadrature_1d(&d, (-40.0, 42.0), 1e-10).unwrap();
        assert_relative_eq!(q.value.ln(), gaussian_diag_log_z(&[2.0]), epsilon = 1e-9);
    }
}
