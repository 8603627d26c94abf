//! Dense symmetric-matrix helpers on top of nalgebra.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{EvidenceError, Result};

/// Cholesky of a symmetric positive-definite matrix, retrying once with a
/// small diagonal jitter (`1e-8 * mean diagonal`) before failing.
pub fn cholesky_with_jitter(mat: &DMatrix<f64>) -> Result<(Cholesky<f64, Dyn>, DMatrix<f64>)> {
    if let Some(ch) = Cholesky::new(mat.clone()) {
        return Ok((ch, mat.clone()));
    }
    let d = mat.nrows();
    let mean_diag = (0..d).map(|i| mat[(i, i)]).sum::<f64>() / d as f64;
    let jitter = 1e-8 * mean_diag.max(f64::MIN_POSITIVE);
    let mut jittered = mat.clone();
    for i in 0..d {
        jittered[(i, i)] += jitter;
    }
    match Cholesky::new(jittered.clone()) {
        Some(ch) => Ok((ch, jittered)),
        None => Err(EvidenceError::DegenerateCovariance(format!(
            "matrix not positive definite after jitter {jitter:.3e}"
        ))),
    }
}

/// `log det` of an SPD matrix from its Cholesky factor.
pub fn log_det_from_cholesky(ch: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * ch.l().diagonal().iter().map(|x| x.ln()).sum::<f64>()
}

/// Pooled mean and unbiased covariance of draws laid out `[n][dim]`.
pub fn mean_and_covariance(draws: &[Vec<f64>]) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = draws.len();
    if n < 2 {
        return Err(EvidenceError::InvalidArgument(
            "need at least 2 draws for a covariance".into(),
        ));
    }
    let d = draws[0].len();
    let mut mean = DVector::zeros(d);
    for row in draws {
        for i in 0..d {
            mean[i] += row[i];
        }
    }
    mean /= n as f64;
    let mut cov = DMatrix::zeros(d, d);
    for row in draws {
        for i in 0..d {
            let di = row[i] - mean[i];
            for j in i..d {
                cov[(i, j)] += di * (row[j] - mean[j]);
            }
        }
    }
    cov /= (n - 1) as f64;
    for i in 0..d {
        for j in 0..i {
            cov[(i, j)] = cov[(j, i)];
        }
    }
    Ok((mean, cov))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cholesky_logdet_identity() {
        let m = DMatrix::identity(3, 3);
        let (ch, _) = cholesky_with_jitter(&m).unwrap();
        assert_relative_eq!(log_det_from_cholesky(&ch), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn jitter_rescues_singular() {
        let mut m = DMatrix::zeros(2, 2);
        m[(0, 0)] = 1.0;
        // m[(1,1)] = 0 exactly: singular, jitter makes it PD
        assert!(cholesky_with_jitter(&m).is_ok());
    }

    #[test]
    fn covariance_of_known_points() {
        let draws = vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 2.0], vec![0.0, -2.0]];
        let (mean, cov) = mean_and_covariance(&draws).unwrap();
        assert_relative_eq!(mean[0], 0.0);
        assert_relative_eq!(cov[(0, 0)], 2.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(cov[(1, 1)], 8.0 / 3.0, epsilon = 1e-12);
    }
}
