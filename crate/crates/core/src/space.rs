use serde::{Deserialize, Serialize};

use crate::error::{EvidenceError, Result};

/// Named parameter vector layout with optional per-dimension lower bounds.
///
/// A dimension with a finite lower bound is *constrained*; everything else is
/// unbounded below. Upper bounds are not supported.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpace {
    names: Vec<String>,
    lower_bounds: Vec<Option<f64>>,
}

impl ParamSpace {
    pub fn new<S: Into<String>>(names: Vec<S>, lower_bounds: Vec<Option<f64>>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(EvidenceError::InvalidArgument(
                "parameter space must have dim >= 1".into(),
            ));
        }
        if names.len() != lower_bounds.len() {
            return Err(EvidenceError::DimensionMismatch {
                expected: names.len(),
                got: lower_bounds.len(),
            });
        }
        let mut seen = std::collections::HashSet::new();
        for n in &names {
            if !seen.insert(n.clone()) {
                return Err(EvidenceError::InvalidArgument(format!(
                    "duplicate parameter name: {n}"
                )));
            }
        }
        for b in lower_bounds.iter().flatten() {
            if !b.is_finite() {
                return Err(EvidenceError::InvalidArgument(
                    "lower bounds must be finite when present".into(),
                ));
            }
        }
        Ok(Self { names, lower_bounds })
    }

    /// Unconstrained space with autogenerated names `theta0..theta{d-1}`.
    pub fn unbounded(dim: usize) -> Self {
        Self::new(
            (0..dim).map(|i| format!("theta{i}")).collect::<Vec<_>>(),
            vec![None; dim],
        )
        .expect("dim >= 1")
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn lower_bounds(&self) -> &[Option<f64>] {
        &self.lower_bounds
    }

    /// Indices of dimensions with a finite lower bound.
    pub fn constrained_set(&self) -> Vec<usize> {
        self.lower_bounds
            .iter()
            .enumerate()
            .filter_map(|(i, b)| b.map(|_| i))
            .collect()
    }

    /// True iff every constrained coordinate is >= its lower bound.
    pub fn contains(&self, theta: &[f64]) -> Result<bool> {
        if theta.len() != self.dim() {
            return Err(EvidenceError::DimensionMismatch {
                expected: self.dim(),
                got: theta.len(),
            });
        }
        Ok(self.contains_unchecked(theta))
    }

    #[inline]
    pub(crate) fn contains_unchecked(&self, theta: &[f64]) -> bool {
        self.lower_bounds
            .iter()
            .zip(theta)
            .all(|(b, &t)| match b {
                Some(lo) => t >= *lo,
                None => true,
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contains_respects_lower_bounds() {
        let space = ParamSpace::new(vec!["a", "b"], vec![Some(0.0), None]).unwrap();
        assert!(space.contains(&[0.5, -3.0]).unwrap());
        assert!(!space.contains(&[-0.1, 0.0]).unwrap());
        assert_eq!(space.constrained_set(), vec![0]);
    }

    #[test]
    fn boundary_point_is_inside() {
        let space = ParamSpace::new(vec!["a"], vec![Some(0.0)]).unwrap();
        assert!(space.contains(&[0.0]).unwrap());
    }

    #[test]
    fn unbounded_space_accepts_everything() {
        let space = ParamSpace::unbounded(1);
        assert!(space.contains(&[1e9]).unwrap());
        assert!(space.contains(&[-1e9]).unwrap());
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let space = ParamSpace::unbounded(2);
        assert!(matches!(
            space.contains(&[1.0]),
            Err(EvidenceError::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn duplicate_names_rejected() {
        assert!(ParamSpace::new(vec!["a", "a"], vec![None, None]).is_err());
    }
}
