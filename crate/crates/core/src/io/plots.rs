//! Plot-data emission: tidy CSVs for the lambda curve, per-lambda running
//! means, and evidence-vs-iteration convergence. Rendering is out of scope;
//! these files feed external plotting.

use std::path::Path;

use crate::error::{EvidenceError, Result};
use crate::io::record::{write_atomic, RunRecord};
use crate::spline::NaturalCubicSpline;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// measured per-lambda expectations plus dense spline samples
    LambdaCurve,
    /// running mean of the log-ratio per lambda vs iteration
    RunningMean,
    /// evidence estimate vs iterations per lambda
    Convergence,
}

impl std::str::FromStr for PlotKind {
    type Err = EvidenceError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lambda-curve" => Ok(Self::LambdaCurve),
            "running-mean" => Ok(Self::RunningMean),
            "convergence" => Ok(Self::Convergence),
            other => Err(EvidenceError::InvalidArgument(format!(
                "unknown plot kind '{other}' (lambda-curve|running-mean|convergence)"
            ))),
        }
    }
}

fn require_points(record: &RunRecord) -> Result<Vec<(f64, f64)>> {
    if record.result.per_lambda.is_empty() {
        return Err(EvidenceError::MissingTrace(
            "record has no per-lambda estimates".into(),
        ));
    }
    Ok(record
        .result
        .per_lambda
        .iter()
        .map(|e| (e.lambda, e.mean))
        .collect())
}

/// Per-iteration mean across chains, then the cumulative running mean.
fn running_mean(chains: &[Vec<f64>]) -> Vec<f64> {
    let n = chains.iter().map(|c| c.len()).min().unwrap_or(0);
    let m = chains.len() as f64;
    let mut out = Vec::with_capacity(n);
    let mut acc = 0.0;
    for i in 0..n {
        let xbar: f64 = chains.iter().map(|c| c[i]).sum::<f64>() / m;
        acc += xbar;
        out.push(acc / (i + 1) as f64);
    }
    out
}

pub fn emit_plot(record: &RunRecord, kind: PlotKind, out: &Path) -> Result<()> {
    let csv = match kind {
        PlotKind::LambdaCurve => {
            let pts = require_points(record)?;
            let mut body = String::from("series,lambda,value\n");
            for (l, v) in &pts {
                body.push_str(&format!("measured,{l},{v}\n"));
            }
            if pts.len() >= 2 {
                let spline = NaturalCubicSpline::fit(&pts)?;
                for (l, v) in spline.sample(101) {
                    body.push_str(&format!("spline,{l},{v}\n"));
                }
            }
            body
        }
        PlotKind::RunningMean => {
            let traces = record.traces.as_ref().ok_or_else(|| {
                EvidenceError::MissingTrace("run was recorded without --emit-traces".into())
            })?;
            let mut body = String::from("lambda,iteration,running_mean\n");
            for t in traces {
                for (i, v) in running_mean(&t.chains).iter().enumerate() {
                    body.push_str(&format!("{},{},{v}\n", t.lambda, i + 1));
                }
            }
            body
        }
        PlotKind::Convergence => {
            let traces = record.traces.as_ref().ok_or_else(|| {
                EvidenceError::MissingTrace("run was recorded without --emit-traces".into())
            })?;
            if traces.is_empty() {
                return Err(EvidenceError::MissingTrace("empty trace set".into()));
            }
            let running: Vec<(f64, Vec<f64>)> = traces
                .iter()
                .map(|t| (t.lambda, running_mean(&t.chains)))
                .collect();
            let n = running.iter().map(|(_, r)| r.len()).min().unwrap_or(0);
            if n == 0 {
                return Err(EvidenceError::MissingTrace("empty trace set".into()));
            }
            let checkpoints: Vec<usize> = {
                let step = (n / 200).max(1);
                let mut cps: Vec<usize> = (step..=n).step_by(step).collect();
                if *cps.last().unwrap_or(&0) != n {
                    cps.push(n);
                }
                cps
            };
            let mut body = String::from("iteration,ti_correction,log_z\n");
            for cp in checkpoints {
                let pts: Vec<(f64, f64)> = running
                    .iter()
                    .map(|(l, r)| (*l, r[cp - 1]))
                    .collect();
                let corr = NaturalCubicSpline::fit(&pts)?.integral();
                let log_z = record.result.log_zref + corr;
                body.push_str(&format!("{cp},{corr},{log_z}\n"));
            }
            body
        }
    };
    write_atomic(out, csv.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::config::{MethodKind, RunConfig};
    use crate::io::record::RunRecord;
    use crate::sampler::ExpectationEstimate;
    use crate::ti::{DiagnosticsSummary, LambdaTrace, Method};

    fn record_with_traces() -> RunRecord {
        let per_lambda: Vec<ExpectationEstimate> = [0.0, 0.5, 1.0]
            .iter()
            .map(|&l| ExpectationEstimate {
                lambda: l,
                mean: -0.1 * l,
                variance: 0.01,
                mcse: 0.001,
                n_draws: 10,
                converged: true,
                rhat: vec![1.0],
            })
            .collect();
        let mut rec = RunRecord::new(
            RunConfig::new("cusp1d", MethodKind::RefTi),
            crate::ti::EvidenceResult {
                log_zref: 0.5,
                ti_correction: -0.05,
                log_z: 0.45,
                interval95: (0.4, 0.5),
                per_lambda,
                method: Method::ReferencedTi,
                converged: true,
                diagnostics: DiagnosticsSummary {
                    max_rhat: Some(1.0),
                    non_converged_lambdas: vec![],
                    max_spline_curvature: 0.0,
                },
            },
        );
        rec.traces = Some(
            [0.0, 0.5, 1.0]
                .iter()
                .map(|&l| LambdaTrace {
                    lambda: l,
                    chains: vec![vec![0.1, 0.2, 0.3, 0.4], vec![0.2, 0.1, 0.3, 0.2]],
                })
                .collect(),
        );
        rec
    }

    #[test]
    fn lambda_curve_has_measured_and_spline_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("curve.csv");
        emit_plot(&record_with_traces(), PlotKind::LambdaCurve, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.matches("measured,").count(), 3);
        assert_eq!(text.matches("spline,").count(), 101);
    }

    #[test]
    fn running_mean_needs_traces() {
        let mut rec = record_with_traces();
        rec.traces = None;
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rm.csv");
        assert!(matches!(
            emit_plot(&rec, PlotKind::RunningMean, &p),
            Err(EvidenceError::MissingTrace(_))
        ));
        assert!(!p.exists(), "no file on error");
    }

    #[test]
    fn convergence_emits_checkpoints() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("conv.csv");
        emit_plot(&record_with_traces(), PlotKind::Convergence, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.lines().count() > 2);
    }
}
