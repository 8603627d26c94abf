//! Run records: the full provenance of one evidence computation, written as
//! pretty JSON via an atomic temp-file-then-rename.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::io::config::RunConfig;
use crate::reference::ReferenceSummary;
use crate::ti::{EvidenceResult, LambdaTrace};

pub const SCHEMA: &str = "evidence/run-record/v1";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema: String,
    pub artifact_version: String,
    pub config: RunConfig,
    pub reference: Option<ReferenceSummary>,
    pub result: EvidenceResult,
    pub traces: Option<Vec<LambdaTrace>>,
    /// sha256 of every input data file that fed the run
    pub data_checksums: BTreeMap<String, String>,
    pub wall_clock_seconds: f64,
}

impl RunRecord {
    pub fn new(config: RunConfig, result: EvidenceResult) -> Self {
        Self {
            schema: SCHEMA.to_string(),
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            reference: None,
            result,
            traces: None,
            data_checksums: BTreeMap::new(),
            wall_clock_seconds: 0.0,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Write atomically: temp file in the same directory, then rename.
    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json()?.as_bytes())
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp~");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::config::MethodKind;
    use crate::ti::{DiagnosticsSummary, Method};

    fn dummy() -> RunRecord {
        RunRecord::new(
            RunConfig::new("cusp1d", MethodKind::Laplace),
            EvidenceResult {
                log_zref: 1.0,
                ti_correction: 0.0,
                log_z: 1.0,
                interval95: (1.0, 1.0),
                per_lambda: vec![],
                method: Method::Laplace,
                converged: true,
                diagnostics: DiagnosticsSummary {
                    max_rhat: None,
                    non_converged_lambdas: vec![],
                    max_spline_curvature: 0.0,
                },
            },
        )
    }

    #[test]
    fn json_round_trip() {
        let r = dummy();
        let text = r.to_json().unwrap();
        let back = RunRecord::from_json(&text).unwrap();
        assert_eq!(back.to_json().unwrap(), text);
    }

    #[test]
    fn atomic_write_creates_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rec.json");
        dummy().write(&path).unwrap();
        assert!(path.exists());
        assert!(!path.with_extension("tmp~").exists());
        let back = RunRecord::load(&path).unwrap();
        assert_eq!(back.schema, SCHEMA);
    }
}
