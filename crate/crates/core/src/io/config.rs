//! Run configuration: what to compute, with which estimator, reference and
//! sampler settings. Unknown keys are rejected on load.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{EvidenceError, Result};
use crate::sampler::{Kernel, SamplerConfig};
use crate::ti::LambdaSchedule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodKind {
    RefTi,
    Laplace,
    Pp,
    ModelSwitch,
    Telescopic,
}

impl std::str::FromStr for MethodKind {
    type Err = EvidenceError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ref-ti" => Ok(Self::RefTi),
            "laplace" => Ok(Self::Laplace),
            "pp" => Ok(Self::Pp),
            "model-switch" => Ok(Self::ModelSwitch),
            "telescopic" => Ok(Self::Telescopic),
            other => Err(EvidenceError::InvalidArgument(format!(
                "unknown method '{other}' (ref-ti|laplace|pp|model-switch|telescopic)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceKind {
    Mode,
    Sampled,
    DiagonalOrthant,
    Variational,
}

impl std::str::FromStr for ReferenceKind {
    type Err = EvidenceError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mode" => Ok(Self::Mode),
            "sampled" => Ok(Self::Sampled),
            "diagonal-orthant" => Ok(Self::DiagonalOrthant),
            "variational" => Ok(Self::Variational),
            other => Err(EvidenceError::InvalidArgument(format!(
                "unknown reference '{other}' (mode|sampled|diagonal-orthant|variational)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    /// truncated series / reduced iteration budgets; minutes not hours
    Desk,
    /// the full-length runs
    Full,
}

/// Lambda grid: either a count of equidistant points or an explicit list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LambdaSpec {
    Count(usize),
    List(Vec<f64>),
}

impl LambdaSpec {
    pub fn schedule(&self) -> Result<LambdaSchedule> {
        match self {
            LambdaSpec::Count(n) => LambdaSchedule::equidistant(*n),
            LambdaSpec::List(v) => LambdaSchedule::from_values(v.clone()),
        }
    }

    /// Parse "11" or "0,0.2,0.5,0.8,1.0".
    pub fn parse(s: &str) -> Result<Self> {
        if !s.contains(',') {
            if let Ok(n) = s.trim().parse::<usize>() {
                return Ok(LambdaSpec::Count(n));
            }
        }
        let vals: std::result::Result<Vec<f64>, _> =
            s.split(',').map(|p| p.trim().parse::<f64>()).collect();
        match vals {
            Ok(v) => Ok(LambdaSpec::List(v)),
            Err(e) => Err(EvidenceError::InvalidArgument(format!(
                "cannot parse lambda spec '{s}': {e}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSettings {
    pub chains: usize,
    /// post-warmup draws per chain
    pub iters: usize,
    /// defaults to `iters` (the half-burn-in split)
    pub warmup: Option<usize>,
    pub seed: u64,
    pub kernel: Option<Kernel>,
    pub leapfrog: usize,
    pub target_accept: Option<f64>,
}

impl Default for SamplerSettings {
    fn default() -> Self {
        Self {
            chains: 4,
            iters: 5000,
            warmup: None,
            seed: 1,
            kernel: None,
            leapfrog: 25,
            target_accept: None,
        }
    }
}

impl SamplerSettings {
    /// Concrete sampler config given a model-informed default kernel.
    pub fn build(&self, default_kernel: Kernel) -> SamplerConfig {
        let kernel = self.kernel.unwrap_or(default_kernel);
        let target = self.target_accept.unwrap_or(match kernel {
            Kernel::AdaptiveRandomWalk => 0.234,
            Kernel::Hamiltonian => 0.8,
        });
        SamplerConfig {
            n_chains: self.chains,
            n_iter: self.iters,
            n_warmup: self.warmup.unwrap_or(self.iters),
            seed: self.seed,
            kernel,
            hmc_leapfrog_steps: self.leapfrog,
            target_accept: target,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// builtin name (cusp1d, constrained2d, radiata:M1, covid:gi:8, ...) or
    /// a path to a renewal model config file
    pub model_id: String,
    /// second model for model-switch runs
    pub model_b: Option<String>,
    pub method: MethodKind,
    pub reference_kind: ReferenceKind,
    pub lambdas: LambdaSpec,
    pub sampler: SamplerSettings,
    pub output_path: Option<PathBuf>,
    pub emit_traces: bool,
    pub profile: Profile,
    /// normalised (date,cases) csv overriding the bundled series
    pub cases_path: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(model_id: &str, method: MethodKind) -> Self {
        Self {
            model_id: model_id.to_string(),
            model_b: None,
            method,
            reference_kind: ReferenceKind::Sampled,
            lambdas: LambdaSpec::Count(11),
            sampler: SamplerSettings::default(),
            output_path: None,
            emit_traces: false,
            profile: Profile::Desk,
            cases_path: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.model_id.is_empty() {
            return Err(EvidenceError::InvalidArgument("empty model id".into()));
        }
        if self.method == MethodKind::ModelSwitch && self.model_b.is_none() {
            return Err(EvidenceError::InvalidArgument(
                "model-switch needs --model-b".into(),
            ));
        }
        self.lambdas.schedule()?;
        if self.sampler.chains == 0 || self.sampler.iters == 0 {
            return Err(EvidenceError::InvalidArgument(
                "sampler needs positive chains and iters".into(),
            ));
        }
        Ok(())
    }

    pub fn from_json_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: RunConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_spec_parses_both_forms() {
        assert_eq!(LambdaSpec::parse("11").unwrap(), LambdaSpec::Count(11));
        assert_eq!(
            LambdaSpec::parse("0,0.2,0.5,0.8,1.0").unwrap(),
            LambdaSpec::List(vec![0.0, 0.2, 0.5, 0.8, 1.0])
        );
        assert!(LambdaSpec::parse("0,abc").is_err());
    }

    #[test]
    fn config_round_trips_losslessly() {
        let cfg = RunConfig::new("cusp1d", MethodKind::RefTi);
        let text = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), text);
    }

    #[test]
    fn unknown_keys_rejected() {
        let cfg = RunConfig::new("cusp1d", MethodKind::RefTi);
        let mut v: serde_json::Value = serde_json::to_value(&cfg).unwrap();
        v["no_such_key"] = serde_json::json!(1);
        let back: std::result::Result<RunConfig, _> = serde_json::from_value(v);
        assert!(back.is_err());
    }

    #[test]
    fn model_switch_requires_second_model() {
        let cfg = RunConfig::new("radiata:M1", MethodKind::ModelSwitch);
        assert!(cfg.validate().is_err());
    }
}
