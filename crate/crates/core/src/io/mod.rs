//! Command-layer operations behind the CLI: run an estimator end to end,
//! compare completed runs, fetch/normalise case data, and emit plot CSVs.

pub mod cases;
pub mod config;
pub mod plots;
pub mod record;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::density::Density;
use crate::error::{EvidenceError, Result};
use crate::estimators::{
    bayes_factor_matrix, laplace_evidence, model_switch_ti, power_posterior_evidence,
    BayesFactorMatrix,
};
use crate::math::mix_seed;
use crate::models;
use crate::models::radiata::{RadiataModel, RadiataVariant};
use crate::models::renewal::{RenewalConfig, RenewalVariant};
use crate::reference::{
    reference_diagonal_orthant, reference_from_mode, reference_from_samples,
    reference_variational, GaussianReference, VariationalOptions,
};
use crate::sampler::{Kernel, SamplerConfig};
use crate::ti::{referenced_ti_traced, telescopic_ti, TelescopicSchedule};
use config::{MethodKind, Profile, ReferenceKind, RunConfig};
use record::RunRecord;

/// Days kept by the desk profile (the truncated study window).
pub const DESK_SERIES_DAYS: usize = 120;

pub struct ResolvedModel {
    pub density: Density,
    pub default_kernel: Kernel,
    pub prior: Option<Density>,
    pub checksums: BTreeMap<String, String>,
}

/// External renewal model description (JSON file referenced by `model_id`).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub kind: String,
    pub variant: RenewalVariant,
    pub cases_csv: Option<PathBuf>,
    pub gi_prior_loc: Option<f64>,
    pub gi_prior_scale: Option<f64>,
}

fn renewal_model(
    variant: RenewalVariant,
    profile: Profile,
    cases_path: Option<&Path>,
    gi_prior: Option<(f64, f64)>,
) -> Result<ResolvedModel> {
    let (series, checksum) = cases::load_series(cases_path)?;
    let series = match profile {
        Profile::Desk => series.truncated(DESK_SERIES_DAYS),
        Profile::Full => series,
    };
    let mut cfg = RenewalConfig::new(variant, series.cases.clone())?;
    if let Some((loc, scale)) = gi_prior {
        cfg.gi_prior = crate::models::renewal::TruncNormal { loc, scale };
    }
    let mut checksums = BTreeMap::new();
    checksums.insert("cases".to_string(), checksum);
    Ok(ResolvedModel {
        density: cfg.density(),
        default_kernel: Kernel::Hamiltonian,
        prior: None,
        checksums,
    })
}

/// Resolve a model id: builtin name or a path to a model config file.
pub fn resolve_model(
    id: &str,
    profile: Profile,
    cases_path: Option<&Path>,
) -> Result<ResolvedModel> {
    let plain = |density: Density| ResolvedModel {
        density,
        default_kernel: Kernel::AdaptiveRandomWalk,
        prior: None,
        checksums: BTreeMap::new(),
    };
    match id {
        "cusp1d" => Ok(plain(models::cusp1d())),
        "constrained2d" => Ok(plain(models::constrained2d())),
        "constrained2d-unbounded" => Ok(plain(models::constrained2d_unbounded())),
        "gauss1d" => Ok(plain(models::gaussian1d(0.0, 1.0))),
        "radiata:M1" | "radiata:M2" => {
            let variant = if id.ends_with("M1") {
                RadiataVariant::M1
            } else {
                RadiataVariant::M2
            };
            let model = RadiataModel::bundled(variant);
            let mut checksums = BTreeMap::new();
            checksums.insert(
                "radiata".to_string(),
                cases::sha256_hex(include_str!("../../data/radiata.csv")),
            );
            Ok(ResolvedModel {
                density: model.density(),
                default_kernel: Kernel::AdaptiveRandomWalk,
                prior: Some(model.prior_density()),
                checksums,
            })
        }
        covid if covid.starts_with("covid:") => {
            let parts: Vec<&str> = covid.split(':').collect();
            if parts.len() != 3 {
                return Err(EvidenceError::UnknownModel(format!(
                    "{id} (expected covid:gi:<days>|covid:ar:<k>|covid:w:<k>)"
                )));
            }
            let variant = match parts[1] {
                "gi" => RenewalVariant::GiFixed {
                    gi_mean: parts[2].parse().map_err(|_| {
                        EvidenceError::UnknownModel(format!("bad GI value in {id}"))
                    })?,
                },
                "ar" => RenewalVariant::Ar {
                    order: parts[2].parse().map_err(|_| {
                        EvidenceError::UnknownModel(format!("bad AR order in {id}"))
                    })?,
                },
                "w" => RenewalVariant::Window {
                    days: parts[2].parse().map_err(|_| {
                        EvidenceError::UnknownModel(format!("bad window length in {id}"))
                    })?,
                },
                other => {
                    return Err(EvidenceError::UnknownModel(format!(
                        "covid variant '{other}' (gi|ar|w)"
                    )))
                }
            };
            renewal_model(variant, profile, cases_path, None)
        }
        path if Path::new(path).exists() => {
            let text = std::fs::read_to_string(path)?;
            let file: ModelFile = serde_json::from_str(&text)?;
            if file.kind != "renewal" {
                return Err(EvidenceError::UnknownModel(format!(
                    "model file kind '{}' (only 'renewal' supported)",
                    file.kind
                )));
            }
            let gi = match (file.gi_prior_loc, file.gi_prior_scale) {
                (Some(l), Some(s)) => Some((l, s)),
                (None, None) => None,
                _ => {
                    return Err(EvidenceError::InvalidArgument(
                        "gi_prior_loc and gi_prior_scale must be set together".into(),
                    ))
                }
            };
            renewal_model(
                file.variant,
                profile,
                file.cases_csv.as_deref().or(cases_path),
                gi,
            )
        }
        other => Err(EvidenceError::UnknownModel(other.to_string())),
    }
}

fn build_reference(
    kind: ReferenceKind,
    density: &Density,
    sampler: &SamplerConfig,
) -> Result<GaussianReference> {
    // the reference gets its own deterministic seed stream
    let ref_cfg = SamplerConfig {
        seed: mix_seed(&[sampler.seed, 0x5ef]),
        ..sampler.clone()
    };
    match kind {
        ReferenceKind::Mode => {
            let start: Vec<f64> = density
                .init_hint()
                .map(|h| h.to_vec())
                .unwrap_or_else(|| vec![0.0; density.dim()]);
            reference_from_mode(density, &start)
        }
        ReferenceKind::Sampled => reference_from_samples(density, &ref_cfg),
        ReferenceKind::DiagonalOrthant => reference_diagonal_orthant(density, &ref_cfg),
        ReferenceKind::Variational => {
            let init = reference_from_samples(density, &ref_cfg)?;
            Ok(reference_variational(density, &init, &ref_cfg, &VariationalOptions::default())?
                .reference)
        }
    }
}

/// Execute one evidence run end to end and assemble the run record.
pub fn cmd_evidence(config: &RunConfig) -> Result<RunRecord> {
    config.validate()?;
    let started = Instant::now();
    let model = resolve_model(&config.model_id, config.profile, config.cases_path.as_deref())?;
    let sampler = config.sampler.build(model.default_kernel);
    let schedule = config.lambdas.schedule()?;

    let mut reference = None;
    let mut traces = None;
    let result = match config.method {
        MethodKind::Laplace => {
            let r = build_reference(config.reference_kind, &model.density, &sampler)?;
            let res = laplace_evidence(&r);
            reference = Some(r.summary());
            res
        }
        MethodKind::RefTi => {
            let r = build_reference(config.reference_kind, &model.density, &sampler)?;
            let (res, tr) = referenced_ti_traced(&model.density, &r, &schedule, &sampler)?;
            reference = Some(r.summary());
            if config.emit_traces {
                traces = Some(tr);
            }
            res
        }
        MethodKind::Pp => {
            let prior = model.prior.as_ref().ok_or_else(|| {
                EvidenceError::InvalidArgument(format!(
                    "model '{}' has no prior/likelihood split for power posteriors",
                    config.model_id
                ))
            })?;
            power_posterior_evidence(&model.density, prior, &schedule, &sampler)?
        }
        MethodKind::ModelSwitch => {
            let other_id = config.model_b.as_ref().expect("validated");
            let other =
                resolve_model(other_id, config.profile, config.cases_path.as_deref())?;
            model_switch_ti(&model.density, &other.density, &schedule, &sampler)?
        }
        MethodKind::Telescopic => {
            if config.model_id != "cusp1d" {
                return Err(EvidenceError::InvalidArgument(
                    "CLI telescopic runs support the cusp1d demo; other rung sets are \
                     caller-supplied through the library API"
                        .into(),
                ));
            }
            let r = build_reference(config.reference_kind, &model.density, &sampler)?;
            let bridge = {
                let refd = r.as_density();
                Density::new(model.density.space().clone(), move |t: &[f64]| {
                    let d = t[0] - 4.0;
                    refd.log_q(t) - 0.5 * d.powi(4)
                })
                .with_init_hint(r.location().to_vec())
                .with_scale_hint(r.marginal_sds())
            };
            let telescope = TelescopicSchedule {
                head: r.clone(),
                intermediates: vec![bridge],
                target: model.density.clone(),
            };
            let res = telescopic_ti(&telescope, &schedule, &sampler)?;
            reference = Some(r.summary());
            res
        }
    };

    let mut rec = RunRecord::new(config.clone(), result);
    rec.reference = reference;
    rec.traces = traces;
    rec.data_checksums = model.checksums;
    rec.wall_clock_seconds = started.elapsed().as_secs_f64();
    if let Some(path) = &config.output_path {
        rec.write(path)?;
    }
    Ok(rec)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub matrix: BayesFactorMatrix,
    pub best_model: String,
}

/// Compare completed runs (record JSON files) into a Bayes-factor matrix.
/// Runs over different input data (checksum mismatch) are refused.
pub fn cmd_compare(record_paths: &[PathBuf], out_prefix: &Path) -> Result<ComparisonReport> {
    if record_paths.len() < 2 {
        return Err(EvidenceError::InvalidArgument(
            "compare needs at least two run records".into(),
        ));
    }
    let mut records = Vec::new();
    for p in record_paths {
        records.push(RunRecord::load(p)?);
    }
    let mut seen: BTreeMap<String, String> = BTreeMap::new();
    for r in &records {
        for (k, v) in &r.data_checksums {
            if let Some(prev) = seen.get(k) {
                if prev != v {
                    return Err(EvidenceError::ComparisonRefused(format!(
                        "records disagree on input data '{k}'"
                    )));
                }
            } else {
                seen.insert(k.clone(), v.clone());
            }
        }
    }
    let ids: Vec<String> = records.iter().map(|r| r.config.model_id.clone()).collect();
    let results: Vec<_> = records.iter().map(|r| r.result.clone()).collect();
    let matrix = bayes_factor_matrix(&results, &ids)?;
    let best_model = matrix.model_ids[matrix.best()].clone();

    let report = ComparisonReport {
        matrix,
        best_model: best_model.clone(),
    };
    let json_path = out_prefix.with_extension("json");
    record::write_atomic(&json_path, serde_json::to_string_pretty(&report)?.as_bytes())?;

    // heat-map style CSV: one row per model, the best flagged
    let m = &report.matrix;
    let mut csv = String::from("model,best");
    for id in &m.model_ids {
        csv.push_str(&format!(",log_bf_vs_{id}"));
    }
    csv.push('\n');
    for (i, id) in m.model_ids.iter().enumerate() {
        csv.push_str(&format!(
            "{id},{}",
            if *id == best_model { "*" } else { "" }
        ));
        for j in 0..m.model_ids.len() {
            csv.push_str(&format!(",{}", m.log_bf[i][j]));
        }
        csv.push('\n');
    }
    record::write_atomic(&out_prefix.with_extension("csv"), csv.as_bytes())?;
    Ok(report)
}

/// Fetch (or read) an ECDC-schema CSV, normalise it for one country, write
/// the `date,cases` CSV plus a `.sha256` of the source next to it.
pub fn cmd_fetch_cases(
    url: Option<&str>,
    from_file: Option<&Path>,
    country: &str,
    out: &Path,
) -> Result<String> {
    let raw = match from_file {
        Some(p) => std::fs::read_to_string(p)?,
        None => cases::fetch_url(url.unwrap_or(cases::ECDC_URL))?,
    };
    let checksum = cases::sha256_hex(&raw);
    let series = cases::normalize_ecdc(&raw, country)?;
    record::write_atomic(out, series.to_csv().as_bytes())?;
    record::write_atomic(
        &out.with_extension("sha256"),
        format!("{checksum}\n").as_bytes(),
    )?;
    Ok(checksum)
}

/// Emit one plot CSV from a stored run record.
pub fn cmd_emit_plots(record_path: &Path, kind: plots::PlotKind, out: &Path) -> Result<()> {
    let rec = RunRecord::load(record_path)?;
    plots::emit_plot(&rec, kind, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_model_is_usage_error() {
        let err = match resolve_model("no-such-model", Profile::Desk, None) {
            Err(e) => e,
            Ok(_) => panic!("expected an error"),
        };
        assert!(matches!(err, EvidenceError::UnknownModel(_)));
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn covid_ids_parse() {
        for id in ["covid:gi:8", "covid:ar:2", "covid:w:7", "covid:gi:6.5"] {
            let m = resolve_model(id, Profile::Desk, None).unwrap();
            assert!(m.density.dim() > 10, "{id}");
            assert_eq!(m.default_kernel, Kernel::Hamiltonian);
        }
        assert!(resolve_model("covid:xx:3", Profile::Desk, None).is_err());
    }

    #[test]
    fn desk_profile_truncates_series() {
        let desk = resolve_model("covid:w:7", Profile::Desk, None).unwrap();
        let full = resolve_model("covid:w:7", Profile::Full, None).unwrap();
        assert!(desk.density.dim() < full.density.dim());
    }

    #[test]
    fn laplace_run_on_gaussian_is_exact() {
        let mut cfg = RunConfig::new("gauss1d", MethodKind::Laplace);
        cfg.sampler.iters = 10000;
        cfg.sampler.seed = 9;
        let rec = cmd_evidence(&cfg).unwrap();
        let expect = 0.5 * (2.0 * std::f64::consts::PI).ln();
        assert!(
            (rec.result.log_z - expect).abs() < 0.05,
            "laplace on exact gaussian: {} vs {expect}",
            rec.result.log_z
        );
        assert_eq!(rec.result.ti_correction, 0.0);
    }
}
