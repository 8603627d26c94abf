//! `evidence` CLI: compute model evidence, compare runs, fetch case data,
//! emit plot CSVs.
//!
//! Exit codes: 0 converged, 2 completed but flagged by the Rhat gate,
//! 3 usage, 4 data, 5 numerical failure.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use evidence::error::EvidenceError;
use evidence::io::config::{LambdaSpec, MethodKind, Profile, RunConfig};
use evidence::io::{cmd_compare, cmd_emit_plots, cmd_evidence, cmd_fetch_cases};

#[derive(Parser)]
#[command(
    name = "evidence",
    about = "Bayesian model evidence via referenced thermodynamic integration",
    version,
    args_conflicts_with_subcommands = true,
    subcommand_negates_reqs = true
)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,

    #[command(flatten)]
    run: Option<RunArgs>,
}

#[derive(Subcommand)]
enum Command {
    /// Compare completed run records into a Bayes-factor matrix
    Compare {
        /// run-record JSON files (two or more)
        #[arg(required = true, num_args = 2..)]
        records: Vec<PathBuf>,
        /// output prefix; writes <prefix>.json and <prefix>.csv
        #[arg(long, default_value = "comparison")]
        out: PathBuf,
    },
    /// Download (or read) an ECDC daily-case CSV and normalise it
    FetchCases {
        /// source URL (defaults to the ECDC case-distribution endpoint)
        #[arg(long)]
        url: Option<String>,
        /// offline override: read this ECDC-schema file instead of fetching
        #[arg(long)]
        from_file: Option<PathBuf>,
        #[arg(long, default_value = "South_Korea")]
        country: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Emit plot data (CSV) from a stored run record
    EmitPlots {
        #[arg(long)]
        record: PathBuf,
        /// lambda-curve | running-mean | convergence
        #[arg(long)]
        kind: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// builtin model id (cusp1d, constrained2d, gauss1d, radiata:M1,
    /// radiata:M2, covid:gi:8, covid:ar:2, covid:w:7, ...) or a model file
    #[arg(long, required = true)]
    model: String,

    /// second model for --method model-switch
    #[arg(long)]
    model_b: Option<String>,

    /// ref-ti | laplace | pp | model-switch | telescopic
    #[arg(long, default_value = "ref-ti")]
    method: String,

    /// mode | sampled | diagonal-orthant | variational
    #[arg(long, default_value = "sampled")]
    reference: String,

    /// count ("11") or explicit list ("0,0.2,0.5,0.8,1.0")
    #[arg(long, default_value = "11")]
    lambdas: String,

    /// post-warmup draws per chain
    #[arg(long, default_value_t = 5000)]
    iters: usize,

    /// warmup draws per chain (defaults to --iters)
    #[arg(long)]
    warmup: Option<usize>,

    #[arg(long, default_value_t = 4)]
    chains: usize,

    #[arg(long, default_value_t = 1)]
    seed: u64,

    /// adaptive-random-walk | hamiltonian (default chosen per model)
    #[arg(long)]
    kernel: Option<String>,

    #[arg(long, default_value_t = 25)]
    leapfrog: usize,

    #[arg(long)]
    target_accept: Option<f64>,

    /// write the run record JSON here
    #[arg(long)]
    out: Option<PathBuf>,

    /// keep per-iteration log-ratio traces in the record
    #[arg(long, default_value_t = false)]
    emit_traces: bool,

    /// desk (truncated, fast) | full
    #[arg(long, default_value = "desk")]
    profile: String,

    /// normalised date,cases CSV overriding the bundled series
    #[arg(long)]
    cases: Option<PathBuf>,

    /// worker thread count (also EVIDENCE_WORKERS)
    #[arg(long)]
    workers: Option<usize>,
}

fn parse_kernel(s: &str) -> Result<evidence::Kernel, EvidenceError> {
    match s {
        "adaptive-random-walk" | "rwm" => Ok(evidence::Kernel::AdaptiveRandomWalk),
        "hamiltonian" | "hmc" => Ok(evidence::Kernel::Hamiltonian),
        other => Err(EvidenceError::InvalidArgument(format!(
            "unknown kernel '{other}'"
        ))),
    }
}

fn run(args: RunArgs) -> Result<i32, EvidenceError> {
    let workers = args
        .workers
        .or_else(|| {
            std::env::var("EVIDENCE_WORKERS")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .unwrap_or(0);
    if workers > 0 {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global();
    }

    let mut cfg = RunConfig::new(&args.model, args.method.parse()?);
    cfg.model_b = args.model_b;
    cfg.reference_kind = args.reference.parse()?;
    cfg.lambdas = LambdaSpec::parse(&args.lambdas)?;
    cfg.sampler.chains = args.chains;
    cfg.sampler.iters = args.iters;
    cfg.sampler.warmup = args.warmup;
    cfg.sampler.seed = args.seed;
    cfg.sampler.kernel = match &args.kernel {
        Some(k) => Some(parse_kernel(k)?),
        None => None,
    };
    cfg.sampler.leapfrog = args.leapfrog;
    cfg.sampler.target_accept = args.target_accept;
    cfg.output_path = args.out;
    cfg.emit_traces = args.emit_traces;
    cfg.profile = match args.profile.as_str() {
        "desk" => Profile::Desk,
        "full" => Profile::Full,
        other => {
            return Err(EvidenceError::InvalidArgument(format!(
                "unknown profile '{other}' (desk|full)"
            )))
        }
    };
    cfg.cases_path = args.cases;

    let record = cmd_evidence(&cfg)?;
    let r = &record.result;
    println!(
        "model: {}  method: {:?}  reference: {:?}",
        cfg.model_id, cfg.method, cfg.reference_kind
    );
    println!(
        "log_zref: {:.6}  ti_correction: {:.6}  log_z: {:.6}",
        r.log_zref, r.ti_correction, r.log_z
    );
    println!(
        "z: {:.6e}  95% interval (log): [{:.6}, {:.6}]",
        r.log_z.exp(),
        r.interval95.0,
        r.interval95.1
    );
    if cfg.method == MethodKind::RefTi || cfg.method == MethodKind::Telescopic {
        println!(
            "max rhat: {:.4}  max spline curvature: {:.4}",
            r.diagnostics.max_rhat.unwrap_or(f64::NAN),
            r.diagnostics.max_spline_curvature
        );
    }
    if let Some(out) = &cfg.output_path {
        println!("record: {}", out.display());
    }
    if !r.converged {
        eprintln!(
            "warning: Rhat gate failed at lambdas {:?}",
            r.diagnostics.non_converged_lambdas
        );
        return Ok(2);
    }
    Ok(0)
}

fn main() {
    let cli = Cli::parse();
    let outcome: Result<i32, EvidenceError> = match cli.command {
        Some(Command::Compare { records, out }) => cmd_compare(&records, &out).map(|rep| {
            println!("best model: {}", rep.best_model);
            println!(
                "wrote {} and {}",
                out.with_extension("json").display(),
                out.with_extension("csv").display()
            );
            0
        }),
        Some(Command::FetchCases {
            url,
            from_file,
            country,
            out,
        }) => cmd_fetch_cases(url.as_deref(), from_file.as_deref(), &country, &out).map(|sum| {
            println!("wrote {} (source sha256 {sum})", out.display());
            0
        }),
        Some(Command::EmitPlots { record, kind, out }) => kind
            .parse()
            .and_then(|k| cmd_emit_plots(&record, k, &out))
            .map(|()| {
                println!("wrote {}", out.display());
                0
            }),
        None => match cli.run {
            Some(args) => run(args),
            None => {
                eprintln!("error: a run needs --model (or use a subcommand; see --help)");
                std::process::exit(3);
            }
        },
    };
    match outcome {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
