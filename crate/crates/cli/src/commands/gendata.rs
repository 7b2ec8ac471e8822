//! `sftm gendata`: sample parameter sets, simulate every replicated row, and
//! write the dataset directory.

use crate::errors::CliError;
use crate::manifest::{write_manifest, OutputLock};
use crate::opts::{load_opts_file, parse_hypothesis};
use clap::Args;
use serde::{Deserialize, Serialize};
use sftm_core::dataset::{
    build_dataset, sample_parameters, save_dataset, BuildConfig, InitialPolicy, SamplingRanges,
};
use sftm_core::model::Hypothesis;
use std::path::PathBuf;
use std::time::Instant;

#[derive(Args, Serialize, Deserialize, Default, Clone)]
#[serde(default, deny_unknown_fields)]
pub struct GendataOpts {
    /// Scale preset: `desk` (n1 500, n2 5) or `paper` (n1 20000, n2 25).
    #[arg(long)]
    pub preset: Option<String>,
    /// fsh or esh.
    #[arg(long)]
    pub hypothesis: Option<String>,
    /// Distinct parameter sets.
    #[arg(long)]
    pub n1: Option<usize>,
    /// Replicates per parameter set.
    #[arg(long)]
    pub n2: Option<usize>,
    /// Yearly observations per row (default 30).
    #[arg(long)]
    pub t: Option<usize>,
    /// Integration step (default 1/99; 1/999 by flag for fidelity).
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Initial-state policy: fixed or uniform.
    #[arg(long)]
    pub initial: Option<String>,
    #[arg(long)]
    pub x0: Option<f64>,
    #[arg(long)]
    pub y0: Option<f64>,
    /// Margin for the uniform initial-state policy.
    #[arg(long)]
    pub margin: Option<f64>,
    /// Sampling ranges; config-file only.
    #[arg(skip)]
    pub ranges: Option<SamplingRanges>,
}

#[derive(Args)]
pub struct GendataArgs {
    /// JSON file with the same fields as the flags; flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub opts: GendataOpts,
    /// Dataset directory to create.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct ResolvedGendata {
    hypothesis: Hypothesis,
    n1: usize,
    n2: usize,
    t: usize,
    dt: f64,
    seed: u64,
    initial_policy: InitialPolicy,
    ranges: SamplingRanges,
}

pub fn run(args: GendataArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let file: GendataOpts = load_opts_file(args.config.as_deref())?;
    let o = &args.opts;
    let preset = o.preset.as_deref().or(file.preset.as_deref());
    let (preset_n1, preset_n2) = match preset {
        None => (None, None),
        Some("desk") => (Some(500), Some(5)),
        Some("paper") => (Some(20_000), Some(25)),
        Some(other) => {
            return Err(CliError::Config(format!(
                "unknown preset '{other}' (available: desk, paper)"
            )))
        }
    };
    let hypothesis = parse_hypothesis(o.hypothesis.as_deref().or(file.hypothesis.as_deref()))?;
    let initial_policy = match o
        .initial
        .as_deref()
        .or(file.initial.as_deref())
        .unwrap_or("fixed")
    {
        "fixed" => InitialPolicy::Fixed {
            x: o.x0.or(file.x0).unwrap_or(0.2),
            y: o.y0.or(file.y0).unwrap_or(0.3),
        },
        "uniform" => InitialPolicy::UniformTriangle {
            margin: o.margin.or(file.margin).unwrap_or(0.05),
        },
        other => {
            return Err(CliError::Config(format!(
                "unknown initial policy '{other}' (expected fixed or uniform)"
            )))
        }
    };
    let resolved = ResolvedGendata {
        hypothesis,
        n1: o.n1.or(file.n1).or(preset_n1).unwrap_or(500),
        n2: o.n2.or(file.n2).or(preset_n2).unwrap_or(5),
        t: o.t.or(file.t).unwrap_or(30),
        dt: o.dt.or(file.dt).unwrap_or(1.0 / 99.0),
        seed: o.seed.or(file.seed).unwrap_or(0),
        initial_policy,
        ranges: file.ranges.unwrap_or_default(),
    };

    let _lock = OutputLock::acquire(&args.out)?;
    let samples = sample_parameters(resolved.n1, &resolved.ranges, hypothesis, resolved.seed)?;
    let ds = build_dataset(
        &samples,
        &resolved.ranges,
        &BuildConfig {
            n2: resolved.n2,
            t: resolved.t,
            dt: resolved.dt,
            boundary_epsilon: 1e-9,
            initial_policy: resolved.initial_policy,
            seed: resolved.seed,
        },
    )?;
    save_dataset(&ds, &args.out)?;
    eprintln!(
        "wrote {} rows ({} x {}) to {}",
        ds.n_rows(),
        resolved.n1,
        resolved.n2,
        args.out.display()
    );
    write_manifest(
        &args.out.join("dataset"),
        "gendata",
        &resolved,
        &[],
        &[args.out.clone()],
        started,
    )?;
    Ok(())
}
