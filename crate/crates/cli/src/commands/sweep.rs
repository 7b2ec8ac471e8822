//! `sftm sweep`: estimate `E[G(x_T)]` across one parameter's grid, write the
//! curve CSV and the sign-change thresholds JSON.
//! `sftm threshold`: re-extract thresholds from an existing curve CSV.

use crate::errors::CliError;
use crate::manifest::{write_manifest, OutputLock};
use crate::opts::{load_opts_file, resolve_model, ModelOpts};
use clap::Args;
use serde::{Deserialize, Serialize};
use sftm_core::analysis::{
    find_sign_changes, sweep, thresholds_to_json, SweepCurve, SweepParameter, SweepSpec, Threshold,
};
use sftm_core::model::{LandState, ModelParams, NoiseParams};
use std::fs;
use std::io::BufReader;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

#[derive(Args, Serialize, Deserialize, Default, Clone)]
#[serde(default, deny_unknown_fields)]
pub struct SweepOpts {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelOpts,
    /// Swept parameter: eta, delta, lambda, gamma, alpha or sigma.
    #[arg(long)]
    pub parameter: Option<String>,
    #[arg(long)]
    pub lo: Option<f64>,
    #[arg(long)]
    pub hi: Option<f64>,
    /// Number of grid points (default 50).
    #[arg(long)]
    pub grid_size: Option<usize>,
    /// Monte-Carlo paths per grid point (default 100).
    #[arg(long)]
    pub paths: Option<usize>,
    /// Terminal time T (default 30).
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Integration step (default 1/99 for sweep throughput).
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub x0: Option<f64>,
    #[arg(long)]
    pub y0: Option<f64>,
}

#[derive(Args)]
pub struct SweepArgs {
    /// JSON file with the same fields as the flags; flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub opts: SweepOpts,
    /// Curve CSV output path.
    #[arg(long)]
    pub curve_out: PathBuf,
    /// Thresholds JSON output path (default: `<curve-out>.thresholds.json`).
    #[arg(long)]
    pub thresholds_out: Option<PathBuf>,
}

#[derive(Serialize)]
struct ResolvedSweep {
    parameter: SweepParameter,
    lo: f64,
    hi: f64,
    grid_size: usize,
    paths_per_point: usize,
    horizon: f64,
    dt: f64,
    seed: u64,
    params: ModelParams,
    noise: NoiseParams,
    x0: f64,
    y0: f64,
}

pub fn run(args: SweepArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let file: SweepOpts = load_opts_file(args.config.as_deref())?;
    let o = &args.opts;
    let (params, noise) = resolve_model(&o.model, &file.model)?;
    let parameter_name = o
        .parameter
        .as_deref()
        .or(file.parameter.as_deref())
        .ok_or_else(|| CliError::Config("--parameter is required".into()))?;
    let parameter = SweepParameter::from_str(parameter_name).map_err(CliError::Config)?;
    let resolved = ResolvedSweep {
        parameter,
        lo: o.lo.or(file.lo).ok_or_else(|| CliError::Config("--lo is required".into()))?,
        hi: o.hi.or(file.hi).ok_or_else(|| CliError::Config("--hi is required".into()))?,
        grid_size: o.grid_size.or(file.grid_size).unwrap_or(50),
        paths_per_point: o.paths.or(file.paths).unwrap_or(100),
        horizon: o.horizon.or(file.horizon).unwrap_or(30.0),
        dt: o.dt.or(file.dt).unwrap_or(1.0 / 99.0),
        seed: o.seed.or(file.seed).unwrap_or(0),
        params,
        noise,
        x0: o.x0.or(file.x0).unwrap_or(0.2),
        y0: o.y0.or(file.y0).unwrap_or(0.3),
    };

    let spec = SweepSpec {
        parameter: resolved.parameter,
        lo: resolved.lo,
        hi: resolved.hi,
        grid_size: resolved.grid_size,
        paths_per_point: resolved.paths_per_point,
        horizon: resolved.horizon,
        dt: resolved.dt,
        boundary_epsilon: 1e-9,
        base_params: resolved.params,
        base_noise: resolved.noise,
        initial: LandState {
            x: resolved.x0,
            y: resolved.y0,
        },
        seed: resolved.seed,
    };

    let out_dir = parent_dir(&args.curve_out);
    let _lock = OutputLock::acquire(&out_dir)?;

    let curve = sweep(&spec)?;
    let thresholds = find_sign_changes(&curve);

    let mut writer = std::io::BufWriter::new(fs::File::create(&args.curve_out)?);
    curve.write_csv(&mut writer)?;
    drop(writer);

    let thresholds_path = args.thresholds_out.clone().unwrap_or_else(|| {
        let mut name = args
            .curve_out
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "curve".into());
        name.push_str(".thresholds.json");
        args.curve_out.with_file_name(name)
    });
    fs::write(&thresholds_path, thresholds_to_json(&thresholds))?;

    report_thresholds(&thresholds);
    write_manifest(
        &args.curve_out,
        "sweep",
        &resolved,
        &[],
        &[args.curve_out.clone(), thresholds_path],
        started,
    )?;
    Ok(())
}

#[derive(Args)]
pub struct ThresholdArgs {
    /// Curve CSV produced by `sftm sweep`.
    #[arg(long)]
    pub curve: PathBuf,
    /// Which parameter the curve swept.
    #[arg(long)]
    pub parameter: String,
    /// Thresholds JSON output path (default: `<curve>.thresholds.json`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct ResolvedThreshold {
    curve: String,
    parameter: SweepParameter,
}

pub fn run_threshold(args: ThresholdArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let parameter = SweepParameter::from_str(&args.parameter).map_err(CliError::Config)?;
    let reader = BufReader::new(
        fs::File::open(&args.curve)
            .map_err(|e| CliError::Io(format!("{}: {e}", args.curve.display())))?,
    );
    let curve = SweepCurve::read_csv(parameter, reader)?;
    let thresholds = find_sign_changes(&curve);

    let out = args.out.clone().unwrap_or_else(|| {
        let mut name = args
            .curve
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "curve".into());
        name.push_str(".thresholds.json");
        args.curve.with_file_name(name)
    });
    let out_dir = parent_dir(&out);
    let _lock = OutputLock::acquire(&out_dir)?;
    fs::write(&out, thresholds_to_json(&thresholds))?;

    report_thresholds(&thresholds);
    write_manifest(
        &out,
        "threshold",
        &ResolvedThreshold {
            curve: args.curve.display().to_string(),
            parameter,
        },
        &[args.curve.clone()],
        &[out.clone()],
        started,
    )?;
    Ok(())
}

fn report_thresholds(thresholds: &[Threshold]) {
    if thresholds.is_empty() {
        eprintln!("no sign changes detected");
    } else {
        for t in thresholds {
            eprintln!(
                "sign change: {} = {:.4} ({:?})",
                t.parameter, t.crossing, t.direction
            );
        }
    }
}

pub(crate) fn parent_dir(path: &std::path::Path) -> PathBuf {
    path.parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."))
}
