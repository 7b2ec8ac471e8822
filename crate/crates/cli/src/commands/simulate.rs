//! `sftm simulate`: integrate one path or an ensemble and write plot-ready
//! CSV.

use crate::errors::CliError;
use crate::manifest::{write_manifest, OutputLock};
use crate::opts::{load_opts_file, resolve_model, ModelOpts};
use clap::Args;
use serde::{Deserialize, Serialize};
use sftm_core::model::{LandState, ModelParams, NoiseParams};
use sftm_core::sim::{simulate_ensemble, simulate_path, write_ensemble_csv, InitialState, SimConfig};
use std::fs;
use std::io::BufWriter;
use std::path::PathBuf;
use std::time::Instant;

#[derive(Args, Serialize, Deserialize, Default, Clone)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateOpts {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelOpts,
    /// Initial forest proportion.
    #[arg(long)]
    pub x0: Option<f64>,
    /// Initial agricultural proportion.
    #[arg(long)]
    pub y0: Option<f64>,
    /// Integration step (default 1/999).
    #[arg(long)]
    pub dt: Option<f64>,
    /// Horizon (default 30).
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of paths; 1 writes `t,x,y`, more writes `path_id,t,x,y`.
    #[arg(long)]
    pub paths: Option<usize>,
    /// Draw initial states uniformly in the triangle instead of (x0, y0).
    #[arg(long)]
    pub random_init: Option<bool>,
    /// Margin of the random-initial triangle (default 0.05).
    #[arg(long)]
    pub init_margin: Option<f64>,
}

#[derive(Args)]
pub struct SimulateArgs {
    /// JSON file with the same fields as the flags; flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub opts: SimulateOpts,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct ResolvedSimulate {
    params: ModelParams,
    noise: NoiseParams,
    x0: f64,
    y0: f64,
    dt: f64,
    t_end: f64,
    seed: u64,
    paths: usize,
    random_init: bool,
    init_margin: f64,
}

pub fn run(args: SimulateArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let file: SimulateOpts = load_opts_file(args.config.as_deref())?;
    let o = &args.opts;
    let (params, noise) = resolve_model(&o.model, &file.model)?;
    let resolved = ResolvedSimulate {
        params,
        noise,
        x0: o.x0.or(file.x0).unwrap_or(0.2),
        y0: o.y0.or(file.y0).unwrap_or(0.3),
        dt: o.dt.or(file.dt).unwrap_or(1.0 / 999.0),
        t_end: o.t_end.or(file.t_end).unwrap_or(30.0),
        seed: o.seed.or(file.seed).unwrap_or(0),
        paths: o.paths.or(file.paths).unwrap_or(1),
        random_init: o.random_init.or(file.random_init).unwrap_or(false),
        init_margin: o.init_margin.or(file.init_margin).unwrap_or(0.05),
    };
    if resolved.paths == 0 {
        return Err(CliError::Config("--paths must be >= 1".into()));
    }

    let out_dir = args
        .out
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."));
    let _lock = OutputLock::acquire(&out_dir)?;

    let cfg = SimConfig {
        dt: resolved.dt,
        t_end: resolved.t_end,
        seed: resolved.seed,
        boundary_epsilon: 1e-9,
    };
    let mut writer = BufWriter::new(fs::File::create(&args.out)?);
    if resolved.paths == 1 && !resolved.random_init {
        let s0 = LandState::new(resolved.x0, resolved.y0)
            .map_err(|e| CliError::Config(e.to_string()))?;
        let path = simulate_path(&params, &noise, s0, &cfg)?;
        path.write_csv(&mut writer)?;
        eprintln!(
            "wrote {} grid points ({} boundary projections) to {}",
            path.len(),
            path.projections(),
            args.out.display()
        );
    } else {
        let init = if resolved.random_init {
            InitialState::UniformTriangle {
                margin: resolved.init_margin,
            }
        } else {
            InitialState::Fixed {
                x: resolved.x0,
                y: resolved.y0,
            }
        };
        let ensemble = simulate_ensemble(&params, &noise, &init, &cfg, resolved.paths)?;
        write_ensemble_csv(&ensemble, &mut writer)?;
        eprintln!(
            "wrote {} paths x {} grid points to {}",
            ensemble.len(),
            ensemble[0].len(),
            args.out.display()
        );
    }
    drop(writer);

    write_manifest(
        &args.out,
        "simulate",
        &resolved,
        &[],
        &[args.out.clone()],
        started,
    )?;
    Ok(())
}
