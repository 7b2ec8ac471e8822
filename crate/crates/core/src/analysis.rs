//! Monte-Carlo estimation of the expected net gain `E[G(x_T)]`,
//! one-parameter sensitivity sweeps, and sign-change threshold extraction.
//!
//! Sweeps use common random numbers: every grid point reuses the same
//! per-path seed sequence, which smooths the curve without biasing the
//! per-point expectation. Grid points whose parameter combination violates
//! the constraint set are skipped and flagged rather than failing the whole
//! sweep.

use crate::model::{validate_params, LandState, ModelParams, NoiseParams};
use crate::seed;
use crate::sim::{simulate_ensemble, simulate_path, InitialState, SimConfig, SimError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

/// Parameter swept in a sensitivity analysis. `Sigma` sets both noise
/// intensities to the same value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParameter {
    Eta,
    Delta,
    Lambda,
    Gamma,
    Alpha,
    Sigma,
}

impl fmt::Display for SweepParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SweepParameter::Eta => "eta",
            SweepParameter::Delta => "delta",
            SweepParameter::Lambda => "lambda",
            SweepParameter::Gamma => "gamma",
            SweepParameter::Alpha => "alpha",
            SweepParameter::Sigma => "sigma",
        };
        f.write_str(s)
    }
}

impl FromStr for SweepParameter {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "eta" => Ok(SweepParameter::Eta),
            "delta" => Ok(SweepParameter::Delta),
            "lambda" => Ok(SweepParameter::Lambda),
            "gamma" => Ok(SweepParameter::Gamma),
            "alpha" => Ok(SweepParameter::Alpha),
            "sigma" => Ok(SweepParameter::Sigma),
            other => Err(format!(
                "unknown sweep parameter '{other}' (expected eta, delta, lambda, gamma, alpha or sigma)"
            )),
        }
    }
}

impl SweepParameter {
    /// Apply the swept value on top of a base parameter set.
    pub fn apply(&self, value: f64, params: &mut ModelParams, noise: &mut NoiseParams) {
        match self {
            SweepParameter::Eta => params.eta = value,
            SweepParameter::Delta => params.delta = value,
            SweepParameter::Lambda => params.lambda = value,
            SweepParameter::Gamma => params.gamma = value,
            SweepParameter::Alpha => params.alpha = value,
            SweepParameter::Sigma => {
                noise.sigma1 = value;
                noise.sigma2 = value;
            }
        }
    }
}

/// Monte-Carlo settings for one `E[G(x_T)]` estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainConfig {
    /// Terminal time T at which G is evaluated.
    pub horizon: f64,
    pub n_paths: usize,
    pub dt: f64,
    pub boundary_epsilon: f64,
    pub seed: u64,
}

impl Default for GainConfig {
    fn default() -> Self {
        GainConfig {
            horizon: 30.0,
            n_paths: 100,
            dt: 1.0 / 999.0,
            boundary_epsilon: 1e-9,
            seed: 0,
        }
    }
}

/// Sample mean and standard error of `G(x_T)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainEstimate {
    pub mean: f64,
    pub stderr: f64,
}

/// Estimate `E[G(x_T)]` from `n_paths` seeded paths started at `s0`.
/// The standard error is 0 for a single path.
pub fn expected_gain(
    params: &ModelParams,
    noise: &NoiseParams,
    s0: LandState,
    cfg: &GainConfig,
) -> Result<GainEstimate, SimError> {
    validate_params(params, noise)?;
    if cfg.n_paths == 0 {
        return Err(SimError::InvalidConfig("n_paths must be >= 1".into()));
    }
    let sim = SimConfig {
        dt: cfg.dt,
        t_end: cfg.horizon,
        seed: 0,
        boundary_epsilon: cfg.boundary_epsilon,
    };
    sim.validate()?;
    // Per-path results land in preallocated slots so the reduction order
    // is fixed regardless of scheduling.
    let gains: Vec<f64> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| {
            let path_cfg = SimConfig {
                seed: seed::derive(cfg.seed, i as u64),
                ..sim
            };
            simulate_path(params, noise, s0, &path_cfg).map(|p| params.net_gain(p.terminal().x))
        })
        .collect::<Result<_, _>>()?;
    let n = gains.len() as f64;
    let mean = gains.iter().sum::<f64>() / n;
    let stderr = if gains.len() < 2 {
        0.0
    } else {
        let var = gains.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    };
    Ok(GainEstimate { mean, stderr })
}

/// Specification of a one-parameter sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub lo: f64,
    pub hi: f64,
    pub grid_size: usize,
    pub paths_per_point: usize,
    /// Terminal time T.
    pub horizon: f64,
    pub dt: f64,
    pub boundary_epsilon: f64,
    pub base_params: ModelParams,
    pub base_noise: NoiseParams,
    pub initial: LandState,
    pub seed: u64,
}

impl SweepSpec {
    /// Defaults mirroring the sensitivity figures: 50-point grid, 100 paths
    /// per point, horizon 30, start at (0.2, 0.3).
    pub fn new(parameter: SweepParameter, lo: f64, hi: f64, base_params: ModelParams) -> Self {
        SweepSpec {
            parameter,
            lo,
            hi,
            grid_size: 50,
            paths_per_point: 100,
            horizon: 30.0,
            dt: 1.0 / 999.0,
            boundary_epsilon: 1e-9,
            base_params,
            base_noise: NoiseParams {
                sigma1: 1.0,
                sigma2: 1.0,
            },
            initial: LandState { x: 0.2, y: 0.3 },
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), AnalysisError> {
        if !(self.lo < self.hi) {
            return Err(AnalysisError::InvalidSpec(format!(
                "sweep range [{}, {}] must have lo < hi",
                self.lo, self.hi
            )));
        }
        if self.grid_size < 2 {
            return Err(AnalysisError::InvalidSpec(format!(
                "grid size {} must be >= 2",
                self.grid_size
            )));
        }
        if self.paths_per_point == 0 {
            return Err(AnalysisError::InvalidSpec(
                "paths per point must be >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Evenly spaced grid including both endpoints.
    pub fn grid(&self) -> Vec<f64> {
        let n = self.grid_size;
        (0..n)
            .map(|i| self.lo + (self.hi - self.lo) * i as f64 / (n - 1) as f64)
            .collect()
    }
}

/// Result of a sweep: one `E[G(x_T)]` estimate per valid grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCurve {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    /// Mean estimates; NaN at skipped points.
    pub means: Vec<f64>,
    /// Standard errors; NaN at skipped points.
    pub stderrs: Vec<f64>,
    /// True where the swept value made the parameter set invalid.
    pub skipped: Vec<bool>,
}

impl SweepCurve {
    /// Write as `param_value,mean_G,stderr,skipped` CSV.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "param_value,mean_G,stderr,skipped")?;
        for i in 0..self.values.len() {
            if self.skipped[i] {
                writeln!(w, "{:.16e},,,true", self.values[i])?;
            } else {
                writeln!(
                    w,
                    "{:.16e},{:.16e},{:.16e},false",
                    self.values[i], self.means[i], self.stderrs[i]
                )?;
            }
        }
        Ok(())
    }

    /// Parse a curve previously written by `write_csv`. The sweep parameter
    /// is not stored in the CSV and must be supplied.
    pub fn read_csv<R: BufRead>(parameter: SweepParameter, r: R) -> Result<Self, AnalysisError> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| AnalysisError::Format("empty curve file".into()))?
            .map_err(|e| AnalysisError::Format(e.to_string()))?;
        if header.trim() != "param_value,mean_G,stderr,skipped" {
            return Err(AnalysisError::Format(format!(
                "unexpected curve header '{header}'"
            )));
        }
        let mut curve = SweepCurve {
            parameter,
            values: Vec::new(),
            means: Vec::new(),
            stderrs: Vec::new(),
            skipped: Vec::new(),
        };
        for (lineno, line) in lines.enumerate() {
            let line = line.map_err(|e| AnalysisError::Format(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 4 {
                return Err(AnalysisError::Format(format!(
                    "curve line {}: expected 4 columns, found {}",
                    lineno + 2,
                    cols.len()
                )));
            }
            let parse = |s: &str| -> Result<f64, AnalysisError> {
                s.parse()
                    .map_err(|_| AnalysisError::Format(format!("bad number '{s}'")))
            };
            let value = parse(cols[0])?;
            let skipped = cols[3].trim() == "true";
            curve.values.push(value);
            if skipped {
                curve.means.push(f64::NAN);
                curve.stderrs.push(f64::NAN);
            } else {
                curve.means.push(parse(cols[1])?);
                curve.stderrs.push(parse(cols[2])?);
            }
            curve.skipped.push(skipped);
        }
        Ok(curve)
    }
}

/// Direction of a sign change along the sweep axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignChange {
    PositiveToNegative,
    NegativeToPositive,
}

/// A located zero of the sweep curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub parameter: SweepParameter,
    pub crossing: f64,
    pub direction: SignChange,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("invalid sweep spec: {0}")]
    InvalidSpec(String),
    #[error("every grid point violates the parameter constraints")]
    AllPointsInvalid,
    #[error("malformed curve data: {0}")]
    Format(String),
}

/// Run a sweep: one `expected_gain` per valid grid point, common random
/// numbers across points. Deterministic given the spec.
pub fn sweep(spec: &SweepSpec) -> Result<SweepCurve, AnalysisError> {
    spec.validate()?;
    let grid = spec.grid();
    let results: Vec<Option<GainEstimate>> = grid
        .par_iter()
        .map(|&value| {
            let mut params = spec.base_params;
            let mut noise = spec.base_noise;
            spec.parameter.apply(value, &mut params, &mut noise);
            if validate_params(&params, &noise).is_err() {
                return Ok(None);
            }
            let cfg = GainConfig {
                horizon: spec.horizon,
                n_paths: spec.paths_per_point,
                dt: spec.dt,
                boundary_epsilon: spec.boundary_epsilon,
                seed: spec.seed,
            };
            expected_gain(&params, &noise, spec.initial, &cfg).map(Some)
        })
        .collect::<Result<_, SimError>>()?;
    if results.iter().all(|r| r.is_none()) {
        return Err(AnalysisError::AllPointsInvalid);
    }
    let mut curve = SweepCurve {
        parameter: spec.parameter,
        values: grid,
        means: Vec::with_capacity(results.len()),
        stderrs: Vec::with_capacity(results.len()),
        skipped: Vec::with_capacity(results.len()),
    };
    for r in results {
        match r {
            Some(est) => {
                curve.means.push(est.mean);
                curve.stderrs.push(est.stderr);
                curve.skipped.push(false);
            }
            None => {
                curve.means.push(f64::NAN);
                curve.stderrs.push(f64::NAN);
                curve.skipped.push(true);
            }
        }
    }
    Ok(curve)
}

/// Locate every sign change between consecutive valid grid points by linear
/// interpolation. Exact zeros are reported at the grid point itself.
pub fn find_sign_changes(curve: &SweepCurve) -> Vec<Threshold> {
    let valid: Vec<(f64, f64)> = curve
        .values
        .iter()
        .zip(&curve.means)
        .zip(&curve.skipped)
        .filter(|&(_, &skipped)| !skipped)
        .map(|((&v, &m), _)| (v, m))
        .collect();
    let mut out = Vec::new();
    for w in valid.windows(2) {
        let (v0, m0) = w[0];
        let (v1, m1) = w[1];
        if m0 == 0.0 {
            // Direction determined by the following point.
            let direction = if m1 < 0.0 {
                SignChange::PositiveToNegative
            } else {
                SignChange::NegativeToPositive
            };
            if m1 != 0.0 {
                out.push(Threshold {
                    parameter: curve.parameter,
                    crossing: v0,
                    direction,
                });
            }
        } else if m0 * m1 < 0.0 {
            let crossing = v0 + (0.0 - m0) * (v1 - v0) / (m1 - m0);
            out.push(Threshold {
                parameter: curve.parameter,
                crossing,
                direction: if m0 > 0.0 {
                    SignChange::PositiveToNegative
                } else {
                    SignChange::NegativeToPositive
                },
            });
        }
    }
    out
}

/// Terminal states of an ensemble with uniformly random initial values
/// (margin 0.05), for plotting the terminal distribution.
pub fn terminal_distribution(
    params: &ModelParams,
    noise: &NoiseParams,
    horizon: f64,
    count: usize,
    dt: f64,
    seed: u64,
) -> Result<Vec<LandState>, SimError> {
    let cfg = SimConfig {
        dt,
        t_end: horizon,
        seed,
        boundary_epsilon: 1e-9,
    };
    let paths = simulate_ensemble(
        params,
        noise,
        &InitialState::UniformTriangle { margin: 0.05 },
        &cfg,
        count,
    )?;
    Ok(paths.iter().map(|p| p.terminal()).collect())
}

/// Serialize thresholds as a JSON list of `{parameter, crossing, direction}`.
pub fn thresholds_to_json(thresholds: &[Threshold]) -> String {
    serde_json::to_string_pretty(thresholds).expect("thresholds serialize")
}
