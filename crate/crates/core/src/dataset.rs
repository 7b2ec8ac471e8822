//! Synthetic dataset generation for simulation-based parameter estimation.
//!
//! Parameter sets are drawn coordinatewise-uniform within configured ranges
//! and rejection-resampled until the joint constraint set holds. Each set is
//! replicated `n2` times; every replicate simulates its own noise
//! realization, giving feature matrices `A` (forest series) and `F`
//! (agriculture series) with label matrices `P` (8 model parameters) and
//! `Sigma` (2 noise intensities) whose rows repeat in blocks of `n2`.
//!
//! Features are min-max scaled with statistics computed over the training
//! rows only: `x~ = (x - max) / (max - min)`, which maps training values
//! into [-1, 0].

use crate::model::{validate_params, Hypothesis, ModelParams, NoiseParams};
use crate::seed;
use crate::sim::{observe, simulate_path, InitialState, SimConfig, SimError};
use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path as FsPath;

pub const FORMAT_VERSION: u32 = 1;

/// Inclusive-exclusive sampling interval for one parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamRange {
    pub lo: f64,
    pub hi: f64,
}

impl ParamRange {
    fn sample<R: Rng>(&self, rng: &mut R) -> Result<f64, DatasetError> {
        if self.lo == self.hi {
            return Ok(self.lo);
        }
        let dist = Uniform::new(self.lo, self.hi)
            .map_err(|e| DatasetError::RangeConfig(format!("bad range [{}, {}): {e}", self.lo, self.hi)))?;
        Ok(dist.sample(rng))
    }
}

/// Per-parameter sampling intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingRanges {
    pub mu: ParamRange,
    pub h: ParamRange,
    pub eta: ParamRange,
    pub beta: ParamRange,
    pub delta: ParamRange,
    pub lambda: ParamRange,
    pub gamma: ParamRange,
    pub alpha: ParamRange,
    pub sigma1: ParamRange,
    pub sigma2: ParamRange,
}

impl Default for SamplingRanges {
    fn default() -> Self {
        let unit = ParamRange { lo: 0.01, hi: 0.99 };
        SamplingRanges {
            mu: unit,
            h: unit,
            eta: unit,
            beta: ParamRange { lo: 0.1, hi: 5.0 },
            delta: unit,
            lambda: ParamRange { lo: 0.01, hi: 2.0 },
            gamma: unit,
            alpha: ParamRange { lo: 0.01, hi: 3.0 },
            sigma1: ParamRange { lo: 0.001, hi: 0.1 },
            sigma2: ParamRange { lo: 0.001, hi: 0.1 },
        }
    }
}

/// Initial-state policy for simulated rows. With the uniform policy the
/// drawn initial pair is prepended to each feature row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialPolicy {
    Fixed { x: f64, y: f64 },
    UniformTriangle { margin: f64 },
}

impl Default for InitialPolicy {
    fn default() -> Self {
        InitialPolicy::Fixed { x: 0.2, y: 0.3 }
    }
}

/// Everything needed to rebuild a dataset deterministically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub format_version: u32,
    pub hypothesis: Hypothesis,
    pub n1: usize,
    pub n2: usize,
    /// Yearly observations per row.
    pub t: usize,
    pub dt: f64,
    pub seed: u64,
    pub ranges: SamplingRanges,
    pub initial_policy: InitialPolicy,
}

/// Feature matrices `A` (forest) and `F` (agriculture) with label matrices
/// `P` and `Sigma`. Row counts agree; label rows repeat in `n2`-blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub a: Array2<f64>,
    pub f: Array2<f64>,
    pub p: Array2<f64>,
    pub sigma: Array2<f64>,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn n_rows(&self) -> usize {
        self.a.nrows()
    }

    /// Feature row width: `t`, plus one when the initial pair is prepended.
    pub fn series_len(&self) -> usize {
        self.a.ncols()
    }
}

/// Train/test row split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Min-max statistics over the training feature matrices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingStats {
    pub max_a: f64,
    pub min_a: f64,
    pub max_f: f64,
    pub min_f: f64,
}

impl ScalingStats {
    pub fn scale_a(&self, v: f64) -> f64 {
        scale(v, self.max_a, self.min_a)
    }

    pub fn scale_f(&self, v: f64) -> f64 {
        scale(v, self.max_f, self.min_f)
    }
}

fn scale(v: f64, max: f64, min: f64) -> f64 {
    if max != min {
        (v - max) / (max - min)
    } else {
        0.0
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("range configuration: {0}")]
    RangeConfig(String),
    #[error("row {row}: {source}")]
    Simulation { row: usize, source: SimError },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed dataset: {0}")]
    Format(String),
    #[error("dataset format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
}

/// Draw `n1` parameter sets, coordinatewise-uniform with rejection on the
/// joint constraints. Aborts when the acceptance rate falls below 1%.
pub fn sample_parameters(
    n1: usize,
    ranges: &SamplingRanges,
    hypothesis: Hypothesis,
    seed: u64,
) -> Result<Vec<(ModelParams, NoiseParams)>, DatasetError> {
    if n1 == 0 {
        return Err(DatasetError::RangeConfig("n1 must be >= 1".into()));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n1);
    let mut attempts: u64 = 0;
    while out.len() < n1 {
        attempts += 1;
        let params = ModelParams {
            mu: ranges.mu.sample(&mut rng)?,
            h: ranges.h.sample(&mut rng)?,
            eta: ranges.eta.sample(&mut rng)?,
            beta: ranges.beta.sample(&mut rng)?,
            delta: ranges.delta.sample(&mut rng)?,
            lambda: ranges.lambda.sample(&mut rng)?,
            gamma: ranges.gamma.sample(&mut rng)?,
            alpha: ranges.alpha.sample(&mut rng)?,
            hypothesis,
        };
        let noise = NoiseParams {
            sigma1: ranges.sigma1.sample(&mut rng)?,
            sigma2: ranges.sigma2.sample(&mut rng)?,
        };
        if validate_params(&params, &noise).is_ok() {
            out.push((params, noise));
        }
        // Acceptance-rate guard, checked after a warmup so a short unlucky
        // streak does not abort a healthy configuration.
        if attempts >= 1000 && (out.len() as f64) < attempts as f64 * 0.01 {
            return Err(DatasetError::RangeConfig(format!(
                "acceptance rate {:.2}% after {attempts} attempts; ranges are \
                 incompatible with the parameter constraints",
                100.0 * out.len() as f64 / attempts as f64
            )));
        }
    }
    Ok(out)
}

/// Simulation settings for dataset rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BuildConfig {
    pub n2: usize,
    /// Yearly observations per row.
    pub t: usize,
    pub dt: f64,
    pub boundary_epsilon: f64,
    pub initial_policy: InitialPolicy,
    pub seed: u64,
}

impl Default for BuildConfig {
    fn default() -> Self {
        BuildConfig {
            n2: 25,
            t: 30,
            // Coarser than the sample-path default for throughput; at
            // sigma <= 0.1 the difference is below observation-level noise.
            dt: 1.0 / 99.0,
            boundary_epsilon: 1e-9,
            initial_policy: InitialPolicy::default(),
            seed: 0,
        }
    }
}

/// Simulate every replicated row into feature/label matrices.
pub fn build_dataset(
    samples: &[(ModelParams, NoiseParams)],
    ranges: &SamplingRanges,
    cfg: &BuildConfig,
) -> Result<Dataset, DatasetError> {
    if samples.is_empty() {
        return Err(DatasetError::RangeConfig("no parameter samples".into()));
    }
    if cfg.n2 == 0 {
        return Err(DatasetError::RangeConfig("n2 must be >= 1".into()));
    }
    if cfg.t < 2 {
        return Err(DatasetError::RangeConfig("t must be >= 2".into()));
    }
    let n1 = samples.len();
    let n = n1 * cfg.n2;
    let prepend_initial = matches!(cfg.initial_policy, InitialPolicy::UniformTriangle { .. });
    let width = cfg.t + usize::from(prepend_initial);
    let hypothesis = samples[0].0.hypothesis;

    let init = match cfg.initial_policy {
        InitialPolicy::Fixed { x, y } => InitialState::Fixed { x, y },
        InitialPolicy::UniformTriangle { margin } => InitialState::UniformTriangle { margin },
    };
    let sim = SimConfig {
        dt: cfg.dt,
        t_end: cfg.t as f64,
        seed: 0,
        boundary_epsilon: cfg.boundary_epsilon,
    };

    let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..n)
        .into_par_iter()
        .map(|row| {
            let (params, noise) = &samples[row / cfg.n2];
            let row_seed = seed::derive(cfg.seed, row as u64);
            let mut rng = ChaCha12Rng::seed_from_u64(row_seed);
            let s0 = init
                .sample(&mut rng)
                .map_err(|source| DatasetError::Simulation { row, source })?;
            // The initial draw consumed part of the stream; the path itself
            // runs on a seed derived from the row seed so fixed and uniform
            // policies share the same increment sequence.
            let path_cfg = SimConfig {
                seed: seed::derive(row_seed, 1),
                ..sim
            };
            let path = simulate_path(params, noise, s0, &path_cfg)
                .map_err(|source| DatasetError::Simulation { row, source })?;
            let obs = observe(&path, cfg.t)
                .map_err(|source| DatasetError::Simulation { row, source })?;
            let mut xs = Vec::with_capacity(width);
            let mut ys = Vec::with_capacity(width);
            if prepend_initial {
                let start = path.states()[0];
                xs.push(start.x);
                ys.push(start.y);
            }
            xs.extend_from_slice(&obs.x_obs);
            ys.extend_from_slice(&obs.y_obs);
            Ok((xs, ys))
        })
        .collect::<Result<_, DatasetError>>()?;

    let mut a = Array2::zeros((n, width));
    let mut f = Array2::zeros((n, width));
    let mut p = Array2::zeros((n, 8));
    let mut sigma = Array2::zeros((n, 2));
    for (row, (xs, ys)) in rows.into_iter().enumerate() {
        for (j, v) in xs.into_iter().enumerate() {
            a[[row, j]] = v;
        }
        for (j, v) in ys.into_iter().enumerate() {
            f[[row, j]] = v;
        }
        let (params, noise) = &samples[row / cfg.n2];
        for (j, v) in param_row(params).into_iter().enumerate() {
            p[[row, j]] = v;
        }
        sigma[[row, 0]] = noise.sigma1;
        sigma[[row, 1]] = noise.sigma2;
    }

    Ok(Dataset {
        a,
        f,
        p,
        sigma,
        meta: DatasetMeta {
            format_version: FORMAT_VERSION,
            hypothesis,
            n1,
            n2: cfg.n2,
            t: cfg.t,
            dt: cfg.dt,
            seed: cfg.seed,
            ranges: *ranges,
            initial_policy: cfg.initial_policy,
        },
    })
}

/// Label column order of `P`: (mu, h, eta, beta, delta, lambda, gamma, alpha).
pub fn param_row(p: &ModelParams) -> [f64; 8] {
    [p.mu, p.h, p.eta, p.beta, p.delta, p.lambda, p.gamma, p.alpha]
}

/// Uniform random row split; the test side gets `round(n * fraction)` rows.
pub fn split_dataset(n_rows: usize, fraction: f64, seed: u64) -> Result<Split, DatasetError> {
    if n_rows < 5 {
        return Err(DatasetError::RangeConfig(format!(
            "need at least 5 rows to split, have {n_rows}"
        )));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(DatasetError::RangeConfig(format!(
            "test fraction {fraction} must lie in (0, 1)"
        )));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut indices: Vec<usize> = (0..n_rows).collect();
    // Fisher-Yates.
    for i in (1..n_rows).rev() {
        let j = rng.random_range(0..=i);
        indices.swap(i, j);
    }
    let n_test = ((n_rows as f64) * fraction).round() as usize;
    let n_test = n_test.clamp(1, n_rows - 1);
    let mut test: Vec<usize> = indices[..n_test].to_vec();
    let mut train: Vec<usize> = indices[n_test..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}

/// Scaled copies of the feature matrices for one side of a split.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledFeatures {
    pub a: Array2<f64>,
    pub f: Array2<f64>,
}

/// Min-max scale both feature matrices. Statistics come from the training
/// rows only and are applied unchanged to the test rows, so training values
/// land in [-1, 0] while test values may exit slightly.
pub fn scale_features(
    ds: &Dataset,
    split: &Split,
) -> (ScaledFeatures, ScaledFeatures, ScalingStats) {
    let stats = ScalingStats {
        max_a: matrix_extreme(&ds.a.view(), &split.train, f64::max, f64::NEG_INFINITY),
        min_a: matrix_extreme(&ds.a.view(), &split.train, f64::min, f64::INFINITY),
        max_f: matrix_extreme(&ds.f.view(), &split.train, f64::max, f64::NEG_INFINITY),
        min_f: matrix_extreme(&ds.f.view(), &split.train, f64::min, f64::INFINITY),
    };
    let take = |rows: &[usize]| ScaledFeatures {
        a: select_rows(&ds.a.view(), rows).mapv(|v| stats.scale_a(v)),
        f: select_rows(&ds.f.view(), rows).mapv(|v| stats.scale_f(v)),
    };
    (take(&split.train), take(&split.test), stats)
}

/// Copy the given rows of a matrix, preserving order.
pub fn select_rows(m: &ArrayView2<f64>, rows: &[usize]) -> Array2<f64> {
    m.select(Axis(0), rows)
}

fn matrix_extreme(
    m: &ArrayView2<f64>,
    rows: &[usize],
    pick: fn(f64, f64) -> f64,
    init: f64,
) -> f64 {
    let mut acc = init;
    for &r in rows {
        for &v in m.row(r) {
            acc = pick(acc, v);
        }
    }
    acc
}

/// Clamp a raw 8-parameter prediction (column order of `P`) into the given
/// sampling ranges and then restore the joint constraints, so the result
/// always passes validation and can drive the simulator. Evaluation never
/// applies this; it exists for downstream closed-loop use.
pub fn clamp_params_prediction(
    pred: &[f64; 8],
    ranges: &SamplingRanges,
    hypothesis: Hypothesis,
) -> ModelParams {
    let clamp = |v: f64, r: &ParamRange| v.clamp(r.lo, r.hi);
    let mut p = ModelParams {
        mu: clamp(pred[0], &ranges.mu),
        h: clamp(pred[1], &ranges.h),
        eta: clamp(pred[2], &ranges.eta),
        beta: clamp(pred[3], &ranges.beta),
        delta: clamp(pred[4], &ranges.delta),
        lambda: clamp(pred[5], &ranges.lambda),
        gamma: clamp(pred[6], &ranges.gamma),
        alpha: clamp(pred[7], &ranges.alpha),
        hypothesis,
    };
    if p.mu + p.h >= 1.0 {
        p.h = (1.0 - p.mu) * 0.999;
    }
    match hypothesis {
        Hypothesis::Fsh => p.alpha = p.alpha.max(p.delta),
        Hypothesis::Esh => p.alpha = p.alpha.max(p.delta + p.lambda),
    }
    p
}

/// Clamp a raw noise-intensity prediction into the sampling ranges.
pub fn clamp_noise_prediction(pred: &[f64; 2], ranges: &SamplingRanges) -> NoiseParams {
    NoiseParams {
        sigma1: pred[0].clamp(ranges.sigma1.lo, ranges.sigma1.hi),
        sigma2: pred[1].clamp(ranges.sigma2.lo, ranges.sigma2.hi),
    }
}

/// Write a dataset directory: `meta.json` plus `A.csv`, `F.csv`, `P.csv`,
/// `Sigma.csv` (comma-separated, no headers, 17 significant digits).
pub fn save_dataset(ds: &Dataset, dir: &FsPath) -> Result<(), DatasetError> {
    fs::create_dir_all(dir)?;
    let meta = serde_json::to_string_pretty(&ds.meta)
        .map_err(|e| DatasetError::Format(e.to_string()))?;
    fs::write(dir.join("meta.json"), meta)?;
    write_matrix(&ds.a, &dir.join("A.csv"))?;
    write_matrix(&ds.f, &dir.join("F.csv"))?;
    write_matrix(&ds.p, &dir.join("P.csv"))?;
    write_matrix(&ds.sigma, &dir.join("Sigma.csv"))?;
    Ok(())
}

/// Load a dataset directory, verifying the format version and shapes.
pub fn load_dataset(dir: &FsPath) -> Result<Dataset, DatasetError> {
    let meta_text = fs::read_to_string(dir.join("meta.json"))?;
    let meta: DatasetMeta =
        serde_json::from_str(&meta_text).map_err(|e| DatasetError::Format(e.to_string()))?;
    if meta.format_version != FORMAT_VERSION {
        return Err(DatasetError::VersionMismatch {
            found: meta.format_version,
            expected: FORMAT_VERSION,
        });
    }
    let n = meta.n1 * meta.n2;
    let width = meta.t
        + usize::from(matches!(
            meta.initial_policy,
            InitialPolicy::UniformTriangle { .. }
        ));
    let a = read_matrix(&dir.join("A.csv"), n, width)?;
    let f = read_matrix(&dir.join("F.csv"), n, width)?;
    let p = read_matrix(&dir.join("P.csv"), n, 8)?;
    let sigma = read_matrix(&dir.join("Sigma.csv"), n, 2)?;
    Ok(Dataset {
        a,
        f,
        p,
        sigma,
        meta,
    })
}

fn write_matrix(m: &Array2<f64>, path: &FsPath) -> Result<(), DatasetError> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for row in m.rows() {
        let mut first = true;
        for v in row {
            if !first {
                write!(w, ",")?;
            }
            write!(w, "{v:.16e}")?;
            first = false;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

fn read_matrix(path: &FsPath, rows: usize, cols: usize) -> Result<Array2<f64>, DatasetError> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut m = Array2::zeros((rows, cols));
    let mut row = 0usize;
    for line in reader.lines() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        if row >= rows {
            return Err(DatasetError::Format(format!(
                "{}: more than {rows} rows",
                path.display()
            )));
        }
        let mut col = 0usize;
        for field in line.split(',') {
            if col >= cols {
                return Err(DatasetError::Format(format!(
                    "{} row {row}: more than {cols} columns",
                    path.display()
                )));
            }
            m[[row, col]] = field.parse().map_err(|_| {
                DatasetError::Format(format!(
                    "{} row {row} col {col}: bad number '{field}'",
                    path.display()
                ))
            })?;
            col += 1;
        }
        if col != cols {
            return Err(DatasetError::Format(format!(
                "{} row {row}: expected {cols} columns, found {col}",
                path.display()
            )));
        }
        row += 1;
    }
    if row != rows {
        return Err(DatasetError::Format(format!(
            "{}: expected {rows} rows, found {row} (truncated?)",
            path.display()
        )));
    }
    Ok(m)
}
