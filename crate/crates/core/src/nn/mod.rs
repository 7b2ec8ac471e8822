//! From-scratch shallow convolutional regression over two-channel land-use
//! series, trained with MSE to predict either the 8 model parameters or the
//! 2 noise intensities, plus a nearest-neighbor baseline.
//!
//! The loss follows the `(1/p) sum_i ||z_i - z^_i||^2` convention: mean over
//! samples of the squared Euclidean norm of each sample's error vector, with
//! no additional division by the output dimension.

mod io;
mod knn;
mod layers;
mod optim;
mod scnn;

pub use io::{load_model, save_model, ModelBundle, MODEL_FORMAT_VERSION};
pub use knn::{flatten_series, knn_predict};
pub use layers::{Activation, Conv1d, Dense};
pub use optim::{Optimizer, OptimizerKind};
pub use scnn::{init_scnn, ConvSpec, EpochRecord, Gradients, Scnn, ScnnConfig};

use crate::dataset::Dataset;
use ndarray::{Array2, Array3, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, thiserror::Error)]
pub enum NnError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Diverged { epoch: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed model data: {0}")]
    Format(String),
}

/// Which label matrix a model predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetKind {
    /// The 8 columns of P: (mu, h, eta, beta, delta, lambda, gamma, alpha).
    Params8,
    /// The 2 columns of Sigma: (sigma1, sigma2).
    Noise2,
}

impl TargetKind {
    pub fn output_dim(&self) -> usize {
        match self {
            TargetKind::Params8 => 8,
            TargetKind::Noise2 => 2,
        }
    }

    pub fn labels(&self, ds: &Dataset) -> Array2<f64> {
        match self {
            TargetKind::Params8 => ds.p.clone(),
            TargetKind::Noise2 => ds.sigma.clone(),
        }
    }
}

impl fmt::Display for TargetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TargetKind::Params8 => f.write_str("params8"),
            TargetKind::Noise2 => f.write_str("noise2"),
        }
    }
}

impl FromStr for TargetKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "params8" => Ok(TargetKind::Params8),
            "noise2" => Ok(TargetKind::Noise2),
            other => Err(format!(
                "unknown target '{other}' (expected params8 or noise2)"
            )),
        }
    }
}

/// Stack scaled forest and agriculture rows into a (n, 2, T) batch:
/// channel 0 is the forest series, channel 1 the agriculture series.
pub fn stack_channels(a: &ArrayView2<f64>, f: &ArrayView2<f64>) -> Array3<f64> {
    assert_eq!(a.dim(), f.dim(), "feature matrices must agree in shape");
    let (n, len) = a.dim();
    let mut out = Array3::zeros((n, 2, len));
    for b in 0..n {
        for t in 0..len {
            out[[b, 0, t]] = a[[b, t]];
            out[[b, 1, t]] = f[[b, t]];
        }
    }
    out
}

/// Mean over samples of the squared error norm.
pub fn mse_loss(pred: &Array2<f64>, target: &Array2<f64>) -> Result<f64, NnError> {
    if pred.dim() != target.dim() {
        return Err(NnError::Shape(format!(
            "prediction {:?} vs target {:?}",
            pred.dim(),
            target.dim()
        )));
    }
    let p = pred.nrows() as f64;
    let sum: f64 = pred
        .iter()
        .zip(target.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / p)
}

/// Loss together with its gradient w.r.t. the predictions.
pub(crate) fn mse_grad(pred: &Array2<f64>, target: &Array2<f64>) -> (f64, Array2<f64>) {
    let p = pred.nrows() as f64;
    let mut grad = Array2::zeros(pred.dim());
    let mut sum = 0.0;
    for ((g, &a), &b) in grad.iter_mut().zip(pred.iter()).zip(target.iter()) {
        let d = a - b;
        sum += d * d;
        *g = 2.0 * d / p;
    }
    (sum / p, grad)
}

/// Anything that maps a series batch to predictions; lets the evaluation
/// path run over the SCNN, the kNN baseline, or a test stub alike.
pub trait Regressor {
    fn predict(&self, features: &Array3<f64>) -> Result<Array2<f64>, NnError>;
}

impl Regressor for Scnn {
    fn predict(&self, features: &Array3<f64>) -> Result<Array2<f64>, NnError> {
        self.forward(features)
    }
}

/// Test MSE with a per-target breakdown (the per-target values sum to the
/// overall MSE).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mse: f64,
    pub per_target: Vec<f64>,
}

pub fn evaluate<R: Regressor>(
    model: &R,
    features: &Array3<f64>,
    labels: &Array2<f64>,
) -> Result<Metrics, NnError> {
    let pred = model.predict(features)?;
    metrics_from_predictions(&pred, labels)
}

pub fn metrics_from_predictions(
    pred: &Array2<f64>,
    labels: &Array2<f64>,
) -> Result<Metrics, NnError> {
    if pred.dim() != labels.dim() {
        return Err(NnError::Shape(format!(
            "prediction {:?} vs labels {:?}",
            pred.dim(),
            labels.dim()
        )));
    }
    let (n, out_dim) = pred.dim();
    let mut per_target = vec![0.0; out_dim];
    for b in 0..n {
        for j in 0..out_dim {
            let d = pred[[b, j]] - labels[[b, j]];
            per_target[j] += d * d;
        }
    }
    for v in per_target.iter_mut() {
        *v /= n as f64;
    }
    Ok(Metrics {
        mse: per_target.iter().sum(),
        per_target,
    })
}

/// Training settings. The desk defaults are 50 epochs with batch size 64.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub shuffle_seed: u64,
    /// Fraction of the training rows held out for the validation curve.
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 64,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::default(),
            shuffle_seed: 0,
            validation_fraction: 0.1,
        }
    }
}

/// Mini-batch training. Deterministic given the model's init seed and the
/// shuffle seed; aborts if the loss stops being finite.
pub fn fit(
    mut model: Scnn,
    features: &Array3<f64>,
    labels: &Array2<f64>,
    cfg: &TrainConfig,
) -> Result<Scnn, NnError> {
    let n = features.dim().0;
    if labels.nrows() != n {
        return Err(NnError::Shape(format!(
            "{n} feature rows vs {} label rows",
            labels.nrows()
        )));
    }
    if labels.ncols() != model.config.output_dim {
        return Err(NnError::Shape(format!(
            "label width {} vs output dim {}",
            labels.ncols(),
            model.config.output_dim
        )));
    }
    if cfg.epochs == 0 || cfg.batch_size == 0 {
        return Err(NnError::InvalidConfig(
            "epochs and batch size must be >= 1".into(),
        ));
    }
    if !(0.0..1.0).contains(&cfg.validation_fraction) {
        return Err(NnError::InvalidConfig(format!(
            "validation fraction {} must lie in [0, 1)",
            cfg.validation_fraction
        )));
    }

    let mut rng = ChaCha12Rng::seed_from_u64(cfg.shuffle_seed);
    let mut indices: Vec<usize> = (0..n).collect();
    shuffle(&mut indices, &mut rng);
    let n_val = ((n as f64) * cfg.validation_fraction).round() as usize;
    let n_val = n_val.min(n - 1);
    let val_idx: Vec<usize> = indices[n - n_val..].to_vec();
    let mut train_idx: Vec<usize> = indices[..n - n_val].to_vec();

    let (val_x, val_y) = gather(features, labels, &val_idx);
    let mut optimizer = Optimizer::new(cfg.optimizer, cfg.learning_rate);
    model.history.clear();

    for epoch in 0..cfg.epochs {
        shuffle(&mut train_idx, &mut rng);
        let mut loss_sum = 0.0;
        for chunk in train_idx.chunks(cfg.batch_size) {
            let (bx, by) = gather(features, labels, chunk);
            let (grads, loss) = model.backward(&bx, &by)?;
            if !loss.is_finite() {
                return Err(NnError::Diverged { epoch });
            }
            optimizer.step(&mut model, &grads);
            loss_sum += loss * chunk.len() as f64;
        }
        let train_loss = loss_sum / train_idx.len() as f64;
        let val_loss = if val_idx.is_empty() {
            f64::NAN
        } else {
            let pred = model.forward(&val_x)?;
            mse_loss(&pred, &val_y)?
        };
        if !train_loss.is_finite() {
            return Err(NnError::Diverged { epoch });
        }
        model.history.push(EpochRecord {
            train_loss,
            val_loss,
        });
    }
    Ok(model)
}

fn shuffle<R: rand::Rng>(indices: &mut [usize], rng: &mut R) {
    for i in (1..indices.len()).rev() {
        let j = rng.random_range(0..=i);
        indices.swap(i, j);
    }
}

fn gather(
    features: &Array3<f64>,
    labels: &Array2<f64>,
    rows: &[usize],
) -> (Array3<f64>, Array2<f64>) {
    let (_, channels, len) = features.dim();
    let out_dim = labels.ncols();
    let mut bx = Array3::zeros((rows.len(), channels, len));
    let mut by = Array2::zeros((rows.len(), out_dim));
    for (bi, &r) in rows.iter().enumerate() {
        for c in 0..channels {
            for t in 0..len {
                bx[[bi, c, t]] = features[[r, c, t]];
            }
        }
        for j in 0..out_dim {
            by[[bi, j]] = labels[[r, j]];
        }
    }
    (bx, by)
}
