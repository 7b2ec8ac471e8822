//! k-nearest-neighbor regression baseline over flattened scaled series.
//! Ties break by training-row index, so predictions are deterministic.

use super::NnError;
use ndarray::{Array2, Array3};

/// Flatten a (n, channels, T) batch to (n, channels*T) rows, channel 0
/// first.
pub fn flatten_series(features: &Array3<f64>) -> Array2<f64> {
    let (n, channels, len) = features.dim();
    let mut out = Array2::zeros((n, channels * len));
    for b in 0..n {
        for c in 0..channels {
            for t in 0..len {
                out[[b, c * len + t]] = features[[b, c, t]];
            }
        }
    }
    out
}

/// Predict each test row as the mean label of its `k` nearest training rows
/// under Euclidean distance.
pub fn knn_predict(
    train_x: &Array2<f64>,
    train_y: &Array2<f64>,
    test_x: &Array2<f64>,
    k: usize,
) -> Result<Array2<f64>, NnError> {
    let n_train = train_x.nrows();
    if n_train == 0 {
        return Err(NnError::InvalidConfig("empty training set".into()));
    }
    if k == 0 || k > n_train {
        return Err(NnError::InvalidConfig(format!(
            "k = {k} must lie in [1, {n_train}]"
        )));
    }
    if train_x.ncols() != test_x.ncols() {
        return Err(NnError::Shape(format!(
            "train width {} vs test width {}",
            train_x.ncols(),
            test_x.ncols()
        )));
    }
    if train_y.nrows() != n_train {
        return Err(NnError::Shape(format!(
            "{} label rows for {n_train} training rows",
            train_y.nrows()
        )));
    }
    let out_dim = train_y.ncols();
    let mut pred = Array2::zeros((test_x.nrows(), out_dim));
    let mut distances: Vec<(f64, usize)> = Vec::with_capacity(n_train);
    for (ti, test_row) in test_x.rows().into_iter().enumerate() {
        distances.clear();
        for (i, train_row) in train_x.rows().into_iter().enumerate() {
            let d2: f64 = test_row
                .iter()
                .zip(train_row.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            distances.push((d2, i));
        }
        distances.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for j in 0..out_dim {
            let mean = distances[..k]
                .iter()
                .map(|&(_, i)| train_y[[i, j]])
                .sum::<f64>()
                / k as f64;
            pred[[ti, j]] = mean;
        }
    }
    Ok(pred)
}
