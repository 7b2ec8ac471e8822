//! Model persistence: a directory holding `config.json`, one raw
//! little-endian f64 blob per weight array, and `history.csv`
//! (`epoch,train_loss,val_loss`). The scaling statistics used to prepare
//! the training features travel with the model so inference can never run
//! on unscaled series by accident.

use super::scnn::{init_scnn, EpochRecord, Scnn, ScnnConfig};
use super::{NnError, TargetKind, TrainConfig};
use crate::dataset::{SamplingRanges, ScalingStats};
use crate::model::Hypothesis;
use ndarray::{Array1, Array2, Array3};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// A trained model with everything needed to run it on new series.
#[derive(Debug, Clone)]
pub struct ModelBundle {
    pub model: Scnn,
    pub target: TargetKind,
    pub scaling: ScalingStats,
    pub hypothesis: Hypothesis,
    /// Sampling ranges of the training dataset; used when projecting raw
    /// predictions back into the legal parameter domain.
    pub ranges: SamplingRanges,
    /// Seed and fraction of the dataset split used for training, so
    /// evaluation can rebuild exactly the same test rows.
    pub split_seed: u64,
    pub split_fraction: f64,
    pub train_config: TrainConfig,
}

#[derive(Serialize, Deserialize)]
struct ModelConfigFile {
    format_version: u32,
    scnn: ScnnConfig,
    target: TargetKind,
    scaling: ScalingStats,
    hypothesis: Hypothesis,
    ranges: SamplingRanges,
    split_seed: u64,
    split_fraction: f64,
    train_config: TrainConfig,
}

fn blob_names(config: &ScnnConfig) -> Vec<String> {
    let mut names = Vec::new();
    for i in 0..config.conv.len() {
        names.push(format!("conv{i}.w.bin"));
        names.push(format!("conv{i}.b.bin"));
    }
    for i in 0..config.dense_hidden.len() + 1 {
        names.push(format!("dense{i}.w.bin"));
        names.push(format!("dense{i}.b.bin"));
    }
    names
}

fn write_blob(path: &Path, values: &[f64]) -> Result<(), NnError> {
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes)?;
    Ok(())
}

fn read_blob(path: &Path, expected_len: usize) -> Result<Vec<f64>, NnError> {
    let bytes = fs::read(path)?;
    if bytes.len() != expected_len * 8 {
        return Err(NnError::Format(format!(
            "{}: expected {} bytes, found {}",
            path.display(),
            expected_len * 8,
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

pub fn save_model(dir: &Path, bundle: &ModelBundle) -> Result<(), NnError> {
    fs::create_dir_all(dir)?;
    let config = ModelConfigFile {
        format_version: MODEL_FORMAT_VERSION,
        scnn: bundle.model.config.clone(),
        target: bundle.target,
        scaling: bundle.scaling,
        hypothesis: bundle.hypothesis,
        ranges: bundle.ranges,
        split_seed: bundle.split_seed,
        split_fraction: bundle.split_fraction,
        train_config: bundle.train_config,
    };
    let text =
        serde_json::to_string_pretty(&config).map_err(|e| NnError::Format(e.to_string()))?;
    fs::write(dir.join("config.json"), text)?;

    let names = blob_names(&bundle.model.config);
    let mut arrays: Vec<Vec<f64>> = Vec::new();
    for conv in &bundle.model.convs {
        arrays.push(conv.weights.iter().copied().collect());
        arrays.push(conv.bias.iter().copied().collect());
    }
    for dense in &bundle.model.denses {
        arrays.push(dense.weights.iter().copied().collect());
        arrays.push(dense.bias.iter().copied().collect());
    }
    for (name, values) in names.iter().zip(&arrays) {
        write_blob(&dir.join(name), values)?;
    }

    let mut hist = fs::File::create(dir.join("history.csv"))?;
    writeln!(hist, "epoch,train_loss,val_loss")?;
    for (i, rec) in bundle.model.history.iter().enumerate() {
        writeln!(hist, "{},{:.16e},{:.16e}", i, rec.train_loss, rec.val_loss)?;
    }
    Ok(())
}

pub fn load_model(dir: &Path) -> Result<ModelBundle, NnError> {
    let text = fs::read_to_string(dir.join("config.json"))?;
    let config: ModelConfigFile =
        serde_json::from_str(&text).map_err(|e| NnError::Format(e.to_string()))?;
    if config.format_version != MODEL_FORMAT_VERSION {
        return Err(NnError::Format(format!(
            "model format version {} (expected {MODEL_FORMAT_VERSION})",
            config.format_version
        )));
    }
    // Build the architecture, then overwrite the weights from the blobs.
    let mut model = init_scnn(&config.scnn)?;
    for (i, conv) in model.convs.iter_mut().enumerate() {
        let dim = conv.weights.dim();
        let w = read_blob(&dir.join(format!("conv{i}.w.bin")), conv.weights.len())?;
        conv.weights = Array3::from_shape_vec(dim, w)
            .map_err(|e| NnError::Format(e.to_string()))?;
        let b = read_blob(&dir.join(format!("conv{i}.b.bin")), conv.bias.len())?;
        conv.bias = Array1::from_vec(b);
    }
    for (i, dense) in model.denses.iter_mut().enumerate() {
        let dim = dense.weights.dim();
        let w = read_blob(&dir.join(format!("dense{i}.w.bin")), dense.weights.len())?;
        dense.weights = Array2::from_shape_vec(dim, w)
            .map_err(|e| NnError::Format(e.to_string()))?;
        let b = read_blob(&dir.join(format!("dense{i}.b.bin")), dense.bias.len())?;
        dense.bias = Array1::from_vec(b);
    }

    let hist_file = fs::File::open(dir.join("history.csv"))?;
    let mut history = Vec::new();
    for (lineno, line) in BufReader::new(hist_file).lines().enumerate() {
        let line = line?;
        if lineno == 0 {
            if line.trim() != "epoch,train_loss,val_loss" {
                return Err(NnError::Format(format!("bad history header '{line}'")));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 3 {
            return Err(NnError::Format(format!("history line {lineno}: {line}")));
        }
        history.push(EpochRecord {
            train_loss: cols[1]
                .parse()
                .map_err(|_| NnError::Format(format!("bad train loss '{}'", cols[1])))?,
            val_loss: cols[2]
                .parse()
                .map_err(|_| NnError::Format(format!("bad val loss '{}'", cols[2])))?,
        });
    }
    model.history = history;

    Ok(ModelBundle {
        model,
        target: config.target,
        scaling: config.scaling,
        hypothesis: config.hypothesis,
        ranges: config.ranges,
        split_seed: config.split_seed,
        split_fraction: config.split_fraction,
        train_config: config.train_config,
    })
}
