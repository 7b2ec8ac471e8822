//! `sftm train`, `sftm eval`, `sftm predict`: the estimation pipeline over a
//! generated dataset, and inference on a user-supplied series.

use crate::errors::CliError;
use crate::manifest::{write_manifest, OutputLock};
use crate::opts::load_opts_file;
use clap::Args;
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sftm_core::dataset::{
    clamp_noise_prediction, clamp_params_prediction, load_dataset, param_row, scale_features,
    select_rows, split_dataset, Dataset, Split,
};
use sftm_core::nn::{
    evaluate, fit, init_scnn, load_model, save_model, stack_channels, Metrics, ModelBundle,
    OptimizerKind, ScnnConfig, TargetKind, TrainConfig,
};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

#[derive(Args, Serialize, Deserialize, Default, Clone)]
#[serde(default, deny_unknown_fields)]
pub struct TrainOpts {
    /// params8 (the 8 model parameters) or noise2 (sigma1, sigma2).
    #[arg(long)]
    pub target: Option<String>,
    /// Training epochs (default 50).
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Mini-batch size (default 64).
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Learning rate (default 1e-3).
    #[arg(long)]
    pub lr: Option<f64>,
    /// adam or sgd.
    #[arg(long)]
    pub optimizer: Option<String>,
    /// Shuffle seed (default 0).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Weight-init seed (default: the shuffle seed).
    #[arg(long)]
    pub arch_seed: Option<u64>,
    /// Train/test split seed (default 0).
    #[arg(long)]
    pub split_seed: Option<u64>,
    /// Test fraction (default 0.2).
    #[arg(long)]
    pub split_fraction: Option<f64>,
    /// Validation fraction of the training rows (default 0.1).
    #[arg(long)]
    pub val_fraction: Option<f64>,
}

#[derive(Args)]
pub struct TrainArgs {
    /// JSON file with the same fields as the flags; flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset directory produced by `sftm gendata`.
    #[arg(long)]
    pub dataset: PathBuf,
    #[command(flatten)]
    pub opts: TrainOpts,
    /// Model directory to create.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct ResolvedTrain {
    dataset: String,
    target: TargetKind,
    train: TrainConfig,
    arch_seed: u64,
    split_seed: u64,
    split_fraction: f64,
}

pub fn run_train(args: TrainArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let file: TrainOpts = load_opts_file(args.config.as_deref())?;
    let o = &args.opts;
    let target_name = o
        .target
        .as_deref()
        .or(file.target.as_deref())
        .ok_or_else(|| CliError::Config("--target is required (params8 or noise2)".into()))?;
    let target = TargetKind::from_str(target_name).map_err(CliError::Config)?;
    let optimizer = match o
        .optimizer
        .as_deref()
        .or(file.optimizer.as_deref())
        .unwrap_or("adam")
    {
        "adam" => OptimizerKind::default(),
        "sgd" => OptimizerKind::Sgd,
        other => {
            return Err(CliError::Config(format!(
                "unknown optimizer '{other}' (expected adam or sgd)"
            )))
        }
    };
    let shuffle_seed = o.seed.or(file.seed).unwrap_or(0);
    let resolved = ResolvedTrain {
        dataset: args.dataset.display().to_string(),
        target,
        train: TrainConfig {
            epochs: o.epochs.or(file.epochs).unwrap_or(50),
            batch_size: o.batch_size.or(file.batch_size).unwrap_or(64),
            learning_rate: o.lr.or(file.lr).unwrap_or(1e-3),
            optimizer,
            shuffle_seed,
            validation_fraction: o.val_fraction.or(file.val_fraction).unwrap_or(0.1),
        },
        arch_seed: o.arch_seed.or(file.arch_seed).unwrap_or(shuffle_seed),
        split_seed: o.split_seed.or(file.split_seed).unwrap_or(0),
        split_fraction: o.split_fraction.or(file.split_fraction).unwrap_or(0.2),
    };

    let ds = load_dataset(&args.dataset)?;
    let split = split_dataset(ds.n_rows(), resolved.split_fraction, resolved.split_seed)?;
    let (train_scaled, _, scaling) = scale_features(&ds, &split);
    let features = stack_channels(&train_scaled.a.view(), &train_scaled.f.view());
    let labels = select_rows(&target.labels(&ds).view(), &split.train);

    let _lock = OutputLock::acquire(&args.out)?;
    let config = ScnnConfig::default_for(ds.series_len(), target.output_dim(), resolved.arch_seed);
    let model = fit(init_scnn(&config)?, &features, &labels, &resolved.train)?;
    let last = model.history.last().copied();

    let bundle = ModelBundle {
        model,
        target,
        scaling,
        hypothesis: ds.meta.hypothesis,
        ranges: ds.meta.ranges,
        split_seed: resolved.split_seed,
        split_fraction: resolved.split_fraction,
        train_config: resolved.train,
    };
    save_model(&args.out, &bundle)?;
    if let Some(rec) = last {
        eprintln!(
            "trained {} epochs: train loss {:.6}, val loss {:.6}",
            resolved.train.epochs, rec.train_loss, rec.val_loss
        );
    }
    write_manifest(
        &args.out.join("model"),
        "train",
        &resolved,
        &[args.dataset.clone()],
        &[args.out.clone()],
        started,
    )?;
    Ok(())
}

#[derive(Args)]
pub struct EvalArgs {
    /// Model directory produced by `sftm train`.
    #[arg(long)]
    pub model: PathBuf,
    /// The dataset the model was trained on.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Metrics JSON output path (default `<model>/metrics.json`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct MetricsFile {
    test_mse: f64,
    per_target_mse: Vec<f64>,
}

#[derive(Serialize)]
struct ResolvedEval {
    model: String,
    dataset: String,
    split_seed: u64,
    split_fraction: f64,
}

/// Rebuild the bundle's test rows and scale them with the stored statistics.
fn test_batch(
    bundle: &ModelBundle,
    ds: &Dataset,
) -> Result<(ndarray::Array3<f64>, Array2<f64>, Split), CliError> {
    let split = split_dataset(ds.n_rows(), bundle.split_fraction, bundle.split_seed)?;
    let a = select_rows(&ds.a.view(), &split.test).mapv(|v| bundle.scaling.scale_a(v));
    let f = select_rows(&ds.f.view(), &split.test).mapv(|v| bundle.scaling.scale_f(v));
    let features = stack_channels(&a.view(), &f.view());
    let labels = select_rows(&bundle.target.labels(ds).view(), &split.test);
    Ok((features, labels, split))
}

pub fn run_eval(args: EvalArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let bundle = load_model(&args.model)?;
    let ds = load_dataset(&args.dataset)?;
    let (features, labels, _) = test_batch(&bundle, &ds)?;
    let metrics: Metrics = evaluate(&bundle.model, &features, &labels)?;

    let out = args
        .out
        .clone()
        .unwrap_or_else(|| args.model.join("metrics.json"));
    let out_dir = super::sweep::parent_dir(&out);
    let _lock = OutputLock::acquire(&out_dir)?;
    let text = serde_json::to_string_pretty(&MetricsFile {
        test_mse: metrics.mse,
        per_target_mse: metrics.per_target.clone(),
    })
    .map_err(|e| CliError::Io(e.to_string()))?;
    fs::write(&out, text)?;
    eprintln!("test MSE {:.6} over {} rows", metrics.mse, labels.nrows());
    write_manifest(
        &out,
        "eval",
        &ResolvedEval {
            model: args.model.display().to_string(),
            dataset: args.dataset.display().to_string(),
            split_seed: bundle.split_seed,
            split_fraction: bundle.split_fraction,
        },
        &[args.model.clone(), args.dataset.clone()],
        &[out.clone()],
        started,
    )?;
    Ok(())
}

#[derive(Args)]
pub struct PredictArgs {
    /// Model directory produced by `sftm train`.
    #[arg(long)]
    pub model: PathBuf,
    /// Observed series CSV with header `t,x,y` and one row per year.
    #[arg(long)]
    pub series: PathBuf,
    /// Predictions CSV output path (default `<series>.predictions.csv`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Project raw estimates into the legal parameter domain.
    #[arg(long)]
    pub clamp: bool,
}

#[derive(Serialize)]
struct ResolvedPredict {
    model: String,
    series: String,
    clamp: bool,
}

fn read_series(path: &Path) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::Io(format!("{}: empty file", path.display())))?;
    if header.trim() != "t,x,y" {
        return Err(CliError::Config(format!(
            "{}: expected header 't,x,y', found '{header}'",
            path.display()
        )));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 3 {
            return Err(CliError::Config(format!(
                "{} line {}: expected 3 columns",
                path.display(),
                i + 2
            )));
        }
        let parse = |s: &str| -> Result<f64, CliError> {
            s.trim()
                .parse()
                .map_err(|_| CliError::Config(format!("{}: bad number '{s}'", path.display())))
        };
        xs.push(parse(cols[1])?);
        ys.push(parse(cols[2])?);
    }
    Ok((xs, ys))
}

pub fn run_predict(args: PredictArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let bundle = load_model(&args.model)?;
    let (xs, ys) = read_series(&args.series)?;
    let expected = bundle.model.config.series_len;
    if xs.len() != expected {
        return Err(CliError::Config(format!(
            "series has {} rows but the model expects {expected}",
            xs.len()
        )));
    }

    let mut a = Array2::zeros((1, expected));
    let mut f = Array2::zeros((1, expected));
    for (j, (&x, &y)) in xs.iter().zip(&ys).enumerate() {
        a[[0, j]] = bundle.scaling.scale_a(x);
        f[[0, j]] = bundle.scaling.scale_f(y);
    }
    let batch = stack_channels(&a.view(), &f.view());
    let raw = bundle.model.forward(&batch)?;

    let (names, values): (Vec<&str>, Vec<f64>) = match bundle.target {
        TargetKind::Params8 => {
            let names = vec!["mu", "h", "eta", "beta", "delta", "lambda", "gamma", "alpha"];
            let mut vals: Vec<f64> = raw.row(0).to_vec();
            if args.clamp {
                let arr: [f64; 8] = vals.clone().try_into().unwrap();
                let p = clamp_params_prediction(&arr, &bundle.ranges, bundle.hypothesis);
                vals = param_row(&p).to_vec();
            }
            (names, vals)
        }
        TargetKind::Noise2 => {
            let names = vec!["sigma1", "sigma2"];
            let mut vals: Vec<f64> = raw.row(0).to_vec();
            if args.clamp {
                let arr: [f64; 2] = vals.clone().try_into().unwrap();
                let n = clamp_noise_prediction(&arr, &bundle.ranges);
                vals = vec![n.sigma1, n.sigma2];
            }
            (names, vals)
        }
    };

    let out = args.out.clone().unwrap_or_else(|| {
        let mut name = args
            .series
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "series".into());
        name.push_str(".predictions.csv");
        args.series.with_file_name(name)
    });
    let out_dir = super::sweep::parent_dir(&out);
    let _lock = OutputLock::acquire(&out_dir)?;
    let mut text = String::from("name,value\n");
    for (name, value) in names.iter().zip(&values) {
        text.push_str(&format!("{name},{value:.16e}\n"));
        println!("{name} = {value:.6}");
    }
    fs::write(&out, text)?;
    write_manifest(
        &out,
        "predict",
        &ResolvedPredict {
            model: args.model.display().to_string(),
            series: args.series.display().to_string(),
            clamp: args.clamp,
        },
        &[args.model.clone(), args.series.clone()],
        &[out.clone()],
        started,
    )?;
    Ok(())
}
