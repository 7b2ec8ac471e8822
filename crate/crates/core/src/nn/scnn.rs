//! The shallow convolutional regressor: a stack of 1-D convolutions over the
//! two-channel (forest, agriculture) series, global average pooling, and a
//! small dense head. Gradients are exact reverse-mode derivatives of the
//! MSE-of-forward composition.

use super::layers::{global_avg_pool, global_avg_pool_backward, Activation, Conv1d, Dense};
use super::{mse_grad, NnError};
use ndarray::{Array1, Array2, Array3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

/// One convolution stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
}

/// Architecture of the regressor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScnnConfig {
    pub input_channels: usize,
    pub series_len: usize,
    pub conv: Vec<ConvSpec>,
    pub activation: Activation,
    /// Hidden dense widths between the pooled features and the output.
    pub dense_hidden: Vec<usize>,
    /// 8 (model parameters) or 2 (noise intensities).
    pub output_dim: usize,
    pub init_seed: u64,
}

impl ScnnConfig {
    /// The default shallow architecture:
    /// conv(2->16, k3) -> conv(16->32, k3) -> pool -> dense(64) -> out.
    pub fn default_for(series_len: usize, output_dim: usize, init_seed: u64) -> Self {
        ScnnConfig {
            input_channels: 2,
            series_len,
            conv: vec![
                ConvSpec {
                    out_channels: 16,
                    kernel: 3,
                    stride: 1,
                },
                ConvSpec {
                    out_channels: 32,
                    kernel: 3,
                    stride: 1,
                },
            ],
            activation: Activation::Relu,
            dense_hidden: vec![64],
            output_dim,
            init_seed,
        }
    }

    pub fn validate(&self) -> Result<(), NnError> {
        if self.output_dim != 8 && self.output_dim != 2 {
            return Err(NnError::InvalidConfig(format!(
                "output_dim {} must be 8 or 2",
                self.output_dim
            )));
        }
        if self.input_channels == 0 || self.series_len == 0 {
            return Err(NnError::InvalidConfig("empty input shape".into()));
        }
        if self.conv.is_empty() {
            return Err(NnError::InvalidConfig("at least one conv layer".into()));
        }
        let mut len = self.series_len;
        for (i, spec) in self.conv.iter().enumerate() {
            if spec.out_channels == 0 || spec.kernel == 0 || spec.stride == 0 {
                return Err(NnError::InvalidConfig(format!("conv {i}: zero dimension")));
            }
            if spec.kernel > len {
                return Err(NnError::InvalidConfig(format!(
                    "conv {i}: kernel {} exceeds input length {len}",
                    spec.kernel
                )));
            }
            len = (len - spec.kernel) / spec.stride + 1;
        }
        if self.dense_hidden.iter().any(|&w| w == 0) {
            return Err(NnError::InvalidConfig("zero-width dense layer".into()));
        }
        Ok(())
    }
}

/// Per-epoch training record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub train_loss: f64,
    pub val_loss: f64,
}

/// The regressor with its weights and training history.
#[derive(Debug, Clone, PartialEq)]
pub struct Scnn {
    pub config: ScnnConfig,
    pub convs: Vec<Conv1d>,
    pub denses: Vec<Dense>,
    pub history: Vec<EpochRecord>,
}

/// Weight gradients mirroring the model structure.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub convs: Vec<(Array3<f64>, Array1<f64>)>,
    pub denses: Vec<(Array2<f64>, Array1<f64>)>,
}

pub(super) struct ForwardCache {
    conv_inputs: Vec<Array3<f64>>,
    conv_pres: Vec<Array3<f64>>,
    dense_inputs: Vec<Array2<f64>>,
    dense_pres: Vec<Array2<f64>>,
    pooled_len: usize,
    pub output: Array2<f64>,
}

/// Initialize an untrained model: weights uniform in
/// `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` drawn from the seed, biases zero.
pub fn init_scnn(config: &ScnnConfig) -> Result<Scnn, NnError> {
    config.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(config.init_seed);
    let mut convs = Vec::with_capacity(config.conv.len());
    let mut in_c = config.input_channels;
    let mut len = config.series_len;
    for spec in &config.conv {
        let bound = 1.0 / ((in_c * spec.kernel) as f64).sqrt();
        let mut weights = Array3::zeros((spec.out_channels, in_c, spec.kernel));
        for w in weights.iter_mut() {
            *w = rng.random_range(-bound..bound);
        }
        convs.push(Conv1d {
            weights,
            bias: Array1::zeros(spec.out_channels),
            stride: spec.stride,
        });
        len = (len - spec.kernel) / spec.stride + 1;
        in_c = spec.out_channels;
    }
    let _ = len;
    let mut denses = Vec::with_capacity(config.dense_hidden.len() + 1);
    let mut in_d = in_c; // pooled features: one per channel
    for &width in config.dense_hidden.iter().chain([config.output_dim].iter()) {
        let bound = 1.0 / (in_d as f64).sqrt();
        let mut weights = Array2::zeros((width, in_d));
        for w in weights.iter_mut() {
            *w = rng.random_range(-bound..bound);
        }
        denses.push(Dense {
            weights,
            bias: Array1::zeros(width),
        });
        in_d = width;
    }
    Ok(Scnn {
        config: config.clone(),
        convs,
        denses,
        history: Vec::new(),
    })
}

impl Scnn {
    pub fn weight_count(&self) -> usize {
        self.convs
            .iter()
            .map(|c| c.weights.len() + c.bias.len())
            .sum::<usize>()
            + self
                .denses
                .iter()
                .map(|d| d.weights.len() + d.bias.len())
                .sum::<usize>()
    }

    fn check_input(&self, batch: &Array3<f64>) -> Result<(), NnError> {
        let (_, channels, len) = batch.dim();
        if channels != self.config.input_channels || len != self.config.series_len {
            return Err(NnError::Shape(format!(
                "input (.., {channels}, {len}) does not match model (.., {}, {})",
                self.config.input_channels, self.config.series_len
            )));
        }
        Ok(())
    }

    /// Predictions for a batch, shape (batch, output_dim).
    pub fn forward(&self, batch: &Array3<f64>) -> Result<Array2<f64>, NnError> {
        Ok(self.forward_cached(batch)?.output)
    }

    pub(super) fn forward_cached(&self, batch: &Array3<f64>) -> Result<ForwardCache, NnError> {
        self.check_input(batch)?;
        let act = self.config.activation;
        let mut conv_inputs = Vec::with_capacity(self.convs.len());
        let mut conv_pres = Vec::with_capacity(self.convs.len());
        let mut current = batch.clone();
        for conv in &self.convs {
            let pre = conv.forward(&current);
            conv_inputs.push(current);
            current = pre.mapv(|z| act.apply(z));
            conv_pres.push(pre);
        }
        let pooled_len = current.dim().2;
        let pooled = global_avg_pool(&current);

        let mut dense_inputs = Vec::with_capacity(self.denses.len());
        let mut dense_pres = Vec::with_capacity(self.denses.len());
        let mut vec_in = pooled;
        let last = self.denses.len() - 1;
        for (i, dense) in self.denses.iter().enumerate() {
            let pre = dense.forward(&vec_in);
            dense_inputs.push(vec_in);
            // The output layer stays linear.
            vec_in = if i == last {
                pre.clone()
            } else {
                pre.mapv(|z| act.apply(z))
            };
            dense_pres.push(pre);
        }
        Ok(ForwardCache {
            conv_inputs,
            conv_pres,
            dense_inputs,
            dense_pres,
            pooled_len,
            output: vec_in,
        })
    }

    /// Exact gradients of `mse_loss(forward(batch), target)` for every
    /// weight array, plus the loss itself.
    pub fn backward(
        &self,
        batch: &Array3<f64>,
        target: &Array2<f64>,
    ) -> Result<(Gradients, f64), NnError> {
        let cache = self.forward_cached(batch)?;
        if cache.output.dim() != target.dim() {
            return Err(NnError::Shape(format!(
                "target {:?} does not match output {:?}",
                target.dim(),
                cache.output.dim()
            )));
        }
        let act = self.config.activation;
        let (loss, mut grad) = mse_grad(&cache.output, target);

        let mut dense_grads = vec![None; self.denses.len()];
        let last = self.denses.len() - 1;
        for i in (0..self.denses.len()).rev() {
            // Hidden layers carry the activation; the output layer is linear.
            let grad_pre = if i == last {
                grad
            } else {
                let mut g = grad;
                g.zip_mut_with(&cache.dense_pres[i], |gv, &pre| *gv *= act.derivative(pre));
                g
            };
            let (gw, gb, gin) = self.denses[i].backward(&cache.dense_inputs[i], &grad_pre);
            dense_grads[i] = Some((gw, gb));
            grad = gin;
        }

        let mut conv_grad = global_avg_pool_backward(&grad, cache.pooled_len);
        let mut conv_grads = vec![None; self.convs.len()];
        for i in (0..self.convs.len()).rev() {
            conv_grad.zip_mut_with(&cache.conv_pres[i], |gv, &pre| *gv *= act.derivative(pre));
            let (gw, gb, gin) = self.convs[i].backward(&cache.conv_inputs[i], &conv_grad);
            conv_grads[i] = Some((gw, gb));
            conv_grad = gin;
        }

        Ok((
            Gradients {
                convs: conv_grads.into_iter().map(|g| g.unwrap()).collect(),
                denses: dense_grads.into_iter().map(|g| g.unwrap()).collect(),
            },
            loss,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array;

    fn tiny_config(activation: Activation) -> ScnnConfig {
        // 98 weights total; small enough for exhaustive finite differences.
        ScnnConfig {
            input_channels: 2,
            series_len: 10,
            conv: vec![
                ConvSpec {
                    out_channels: 3,
                    kernel: 3,
                    stride: 1,
                },
                ConvSpec {
                    out_channels: 4,
                    kernel: 3,
                    stride: 1,
                },
            ],
            activation,
            dense_hidden: vec![5],
            output_dim: 2,
            init_seed: 12,
        }
    }

    fn random_batch(n: usize, len: usize, seed: u64) -> Array3<f64> {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
        Array::from_shape_simple_fn((n, 2, len), || rng.random_range(-1.0..0.0))
    }

    #[test]
    fn same_seed_gives_identical_weights() {
        let cfg = tiny_config(Activation::Relu);
        let a = init_scnn(&cfg).unwrap();
        let b = init_scnn(&cfg).unwrap();
        assert_eq!(a.convs[0].weights, b.convs[0].weights);
        assert_eq!(a.denses[1].weights, b.denses[1].weights);
        let mut cfg2 = cfg;
        cfg2.init_seed = 13;
        let c = init_scnn(&cfg2).unwrap();
        assert_ne!(a.convs[0].weights, c.convs[0].weights);
    }

    #[test]
    fn output_dim_changes_only_the_head() {
        let full = init_scnn(&ScnnConfig::default_for(30, 8, 3)).unwrap();
        let noise = init_scnn(&ScnnConfig::default_for(30, 2, 3)).unwrap();
        assert_eq!(full.convs[0].weights, noise.convs[0].weights);
        assert_eq!(
            full.denses.last().unwrap().weights.dim().0,
            8
        );
        assert_eq!(noise.denses.last().unwrap().weights.dim().0, 2);
    }

    #[test]
    fn forward_shape_on_default_architecture() {
        let model = init_scnn(&ScnnConfig::default_for(30, 8, 1)).unwrap();
        let batch = random_batch(5, 30, 2);
        let out = model.forward(&batch).unwrap();
        assert_eq!(out.dim(), (5, 8));
        assert!(out.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn forward_rejects_wrong_length() {
        let model = init_scnn(&ScnnConfig::default_for(30, 8, 1)).unwrap();
        let batch = random_batch(5, 29, 2);
        assert!(matches!(model.forward(&batch), Err(NnError::Shape(_))));
    }

    #[test]
    fn zero_input_zero_bias_gives_zero_output() {
        // Every layer is linear-through-zero (conv/dense without bias,
        // ReLU(0) = 0), so the whole composition maps zero to zero.
        let model = init_scnn(&tiny_config(Activation::Relu)).unwrap();
        let batch = Array3::zeros((3, 2, 10));
        let out = model.forward(&batch).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn batch_rows_are_independent() {
        let model = init_scnn(&tiny_config(Activation::Relu)).unwrap();
        let batch = random_batch(4, 10, 7);
        let full = model.forward(&batch).unwrap();
        for b in 0..4 {
            let row = batch
                .slice(ndarray::s![b..b + 1, .., ..])
                .to_owned();
            let single = model.forward(&row).unwrap();
            for j in 0..2 {
                assert!((single[[0, j]] - full[[b, j]]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut cfg = tiny_config(Activation::Relu);
        cfg.output_dim = 5;
        assert!(init_scnn(&cfg).is_err());
        let mut cfg = tiny_config(Activation::Relu);
        cfg.conv[0].kernel = 50;
        assert!(init_scnn(&cfg).is_err());
    }

    /// Central finite differences over every weight of a tiny model.
    fn check_gradients(activation: Activation, seed: u64) {
        let cfg = tiny_config(activation);
        let mut model = init_scnn(&cfg).unwrap();
        assert!(model.weight_count() <= 500);
        let batch = random_batch(3, 10, seed);
        let target = Array2::from_shape_fn((3, 2), |(b, j)| 0.3 * (b as f64) - 0.2 * (j as f64));
        let (grads, _) = model.backward(&batch, &target).unwrap();
        let h = 1e-5;
        let mut checked = 0usize;

        let loss_of = |m: &Scnn| {
            let out = m.forward(&batch).unwrap();
            super::super::mse_loss(&out, &target).unwrap()
        };

        for li in 0..model.convs.len() {
            for idx in 0..model.convs[li].weights.len() {
                let orig = model.convs[li].weights.as_slice().unwrap()[idx];
                model.convs[li].weights.as_slice_mut().unwrap()[idx] = orig + h;
                let up = loss_of(&model);
                model.convs[li].weights.as_slice_mut().unwrap()[idx] = orig - h;
                let down = loss_of(&model);
                model.convs[li].weights.as_slice_mut().unwrap()[idx] = orig;
                let numeric = (up - down) / (2.0 * h);
                let analytic = grads.convs[li].0.as_slice().unwrap()[idx];
                let denom = numeric.abs().max(analytic.abs()).max(1e-8);
                assert!(
                    ((numeric - analytic) / denom).abs() < 1e-4,
                    "conv {li} weight {idx}: numeric {numeric} analytic {analytic}"
                );
                checked += 1;
            }
            for idx in 0..model.convs[li].bias.len() {
                let orig = model.convs[li].bias[idx];
                model.convs[li].bias[idx] = orig + h;
                let up = loss_of(&model);
                model.convs[li].bias[idx] = orig - h;
                let down = loss_of(&model);
                model.convs[li].bias[idx] = orig;
                let numeric = (up - down) / (2.0 * h);
                let analytic = grads.convs[li].1[idx];
                let denom = numeric.abs().max(analytic.abs()).max(1e-8);
                assert!(((numeric - analytic) / denom).abs() < 1e-4);
                checked += 1;
            }
        }
        for li in 0..model.denses.len() {
            for idx in 0..model.denses[li].weights.len() {
                let orig = model.denses[li].weights.as_slice().unwrap()[idx];
                model.denses[li].weights.as_slice_mut().unwrap()[idx] = orig + h;
                let up = loss_of(&model);
                model.denses[li].weights.as_slice_mut().unwrap()[idx] = orig - h;
                let down = loss_of(&model);
                model.denses[li].weights.as_slice_mut().unwrap()[idx] = orig;
                let numeric = (up - down) / (2.0 * h);
                let analytic = grads.denses[li].0.as_slice().unwrap()[idx];
                let denom = numeric.abs().max(analytic.abs()).max(1e-8);
                assert!(
                    ((numeric - analytic) / denom).abs() < 1e-4,
                    "dense {li} weight {idx}: numeric {numeric} analytic {analytic}"
                );
                checked += 1;
            }
            for idx in 0..model.denses[li].bias.len() {
                let orig = model.denses[li].bias[idx];
                model.denses[li].bias[idx] = orig + h;
                let up = loss_of(&model);
                model.denses[li].bias[idx] = orig - h;
                let down = loss_of(&model);
                model.denses[li].bias[idx] = orig;
                let numeric = (up - down) / (2.0 * h);
                let analytic = grads.denses[li].1[idx];
                let denom = numeric.abs().max(analytic.abs()).max(1e-8);
                assert!(((numeric - analytic) / denom).abs() < 1e-4);
                checked += 1;
            }
        }
        assert_eq!(checked, model.weight_count());
    }

    #[test]
    fn gradients_match_finite_differences_relu() {
        check_gradients(Activation::Relu, 21);
    }

    #[test]
    fn gradients_match_finite_differences_tanh() {
        check_gradients(Activation::Tanh, 22);
    }

    #[test]
    fn zero_error_means_zero_final_bias_gradient() {
        let model = init_scnn(&tiny_config(Activation::Relu)).unwrap();
        let batch = random_batch(2, 10, 5);
        let target = model.forward(&batch).unwrap();
        let (grads, loss) = model.backward(&batch, &target).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grads.denses.last().unwrap().1.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn duplicated_batch_preserves_gradient() {
        // The 1/p mean structure makes the gradient of a duplicated batch
        // equal the gradient of the single sample.
        let model = init_scnn(&tiny_config(Activation::Tanh)).unwrap();
        let single = random_batch(1, 10, 9);
        let mut doubled = Array3::zeros((2, 2, 10));
        for c in 0..2 {
            for t in 0..10 {
                doubled[[0, c, t]] = single[[0, c, t]];
                doubled[[1, c, t]] = single[[0, c, t]];
            }
        }
        let t1 = Array2::from_elem((1, 2), 0.4);
        let t2 = Array2::from_elem((2, 2), 0.4);
        let (g1, l1) = model.backward(&single, &t1).unwrap();
        let (g2, l2) = model.backward(&doubled, &t2).unwrap();
        assert!((l1 - l2).abs() < 1e-12);
        for (a, b) in g1.convs.iter().zip(&g2.convs) {
            for (x, y) in a.0.iter().zip(b.0.iter()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
