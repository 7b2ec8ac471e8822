//! Building blocks of the shallow convolutional regressor: 1-D convolution
//! over the channel dimension, dense layers, activations, and global average
//! pooling. Forward and backward passes are written directly against the
//! defining sums; shapes follow the (batch, channel, time) convention.

use ndarray::{Array1, Array2, Array3};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    pub fn apply(&self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative as a function of the pre-activation value.
    pub fn derivative(&self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
        }
    }
}

/// 1-D convolution, no padding. Weights are (out_channels, in_channels,
/// kernel); an input of length L maps to `(L - kernel) / stride + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d {
    pub weights: Array3<f64>,
    pub bias: Array1<f64>,
    pub stride: usize,
}

impl Conv1d {
    pub fn out_len(&self, in_len: usize) -> usize {
        (in_len - self.weights.dim().2) / self.stride + 1
    }

    /// input (B, C_in, L) -> (B, C_out, L_out)
    pub fn forward(&self, input: &Array3<f64>) -> Array3<f64> {
        let (batch, _, in_len) = input.dim();
        let (out_c, in_c, kernel) = self.weights.dim();
        let out_len = self.out_len(in_len);
        let mut out = Array3::zeros((batch, out_c, out_len));
        for b in 0..batch {
            for o in 0..out_c {
                for t in 0..out_len {
                    let start = t * self.stride;
                    let mut acc = self.bias[o];
                    for c in 0..in_c {
                        for k in 0..kernel {
                            acc += self.weights[[o, c, k]] * input[[b, c, start + k]];
                        }
                    }
                    out[[b, o, t]] = acc;
                }
            }
        }
        out
    }

    /// Gradients of the loss w.r.t. weights, bias and input, given the
    /// gradient w.r.t. this layer's pre-activation output.
    pub fn backward(
        &self,
        input: &Array3<f64>,
        grad_out: &Array3<f64>,
    ) -> (Array3<f64>, Array1<f64>, Array3<f64>) {
        let (batch, _, _) = input.dim();
        let (out_c, in_c, kernel) = self.weights.dim();
        let out_len = grad_out.dim().2;
        let mut grad_w = Array3::zeros(self.weights.dim());
        let mut grad_b = Array1::zeros(out_c);
        let mut grad_in = Array3::zeros(input.dim());
        for b in 0..batch {
            for o in 0..out_c {
                for t in 0..out_len {
                    let g = grad_out[[b, o, t]];
                    if g == 0.0 {
                        continue;
                    }
                    let start = t * self.stride;
                    grad_b[o] += g;
                    for c in 0..in_c {
                        for k in 0..kernel {
                            grad_w[[o, c, k]] += g * input[[b, c, start + k]];
                            grad_in[[b, c, start + k]] += g * self.weights[[o, c, k]];
                        }
                    }
                }
            }
        }
        (grad_w, grad_b, grad_in)
    }
}

/// Fully connected layer; weights are (out, in).
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    /// input (B, I) -> (B, O)
    pub fn forward(&self, input: &Array2<f64>) -> Array2<f64> {
        let (batch, _) = input.dim();
        let (out_d, in_d) = self.weights.dim();
        let mut out = Array2::zeros((batch, out_d));
        for b in 0..batch {
            for o in 0..out_d {
                let mut acc = self.bias[o];
                for i in 0..in_d {
                    acc += self.weights[[o, i]] * input[[b, i]];
                }
                out[[b, o]] = acc;
            }
        }
        out
    }

    pub fn backward(
        &self,
        input: &Array2<f64>,
        grad_out: &Array2<f64>,
    ) -> (Array2<f64>, Array1<f64>, Array2<f64>) {
        let (batch, _) = input.dim();
        let (out_d, in_d) = self.weights.dim();
        let mut grad_w = Array2::zeros(self.weights.dim());
        let mut grad_b = Array1::zeros(out_d);
        let mut grad_in = Array2::zeros(input.dim());
        for b in 0..batch {
            for o in 0..out_d {
                let g = grad_out[[b, o]];
                grad_b[o] += g;
                for i in 0..in_d {
                    grad_w[[o, i]] += g * input[[b, i]];
                    grad_in[[b, i]] += g * self.weights[[o, i]];
                }
            }
        }
        (grad_w, grad_b, grad_in)
    }
}

/// Mean over the time axis: (B, C, L) -> (B, C).
pub fn global_avg_pool(input: &Array3<f64>) -> Array2<f64> {
    let (batch, channels, len) = input.dim();
    let mut out = Array2::zeros((batch, channels));
    for b in 0..batch {
        for c in 0..channels {
            let mut acc = 0.0;
            for t in 0..len {
                acc += input[[b, c, t]];
            }
            out[[b, c]] = acc / len as f64;
        }
    }
    out
}

/// Backward of the mean pool: the incoming gradient spreads evenly over time.
pub fn global_avg_pool_backward(grad_out: &Array2<f64>, len: usize) -> Array3<f64> {
    let (batch, channels) = grad_out.dim();
    let mut grad_in = Array3::zeros((batch, channels, len));
    for b in 0..batch {
        for c in 0..channels {
            let g = grad_out[[b, c]] / len as f64;
            for t in 0..len {
                grad_in[[b, c, t]] = g;
            }
        }
    }
    grad_in
}
