//! Optimizers for the regressor: adaptive moment estimation (the default)
//! and plain stochastic gradient descent.

use super::scnn::{Gradients, Scnn};
use ndarray::{Array1, Array2, Array3};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
    Sgd,
}

impl Default for OptimizerKind {
    fn default() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Per-array first/second moment buffers.
struct Moments {
    convs: Vec<(Array3<f64>, Array1<f64>)>,
    denses: Vec<(Array2<f64>, Array1<f64>)>,
}

impl Moments {
    fn zeros_like(model: &Scnn) -> Self {
        Moments {
            convs: model
                .convs
                .iter()
                .map(|c| (Array3::zeros(c.weights.dim()), Array1::zeros(c.bias.len())))
                .collect(),
            denses: model
                .denses
                .iter()
                .map(|d| (Array2::zeros(d.weights.dim()), Array1::zeros(d.bias.len())))
                .collect(),
        }
    }
}

pub struct Optimizer {
    kind: OptimizerKind,
    learning_rate: f64,
    m: Option<Moments>,
    v: Option<Moments>,
    step_count: u64,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, learning_rate: f64) -> Self {
        Optimizer {
            kind,
            learning_rate,
            m: None,
            v: None,
            step_count: 0,
        }
    }

    pub fn step(&mut self, model: &mut Scnn, grads: &Gradients) {
        match self.kind {
            OptimizerKind::Sgd => self.sgd_step(model, grads),
            OptimizerKind::Adam { .. } => self.adam_step(model, grads),
        }
    }

    fn sgd_step(&self, model: &mut Scnn, grads: &Gradients) {
        let lr = self.learning_rate;
        for (conv, (gw, gb)) in model.convs.iter_mut().zip(&grads.convs) {
            conv.weights.zip_mut_with(gw, |w, &g| *w -= lr * g);
            conv.bias.zip_mut_with(gb, |b, &g| *b -= lr * g);
        }
        for (dense, (gw, gb)) in model.denses.iter_mut().zip(&grads.denses) {
            dense.weights.zip_mut_with(gw, |w, &g| *w -= lr * g);
            dense.bias.zip_mut_with(gb, |b, &g| *b -= lr * g);
        }
    }

    fn adam_step(&mut self, model: &mut Scnn, grads: &Gradients) {
        let OptimizerKind::Adam {
            beta1,
            beta2,
            epsilon,
        } = self.kind
        else {
            unreachable!()
        };
        if self.m.is_none() {
            self.m = Some(Moments::zeros_like(model));
            self.v = Some(Moments::zeros_like(model));
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let lr = self.learning_rate;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);
        let m = self.m.as_mut().unwrap();
        let v = self.v.as_mut().unwrap();

        let update = |w: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *w -= lr * m_hat / (v_hat.sqrt() + epsilon);
        };

        for i in 0..model.convs.len() {
            let conv = &mut model.convs[i];
            let (gw, gb) = &grads.convs[i];
            let (mw, mb) = &mut m.convs[i];
            let (vw, vb) = &mut v.convs[i];
            for (((w, &g), m), v) in conv
                .weights
                .iter_mut()
                .zip(gw.iter())
                .zip(mw.iter_mut())
                .zip(vw.iter_mut())
            {
                update(w, g, m, v);
            }
            for (((b, &g), m), v) in conv
                .bias
                .iter_mut()
                .zip(gb.iter())
                .zip(mb.iter_mut())
                .zip(vb.iter_mut())
            {
                update(b, g, m, v);
            }
        }
        for i in 0..model.denses.len() {
            let dense = &mut model.denses[i];
            let (gw, gb) = &grads.denses[i];
            let (mw, mb) = &mut m.denses[i];
            let (vw, vb) = &mut v.denses[i];
            for (((w, &g), m), v) in dense
                .weights
                .iter_mut()
                .zip(gw.iter())
                .zip(mw.iter_mut())
                .zip(vw.iter_mut())
            {
                update(w, g, m, v);
            }
            for (((b, &g), m), v) in dense
                .bias
                .iter_mut()
                .zip(gb.iter())
                .zip(mb.iter_mut())
                .zip(vb.iter_mut())
            {
                update(b, g, m, v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::scnn::{init_scnn, ScnnConfig};
    use super::*;
    use ndarray::{Array2, Array3};

    #[test]
    fn zero_learning_rate_leaves_weights_unchanged() {
        let cfg = ScnnConfig::default_for(10, 2, 4);
        let mut model = init_scnn(&cfg).unwrap();
        let before = model.clone();
        let batch = Array3::from_elem((2, 2, 10), -0.5);
        let target = Array2::from_elem((2, 2), 1.0);
        let (grads, _) = model.backward(&batch, &target).unwrap();
        let mut opt = Optimizer::new(OptimizerKind::default(), 0.0);
        opt.step(&mut model, &grads);
        assert_eq!(model.convs[0].weights, before.convs[0].weights);
        assert_eq!(model.denses[1].bias, before.denses[1].bias);
    }

    #[test]
    fn sgd_moves_against_gradient() {
        let cfg = ScnnConfig::default_for(10, 2, 4);
        let mut model = init_scnn(&cfg).unwrap();
        let batch = Array3::from_elem((2, 2, 10), -0.5);
        let target = Array2::from_elem((2, 2), 1.0);
        let (grads, loss_before) = model.backward(&batch, &target).unwrap();
        let mut opt = Optimizer::new(OptimizerKind::Sgd, 1e-2);
        opt.step(&mut model, &grads);
        let (_, loss_after) = model.backward(&batch, &target).unwrap();
        assert!(loss_after < loss_before);
    }

    #[test]
    fn adam_reduces_loss_over_steps() {
        let cfg = ScnnConfig::default_for(10, 2, 4);
        let mut model = init_scnn(&cfg).unwrap();
        let batch = Array3::from_elem((4, 2, 10), -0.3);
        let target = Array2::from_elem((4, 2), 0.05);
        let (_, first) = model.backward(&batch, &target).unwrap();
        let mut opt = Optimizer::new(OptimizerKind::default(), 1e-2);
        let mut last = first;
        for _ in 0..50 {
            let (grads, loss) = model.backward(&batch, &target).unwrap();
            opt.step(&mut model, &grads);
            last = loss;
        }
        assert!(last < first * 0.1, "first {first}, last {last}");
    }
}
