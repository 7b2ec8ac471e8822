//! Shared oracles for the integration suites: a fixed-step Runge-Kutta
//! reference for the drift ODE, and constructive valid-parameter sampling.
//! These stay independent of the Euler-Maruyama implementation they check.
#![allow(dead_code)] // each test binary uses its own subset

use rand::Rng;
use sftm_core::model::{Hypothesis, LandState, ModelParams, NoiseParams};

/// Baseline parameter set of the sample-path experiments.
pub fn base_params(hypothesis: Hypothesis) -> ModelParams {
    ModelParams {
        mu: 0.2,
        h: 0.3,
        eta: 0.7,
        beta: 2.0,
        delta: 0.7,
        lambda: 1.0,
        gamma: 0.5,
        alpha: 2.0,
        hypothesis,
    }
}

pub fn unit_noise() -> NoiseParams {
    NoiseParams {
        sigma1: 1.0,
        sigma2: 1.0,
    }
}

/// Classic fourth-order Runge-Kutta on the drift field, fixed step,
/// landing exactly on `t_end` (shortened final step).
pub fn rk4_drift(params: &ModelParams, s0: LandState, t_end: f64, dt: f64) -> Vec<(f64, LandState)> {
    let f = |s: LandState| params.drift(s);
    let mut out = vec![(0.0, s0)];
    let n_steps = (t_end / dt).ceil() as usize;
    let mut s = s0;
    let mut t = 0.0;
    for k in 1..=n_steps {
        let t_next = if k == n_steps { t_end } else { k as f64 * dt };
        let h = t_next - t;
        let k1 = f(s);
        let k2 = f(step(s, k1, h / 2.0));
        let k3 = f(step(s, k2, h / 2.0));
        let k4 = f(step(s, k3, h));
        s = LandState {
            x: s.x + h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
            y: s.y + h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
        };
        t = t_next;
        out.push((t, s));
    }
    out
}

fn step(s: LandState, d: (f64, f64), h: f64) -> LandState {
    LandState {
        x: s.x + h * d.0,
        y: s.y + h * d.1,
    }
}

/// RK4 terminal state.
pub fn rk4_terminal(params: &ModelParams, s0: LandState, t_end: f64, dt: f64) -> LandState {
    rk4_drift(params, s0, t_end, dt).last().unwrap().1
}

/// Draw a valid parameter set constructively (no rejection).
pub fn random_valid_params<R: Rng>(rng: &mut R, hypothesis: Hypothesis) -> ModelParams {
    let mu = rng.random_range(0.001..0.95);
    let h = rng.random_range(0.001..(1.0 - mu) * 0.999);
    let delta = rng.random_range(0.001..0.999);
    let lambda = rng.random_range(0.001..2.0);
    let alpha = match hypothesis {
        Hypothesis::Fsh => delta + rng.random_range(0.0..3.0),
        Hypothesis::Esh => delta + lambda + rng.random_range(0.0..3.0),
    };
    ModelParams {
        mu,
        h,
        eta: rng.random_range(0.001..0.999),
        beta: rng.random_range(0.01..5.0),
        delta,
        lambda,
        gamma: rng.random_range(0.001..0.999),
        alpha,
        hypothesis,
    }
}

/// Uniform state in the triangle shrunk by `margin`.
pub fn random_state<R: Rng>(rng: &mut R, margin: f64) -> LandState {
    loop {
        let x = rng.random_range(margin..1.0 - margin);
        let y = rng.random_range(margin..1.0 - margin);
        if x + y <= 1.0 - margin {
            return LandState { x, y };
        }
    }
}
