//! Seeded Euler-Maruyama integration of the forest transition SDE system.
//!
//! The exact solution stays inside the open triangle for all time, but the
//! explicit scheme can overshoot the boundary, so every step is followed by
//! a projection onto the shrunk triangle `x, y >= eps, x + y <= 1 - eps`.
//! Projections are counted per path; at the baseline parameters they fire on
//! far less than 1% of steps.
//!
//! One Gaussian increment is drawn per step and applied to both components:
//! the two equations share a single Brownian driver.

use crate::model::{validate_params, InvalidParams, LandState, ModelParams, NoiseParams};
use crate::seed;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Integration grid and reproducibility settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Time step; the grid is `0, dt, 2dt, ...` with the final step
    /// shortened to land exactly on `t_end`.
    pub dt: f64,
    pub t_end: f64,
    pub seed: u64,
    /// Margin of the shrunk triangle used for boundary projection.
    pub boundary_epsilon: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 1.0 / 999.0,
            t_end: 30.0,
            seed: 0,
            boundary_epsilon: 1e-9,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SimError::InvalidConfig(format!("dt = {} must be > 0", self.dt)));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(SimError::InvalidConfig(format!(
                "t_end = {} must be > 0",
                self.t_end
            )));
        }
        if !(self.boundary_epsilon > 0.0 && self.boundary_epsilon < 1e-3) {
            return Err(SimError::InvalidConfig(format!(
                "boundary_epsilon = {} must lie in (0, 1e-3)",
                self.boundary_epsilon
            )));
        }
        Ok(())
    }

    /// Number of integration steps: `ceil(t_end / dt)`.
    pub fn step_count(&self) -> usize {
        (self.t_end / self.dt).ceil() as usize
    }
}

/// One simulated trajectory on the integration grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    times: Vec<f64>,
    states: Vec<LandState>,
    seed: u64,
    projections: u64,
}

impl Path {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[LandState] {
        &self.states
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// How many steps required boundary projection.
    pub fn projections(&self) -> u64 {
        self.projections
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn terminal(&self) -> LandState {
        *self.states.last().expect("path has at least the initial state")
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("path has at least the initial state")
    }

    /// Write the trajectory as `t,x,y` CSV.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "t,x,y")?;
        for (t, s) in self.times.iter().zip(&self.states) {
            writeln!(w, "{:.16e},{:.16e},{:.16e}", t, s.x, s.y)?;
        }
        Ok(())
    }
}

/// Yearly observations extracted from a path at t = 1, ..., T.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSeries {
    /// State at t = 1, i.e. `(x_obs[0], y_obs[0])`.
    pub initial: LandState,
    pub x_obs: Vec<f64>,
    pub y_obs: Vec<f64>,
}

impl ObservationSeries {
    pub fn len(&self) -> usize {
        self.x_obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x_obs.is_empty()
    }
}

/// How ensemble members pick their initial state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialState {
    Fixed { x: f64, y: f64 },
    /// Uniform over the triangle shrunk by `margin` on every side.
    UniformTriangle { margin: f64 },
}

impl InitialState {
    pub(crate) fn sample<R: Rng>(&self, rng: &mut R) -> Result<LandState, SimError> {
        match *self {
            InitialState::Fixed { x, y } => LandState::new(x, y)
                .map_err(|_| SimError::InvalidInitialState { x, y }),
            InitialState::UniformTriangle { margin } => {
                if !(margin > 0.0 && 3.0 * margin < 1.0) {
                    return Err(SimError::InvalidConfig(format!(
                        "initial-state margin {margin} must satisfy 0 < 3*margin < 1"
                    )));
                }
                // Rejection from the bounding square; acceptance is ~1/2.
                loop {
                    let x = rng.random_range(margin..1.0 - margin);
                    let y = rng.random_range(margin..1.0 - margin);
                    if x + y <= 1.0 - margin {
                        return Ok(LandState { x, y });
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    InvalidParams(#[from] InvalidParams),
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("initial state ({x}, {y}) outside the open triangle")]
    InvalidInitialState { x: f64, y: f64 },
    #[error("path ends at t = {t_end} but {required} yearly observations were requested")]
    HorizonTooShort { t_end: f64, required: usize },
}

/// Project onto the shrunk triangle. Component clamping first, then a
/// rescale toward the origin when the sum exceeds `1 - eps`; the rescale can
/// push a clamped component back under `eps`, in which case the other
/// component absorbs the difference.
fn project(x: f64, y: f64, eps: f64) -> (LandState, bool) {
    let mut px = x.max(eps);
    let mut py = y.max(eps);
    let mut fired = px != x || py != y;
    let sum = px + py;
    if sum > 1.0 - eps {
        fired = true;
        let scale = (1.0 - eps) / sum;
        px *= scale;
        py *= scale;
        if px < eps {
            px = eps;
            py = 1.0 - eps - px;
        } else if py < eps {
            py = eps;
            px = 1.0 - eps - py;
        }
        // Guard against stray ulps from the rescale.
        let excess = (px + py) - (1.0 - eps);
        if excess > 0.0 {
            if px >= py {
                px -= excess;
            } else {
                py -= excess;
            }
        }
    }
    (LandState { x: px, y: py }, fired)
}

/// One Euler-Maruyama step followed by boundary projection. `dw` is the
/// Brownian increment shared by both components (intended N(0, dt)).
/// Returns the new state and whether the projection fired.
pub fn em_step(
    params: &ModelParams,
    noise: &NoiseParams,
    state: LandState,
    dt: f64,
    dw: f64,
    boundary_epsilon: f64,
) -> (LandState, bool) {
    let (fx, fy) = params.drift(state);
    let (gx, gy) = noise.diffusion(state);
    project(
        state.x + fx * dt + gx * dw,
        state.y + fy * dt + gy * dw,
        boundary_epsilon,
    )
}

/// Integrate one path from `s0`. Bit-for-bit reproducible from
/// `(params, noise, s0, cfg)`.
pub fn simulate_path(
    params: &ModelParams,
    noise: &NoiseParams,
    s0: LandState,
    cfg: &SimConfig,
) -> Result<Path, SimError> {
    validate_params(params, noise)?;
    cfg.validate()?;
    if !s0.in_open_triangle() {
        return Err(SimError::InvalidInitialState { x: s0.x, y: s0.y });
    }
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    simulate_path_with_rng(params, noise, s0, cfg, &mut rng)
}

fn simulate_path_with_rng(
    params: &ModelParams,
    noise: &NoiseParams,
    s0: LandState,
    cfg: &SimConfig,
    rng: &mut ChaCha12Rng,
) -> Result<Path, SimError> {
    let n_steps = cfg.step_count();
    let eps = cfg.boundary_epsilon;
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut states = Vec::with_capacity(n_steps + 1);
    let mut projections = 0u64;

    let (mut state, fired) = project(s0.x, s0.y, eps);
    if fired {
        projections += 1;
    }
    times.push(0.0);
    states.push(state);

    let mut t = 0.0;
    for k in 1..=n_steps {
        // Shorten the final step to land exactly on t_end.
        let t_next = if k == n_steps { cfg.t_end } else { k as f64 * cfg.dt };
        let step_dt = t_next - t;
        let z: f64 = rng.sample(StandardNormal);
        let dw = step_dt.sqrt() * z;
        let (next, fired) = em_step(params, noise, state, step_dt, dw, eps);
        if fired {
            projections += 1;
        }
        state = next;
        t = t_next;
        times.push(t);
        states.push(state);
    }

    Ok(Path {
        times,
        states,
        seed: cfg.seed,
        projections,
    })
}

/// Simulate `count` independent paths. Per-path seeds are derived from
/// `(cfg.seed, index)`, so the ensemble parallelizes and the result is
/// independent of scheduling order.
pub fn simulate_ensemble(
    params: &ModelParams,
    noise: &NoiseParams,
    init: &InitialState,
    cfg: &SimConfig,
    count: usize,
) -> Result<Vec<Path>, SimError> {
    validate_params(params, noise)?;
    cfg.validate()?;
    if count == 0 {
        return Err(SimError::InvalidConfig("ensemble count must be >= 1".into()));
    }
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut path_cfg = *cfg;
            path_cfg.seed = seed::derive(cfg.seed, i as u64);
            let mut rng = ChaCha12Rng::seed_from_u64(path_cfg.seed);
            let s0 = init.sample(&mut rng)?;
            simulate_path_with_rng(params, noise, s0, &path_cfg, &mut rng)
        })
        .collect()
}

/// Extract yearly observations at t = 1, ..., T (nearest grid point).
pub fn observe(path: &Path, t_count: usize) -> Result<ObservationSeries, SimError> {
    if t_count < 2 {
        return Err(SimError::InvalidConfig(format!(
            "observation count {t_count} must be >= 2"
        )));
    }
    let t_end = path.t_end();
    let dt = path.times[1] - path.times[0];
    if t_end + dt / 2.0 < t_count as f64 {
        return Err(SimError::HorizonTooShort {
            t_end,
            required: t_count,
        });
    }
    let mut x_obs = Vec::with_capacity(t_count);
    let mut y_obs = Vec::with_capacity(t_count);
    for t in 1..=t_count {
        let idx = ((t as f64 / dt).round() as usize).min(path.len() - 1);
        let s = path.states[idx];
        x_obs.push(s.x);
        y_obs.push(s.y);
    }
    Ok(ObservationSeries {
        initial: LandState {
            x: x_obs[0],
            y: y_obs[0],
        },
        x_obs,
        y_obs,
    })
}

/// Write an ensemble as long-format `path_id,t,x,y` CSV.
pub fn write_ensemble_csv<W: Write>(paths: &[Path], w: &mut W) -> std::io::Result<()> {
    writeln!(w, "path_id,t,x,y")?;
    for (id, path) in paths.iter().enumerate() {
        for (t, s) in path.times().iter().zip(path.states()) {
            writeln!(w, "{},{:.16e},{:.16e},{:.16e}", id, t, s.x, s.y)?;
        }
    }
    Ok(())
}
