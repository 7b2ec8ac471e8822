//! Stochastic forest transition model: coupled SDEs for forest and
//! agricultural land proportions, seeded Euler-Maruyama simulation,
//! Monte-Carlo sensitivity analysis of the net expected gain from
//! deforestation, synthetic dataset generation, and a from-scratch shallow
//! convolutional regressor that estimates the model parameters from a single
//! observed time series.

pub mod analysis;
pub mod dataset;
pub mod model;
pub mod nn;
pub mod seed;
pub mod sim;

pub use model::{
    validate_params, Hypothesis, InvalidParams, LandState, ModelParams, NoiseParams, Utilities,
};
pub use sim::{ObservationSeries, Path, SimConfig};
