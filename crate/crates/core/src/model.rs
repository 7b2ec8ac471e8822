//! Closed-form mathematics of the stochastic forest transition model.
//!
//! The state `(x, y)` holds the proportions of forest and agricultural land
//! in a territory; abandoned land is the remainder `z = 1 - x - y`. The pair
//! evolves by the coupled SDE system
//!
//! ```text
//! dx = [p(x)(1-x-y) - r(x) x] dt + sigma1 x (1-x-y) dw
//! dy = [r(x) x - eta y]       dt + sigma2 y (1-x-y) dw
//! ```
//!
//! driven by a single shared Brownian motion `w`. The recovery rate is
//! `p(x) = mu + h x`. The deforestation rate `r(x)` is a logistic transform
//! of the net expected gain `G(x) = V_A(x) - V_F(x)`, the difference of the
//! discounted utilities of agricultural and forested land. The utilities
//! solve the linear system
//!
//! ```text
//! V_F = q(x) / (1 - gamma)
//! V_A = alpha + gamma [(1 - eta) V_A + eta V_E]
//! V_E = gamma [(1 - p(x)) V_E + p(x) V_F]
//! ```
//!
//! where `q(x)` is the forest value: `delta + lambda (1-x)` under the forest
//! scarcity hypothesis, `delta + lambda x` under the ecosystem service
//! hypothesis. Everything here is a pure function of its inputs.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Which linear forest-value function `q(x)` the model uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hypothesis {
    /// Forest scarcity: `q(x) = delta + lambda (1 - x)`; forest products
    /// gain value as forest cover declines.
    Fsh,
    /// Ecosystem service: `q(x) = delta + lambda x`; subsidy-like value
    /// rising with forest cover.
    Esh,
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Hypothesis::Fsh => write!(f, "fsh"),
            Hypothesis::Esh => write!(f, "esh"),
        }
    }
}

impl FromStr for Hypothesis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "fsh" => Ok(Hypothesis::Fsh),
            "esh" => Ok(Hypothesis::Esh),
            other => Err(format!("unknown hypothesis '{other}' (expected fsh or esh)")),
        }
    }
}

/// The eight economic/ecological parameters plus the hypothesis tag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Basic forest recovery rate, in (0, 1).
    pub mu: f64,
    /// Recovery gain with forest cover; `mu + h < 1`.
    pub h: f64,
    /// Abandonment rate of agricultural land, in (0, 1).
    pub eta: f64,
    /// Decision sharpness of the logistic deforestation rate, > 0.
    pub beta: f64,
    /// Base forest return, in (0, 1).
    pub delta: f64,
    /// Slope of the forest value in cover, > 0.
    pub lambda: f64,
    /// Per-period discount factor, in (0, 1).
    pub gamma: f64,
    /// Utility of agricultural land, > 0.
    pub alpha: f64,
    pub hypothesis: Hypothesis,
}

/// Noise intensities of the two SDE components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub sigma1: f64,
    pub sigma2: f64,
}

/// Land proportions `(x, y)`; valid states lie in the open triangle
/// `x > 0, y > 0, x + y < 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandState {
    pub x: f64,
    pub y: f64,
}

impl LandState {
    /// A state validated against the open triangle.
    pub fn new(x: f64, y: f64) -> Result<Self, InvalidState> {
        let s = LandState { x, y };
        if s.in_open_triangle() {
            Ok(s)
        } else {
            Err(InvalidState { x, y })
        }
    }

    /// Proportion of abandoned land.
    pub fn z(&self) -> f64 {
        1.0 - self.x - self.y
    }

    pub fn in_open_triangle(&self) -> bool {
        self.x > 0.0 && self.y > 0.0 && self.x + self.y < 1.0
    }

    pub fn in_closed_triangle(&self) -> bool {
        self.x >= 0.0 && self.y >= 0.0 && self.x + self.y <= 1.0
    }

    /// Membership in the shrunk triangle `x, y >= eps, x + y <= 1 - eps`.
    pub fn in_shrunk_triangle(&self, eps: f64) -> bool {
        self.x >= eps && self.y >= eps && self.x + self.y <= 1.0 - eps
    }
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("state ({x}, {y}) lies outside the open triangle x > 0, y > 0, x + y < 1")]
pub struct InvalidState {
    pub x: f64,
    pub y: f64,
}

/// Discounted utilities of the three land types at a given forest cover.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Utilities {
    /// `V_F`, forested land.
    pub forest: f64,
    /// `V_A`, agricultural land.
    pub agriculture: f64,
    /// `V_E`, abandoned land.
    pub abandoned: f64,
}

/// A single violated parameter constraint, named.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Violation {
    MuNotPositive,
    HNotPositive,
    MuPlusHNotBelowOne,
    EtaOutOfRange,
    GammaOutOfRange,
    DeltaOutOfRange,
    BetaNotPositive,
    LambdaNotPositive,
    AlphaNotPositive,
    /// FSH requires `delta <= alpha`.
    DeltaExceedsAlpha,
    /// ESH requires `delta + lambda <= alpha`.
    DeltaPlusLambdaExceedsAlpha,
    Sigma1NotPositive,
    Sigma2NotPositive,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Violation::MuNotPositive => "mu > 0",
            Violation::HNotPositive => "h > 0",
            Violation::MuPlusHNotBelowOne => "mu + h < 1",
            Violation::EtaOutOfRange => "0 < eta < 1",
            Violation::GammaOutOfRange => "0 < gamma < 1",
            Violation::DeltaOutOfRange => "0 < delta < 1",
            Violation::BetaNotPositive => "beta > 0",
            Violation::LambdaNotPositive => "lambda > 0",
            Violation::AlphaNotPositive => "alpha > 0",
            Violation::DeltaExceedsAlpha => "delta <= alpha (FSH)",
            Violation::DeltaPlusLambdaExceedsAlpha => "delta + lambda <= alpha (ESH)",
            Violation::Sigma1NotPositive => "sigma1 > 0",
            Violation::Sigma2NotPositive => "sigma2 > 0",
        };
        f.write_str(s)
    }
}

/// Full list of violated constraints; never panics on bad input.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct InvalidParams {
    pub violations: Vec<Violation>,
}

impl fmt::Display for InvalidParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "parameter constraints violated: ")?;
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Argument outside the unit interval where a rate is defined.
#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("forest proportion {0} outside [0, 1]")]
pub struct DomainError(pub f64);

impl ModelParams {
    /// Collect every violated constraint. Comparisons are written so that
    /// NaN fails the corresponding check.
    pub fn violations(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        if !(self.mu > 0.0) {
            v.push(Violation::MuNotPositive);
        }
        if !(self.h > 0.0) {
            v.push(Violation::HNotPositive);
        }
        if !(self.mu + self.h < 1.0) {
            v.push(Violation::MuPlusHNotBelowOne);
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            v.push(Violation::EtaOutOfRange);
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            v.push(Violation::GammaOutOfRange);
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            v.push(Violation::DeltaOutOfRange);
        }
        if !(self.beta > 0.0) {
            v.push(Violation::BetaNotPositive);
        }
        if !(self.lambda > 0.0) {
            v.push(Violation::LambdaNotPositive);
        }
        if !(self.alpha > 0.0) {
            v.push(Violation::AlphaNotPositive);
        }
        match self.hypothesis {
            Hypothesis::Fsh => {
                if !(self.delta <= self.alpha) {
                    v.push(Violation::DeltaExceedsAlpha);
                }
            }
            Hypothesis::Esh => {
                if !(self.delta + self.lambda <= self.alpha) {
                    v.push(Violation::DeltaPlusLambdaExceedsAlpha);
                }
            }
        }
        v
    }

    pub fn validate(&self) -> Result<(), InvalidParams> {
        let violations = self.violations();
        if violations.is_empty() {
            Ok(())
        } else {
            Err(InvalidParams { violations })
        }
    }

    /// Forest recovery rate `p(x) = mu + h x`; always in (0, 1) for valid
    /// parameters because `mu > 0` and `mu + h < 1`.
    pub fn recovery_rate(&self, x: f64) -> Result<f64, DomainError> {
        check_unit(x)?;
        Ok(self.p_of(x))
    }

    /// Forest value `q(x)` under the active hypothesis.
    pub fn forest_value(&self, x: f64) -> Result<f64, DomainError> {
        check_unit(x)?;
        Ok(self.q_of(x))
    }

    /// Discounted utilities, solved from the defining linear system by
    /// substitution. `x` is clamped to [0, 1]; the denominators stay away
    /// from zero for valid parameters.
    pub fn utilities(&self, x: f64) -> Utilities {
        let x = clamp_unit(x);
        let p = self.p_of(x);
        let forest = self.q_of(x) / (1.0 - self.gamma);
        let abandoned = self.gamma * p * forest / (1.0 - self.gamma * (1.0 - p));
        let agriculture =
            (self.alpha + self.gamma * self.eta * abandoned) / (1.0 - self.gamma * (1.0 - self.eta));
        Utilities {
            forest,
            agriculture,
            abandoned,
        }
    }

    /// Net expected gain of deforestation `G(x) = V_A - V_F`, evaluated by
    /// the closed form
    ///
    /// ```text
    ///        alpha [1 - gamma(1 - p)] - [1 - gamma(1 - eta - p)] q
    /// G(x) = ----------------------------------------------------
    ///            [1 - gamma(1 - eta)] [1 - gamma(1 - p)]
    /// ```
    ///
    /// `x` is clamped to [0, 1] since the integrator may graze the boundary.
    pub fn net_gain(&self, x: f64) -> f64 {
        let x = clamp_unit(x);
        let p = self.p_of(x);
        let q = self.q_of(x);
        let num = self.alpha * (1.0 - self.gamma * (1.0 - p))
            - (1.0 - self.gamma * (1.0 - self.eta - p)) * q;
        let den = (1.0 - self.gamma * (1.0 - self.eta)) * (1.0 - self.gamma * (1.0 - p));
        num / den
    }

    /// Deforestation rate `r(x) = 1 / (1 + exp(-beta G(x)))`, with
    /// `r > 1/2` exactly when `G > 0`. Mathematically in (0, 1); in f64 the
    /// logistic saturates to an exact 0 or 1 for `|beta G|` beyond ~745.
    pub fn deforestation_rate(&self, x: f64) -> f64 {
        logistic(self.beta * self.net_gain(x))
    }

    /// Drift field of the SDE system.
    pub fn drift(&self, s: LandState) -> (f64, f64) {
        let z = s.z();
        let p = self.p_of(clamp_unit(s.x));
        let r = self.deforestation_rate(s.x);
        (p * z - r * s.x, r * s.x - self.eta * s.y)
    }

    fn p_of(&self, x: f64) -> f64 {
        self.mu + self.h * x
    }

    fn q_of(&self, x: f64) -> f64 {
        match self.hypothesis {
            Hypothesis::Fsh => self.delta + self.lambda * (1.0 - x),
            Hypothesis::Esh => self.delta + self.lambda * x,
        }
    }
}

impl NoiseParams {
    pub fn violations(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        if !(self.sigma1 > 0.0) {
            v.push(Violation::Sigma1NotPositive);
        }
        if !(self.sigma2 > 0.0) {
            v.push(Violation::Sigma2NotPositive);
        }
        v
    }

    /// Diffusion coefficients. Both components are driven by the same
    /// Brownian increment; the coefficient of each vanishes when the
    /// corresponding land type (or the abandoned remainder) is absent.
    pub fn diffusion(&self, s: LandState) -> (f64, f64) {
        let z = s.z();
        (self.sigma1 * s.x * z, self.sigma2 * s.y * z)
    }
}

/// Validate the joint parameter set, reporting every violated constraint.
pub fn validate_params(p: &ModelParams, n: &NoiseParams) -> Result<(), InvalidParams> {
    let mut violations = p.violations();
    violations.extend(n.violations());
    if violations.is_empty() {
        Ok(())
    } else {
        Err(InvalidParams { violations })
    }
}

/// Overflow-safe logistic function: for `t >= 0` computes `1/(1+e^-t)`,
/// otherwise `e^t/(1+e^t)`.
pub fn logistic(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

fn clamp_unit(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

fn check_unit(x: f64) -> Result<(), DomainError> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(DomainError(x))
    }
}
