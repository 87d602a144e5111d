//! Simulated plants: the uncertain double integrator, a first-order plant for
//! the PI baseline, and the six-channel quadrotor.

mod disturbance;
pub mod uav;

pub use disturbance::{measure, Disturbance, DisturbanceSpec, NoiseModel, NoiseSpec};

use serde::{Deserialize, Serialize};

/// Known part `h(x1, t)` of the plant, cancelled by feedforward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KnownTerm {
    #[default]
    Zero,
    Constant {
        value: f64,
    },
    /// `gain * cbrt(x1) * sin(omega t)`.
    CubeRootSine {
        gain: f64,
        omega: f64,
    },
}

impl KnownTerm {
    pub fn eval(&self, x1: f64, t: f64) -> f64 {
        match self {
            KnownTerm::Zero => 0.0,
            KnownTerm::Constant { value } => *value,
            KnownTerm::CubeRootSine { gain, omega } => gain * x1.cbrt() * (omega * t).sin(),
        }
    }
}

/// `x1' = x2`, `x2' = h + u - delta`.
pub fn double_integrator_rhs(_x1: f64, x2: f64, u: f64, h: f64, delta: f64) -> (f64, f64) {
    (x2, h + u - delta)
}

/// `x' = h + u - delta`.
pub fn first_order_rhs(_x: f64, u: f64, h: f64, delta: f64) -> f64 {
    h + u - delta
}
