//! PID and PI baselines with feedforward cancellation of the known term.
//!
//! No anti-windup: the integral runs free so the windup overshoot of a large
//! initial error is visible.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    #[serde(default)]
    pub kd: f64,
}

impl PidGains {
    pub fn new(kp: f64, ki: f64, kd: f64) -> Self {
        PidGains { kp, ki, kd }
    }
}

/// `kp e + ki integral + kd e' - g`.
pub fn pid_control(e: f64, e_dot: f64, integral: f64, pg: &PidGains, g_term: f64) -> f64 {
    pg.kp * e + pg.ki * integral + pg.kd * e_dot - g_term
}

/// `kp e + ki integral - g`.
pub fn pi_control(e: f64, integral: f64, kp: f64, ki: f64, g_term: f64) -> f64 {
    kp * e + ki * integral - g_term
}

/// Hurwitz test of the closed-loop characteristic polynomial.
///
/// Order 3 is `s^3 + kd s^2 + kp s + ki` (PID on a double integrator),
/// order 2 is `s^2 + kp s + ki` (PI on a single integrator).
pub fn pid_stable(kp: f64, ki: f64, kd: f64, order: u8) -> bool {
    match order {
        3 => kd > 0.0 && ki > 0.0 && kd * kp > ki,
        2 => kp > 0.0 && ki > 0.0,
        _ => false,
    }
}

/// Trapezoidal running integral of the error.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Integrator {
    pub value: f64,
    last: Option<f64>,
}

impl Integrator {
    pub fn push(&mut self, e: f64, dt: f64) {
        if let Some(prev) = self.last {
            self.value += 0.5 * dt * (prev + e);
        }
        self.last = Some(e);
    }
}
