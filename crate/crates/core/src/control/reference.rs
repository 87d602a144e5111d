//! Piecewise reference trajectories with exact first and second derivatives.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Slack used when matching step times against segment starts.
const TIME_SNAP: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReferenceError {
    #[error("reference has no segments")]
    Empty,
    #[error("segment starts must be strictly increasing")]
    Unordered,
    #[error("jump time {0} does not coincide with a segment start")]
    StrayJump(f64),
    #[error("reference parameter is not finite")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrbitAxis {
    Cos,
    Sin,
}

/// Time profile of one segment, evaluated in local time `tau = t - start`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Constant {
        value: f64,
    },
    /// `offset + amplitude * sin(omega * tau + phase)`.
    Sine {
        offset: f64,
        amplitude: f64,
        omega: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `sum coeffs[k] * tau^k`.
    Polynomial {
        coeffs: Vec<f64>,
    },
    /// One coordinate of a circle whose angular rate ramps linearly from
    /// zero to `omega` over `spinup` seconds.
    Orbit {
        center: f64,
        radius: f64,
        omega: f64,
        #[serde(default)]
        spinup: f64,
        #[serde(default)]
        phase: f64,
        axis: OrbitAxis,
    },
}

impl Shape {
    fn params(&self) -> Vec<f64> {
        match self {
            Shape::Constant { value } => vec![*value],
            Shape::Sine { offset, amplitude, omega, phase } => vec![*offset, *amplitude, *omega, *phase],
            Shape::Polynomial { coeffs } => coeffs.clone(),
            Shape::Orbit { center, radius, omega, spinup, phase, .. } => {
                vec![*center, *radius, *omega, *spinup, *phase]
            }
        }
    }

    /// Value and first two derivatives at local time `tau`.
    pub fn eval(&self, tau: f64) -> [f64; 3] {
        match self {
            Shape::Constant { value } => [*value, 0.0, 0.0],
            Shape::Sine { offset, amplitude, omega, phase } => {
                let arg = omega * tau + phase;
                let (s, c) = arg.sin_cos();
                [offset + amplitude * s, amplitude * omega * c, -amplitude * omega * omega * s]
            }
            Shape::Polynomial { coeffs } => {
                let value = coeffs.iter().rev().fold(0.0, |acc, &c| acc * tau + c);
                let d1 = coeffs.iter().enumerate().skip(1).map(|(k, &c)| c * k as f64 * tau.powi(k as i32 - 1)).sum();
                let d2 = coeffs
                    .iter()
                    .enumerate()
                    .skip(2)
                    .map(|(k, &c)| c * (k * (k - 1)) as f64 * tau.powi(k as i32 - 2))
                    .sum();
                [value, d1, d2]
            }
            Shape::Orbit { center, radius, omega, spinup, phase, axis } => {
                let (ang, w, alpha) = if *spinup > 0.0 && tau < *spinup {
                    let alpha = omega / spinup;
                    (0.5 * alpha * tau * tau, alpha * tau, alpha)
                } else {
                    (omega * (tau - 0.5 * spinup), *omega, 0.0)
                };
                let (s, c) = (ang + phase).sin_cos();
                match axis {
                    OrbitAxis::Cos => [center + radius * c, -radius * s * w, -radius * c * w * w - radius * s * alpha],
                    OrbitAxis::Sin => [center + radius * s, radius * c * w, -radius * s * w * w + radius * c * alpha],
                }
            }
        }
    }

    /// Certified bound on the second derivative over `[0, duration]`.
    pub fn accel_bound(&self, duration: f64) -> f64 {
        match self {
            Shape::Constant { .. } => 0.0,
            Shape::Sine { amplitude, omega, .. } => amplitude.abs() * omega * omega,
            Shape::Polynomial { coeffs } => coeffs
                .iter()
                .enumerate()
                .skip(2)
                .map(|(k, c)| c.abs() * (k * (k - 1)) as f64 * duration.powi(k as i32 - 2))
                .sum(),
            Shape::Orbit { radius, omega, spinup, .. } => {
                let alpha = if *spinup > 0.0 { omega / spinup } else { 0.0 };
                radius.abs() * (omega * omega + alpha)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: f64,
    #[serde(flatten)]
    pub shape: Shape,
}

/// Reference `x_d(t)` as consecutive segments; `jump_times` lists the
/// segment starts at which the value is discontinuous.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub segments: Vec<Segment>,
    #[serde(default)]
    pub jump_times: Vec<f64>,
}

impl Reference {
    pub fn constant(value: f64) -> Self {
        Reference::from_shape(Shape::Constant { value })
    }

    pub fn from_shape(shape: Shape) -> Self {
        Reference { segments: vec![Segment { start: 0.0, shape }], jump_times: Vec::new() }
    }

    pub fn validate(&self) -> Result<(), ReferenceError> {
        if self.segments.is_empty() {
            return Err(ReferenceError::Empty);
        }
        if self.segments.windows(2).any(|w| w[1].start <= w[0].start) {
            return Err(ReferenceError::Unordered);
        }
        let finite =
            self.segments.iter().all(|s| s.start.is_finite() && s.shape.params().iter().all(|p| p.is_finite()));
        if !finite {
            return Err(ReferenceError::NonFinite);
        }
        for &j in &self.jump_times {
            if !self.segments.iter().any(|s| (s.start - j).abs() <= TIME_SNAP) {
                return Err(ReferenceError::StrayJump(j));
            }
        }
        Ok(())
    }

    /// Index of the segment active at `t`.
    pub fn segment_index(&self, t: f64) -> usize {
        self.segments.iter().rposition(|s| s.start <= t + TIME_SNAP).unwrap_or(0)
    }

    /// `[x_d, x_d', x_d'']` at time `t`.
    pub fn eval(&self, t: f64) -> [f64; 3] {
        self.eval_in(self.segment_index(t), t)
    }

    /// Evaluates segment `idx` at `t`, even past its end. Integrators use
    /// this to keep one segment across all stages of a step.
    pub fn eval_in(&self, idx: usize, t: f64) -> [f64; 3] {
        let seg = &self.segments[idx];
        seg.shape.eval((t - seg.start).max(0.0))
    }

    /// Bound on `|x_d''|` over `[0, horizon]`.
    pub fn accel_bound(&self, horizon: f64) -> f64 {
        let mut bound = 0.0_f64;
        for (i, s) in self.segments.iter().enumerate() {
            let end = self.segments.get(i + 1).map_or(horizon, |n| n.start);
            bound = bound.max(s.shape.accel_bound((end - s.start).max(0.0)));
        }
        bound
    }

    /// Jump times inside `(t0, t1]`.
    pub fn jumps_in(&self, t0: f64, t1: f64) -> impl Iterator<Item = f64> + '_ {
        self.jump_times.iter().copied().filter(move |&j| j > t0 + TIME_SNAP && j <= t1 + TIME_SNAP)
    }
}
