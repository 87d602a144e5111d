//! Desired error dynamics and their closed-form solutions.
//!
//! `ideal_rhs` switches with `sign`, `smooth_rhs` with `tanh`. Between the
//! switch instant and the surface hit the ideal system under a constant
//! disturbance has constant acceleration, so `e1`, `e2` and `sigma` are
//! parabolas in time; [`ParabolaSegment`] holds their coefficients.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gains::{smoothing_log_ratio, GainError, GainSet, SwitchErrors};

/// `sign` with `sign(0) = 0`.
pub fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorState {
    pub e1: f64,
    pub e2: f64,
}

impl ErrorState {
    pub fn new(e1: f64, e2: f64) -> Self {
        ErrorState { e1, e2 }
    }

    pub fn sigma(&self, k1: f64) -> f64 {
        self.e2 + k1 * self.e1
    }

    pub fn is_finite(&self) -> bool {
        self.e1.is_finite() && self.e2.is_finite()
    }
}

impl From<ErrorState> for SwitchErrors {
    fn from(s: ErrorState) -> Self {
        SwitchErrors::new(s.e1, s.e2)
    }
}

/// Switching argument of the reaching law.
pub fn reaching_argument(s: ErrorState, g: &GainSet) -> f64 {
    s.e2 + g.e2c * sign(s.e1)
}

/// Acceleration term applied by the ideal law, `e2' = -ideal_drive + d`.
pub fn ideal_drive(s: ErrorState, g: &GainSet) -> f64 {
    if s.e1.abs() > g.e1c {
        g.kc * sign(reaching_argument(s, g))
    } else {
        g.k2 * sign(s.sigma(g.k1))
    }
}

pub fn smooth_drive(s: ErrorState, g: &GainSet) -> f64 {
    if s.e1.abs() > g.e1c {
        g.kc * (g.rho_c * reaching_argument(s, g)).tanh()
    } else {
        g.k2 * (g.rho * s.sigma(g.k1)).tanh()
    }
}

pub fn ideal_rhs(s: ErrorState, g: &GainSet, d: f64) -> (f64, f64) {
    (s.e2, -ideal_drive(s, g) + d)
}

pub fn smooth_rhs(s: ErrorState, g: &GainSet, d: f64) -> (f64, f64) {
    (s.e2, -smooth_drive(s, g) + d)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("sigma(tc) is zero; the trajectory already lies on the surface")]
    InvalidContext,
    #[error("settling-time radicand {0:.4e} is negative")]
    NoRealRoot(f64),
    #[error(transparent)]
    Gain(#[from] GainError),
}

/// Constant-acceleration arc from the switch instant to the surface.
///
/// `e1(t) = c1 + b1 tau + a1 tau^2` and `sigma(t) = c + b tau + a tau^2`
/// with `tau = t - t0`. `dir` is `-sign(sigma(t0))`, the sign of the applied
/// acceleration `e2' = dir * k2bar`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParabolaSegment {
    pub a1: f64,
    pub b1: f64,
    pub c1: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub k2bar: f64,
    pub k1: f64,
    pub dir: f64,
    pub t0: f64,
}

impl ParabolaSegment {
    pub fn e1(&self, t: f64) -> f64 {
        let tau = t - self.t0;
        self.c1 + self.b1 * tau + self.a1 * tau * tau
    }

    pub fn e2(&self, t: f64) -> f64 {
        self.b1 + self.dir * self.k2bar * (t - self.t0)
    }

    pub fn sigma(&self, t: f64) -> f64 {
        let tau = t - self.t0;
        self.c + self.b * tau + self.a * tau * tau
    }

    /// Extreme value of the e1 parabola.
    pub fn e1_vertex(&self) -> f64 {
        self.c1 - self.b1 * self.b1 / (4.0 * self.a1)
    }

    /// Extreme value of the sigma parabola.
    pub fn sigma_vertex(&self) -> f64 {
        (4.0 * self.a * self.c - self.b * self.b) / (4.0 * self.a)
    }
}

pub fn parabola_from_switch(e: SwitchErrors, k1: f64, k2bar: f64, t0: f64) -> Result<ParabolaSegment, OracleError> {
    let sigma = e.e2 + k1 * e.e1;
    if sigma == 0.0 {
        return Err(OracleError::InvalidContext);
    }
    let dir = -sign(sigma);
    Ok(ParabolaSegment {
        a1: dir * k2bar / 2.0,
        b1: e.e2,
        c1: e.e1,
        a: dir * k1 * k2bar / 2.0,
        b: dir * k2bar + k1 * e.e2,
        c: sigma,
        k2bar,
        k1,
        dir,
        t0,
    })
}

/// Time from the switch instant to the surface hit.
pub fn settling_time(e: SwitchErrors, k1: f64, k2bar: f64) -> Result<f64, OracleError> {
    let sigma = e.e2 + k1 * e.e1;
    if sigma == 0.0 {
        return Ok(0.0);
    }
    // Solved for sigma < 0; the other case by reflection.
    let (e1, e2) = if sigma < 0.0 { (e.e1, e.e2) } else { (-e.e1, -e.e2) };
    let p = 1.0 / k1 + e2 / k2bar;
    let radicand = 1.0 / (k1 * k1) + (e2 / k2bar).powi(2) - 2.0 * e1 / k2bar;
    if radicand < 0.0 {
        return Err(OracleError::NoRealRoot(radicand));
    }
    Ok(-p + radicand.sqrt())
}

/// First `t >= t0` at which the e1 parabola reaches zero.
pub fn e1_zero_time(p: &ParabolaSegment) -> Option<f64> {
    let (a, b, c) = (p.a1, p.b1, p.c1);
    if c == 0.0 {
        return Some(p.t0);
    }
    let tau = if a == 0.0 {
        if b == 0.0 {
            return None;
        }
        -c / b
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            return None;
        }
        let sq = disc.sqrt();
        let mut roots = [(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)];
        roots.sort_by(f64::total_cmp);
        match roots.into_iter().find(|r| *r >= 0.0) {
            Some(r) => r,
            None => return None,
        }
    };
    if tau >= 0.0 {
        Some(p.t0 + tau)
    } else {
        None
    }
}

/// Limits of `|e1|` and `|e2|` under the smoothed law.
pub fn steady_state_bounds(g: &GainSet, e2max: f64, ld: f64) -> Result<(f64, f64), GainError> {
    let log = smoothing_log_ratio(g.k1, g.k2, e2max, ld)?;
    let b1 = log / (2.0 * g.rho * g.k1);
    Ok((b1, 2.0 * g.k1 * b1))
}
