//! Feedback laws that turn the desired error dynamics into plant inputs.
//!
//! For a plant `x2' = h + u - delta` and error `e = x_d - x1`, choosing
//! `u = drive(e) - h` leaves `e2' = -drive(e) + x_d'' + delta`, which is the
//! desired sliding system with `d = x_d'' + delta`.

mod pid;
mod reference;

pub use pid::{pi_control, pid_control, pid_stable, Integrator, PidGains};
pub use reference::{OrbitAxis, Reference, ReferenceError, Segment, Shape};

use serde::{Deserialize, Serialize};

use crate::gains::{design_gains, GainConfig, GainError, GainSet, ReachParams, SwitchErrors, K2_EPS, RHO_MIN};
use crate::sliding::{ideal_drive, reaching_argument, sign, smooth_drive, ErrorState};

pub fn ideal_control(e: ErrorState, g: &GainSet, h: f64) -> f64 {
    ideal_drive(e, g) - h
}

pub fn smooth_control(e: ErrorState, g: &GainSet, h: f64) -> f64 {
    smooth_drive(e, g) - h
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoothing {
    /// `sign` switching.
    Ideal,
    /// `tanh` switching.
    Tanh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Reaching,
    Sliding,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Reaching => "reaching",
            Mode::Sliding => "sliding",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum EventKind {
    Tc,
    SurfaceHit,
    RefJump,
    GainUpdate,
    ReenterReaching,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Tc => "tc",
            EventKind::SurfaceHit => "surfaceHit",
            EventKind::RefJump => "refJump",
            EventKind::GainUpdate => "gainUpdate",
            EventKind::ReenterReaching => "reenterReaching",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub kind: EventKind,
    pub t: f64,
}

/// Surface gains imposed instead of computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedSurface {
    pub k1: f64,
    pub k2: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerState {
    pub mode: Mode,
    pub gains: GainSet,
    /// Time of the latest switch into the band.
    pub tc: Option<f64>,
    /// Errors at that instant.
    pub switch: Option<SwitchErrors>,
}

impl ControllerState {
    pub fn new(reach: &ReachParams) -> Self {
        ControllerState { mode: Mode::Reaching, gains: GainSet::reaching_only(reach), tc: None, switch: None }
    }
}

fn surface_gains(
    e: SwitchErrors,
    reach: &ReachParams,
    config: &GainConfig,
    fixed: Option<FixedSurface>,
) -> Result<GainSet, GainError> {
    match fixed {
        Some(f) => Ok(GainSet::with_surface(reach, f.k1, f.k2, f.rho)),
        None => Ok(design_gains(e, reach, config)?.gains),
    }
}

/// State after a discontinuity of the reference at time `t`.
pub fn on_reference_jump(
    cs: &ControllerState,
    e: ErrorState,
    t: f64,
    reach: &ReachParams,
    config: &GainConfig,
    fixed: Option<FixedSurface>,
) -> Result<ControllerState, GainError> {
    if e.e1.abs() > reach.e1c {
        return Ok(ControllerState { mode: Mode::Reaching, tc: None, switch: None, ..*cs });
    }
    let sw = SwitchErrors::from(e);
    let gains = if e.e1 == 0.0 && e.e2 == 0.0 && cs.gains.k1 > 0.0 && fixed.is_none() {
        let mut g = cs.gains;
        g.k2 = g.k2.max(config.beta2 * config.ld + K2_EPS);
        g.rho = g.rho.max(RHO_MIN);
        g
    } else {
        surface_gains(sw, reach, config, fixed)?
    };
    Ok(ControllerState { mode: Mode::Sliding, gains, tc: Some(t), switch: Some(sw) })
}

/// Two-subsystem sliding controller for one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct SlidingController {
    pub config: GainConfig,
    pub reach: ReachParams,
    pub smoothing: Smoothing,
    pub fixed: Option<FixedSurface>,
    pub state: ControllerState,
}

impl SlidingController {
    pub fn new(config: GainConfig, reach: ReachParams, smoothing: Smoothing) -> Self {
        SlidingController { config, reach, smoothing, fixed: None, state: ControllerState::new(&reach) }
    }

    pub fn with_fixed_surface(mut self, fixed: FixedSurface) -> Self {
        self.fixed = Some(fixed);
        self
    }

    pub fn gains(&self) -> &GainSet {
        &self.state.gains
    }

    /// Acceleration the law commands in error coordinates.
    ///
    /// Until the band is entered on the step grid the reaching law is used
    /// regardless of `|e1|`, since the surface gains do not exist yet.
    pub fn drive(&self, e: ErrorState) -> f64 {
        let g = &self.state.gains;
        match (self.state.mode, self.smoothing) {
            (Mode::Reaching, Smoothing::Ideal) => g.kc * sign(reaching_argument(e, g)),
            (Mode::Reaching, Smoothing::Tanh) => g.kc * (g.rho_c * reaching_argument(e, g)).tanh(),
            (Mode::Sliding, Smoothing::Ideal) => ideal_drive(e, g),
            (Mode::Sliding, Smoothing::Tanh) => smooth_drive(e, g),
        }
    }

    /// Plant input `u = drive - h`.
    pub fn control(&self, e: ErrorState, h: f64) -> f64 {
        self.drive(e) - h
    }

    /// Argument of the active switching function, for logging.
    pub fn switching_value(&self, e: ErrorState) -> f64 {
        let g = &self.state.gains;
        match self.state.mode {
            Mode::Sliding if e.e1.abs() <= g.e1c => e.sigma(g.k1),
            _ => reaching_argument(e, g),
        }
    }

    /// Mode bookkeeping at a grid point.
    pub fn update(&mut self, t: f64, e: ErrorState) -> Result<Vec<Event>, GainError> {
        let mut events = Vec::new();
        match self.state.mode {
            Mode::Reaching if e.e1.abs() <= self.reach.e1c => {
                let sw = SwitchErrors::from(e);
                let gains = surface_gains(sw, &self.reach, &self.config, self.fixed)?;
                self.state = ControllerState { mode: Mode::Sliding, gains, tc: Some(t), switch: Some(sw) };
                events.push(Event { kind: EventKind::Tc, t });
                events.push(Event { kind: EventKind::GainUpdate, t });
            }
            Mode::Sliding if e.e1.abs() > self.reach.e1c => {
                self.state.mode = Mode::Reaching;
                self.state.tc = None;
                events.push(Event { kind: EventKind::ReenterReaching, t });
            }
            _ => {}
        }
        Ok(events)
    }

    pub fn on_jump(&mut self, t: f64, e: ErrorState) -> Result<Vec<Event>, GainError> {
        self.state = on_reference_jump(&self.state, e, t, &self.reach, &self.config, self.fixed)?;
        let mut events = vec![Event { kind: EventKind::RefJump, t }];
        if self.state.mode == Mode::Sliding {
            events.push(Event { kind: EventKind::Tc, t });
            events.push(Event { kind: EventKind::GainUpdate, t });
        }
        Ok(events)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gains::select_reach_params;

    fn ex61() -> (GainConfig, ReachParams) {
        let cfg = GainConfig::new(1.62, 10.0, 20.0, 20.0).with_beta13(2.0);
        let reach = select_reach_params(&cfg, 2.5, Some(1.0), Some(2.0)).unwrap();
        (cfg, reach)
    }

    #[test]
    fn ideal_control_in_band() {
        let g = GainSet { k1: 1.0, k2: 5.44, kc: 2.5, rho: 1.0, rho_c: 1.0, e1c: 1.0, e2c: 2.0 };
        assert_eq!(ideal_control(ErrorState::new(0.5, 0.0), &g, 0.0), 5.44);
    }

    #[test]
    fn ideal_control_example61_start() {
        let (_, reach) = ex61();
        let g = GainSet::reaching_only(&reach);
        let x1: f64 = 10.0;
        let h0 = 5.0 * x1.cbrt() * (0.5f64 * 0.0).sin();
        assert_eq!(ideal_control(ErrorState::new(-8.0, 1.4), &g, h0), -2.5);
    }

    #[test]
    fn smooth_control_origin() {
        let (_, reach) = ex61();
        let g = GainSet::with_surface(&reach, 1.0, 5.0, 30.0);
        assert_eq!(smooth_control(ErrorState::new(0.0, 0.0), &g, 0.7), -0.7);
    }

    #[test]
    fn rho_c_example62() {
        let (_, reach) = ex61();
        assert!((reach.rho_c - 15.44).abs() < 5e-3);
    }

    #[test]
    fn switch_triggers_gain_design() {
        let (cfg, reach) = ex61();
        let mut c = SlidingController::new(cfg, reach, Smoothing::Ideal);
        assert!(c.update(0.0, ErrorState::new(-8.0, 1.4)).unwrap().is_empty());
        let ev = c.update(3.0, ErrorState::new(-1.0, 2.0)).unwrap();
        assert_eq!(ev.len(), 2);
        assert_eq!(c.state.mode, Mode::Sliding);
        assert_eq!(c.state.tc, Some(3.0));
        assert_eq!(c.gains().k1, 1.0);
        assert!((c.gains().k2 - 5.43).abs() < 1e-12);
    }

    #[test]
    fn jump_outside_band_reenters_reaching() {
        let cfg = GainConfig::new(4.5, 10.0, 6.0, 3.0);
        let reach = select_reach_params(&cfg, 5.5, Some(1.0), Some(1.2)).unwrap();
        let mut c = SlidingController::new(cfg, reach, Smoothing::Tanh);
        c.update(0.0, ErrorState::new(0.1, 0.0)).unwrap();
        assert_eq!(c.state.mode, Mode::Sliding);
        c.on_jump(6.0, ErrorState::new(2.0, 0.0)).unwrap();
        assert_eq!(c.state.mode, Mode::Reaching);
        assert_eq!(c.state.tc, None);
    }

    #[test]
    fn jump_at_rest_keeps_gains() {
        let (cfg, reach) = ex61();
        let mut c = SlidingController::new(cfg, reach, Smoothing::Tanh);
        c.update(0.0, ErrorState::new(-0.5, 0.2)).unwrap();
        let before = *c.gains();
        c.on_jump(1.0, ErrorState::new(0.0, 0.0)).unwrap();
        assert_eq!(c.gains().k1, before.k1);
        assert_eq!(c.gains().k2, before.k2.max(cfg.beta2 * cfg.ld + K2_EPS));
        assert!(c.gains().rho >= RHO_MIN);
    }

    #[test]
    fn leaving_band_is_logged() {
        let (cfg, reach) = ex61();
        let mut c = SlidingController::new(cfg, reach, Smoothing::Ideal);
        c.update(0.0, ErrorState::new(-0.5, 0.2)).unwrap();
        let ev = c.update(0.1, ErrorState::new(-1.5, 0.2)).unwrap();
        assert_eq!(ev[0].kind, EventKind::ReenterReaching);
        assert_eq!(c.state.mode, Mode::Reaching);
    }
}
