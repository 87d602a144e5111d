//! Fixed-step closed-loop simulation, event logging and run metrics.
//!
//! Time is the grid `t_n = n dt`. Controller bookkeeping (mode switches,
//! gain updates, reference jumps) happens only at grid points; within a step
//! the controller is frozen and the reference stays on the segment that was
//! active at the start of the step.

mod integrate;
mod metrics;
mod output;
pub mod uav;

pub use integrate::{step_rk4, try_step, try_step_euler, try_step_rk4, Method};
pub use metrics::{
    chattering_index, check_steady_bounds, detect_overshoot, measure_settling, metrics_report, series_overshoot,
    steady_sup, MetricsError, MetricsReport, Overshoot, SettlingCheck, SteadyCheck,
};
pub use output::{write_events, write_trace, TRACE_HEADER, UAV_EXTRA_HEADER};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::{
    pi_control, pid_control, Event, EventKind, Mode, PidGains, Reference, ReferenceError, SlidingController,
};
use crate::gains::{GainError, GainSet, SwitchErrors};
use crate::plant::uav::PlantError;
use crate::plant::{measure, Disturbance, KnownTerm, NoiseModel};
use crate::sliding::{sign, ErrorState};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("state became non-finite at t = {t}")]
    NonFiniteState { t: f64 },
    #[error("gain design failed at t = {t}: {source}")]
    Gain {
        t: f64,
        #[source]
        source: GainError,
    },
    #[error("plant error at t = {t}: {source}")]
    Plant {
        t: f64,
        #[source]
        source: PlantError,
    },
    #[error(transparent)]
    Reference(#[from] ReferenceError),
}

fn default_tolerance() -> f64 {
    1e-3
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    pub t_end: f64,
    #[serde(default)]
    pub integrator: Method,
    #[serde(default)]
    pub seed: u64,
    /// Relative overshoot tolerance and absolute surface-hit tolerance.
    #[serde(default = "default_tolerance")]
    pub event_tolerance: f64,
}

impl SimConfig {
    pub fn new(dt: f64, t_end: f64) -> Self {
        SimConfig { dt, t_end, integrator: Method::Rk4, seed: 0, event_tolerance: default_tolerance() }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SimError::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(SimError::Config(format!("t_end must be positive, got {}", self.t_end)));
        }
        if !(self.event_tolerance >= 0.0) {
            return Err(SimError::Config("event_tolerance must be non-negative".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round().max(1.0) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub t: f64,
    pub e1: f64,
    pub e2: f64,
    /// Argument of the active switching function; absent for PID/PI.
    pub sigma: Option<f64>,
    pub u: f64,
    /// Lumped disturbance of the error dynamics.
    pub d: f64,
    pub mode: Option<Mode>,
    pub reference: f64,
    pub position: f64,
    pub velocity: f64,
}

/// Gains in force from time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GainRecord {
    pub t: f64,
    pub gains: GainSet,
    pub switch: SwitchErrors,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
    pub events: Vec<Event>,
    pub gain_log: Vec<GainRecord>,
}

impl Trace {
    pub fn e1(&self) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(|r| r.e1)
    }

    pub fn first_event(&self, kind: EventKind) -> Option<f64> {
        self.events.iter().find(|e| e.kind == kind).map(|e| e.t)
    }

    pub fn t_end(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.t)
    }
}

/// Watches `sigma` after a switch into the band and reports the surface hit:
/// a sign change (time interpolated) or `|sigma| <= tol` at two consecutive
/// grid points.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct SurfaceWatch {
    prev: Option<(f64, f64)>,
}

impl SurfaceWatch {
    pub(crate) fn arm(&mut self, t: f64, sigma: f64) -> Option<f64> {
        if sigma == 0.0 {
            self.prev = None;
            return Some(t);
        }
        self.prev = Some((t, sigma));
        None
    }

    pub(crate) fn disarm(&mut self) {
        self.prev = None;
    }

    pub(crate) fn observe(&mut self, t: f64, sigma: f64, tol: f64) -> Option<f64> {
        let (t0, s0) = self.prev?;
        let hit = if sigma == 0.0 {
            Some(t)
        } else if sign(sigma) != sign(s0) {
            Some(t0 + (t - t0) * s0 / (s0 - sigma))
        } else if s0.abs() <= tol && sigma.abs() <= tol {
            Some(t0)
        } else {
            None
        };
        self.prev = if hit.is_some() { None } else { Some((t, sigma)) };
        hit
    }
}

/// Handles the controller events of one grid point: logs them, records new
/// gains and drives the surface watch.
pub(crate) fn absorb_events(
    trace: &mut Trace,
    watch: &mut SurfaceWatch,
    ctrl: &SlidingController,
    events: Vec<Event>,
    e: ErrorState,
    t: f64,
    tol: f64,
) {
    let mut armed = false;
    for ev in events {
        trace.events.push(ev);
        match ev.kind {
            EventKind::GainUpdate => {
                trace.gain_log.push(GainRecord { t, gains: ctrl.state.gains, switch: SwitchErrors::from(e) })
            }
            EventKind::Tc => {
                armed = true;
            }
            EventKind::ReenterReaching | EventKind::RefJump => watch.disarm(),
            EventKind::SurfaceHit => {}
        }
    }
    let sigma = e.sigma(ctrl.state.gains.k1);
    let hit = if armed {
        watch.arm(t, sigma)
    } else if ctrl.state.mode == Mode::Sliding {
        watch.observe(t, sigma, tol)
    } else {
        None
    };
    if let Some(th) = hit {
        trace.events.push(Event { kind: EventKind::SurfaceHit, t: th });
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PlantKind {
    /// `x1' = x2`, `x2' = h + u - delta`.
    #[default]
    DoubleIntegrator,
    /// `x' = h + u - delta`; only the PI baseline drives it.
    FirstOrder,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LoopController {
    Sliding(SlidingController),
    Pid(PidGains),
    Pi { kp: f64, ki: f64 },
}

/// A scalar plant in closed loop with one controller.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarLoop {
    pub plant: PlantKind,
    pub known: KnownTerm,
    pub disturbance: Disturbance,
    pub noise: NoiseModel,
    pub reference: Reference,
    pub controller: LoopController,
    /// `(x1, x2)`; `x2` is ignored for the first-order plant.
    pub x0: [f64; 2],
}

struct Eval {
    /// Measured errors, as seen by the controller.
    measured: ErrorState,
    r: [f64; 3],
    u: f64,
    delta: f64,
    deriv: [f64; 3],
}

impl ScalarLoop {
    /// State is `(x1, x2, integral of measured e1)`.
    fn eval(&self, seg: usize, t: f64, x: &[f64; 3], seed: u64) -> Eval {
        let r = self.reference.eval_in(seg, t);
        let (y1, y2) = measure(x[0], x[1], &self.noise, t, seed);
        let measured = match self.plant {
            PlantKind::DoubleIntegrator => ErrorState::new(r[0] - y1, r[1] - y2),
            PlantKind::FirstOrder => ErrorState::new(r[0] - y1, 0.0),
        };
        let h_meas = self.known.eval(y1, t);
        let u = match &self.controller {
            LoopController::Sliding(c) => c.control(measured, h_meas),
            LoopController::Pid(g) => pid_control(measured.e1, measured.e2, x[2], g, h_meas),
            LoopController::Pi { kp, ki } => pi_control(measured.e1, x[2], *kp, *ki, h_meas),
        };
        let h = self.known.eval(x[0], t);
        let delta = self.disturbance.sample(t);
        let deriv = match self.plant {
            PlantKind::DoubleIntegrator => [x[1], h + u - delta, measured.e1],
            PlantKind::FirstOrder => [h + u - delta, 0.0, measured.e1],
        };
        Eval { measured, r, u, delta, deriv }
    }

    /// Closed-loop derivative of `(x1, x2, integral)` at `(t, x)`.
    pub fn derivative(&self, t: f64, x: &[f64; 3], seed: u64) -> [f64; 3] {
        self.eval(self.reference.segment_index(t), t, x, seed).deriv
    }

    fn row(&self, t: f64, x: &[f64; 3], ev: &Eval) -> TraceRow {
        let (e, d) = match self.plant {
            PlantKind::DoubleIntegrator => (ErrorState::new(ev.r[0] - x[0], ev.r[1] - x[1]), ev.r[2] + ev.delta),
            PlantKind::FirstOrder => (ErrorState::new(ev.r[0] - x[0], ev.r[1] - ev.deriv[0]), ev.r[1] + ev.delta),
        };
        let (sigma, mode) = match &self.controller {
            LoopController::Sliding(c) => (Some(c.switching_value(e)), Some(c.state.mode)),
            _ => (None, None),
        };
        let velocity = match self.plant {
            PlantKind::DoubleIntegrator => x[1],
            PlantKind::FirstOrder => ev.deriv[0],
        };
        TraceRow { t, e1: e.e1, e2: e.e2, sigma, u: ev.u, d, mode, reference: ev.r[0], position: x[0], velocity }
    }

    /// Integrates the loop over `[0, t_end]`.
    pub fn run(mut self, cfg: &SimConfig) -> Result<Trace, SimError> {
        cfg.validate()?;
        self.reference.validate()?;
        if matches!(self.controller, LoopController::Sliding(_)) && self.plant == PlantKind::FirstOrder {
            return Err(SimError::Config("the sliding controller needs the double integrator".into()));
        }
        let steps = cfg.steps();
        let mut trace = Trace { rows: Vec::with_capacity(steps + 1), ..Default::default() };
        let mut watch = SurfaceWatch::default();
        let mut x = [self.x0[0], self.x0[1], 0.0];
        if self.plant == PlantKind::FirstOrder {
            x[1] = 0.0;
        }

        let seg0 = self.reference.segment_index(0.0);
        let ev = self.eval(seg0, 0.0, &x, cfg.seed);
        if let LoopController::Sliding(c) = &mut self.controller {
            let events = c.update(0.0, ev.measured).map_err(|source| SimError::Gain { t: 0.0, source })?;
            absorb_events(&mut trace, &mut watch, c, events, ev.measured, 0.0, cfg.event_tolerance);
        }
        let ev = self.eval(seg0, 0.0, &x, cfg.seed);
        trace.rows.push(self.row(0.0, &x, &ev));

        for n in 0..steps {
            let t0 = n as f64 * cfg.dt;
            let t1 = (n + 1) as f64 * cfg.dt;
            let seg = self.reference.segment_index(t0);
            let this = &self;
            x = try_step::<3, std::convert::Infallible>(
                cfg.integrator,
                |t, x| Ok(this.eval(seg, t, x, cfg.seed).deriv),
                &x,
                t0,
                cfg.dt,
            )
            .unwrap_or_else(|never| match never {});
            if x.iter().any(|v| !v.is_finite()) {
                return Err(SimError::NonFiniteState { t: t1 });
            }
            let seg1 = self.reference.segment_index(t1);
            let jumped = self.reference.jumps_in(t0, t1).next().is_some();
            let mut ev = self.eval(seg1, t1, &x, cfg.seed);
            if let LoopController::Sliding(c) = &mut self.controller {
                let e = ev.measured;
                let events = if jumped { c.on_jump(t1, e) } else { c.update(t1, e) }
                    .map_err(|source| SimError::Gain { t: t1, source })?;
                // The controller state only changes alongside an event.
                let changed = !events.is_empty();
                absorb_events(&mut trace, &mut watch, c, events, e, t1, cfg.event_tolerance);
                if changed {
                    ev = self.eval(seg1, t1, &x, cfg.seed);
                }
            } else if jumped {
                trace.events.push(Event { kind: EventKind::RefJump, t: t1 });
            }
            trace.rows.push(self.row(t1, &x, &ev));
        }
        Ok(trace)
    }
}

/// Runs a scalar loop; see [`ScalarLoop::run`].
pub fn run_scenario(lp: ScalarLoop, cfg: &SimConfig) -> Result<Trace, SimError> {
    lp.run(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::Smoothing;
    use crate::gains::{select_reach_params, GainConfig};
    use crate::plant::DisturbanceSpec;

    fn di_loop(controller: LoopController, x0: [f64; 2], d: DisturbanceSpec) -> ScalarLoop {
        ScalarLoop {
            plant: PlantKind::DoubleIntegrator,
            known: KnownTerm::Zero,
            disturbance: d.build(0),
            noise: NoiseModel::default(),
            reference: Reference::constant(0.0),
            controller,
            x0,
        }
    }

    #[test]
    fn on_surface_start_decays_exponentially() {
        let cfg_g = GainConfig::new(1.0, 20.0, 20.0, 20.0);
        let reach = select_reach_params(&cfg_g, 3.0, Some(2.0), Some(2.5)).unwrap();
        // The pipeline would pick k1 = beta12 here; pin k1 = 1 so sigma(0) = 0.
        let ctrl = SlidingController::new(cfg_g, reach, Smoothing::Ideal)
            .with_fixed_surface(crate::control::FixedSurface { k1: 1.0, k2: 3.0, rho: 1.0 });
        let lp = di_loop(LoopController::Sliding(ctrl), [-1.0, 1.0], DisturbanceSpec::zero());
        let tr = lp.run(&SimConfig::new(1e-4, 2.0)).unwrap();
        assert_eq!(tr.first_event(EventKind::SurfaceHit), Some(0.0));
        for r in tr.rows.iter().step_by(1000) {
            assert!((r.e1 - (-r.t).exp()).abs() < 2e-3, "t={} e1={}", r.t, r.e1);
        }
    }

    #[test]
    fn deterministic_with_seed() {
        let cfg_g = GainConfig::new(5.0, 20.0, 20.0, 20.0);
        let reach = select_reach_params(&cfg_g, 6.0, Some(2.0), Some(5.0)).unwrap();
        let mk = || {
            let ctrl = SlidingController::new(cfg_g, reach, Smoothing::Tanh);
            let d = DisturbanceSpec::BoundedRandom { bound: 5.0, components: 4, max_omega: 3.0 };
            let mut lp = di_loop(LoopController::Sliding(ctrl), [-10.0, 1.0], d.clone());
            lp.disturbance = d.build(42);
            lp.run(&SimConfig::new(1e-3, 5.0)).unwrap()
        };
        assert_eq!(mk(), mk());
    }

    #[test]
    fn rejects_bad_config() {
        let lp = di_loop(LoopController::Pid(PidGains::new(1.0, 1.0, 1.0)), [0.0, 0.0], DisturbanceSpec::zero());
        assert!(matches!(lp.run(&SimConfig::new(0.0, 1.0)), Err(SimError::Config(_))));
    }

    #[test]
    fn surface_watch_interpolates() {
        let mut w = SurfaceWatch::default();
        assert_eq!(w.arm(0.0, -2.0), None);
        assert_eq!(w.observe(1.0, -1.0, 1e-3), None);
        assert_eq!(w.observe(2.0, 1.0, 1e-3), Some(1.5));
        assert_eq!(w.observe(3.0, 1.0, 1e-3), None);
    }
}
