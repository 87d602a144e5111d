//! Quadrotor mission loop.
//!
//! Position channels run sliding controllers whose commanded accelerations
//! are turned into thrust and tilt commands. The tilt commands pass through a
//! second-order filter, which supplies the attitude references together with
//! their first two derivatives. Attitude channels run their own sliding
//! controllers; the resulting thrust and torques are mixed into rotor forces
//! and applied to the plant. Negative rotor forces are counted, not clamped.

use serde::{Deserialize, Serialize};

use super::{absorb_events, try_step, SimConfig, SimError, SurfaceWatch, Trace, TraceRow};
use crate::control::{Reference, SlidingController};
use crate::plant::uav::{
    allocate, disturbance_terms, forward_map, mix, uav_rhs, Channel, PlantError, UavParams, UavState, CHANNELS,
};
use crate::plant::Disturbance;
use crate::sliding::ErrorState;

const N: usize = 16;
const FILTER: usize = 12;

/// Second-order low-pass `q'' = omega^2 (q_cmd - q) - 2 zeta omega q'`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommandFilter {
    pub omega: f64,
    pub zeta: f64,
}

impl Default for CommandFilter {
    fn default() -> Self {
        CommandFilter { omega: 120.0, zeta: 0.9 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UavMission {
    pub params: UavParams,
    /// References of x, y, z and psi.
    pub references: [Reference; 4],
    /// Controllers in channel order.
    pub controllers: [SlidingController; 6],
    /// External terms `Delta` in channel order.
    pub big_delta: [Disturbance; 6],
    pub filter: CommandFilter,
    pub x0: UavState,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct UavTrace {
    /// One trace per channel, in channel order.
    pub channels: Vec<Trace>,
    /// Grid points at which some rotor force was negative.
    pub infeasible_thrust_steps: usize,
    pub min_rotor_force: f64,
    pub max_rotor_force: f64,
}

impl UavTrace {
    pub fn channel(&self, c: Channel) -> &Trace {
        &self.channels[c.index()]
    }
}

struct Eval {
    errors: [ErrorState; 6],
    refs: [[f64; 3]; 6],
    ubar: [f64; 6],
    d: [f64; 6],
    forces: [f64; 4],
    deriv: [f64; N],
}

fn state_of(x: &[f64; N]) -> UavState {
    let mut s = UavState::default();
    s.pos.copy_from_slice(&x[0..6]);
    s.vel.copy_from_slice(&x[6..12]);
    s
}

impl UavMission {
    fn eval(&self, segs: &[usize; 4], t: f64, x: &[f64; N]) -> Result<Eval, PlantError> {
        let p = &self.params;
        let s = state_of(x);
        let mut refs = [[0.0; 3]; 6];
        let mut errors = [ErrorState::new(0.0, 0.0); 6];
        let mut ubar = [0.0; 6];

        for c in [Channel::X, Channel::Y, Channel::Z] {
            let i = c.index();
            refs[i] = self.references[i].eval_in(segs[i], t);
            errors[i] = ErrorState::new(refs[i][0] - s.pos[i], refs[i][1] - s.vel[i]);
            ubar[i] = self.controllers[i].drive(errors[i]) - p.known_term(c);
        }
        let (thrust, theta_cmd, phi_cmd) = allocate(ubar[0], ubar[1], ubar[2], s.psi(), p)?;

        let w = self.filter.omega;
        let z = self.filter.zeta;
        let mut deriv = [0.0; N];
        for (k, cmd) in [theta_cmd, phi_cmd].into_iter().enumerate() {
            let (q, qd) = (x[FILTER + 2 * k], x[FILTER + 2 * k + 1]);
            let qdd = w * w * (cmd - q) - 2.0 * z * w * qd;
            deriv[FILTER + 2 * k] = qd;
            deriv[FILTER + 2 * k + 1] = qdd;
            let i = if k == 0 { Channel::Theta.index() } else { Channel::Phi.index() };
            refs[i] = [q, qd, qdd];
        }
        let ipsi = Channel::Psi.index();
        refs[ipsi] = self.references[3].eval_in(segs[3], t);

        for c in [Channel::Psi, Channel::Theta, Channel::Phi] {
            let i = c.index();
            errors[i] = ErrorState::new(refs[i][0] - s.pos[i], refs[i][1] - s.vel[i]);
            ubar[i] = self.controllers[i].drive(errors[i]) - p.known_term(c);
        }
        let forces = mix(
            thrust,
            p.j_psi * ubar[Channel::Psi.index()],
            p.j_theta * ubar[Channel::Theta.index()],
            p.j_phi * ubar[Channel::Phi.index()],
            p,
        );
        let applied = forward_map(&forces, &s, p);
        let big_delta: [f64; 6] = std::array::from_fn(|i| self.big_delta[i].sample(t));
        let delta = disturbance_terms(&s, p, &big_delta);
        let ds = uav_rhs(&s, &applied, p, &big_delta);
        deriv[0..6].copy_from_slice(&ds.pos);
        deriv[6..12].copy_from_slice(&ds.vel);
        let d = std::array::from_fn(|i| refs[i][2] - delta[i]);
        Ok(Eval { errors, refs, ubar, d, forces, deriv })
    }

    fn segments(&self, t: f64) -> [usize; 4] {
        std::array::from_fn(|i| self.references[i].segment_index(t))
    }

    fn record(&self, out: &mut UavTrace, t: f64, x: &[f64; N], ev: &Eval) {
        for c in CHANNELS {
            let i = c.index();
            let ctrl = &self.controllers[i];
            out.channels[i].rows.push(TraceRow {
                t,
                e1: ev.errors[i].e1,
                e2: ev.errors[i].e2,
                sigma: Some(ctrl.switching_value(ev.errors[i])),
                u: ev.ubar[i],
                d: ev.d[i],
                mode: Some(ctrl.state.mode),
                reference: ev.refs[i][0],
                position: x[i],
                velocity: x[6 + i],
            });
        }
        let lo = ev.forces.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ev.forces.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if lo < 0.0 {
            out.infeasible_thrust_steps += 1;
        }
        out.min_rotor_force = out.min_rotor_force.min(lo);
        out.max_rotor_force = out.max_rotor_force.max(hi);
    }

    /// Controller bookkeeping of every channel at grid time `t`.
    fn bookkeeping(
        &mut self,
        out: &mut UavTrace,
        watches: &mut [SurfaceWatch; 6],
        errors: &[ErrorState; 6],
        t: f64,
        t_prev: Option<f64>,
        tol: f64,
    ) -> Result<(), SimError> {
        for c in CHANNELS {
            let i = c.index();
            let jumped = match (t_prev, c) {
                (Some(t0), Channel::X | Channel::Y | Channel::Z) => self.references[i].jumps_in(t0, t).next().is_some(),
                (Some(t0), Channel::Psi) => self.references[3].jumps_in(t0, t).next().is_some(),
                _ => false,
            };
            let ctrl = &mut self.controllers[i];
            let events = if jumped { ctrl.on_jump(t, errors[i]) } else { ctrl.update(t, errors[i]) }
                .map_err(|source| SimError::Gain { t, source })?;
            absorb_events(&mut out.channels[i], &mut watches[i], ctrl, events, errors[i], t, tol);
        }
        Ok(())
    }

    pub fn run(mut self, cfg: &SimConfig) -> Result<UavTrace, SimError> {
        cfg.validate()?;
        for r in &self.references {
            r.validate()?;
        }
        if !self.params.is_valid() {
            return Err(SimError::Config("UAV parameters must be positive and finite".into()));
        }
        let steps = cfg.steps();
        let mut out = UavTrace {
            channels: vec![Trace::default(); 6],
            infeasible_thrust_steps: 0,
            min_rotor_force: f64::INFINITY,
            max_rotor_force: f64::NEG_INFINITY,
        };
        for tr in &mut out.channels {
            tr.rows.reserve(steps + 1);
        }
        let mut watches = [SurfaceWatch::default(); 6];
        let mut x = [0.0; N];
        x[0..6].copy_from_slice(&self.x0.pos);
        x[6..12].copy_from_slice(&self.x0.vel);
        x[FILTER] = self.x0.theta();
        x[FILTER + 2] = self.x0.phi();

        let plant_err = |t: f64| move |source: PlantError| SimError::Plant { t, source };
        let segs = self.segments(0.0);
        let ev = self.eval(&segs, 0.0, &x).map_err(plant_err(0.0))?;
        self.bookkeeping(&mut out, &mut watches, &ev.errors, 0.0, None, cfg.event_tolerance)?;
        let ev = self.eval(&segs, 0.0, &x).map_err(plant_err(0.0))?;
        self.record(&mut out, 0.0, &x, &ev);

        for n in 0..steps {
            let t0 = n as f64 * cfg.dt;
            let t1 = (n + 1) as f64 * cfg.dt;
            let segs = self.segments(t0);
            let this = &self;
            x = try_step(cfg.integrator, |t, x| this.eval(&segs, t, x).map(|e| e.deriv), &x, t0, cfg.dt)
                .map_err(plant_err(t0))?;
            if x.iter().any(|v| !v.is_finite()) {
                return Err(SimError::NonFiniteState { t: t1 });
            }
            let segs = self.segments(t1);
            let ev = self.eval(&segs, t1, &x).map_err(plant_err(t1))?;
            self.bookkeeping(&mut out, &mut watches, &ev.errors, t1, Some(t0), cfg.event_tolerance)?;
            let ev = self.eval(&segs, t1, &x).map_err(plant_err(t1))?;
            self.record(&mut out, t1, &x, &ev);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::Smoothing;
    use crate::gains::{select_reach_params, GainConfig};
    use crate::plant::DisturbanceSpec;

    fn hover_mission() -> UavMission {
        let pos_cfg = GainConfig::new(4.5, 10.0, 6.0, 2.0).with_beta13(2.0);
        let pos_reach = select_reach_params(&pos_cfg, 5.5, Some(1.0), Some(1.2)).unwrap();
        let att_cfg = GainConfig::new(100.0, 1000.0, 6.0, 3.0).with_beta13(20.0);
        let att_reach = select_reach_params(&att_cfg, 120.0, Some(1.0), Some(2.0)).unwrap();
        let pc = SlidingController::new(pos_cfg, pos_reach, Smoothing::Tanh);
        let ac = SlidingController::new(att_cfg, att_reach, Smoothing::Tanh);
        UavMission {
            params: UavParams::default(),
            references: [
                Reference::constant(0.0),
                Reference::constant(0.0),
                Reference::constant(1.0),
                Reference::constant(0.0),
            ],
            controllers: [pc.clone(), pc.clone(), pc, ac.clone(), ac.clone(), ac],
            big_delta: std::array::from_fn(|_| DisturbanceSpec::zero().build(0)),
            filter: CommandFilter { omega: 120.0, zeta: 0.9 },
            x0: UavState { pos: [0.0, 0.0, 1.0, 0.0, 0.0, 0.0], vel: [0.0; 6] },
        }
    }

    #[test]
    fn hover_at_reference_stays_put() {
        let tr = hover_mission().run(&SimConfig::new(1e-3, 1.0)).unwrap();
        assert_eq!(tr.channels.len(), 6);
        let z = tr.channel(Channel::Z).rows.last().unwrap();
        assert!(z.e1.abs() < 1e-9, "z error {}", z.e1);
        assert_eq!(tr.infeasible_thrust_steps, 0);
        // Hover splits the weight evenly across four rotors.
        let each = 2.01 * 9.81 / 4.0;
        assert!((tr.min_rotor_force - each).abs() < 1e-6);
    }

    #[test]
    fn small_offset_converges() {
        let mut m = hover_mission();
        m.x0.pos = [0.3, 0.2, 0.8, 0.0, 0.0, 0.0];
        let tr = m.run(&SimConfig::new(1e-3, 10.0)).unwrap();
        for c in [Channel::X, Channel::Y, Channel::Z] {
            let last = tr.channel(c).rows.last().unwrap();
            assert!(last.e1.abs() < 0.02, "{} error {}", c.name(), last.e1);
        }
    }
}
