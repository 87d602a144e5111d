//! Six-channel quadrotor model.
//!
//! Each channel is a double integrator `x'' = h + ubar + delta` with
//! `h_z = -g` and zero elsewhere. Channel order is x, y, z, psi, theta, phi.

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CHANNELS: [Channel; 6] = [Channel::X, Channel::Y, Channel::Z, Channel::Psi, Channel::Theta, Channel::Phi];

/// Closest an allocated tilt angle may come to +-pi/2.
pub const TILT_MARGIN: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    X,
    Y,
    Z,
    Psi,
    Theta,
    Phi,
}

impl Channel {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::X => "x",
            Channel::Y => "y",
            Channel::Z => "z",
            Channel::Psi => "psi",
            Channel::Theta => "theta",
            Channel::Phi => "phi",
        }
    }

    pub fn is_position(self) -> bool {
        matches!(self, Channel::X | Channel::Y | Channel::Z)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlantError {
    #[error("commanded vertical acceleration {0:.4} does not point the thrust upward")]
    ThrustDown(f64),
    #[error("allocation needs theta = {theta:.4}, phi = {phi:.4} rad, too close to +-pi/2")]
    SingularAttitude { theta: f64, phi: f64 },
    #[error("rotor forces {forces:?} include a negative thrust")]
    InfeasibleThrust { forces: [f64; 4] },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UavParams {
    pub m: f64,
    pub g: f64,
    pub l: f64,
    pub j_phi: f64,
    pub j_theta: f64,
    pub j_psi: f64,
    /// Rotor thrust coefficient.
    pub b: f64,
    /// Rotor drag-torque coefficient.
    pub k: f64,
    /// Drag coefficients in channel order.
    pub drag: [f64; 6],
}

impl Default for UavParams {
    fn default() -> Self {
        UavParams {
            m: 2.01,
            g: 9.81,
            l: 0.2,
            j_phi: 0.25,
            j_theta: 0.25,
            j_psi: 0.5,
            b: 2.923e-3,
            k: 5e-4,
            drag: [0.1, 0.1, 0.1, 0.05, 0.05, 0.05],
        }
    }
}

impl UavParams {
    pub fn is_valid(&self) -> bool {
        [self.m, self.g, self.l, self.j_phi, self.j_theta, self.j_psi, self.b, self.k]
            .iter()
            .chain(self.drag.iter())
            .all(|v| v.is_finite() && *v > 0.0)
    }

    /// Inertia-like divisor of each channel.
    pub fn inertia(&self, c: Channel) -> f64 {
        match c {
            Channel::X | Channel::Y | Channel::Z => self.m,
            Channel::Psi => self.j_psi,
            Channel::Theta => self.j_theta,
            Channel::Phi => self.j_phi,
        }
    }

    /// Known term `h` of each channel.
    pub fn known_term(&self, c: Channel) -> f64 {
        if c == Channel::Z {
            -self.g
        } else {
            0.0
        }
    }

    /// Map from rotor forces to `(F, u_psi, u_theta, u_phi)`.
    pub fn wrench_matrix(&self) -> Matrix4<f64> {
        let r = self.k / self.b;
        let l = self.l;
        Matrix4::new(
            1.0, 1.0, 1.0, 1.0, //
            r, -r, r, -r, //
            -l, 0.0, l, 0.0, //
            0.0, l, 0.0, -l,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UavState {
    pub pos: [f64; 6],
    pub vel: [f64; 6],
}

impl UavState {
    pub fn psi(&self) -> f64 {
        self.pos[Channel::Psi.index()]
    }
    pub fn theta(&self) -> f64 {
        self.pos[Channel::Theta.index()]
    }
    pub fn phi(&self) -> f64 {
        self.pos[Channel::Phi.index()]
    }
}

/// Disturbance `delta` of every channel: drag on the channel velocity plus
/// the external term `big_delta`, divided by mass or inertia. The tilt
/// channels carry the arm length on their drag term.
pub fn disturbance_terms(s: &UavState, p: &UavParams, big_delta: &[f64; 6]) -> [f64; 6] {
    let mut out = [0.0; 6];
    for c in CHANNELS {
        let i = c.index();
        let lever = if matches!(c, Channel::Theta | Channel::Phi) { p.l } else { 1.0 };
        out[i] = (-lever * p.drag[i] * s.vel[i] + big_delta[i]) / p.inertia(c);
    }
    out
}

/// Translational accelerations produced by total thrust at an attitude.
pub fn thrust_accel(f: f64, psi: f64, theta: f64, phi: f64, p: &UavParams) -> [f64; 3] {
    let (spsi, cpsi) = psi.sin_cos();
    let (sth, cth) = theta.sin_cos();
    let (sphi, cphi) = phi.sin_cos();
    let a = f / p.m;
    [(cpsi * sth * cphi + spsi * sphi) * a, (spsi * sth * cphi - cpsi * sphi) * a, cth * cphi * a]
}

/// Control accelerations of all six channels from rotor forces.
pub fn forward_map(forces: &[f64; 4], s: &UavState, p: &UavParams) -> [f64; 6] {
    let w = p.wrench_matrix() * Vector4::from(*forces);
    let [ax, ay, az] = thrust_accel(w[0], s.psi(), s.theta(), s.phi(), p);
    [ax, ay, az, w[1] / p.j_psi, w[2] / p.j_theta, w[3] / p.j_phi]
}

/// Time derivative `(pos', vel')`.
pub fn uav_rhs(s: &UavState, ubar: &[f64; 6], p: &UavParams, big_delta: &[f64; 6]) -> UavState {
    let delta = disturbance_terms(s, p, big_delta);
    let mut acc = [0.0; 6];
    for c in CHANNELS {
        let i = c.index();
        acc[i] = p.known_term(c) + ubar[i] + delta[i];
    }
    UavState { pos: s.vel, vel: acc }
}

/// Thrust and tilt that realize the commanded translational accelerations
/// (gravity included in `ubar_z`) at heading `psi_d`.
pub fn allocate(
    ubar_x: f64,
    ubar_y: f64,
    ubar_z: f64,
    psi_d: f64,
    p: &UavParams,
) -> Result<(f64, f64, f64), PlantError> {
    if !(ubar_z > 0.0) {
        return Err(PlantError::ThrustDown(ubar_z));
    }
    let (spsi, cpsi) = psi_d.sin_cos();
    let along = cpsi * ubar_x + spsi * ubar_y;
    let across = spsi * ubar_x - cpsi * ubar_y;
    let a = (ubar_x * ubar_x + ubar_y * ubar_y + ubar_z * ubar_z).sqrt();
    let phi = (across / a).asin();
    let theta = along.atan2(ubar_z);
    let limit = std::f64::consts::FRAC_PI_2 - TILT_MARGIN;
    if theta.abs() >= limit || phi.abs() >= limit {
        return Err(PlantError::SingularAttitude { theta, phi });
    }
    Ok((p.m * a, theta, phi))
}

/// Rotor forces for total thrust and body torques, unchecked.
pub fn mix(f: f64, u_psi: f64, u_theta: f64, u_phi: f64, p: &UavParams) -> [f64; 4] {
    let inv = p.wrench_matrix().try_inverse().expect("wrench matrix is invertible for positive parameters");
    let x = inv * Vector4::new(f, u_psi, u_theta, u_phi);
    [x[0], x[1], x[2], x[3]]
}

/// Rotor forces, rejecting negative thrusts.
pub fn mixer(f: f64, u_psi: f64, u_theta: f64, u_phi: f64, p: &UavParams) -> Result<[f64; 4], PlantError> {
    let forces = mix(f, u_psi, u_theta, u_phi, p);
    if forces.iter().any(|&fi| fi < 0.0) {
        return Err(PlantError::InfeasibleThrust { forces });
    }
    Ok(forces)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn hover_is_balanced() {
        let p = UavParams::default();
        let mut ubar = [0.0; 6];
        ubar[2] = p.g;
        let d = uav_rhs(&UavState::default(), &ubar, &p, &[0.0; 6]);
        assert_eq!(d.vel, [0.0; 6]);
    }

    #[test]
    fn drag_term() {
        let p = UavParams::default();
        let mut s = UavState::default();
        s.vel[0] = 1.0;
        let d = disturbance_terms(&s, &p, &[0.0; 6]);
        assert_abs_diff_eq!(d[0], -0.1 / 2.01, epsilon = 1e-15);
        assert_abs_diff_eq!(d[0], -0.0498, epsilon = 1e-4);
    }

    #[test]
    fn free_fall_keeps_horizontal_velocity() {
        let p = UavParams::default();
        let s = UavState { pos: [0.0; 6], vel: [1.0, -2.0, 0.0, 0.0, 0.0, 0.0] };
        let p0 = UavParams { drag: [0.0; 6], ..p };
        let d = uav_rhs(&s, &[0.0; 6], &p0, &[0.0; 6]);
        assert_eq!(d.vel, [0.0, 0.0, -p.g, 0.0, 0.0, 0.0]);
        assert_eq!(d.pos, s.vel);
    }

    #[test]
    fn allocate_hover() {
        let p = UavParams::default();
        let (f, th, ph) = allocate(0.0, 0.0, p.g, 0.0, &p).unwrap();
        assert_abs_diff_eq!(f, 19.7181, epsilon = 1e-4);
        assert_eq!((th, ph), (0.0, 0.0));
    }

    #[test]
    fn allocate_round_trip() {
        let p = UavParams::default();
        for (ux, uy, uz, psi) in [(0.5, 0.0, p.g, 0.0), (-1.2, 0.7, 8.0, 0.4), (2.0, -3.0, 11.0, -2.0)] {
            let (f, th, ph) = allocate(ux, uy, uz, psi, &p).unwrap();
            let a = thrust_accel(f, psi, th, ph, &p);
            assert_abs_diff_eq!(a[0], ux, epsilon = 1e-9);
            assert_abs_diff_eq!(a[1], uy, epsilon = 1e-9);
            assert_abs_diff_eq!(a[2], uz, epsilon = 1e-9);
        }
        let (_, th, _) = allocate(0.5, 0.0, p.g, 0.0, &p).unwrap();
        assert!(th > 0.0);
    }

    #[test]
    fn yaw_quarter_turn_swaps_axes() {
        let p = UavParams::default();
        let (_, th0, ph0) = allocate(0.5, 0.0, p.g, 0.0, &p).unwrap();
        let (_, th1, ph1) = allocate(0.0, 0.5, p.g, std::f64::consts::FRAC_PI_2, &p).unwrap();
        assert_abs_diff_eq!(th0, th1, epsilon = 1e-12);
        assert_abs_diff_eq!(ph0, ph1, epsilon = 1e-12);
    }

    #[test]
    fn allocate_rejects_bad_commands() {
        let p = UavParams::default();
        assert!(matches!(allocate(0.0, 0.0, -1.0, 0.0, &p), Err(PlantError::ThrustDown(_))));
        assert!(matches!(allocate(100.0, 0.0, 1.0, 0.0, &p), Err(PlantError::SingularAttitude { .. })));
    }

    #[test]
    fn mixer_hover_and_pitch() {
        let p = UavParams::default();
        let mg = p.m * p.g;
        let f = mixer(mg, 0.0, 0.0, 0.0, &p).unwrap();
        for fi in f {
            assert_abs_diff_eq!(fi, mg / 4.0, epsilon = 1e-12);
        }
        let f = mixer(mg, 0.0, 0.1, 0.0, &p).unwrap();
        assert_abs_diff_eq!(f[2] - f[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(f[1], f[3], epsilon = 1e-12);
        let w = p.wrench_matrix() * Vector4::from(f);
        let res = (w - Vector4::new(mg, 0.0, 0.1, 0.0)).abs().max();
        assert!(res < 1e-12);
    }

    #[test]
    fn mixer_reports_negative_thrust() {
        let p = UavParams::default();
        assert!(matches!(mixer(1.0, 0.0, 1.0, 0.0, &p), Err(PlantError::InfeasibleThrust { .. })));
    }

    #[test]
    fn mixer_forward_identity() {
        let p = UavParams::default();
        let cmd = Vector4::new(20.0, 0.01, -0.2, 0.15);
        let f = mix(cmd[0], cmd[1], cmd[2], cmd[3], &p);
        let back = p.wrench_matrix() * Vector4::from(f);
        assert!((back - cmd).abs().max() < 1e-9);
    }
}
