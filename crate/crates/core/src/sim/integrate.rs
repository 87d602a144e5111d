//! Fixed-step explicit integrators on fixed-size state arrays.
//!
//! A discontinuous right-hand side is evaluated as-is at every stage; no
//! event location is attempted inside a step.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Rk4,
    Euler,
}

fn axpy<const N: usize>(x: &[f64; N], a: f64, k: &[f64; N]) -> [f64; N] {
    let mut out = *x;
    for i in 0..N {
        out[i] += a * k[i];
    }
    out
}

/// Classical four-stage Runge-Kutta step with a fallible right-hand side.
pub fn try_step_rk4<const N: usize, E>(
    mut f: impl FnMut(f64, &[f64; N]) -> Result<[f64; N], E>,
    x: &[f64; N],
    t: f64,
    dt: f64,
) -> Result<[f64; N], E> {
    let k1 = f(t, x)?;
    let k2 = f(t + 0.5 * dt, &axpy(x, 0.5 * dt, &k1))?;
    let k3 = f(t + 0.5 * dt, &axpy(x, 0.5 * dt, &k2))?;
    let k4 = f(t + dt, &axpy(x, dt, &k3))?;
    let mut out = *x;
    for i in 0..N {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(out)
}

pub fn try_step_euler<const N: usize, E>(
    mut f: impl FnMut(f64, &[f64; N]) -> Result<[f64; N], E>,
    x: &[f64; N],
    t: f64,
    dt: f64,
) -> Result<[f64; N], E> {
    let k = f(t, x)?;
    Ok(axpy(x, dt, &k))
}

pub fn try_step<const N: usize, E>(
    method: Method,
    f: impl FnMut(f64, &[f64; N]) -> Result<[f64; N], E>,
    x: &[f64; N],
    t: f64,
    dt: f64,
) -> Result<[f64; N], E> {
    match method {
        Method::Rk4 => try_step_rk4(f, x, t, dt),
        Method::Euler => try_step_euler(f, x, t, dt),
    }
}

/// Infallible RK4 step.
pub fn step_rk4<const N: usize>(
    mut f: impl FnMut(f64, &[f64; N]) -> [f64; N],
    x: &[f64; N],
    t: f64,
    dt: f64,
) -> [f64; N] {
    match try_step_rk4::<N, std::convert::Infallible>(|t, x| Ok(f(t, x)), x, t, dt) {
        Ok(v) => v,
        Err(never) => match never {},
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix2;

    #[test]
    fn exponential_decay_single_step() {
        let x = step_rk4(|_, x: &[f64; 1]| [-x[0]], &[1.0], 0.0, 0.1);
        assert!((x[0] - (-0.1f64).exp()).abs() < 1e-7);
    }

    #[test]
    fn zero_field_is_identity() {
        let x0 = [1.5, -2.0, 3.25];
        assert_eq!(step_rk4(|_, _: &[f64; 3]| [0.0; 3], &x0, 0.0, 0.3), x0);
    }

    #[test]
    fn linear_system_matches_matrix_exponential() {
        // Damped oscillator; the oracle is the eigen-decomposition of A.
        let a = Matrix2::new(0.0, 1.0, -4.0, -0.4);
        let f = |_: f64, x: &[f64; 2]| [a[(0, 0)] * x[0] + a[(0, 1)] * x[1], a[(1, 0)] * x[0] + a[(1, 1)] * x[1]];
        let exact = |t: f64| {
            // x'' + 0.4 x' + 4 x = 0 with x(0)=1, x'(0)=0.
            let (alpha, w) = (-0.2, (4.0f64 - 0.04).sqrt());
            let x = (alpha * t).exp() * ((w * t).cos() - alpha / w * (w * t).sin());
            let v = (alpha * t).exp() * (-(alpha * alpha + w * w) / w) * (w * t).sin();
            [x, v]
        };
        let err = |dt: f64| {
            let n = (1.0 / dt).round() as usize;
            let mut x = [1.0, 0.0];
            for i in 0..n {
                x = step_rk4(f, &x, i as f64 * dt, dt);
            }
            let e = exact(1.0);
            (x[0] - e[0]).abs().max((x[1] - e[1]).abs())
        };
        let (e1, e2) = (err(0.02), err(0.01));
        assert!(e1 < 1e-6);
        let order = (e1 / e2).log2();
        assert!(order > 3.7 && order < 4.3, "observed order {order}");
    }

    #[test]
    fn euler_is_first_order() {
        let x = try_step::<1, ()>(Method::Euler, |_, x| Ok([-x[0]]), &[1.0], 0.0, 0.1).unwrap();
        assert!((x[0] - 0.9).abs() < 1e-15);
    }
}
