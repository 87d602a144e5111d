//! Run metrics computed from a finished trace.

use serde::Serialize;
use thiserror::Error;

use super::Trace;
use crate::control::EventKind;
use crate::sliding::{settling_time, sign, OracleError};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("trace has no {0} event")]
    MissingEvent(&'static str),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Overshoot {
    /// First grid time at which `e1` is on the wrong side beyond tolerance.
    pub t: f64,
    /// Largest wrong-side excursion of `e1`.
    pub magnitude: f64,
}

/// First index where `e1` sits beyond `-eps` on the side opposite to
/// `series[0]`, with `eps = tol * max(1, |series[0]|)`, and the largest such
/// excursion.
pub fn series_overshoot(series: &[f64], tol: f64) -> Option<(usize, f64)> {
    let first = *series.first()?;
    let s = sign(first);
    let eps = tol * first.abs().max(1.0);
    let mut found: Option<(usize, f64)> = None;
    for (i, &v) in series.iter().enumerate() {
        let wrong = -v * s;
        if wrong > eps {
            found = Some(match found {
                None => (i, wrong),
                Some((j, m)) => (j, m.max(wrong)),
            });
        }
    }
    found
}

/// Overshoot verdict of `e1`, judged separately on each stretch between
/// reference jumps.
pub fn detect_overshoot(trace: &Trace, tol: f64) -> Option<Overshoot> {
    let mut starts = vec![0usize];
    for ev in trace.events.iter().filter(|e| e.kind == EventKind::RefJump) {
        let i = trace.rows.partition_point(|r| r.t < ev.t - 1e-12);
        if i > *starts.last().unwrap() && i < trace.rows.len() {
            starts.push(i);
        }
    }
    starts.push(trace.rows.len());
    let e1: Vec<f64> = trace.e1().collect();
    let mut verdict: Option<Overshoot> = None;
    for w in starts.windows(2) {
        if let Some((i, m)) = series_overshoot(&e1[w[0]..w[1]], tol) {
            let t = trace.rows[w[0] + i].t;
            verdict = Some(match verdict {
                None => Overshoot { t, magnitude: m },
                Some(o) => Overshoot { t: o.t.min(t), magnitude: o.magnitude.max(m) },
            });
        }
    }
    verdict
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SettlingCheck {
    pub tc: f64,
    pub measured: f64,
    pub analytic: f64,
    pub rel_error: f64,
}

/// Compares the first surface hit against the closed-form time to the
/// surface from the errors at the first `tc`, using the effective gain
/// `k2 - opposing` (`opposing = Ld` gives the worst case).
pub fn measure_settling(trace: &Trace, opposing: f64) -> Result<SettlingCheck, MetricsError> {
    let tc = trace.first_event(EventKind::Tc).ok_or(MetricsError::MissingEvent("tc"))?;
    let hit = trace
        .events
        .iter()
        .find(|e| e.kind == EventKind::SurfaceHit && e.t >= tc)
        .map(|e| e.t)
        .ok_or(MetricsError::MissingEvent("surfaceHit"))?;
    let rec = trace.gain_log.iter().find(|g| g.t == tc).ok_or(MetricsError::MissingEvent("gainUpdate"))?;
    let analytic = settling_time(rec.switch, rec.gains.k1, rec.gains.k2 - opposing)?;
    let measured = hit - tc;
    let rel_error = if analytic > 0.0 {
        (measured - analytic).abs() / analytic
    } else if measured == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(SettlingCheck { tc, measured, analytic, rel_error })
}

/// Sup of `|e1|`, `|e2|` over the final `fraction` of the run.
pub fn steady_sup(trace: &Trace, fraction: f64) -> (f64, f64) {
    let from = trace.t_end() * (1.0 - fraction);
    trace.rows.iter().filter(|r| r.t >= from).fold((0.0f64, 0.0f64), |(a, b), r| (a.max(r.e1.abs()), b.max(r.e2.abs())))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SteadyCheck {
    pub sup_e1: f64,
    pub sup_e2: f64,
    pub bound_e1: f64,
    pub bound_e2: f64,
    /// `bound - sup`; negative when violated.
    pub slack_e1: f64,
    pub slack_e2: f64,
    pub pass: bool,
}

/// Tail (final 20 %) sup of the errors against `(b1, b2)`.
pub fn check_steady_bounds(trace: &Trace, b1: f64, b2: f64) -> SteadyCheck {
    let (sup_e1, sup_e2) = steady_sup(trace, 0.2);
    let (slack_e1, slack_e2) = (b1 - sup_e1, b2 - sup_e2);
    SteadyCheck {
        sup_e1,
        sup_e2,
        bound_e1: b1,
        bound_e2: b2,
        slack_e1,
        slack_e2,
        pass: slack_e1 >= 0.0 && slack_e2 >= 0.0,
    }
}

/// Total variation of `u` per second.
pub fn chattering_index(trace: &Trace) -> f64 {
    let tv: f64 = trace.rows.windows(2).map(|w| (w[1].u - w[0].u).abs()).sum();
    let span = trace.t_end() - trace.rows.first().map_or(0.0, |r| r.t);
    if span > 0.0 {
        tv / span
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricsReport {
    pub overshoot: Option<Overshoot>,
    pub tc: Option<f64>,
    pub surface_hit: Option<f64>,
    /// Surface hit minus `tc`.
    pub settling_time_measured: Option<f64>,
    pub sse1: f64,
    pub sse2: f64,
    pub chattering_index: f64,
}

pub fn metrics_report(trace: &Trace, tol: f64) -> MetricsReport {
    let tc = trace.first_event(EventKind::Tc);
    let surface_hit =
        tc.and_then(|tc| trace.events.iter().find(|e| e.kind == EventKind::SurfaceHit && e.t >= tc).map(|e| e.t));
    let (sse1, sse2) = steady_sup(trace, 0.2);
    MetricsReport {
        overshoot: detect_overshoot(trace, tol),
        tc,
        surface_hit,
        settling_time_measured: tc.zip(surface_hit).map(|(a, b)| b - a),
        sse1,
        sse2,
        chattering_index: chattering_index(trace),
    }
}
