//! Gain determination for the two-subsystem sliding mode.
//!
//! Reaching parameters (`e1c`, `e2c`, `kc`, `rho_c`) are fixed before a run.
//! The surface gains (`k1`, `k2`, `rho`) are computed once the tracking error
//! first enters the band `|e1| <= e1c`, from the errors measured at that
//! instant.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Added to `beta2 * Ld` when the switch errors are both zero.
pub const K2_EPS: f64 = 1e-6;

/// Floor applied to `rho` and `rho_c` when the logarithm collapses to zero.
pub const RHO_MIN: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GainError {
    #[error("gain ceiling k2M = {k2_max} must exceed the disturbance bound Ld = {ld}")]
    InfeasibleBounds { ld: f64, k2_max: f64 },
    #[error("invalid gain parameter: {0}")]
    InvalidGain(String),
    #[error("switch errors ({e1}, {e2}) leave k1 undefined")]
    DegenerateErrors { e1: f64, e2: f64 },
    #[error("k2 = {k2:.4} exceeds the gain ceiling k2M = {k2_max}")]
    GainCeilingExceeded { k2: f64, k2_max: f64 },
    #[error("k2 - k1*e2max - Ld = {margin:.4e} is not positive")]
    SaturatedGain { margin: f64 },
}

fn default_beta11() -> f64 {
    0.5
}
fn default_beta12() -> f64 {
    2.3
}
fn default_beta13() -> f64 {
    1.0
}
fn default_beta2() -> f64 {
    1.5
}
fn default_true() -> bool {
    true
}

/// Design constants of the gain pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainConfig {
    /// Bound on the matched disturbance `|d| <= ld`.
    pub ld: f64,
    /// Ceiling on `k2`.
    pub k2_max: f64,
    pub rho_c0: f64,
    pub rho0: f64,
    #[serde(default = "default_beta11")]
    pub beta11: f64,
    #[serde(default = "default_beta12")]
    pub beta12: f64,
    #[serde(default = "default_beta13")]
    pub beta13: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    /// Raise a computed `k1 < 1` to exactly 1.
    #[serde(default = "default_true")]
    pub fast_k1_floor: bool,
}

impl GainConfig {
    pub fn new(ld: f64, k2_max: f64, rho_c0: f64, rho0: f64) -> Self {
        GainConfig {
            ld,
            k2_max,
            rho_c0,
            rho0,
            beta11: default_beta11(),
            beta12: default_beta12(),
            beta13: default_beta13(),
            beta2: default_beta2(),
            fast_k1_floor: true,
        }
    }

    pub fn with_beta13(mut self, beta13: f64) -> Self {
        self.beta13 = beta13;
        self
    }

    pub fn validate(&self) -> Result<(), GainError> {
        let all = [self.ld, self.k2_max, self.rho_c0, self.rho0, self.beta11, self.beta12, self.beta13, self.beta2];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(GainError::InvalidGain("non-finite gain configuration".into()));
        }
        if self.ld < 0.0 {
            return Err(GainError::InvalidGain(format!("Ld = {} is negative", self.ld)));
        }
        if self.k2_max <= self.ld {
            return Err(GainError::InfeasibleBounds { ld: self.ld, k2_max: self.k2_max });
        }
        if self.rho_c0 <= 1.0 || self.rho0 <= 1.0 {
            return Err(GainError::InvalidGain("rho_c0 and rho0 must exceed 1".into()));
        }
        if !(self.beta11 > 0.0 && self.beta11 < 1.0) {
            return Err(GainError::InvalidGain(format!("beta11 = {} not in (0,1)", self.beta11)));
        }
        if self.beta12 <= 1.0 {
            return Err(GainError::InvalidGain(format!("beta12 = {} must exceed 1", self.beta12)));
        }
        if self.beta13 <= 0.0 {
            return Err(GainError::InvalidGain(format!("beta13 = {} must be positive", self.beta13)));
        }
        if self.beta2 <= 1.0 {
            return Err(GainError::InvalidGain(format!("beta2 = {} must exceed 1", self.beta2)));
        }
        Ok(())
    }

    /// Admissible interval for `e1c`, open at both ends.
    pub fn e1c_range(&self) -> (f64, f64) {
        (0.0, self.k2_max - self.ld)
    }

    /// Admissible interval `(e1c, sqrt((k2M - Ld) e1c)]` for `e2c`.
    pub fn e2c_range(&self, e1c: f64) -> (f64, f64) {
        (e1c, ((self.k2_max - self.ld) * e1c).sqrt())
    }
}

/// Parameters of the reaching (first) subsystem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReachParams {
    pub e1c: f64,
    pub e2c: f64,
    pub kc: f64,
    pub rho_c: f64,
}

/// `rho_c0 * ln((kc + Ld)/(kc - Ld)) / 2`, floored at [`RHO_MIN`].
pub fn reach_rho_c(kc: f64, ld: f64, rho_c0: f64) -> f64 {
    (rho_c0 * 0.5 * ((kc + ld) / (kc - ld)).ln()).max(RHO_MIN)
}

/// Builds reaching parameters. Without overrides `e1c` is the midpoint of
/// `(0, k2M - Ld)` and `e2c` the top of its interval.
pub fn select_reach_params(
    config: &GainConfig,
    kc: f64,
    e1c: Option<f64>,
    e2c: Option<f64>,
) -> Result<ReachParams, GainError> {
    config.validate()?;
    if !kc.is_finite() || kc <= config.ld {
        return Err(GainError::InvalidGain(format!("kc = {kc} must exceed Ld = {}", config.ld)));
    }
    let (_, e1_hi) = config.e1c_range();
    let e1c = e1c.unwrap_or(e1_hi / 2.0);
    if !(e1c > 0.0 && e1c < e1_hi) {
        return Err(GainError::InvalidGain(format!("e1c = {e1c} not in (0, {e1_hi})")));
    }
    let (e2_lo, e2_hi) = config.e2c_range(e1c);
    let e2c = e2c.unwrap_or(e2_hi);
    // Accept round-off at the closed upper end.
    if !(e2c > e2_lo && e2c <= e2_hi * (1.0 + 1e-12)) {
        return Err(GainError::InvalidGain(format!("e2c = {e2c} not in ({e2_lo}, {e2_hi}]")));
    }
    Ok(ReachParams { e1c, e2c, kc, rho_c: reach_rho_c(kc, config.ld, config.rho_c0) })
}

/// Errors sampled at the switch instant `tc`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchErrors {
    pub e1: f64,
    pub e2: f64,
}

impl SwitchErrors {
    pub fn new(e1: f64, e2: f64) -> Self {
        SwitchErrors { e1, e2 }
    }

    pub fn zone(&self) -> Zone {
        classify_zone(*self)
    }

    pub fn branch(&self) -> Branch {
        if self.e1 * self.e2 < 0.0 {
            if self.e1.abs() < self.e2.abs() {
                Branch::ClosingFast
            } else {
                Branch::ClosingSlow
            }
        } else {
            Branch::Other
        }
    }
}

/// Coordinate zones of the switch-time errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Zone {
    I1,
    I2,
    II1,
    II2,
    III1,
    III2,
    IV1,
    IV2,
    Origin,
}

impl Zone {
    /// Zone of the point reflected through the origin.
    pub fn mirror(self) -> Zone {
        match self {
            Zone::I1 => Zone::III1,
            Zone::I2 => Zone::III2,
            Zone::II1 => Zone::IV1,
            Zone::II2 => Zone::IV2,
            Zone::III1 => Zone::I1,
            Zone::III2 => Zone::I2,
            Zone::IV1 => Zone::II1,
            Zone::IV2 => Zone::II2,
            Zone::Origin => Zone::Origin,
        }
    }

    pub fn branch(self) -> Branch {
        match self {
            Zone::II2 | Zone::IV2 => Branch::ClosingFast,
            Zone::II1 | Zone::IV1 => Branch::ClosingSlow,
            _ => Branch::Other,
        }
    }
}

impl fmt::Display for Zone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Zone::I1 => "I-1",
            Zone::I2 => "I-2",
            Zone::II1 => "II-1",
            Zone::II2 => "II-2",
            Zone::III1 => "III-1",
            Zone::III2 => "III-2",
            Zone::IV1 => "IV-1",
            Zone::IV2 => "IV-2",
            Zone::Origin => "origin",
        };
        f.write_str(s)
    }
}

/// Which formula family the k1/k2 selection uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// `e1*e2 < 0` and `|e1| < |e2|`: heading to zero faster than the surface allows.
    ClosingFast,
    /// `e1*e2 < 0` and `|e1| >= |e2|`.
    ClosingSlow,
    /// Moving away from zero, or at rest.
    Other,
}

pub fn classify_zone(e: SwitchErrors) -> Zone {
    let (e1, e2) = (e.e1, e.e2);
    if e1 == 0.0 && e2 == 0.0 {
        return Zone::Origin;
    }
    if e1 > 0.0 && e2 < 0.0 {
        if -e2 > e1 {
            Zone::II2
        } else {
            Zone::II1
        }
    } else if e1 < 0.0 && e2 > 0.0 {
        if -e1 >= e2 {
            Zone::IV1
        } else {
            Zone::IV2
        }
    } else if e1 <= 0.0 && e2 <= 0.0 {
        if -e2 >= -e1 {
            Zone::III1
        } else {
            Zone::III2
        }
    } else if e2 >= e1 {
        Zone::I1
    } else {
        Zone::I2
    }
}

pub fn determine_k1(e: SwitchErrors, config: &GainConfig) -> Result<f64, GainError> {
    let k1 = match e.branch() {
        Branch::ClosingFast | Branch::ClosingSlow if e.e1 == 0.0 => {
            return Err(GainError::DegenerateErrors { e1: e.e1, e2: e.e2 })
        }
        Branch::ClosingFast => config.beta11 * e.e2.abs() / e.e1.abs(),
        Branch::ClosingSlow => config.beta12 * e.e2.abs() / e.e1.abs(),
        Branch::Other => config.beta13,
    };
    if !k1.is_finite() {
        return Err(GainError::DegenerateErrors { e1: e.e1, e2: e.e2 });
    }
    if config.fast_k1_floor && k1 > 0.0 && k1 < 1.0 {
        Ok(1.0)
    } else {
        Ok(k1)
    }
}

/// The cubic-root term `(k1^2/3)(|e1| + sqrt(e1^2 + 3 (e2/k1)^2))`.
fn vertex_term(e: SwitchErrors, k1: f64) -> f64 {
    let r = e.e2 / k1;
    k1 * k1 / 3.0 * (e.e1.abs() + (e.e1 * e.e1 + 3.0 * r * r).sqrt())
}

/// Strict lower bound on `k2` for the switch errors and `k1`.
pub fn k2_lower_bound(e: SwitchErrors, k1: f64, ld: f64) -> f64 {
    let surface = k1 * e.e2.abs() + ld;
    let other = match e.branch() {
        Branch::ClosingFast => e.e2 * e.e2 / (2.0 * e.e1.abs()) + ld,
        _ => vertex_term(e, k1) + ld,
    };
    surface.max(other)
}

pub fn determine_k2(e: SwitchErrors, k1: f64, config: &GainConfig) -> Result<f64, GainError> {
    if !(k1 > 0.0 && k1.is_finite()) {
        return Err(GainError::InvalidGain(format!("k1 = {k1} must be positive")));
    }
    let k2 = if e.zone() == Zone::Origin {
        config.beta2 * config.ld + K2_EPS
    } else {
        config.beta2 * k2_lower_bound(e, k1, config.ld)
    };
    if k2 > config.k2_max {
        return Err(GainError::GainCeilingExceeded { k2, k2_max: config.k2_max });
    }
    Ok(k2)
}

/// Peak `|e2|` expected on the way to the surface.
pub fn e2_max(e: SwitchErrors, k1: f64) -> f64 {
    e.e2.abs().max(vertex_term(e, k1) / k1)
}

/// Log-ratio shared by the rho selection and the steady-state bounds.
pub fn smoothing_log_ratio(k1: f64, k2: f64, e2max: f64, ld: f64) -> Result<f64, GainError> {
    let margin = k2 - k1 * e2max - ld;
    if !(margin > 0.0) {
        return Err(GainError::SaturatedGain { margin });
    }
    Ok(((k2 + k1 * e2max + ld) / margin).ln())
}

/// Returns `(e2max, rho)`.
pub fn determine_rho(e: SwitchErrors, k1: f64, k2: f64, config: &GainConfig) -> Result<(f64, f64), GainError> {
    let e2max = e2_max(e, k1);
    let log = smoothing_log_ratio(k1, k2, e2max, config.ld)?;
    let rho = config.rho0 * (0.5 / k1).max(1.0) * log;
    Ok((e2max, rho.max(RHO_MIN)))
}

/// Complete parameter set of the two-subsystem controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainSet {
    pub k1: f64,
    pub k2: f64,
    pub kc: f64,
    pub rho: f64,
    pub rho_c: f64,
    pub e1c: f64,
    pub e2c: f64,
}

impl GainSet {
    /// Gains usable before the switch instant; the surface gains are zero.
    pub fn reaching_only(reach: &ReachParams) -> Self {
        GainSet { k1: 0.0, k2: 0.0, kc: reach.kc, rho: 0.0, rho_c: reach.rho_c, e1c: reach.e1c, e2c: reach.e2c }
    }

    pub fn with_surface(reach: &ReachParams, k1: f64, k2: f64, rho: f64) -> Self {
        GainSet { k1, k2, rho, ..GainSet::reaching_only(reach) }
    }

    pub fn reach(&self) -> ReachParams {
        ReachParams { e1c: self.e1c, e2c: self.e2c, kc: self.kc, rho_c: self.rho_c }
    }
}

/// Switch-time errors expected from initial errors `e0`: outside the band
/// the reaching law arrives at `(e1c, -e2c)` (mirrored for `e1 < 0`),
/// inside it the initial errors are the switch errors.
pub fn predict_switch_errors(e1_0: f64, e2_0: f64, reach: &ReachParams) -> SwitchErrors {
    if e1_0.abs() > reach.e1c {
        let s = e1_0.signum();
        SwitchErrors::new(s * reach.e1c, -s * reach.e2c)
    } else {
        SwitchErrors::new(e1_0, e2_0)
    }
}

/// Everything the pipeline computed, for printing and inspection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainDesign {
    pub switch: SwitchErrors,
    pub zone: Zone,
    pub k1_raw: f64,
    pub e2max: f64,
    pub gains: GainSet,
}

/// Runs the k1 -> k2 -> rho chain on the switch errors.
pub fn design_gains(e: SwitchErrors, reach: &ReachParams, config: &GainConfig) -> Result<GainDesign, GainError> {
    config.validate()?;
    let unfloored = GainConfig { fast_k1_floor: false, ..*config };
    let k1_raw = determine_k1(e, &unfloored)?;
    let k1 = determine_k1(e, config)?;
    let k2 = determine_k2(e, k1, config)?;
    let (e2max, rho) = determine_rho(e, k1, k2, config)?;
    Ok(GainDesign { switch: e, zone: e.zone(), k1_raw, e2max, gains: GainSet::with_surface(reach, k1, k2, rho) })
}

/// Which part of the design an inequality constrains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConditionGroup {
    Reaching,
    Surface,
    Smoothing,
    /// Coarse two-way partition; informational, not required.
    Coarse,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub name: &'static str,
    pub group: ConditionGroup,
    /// Positive when satisfied; distance to the violated edge otherwise.
    pub slack: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub zone: Zone,
    pub e2max: f64,
    pub conditions: Vec<Condition>,
}

impl ConditionReport {
    /// True when every non-coarse condition holds.
    pub fn all_pass(&self) -> bool {
        self.conditions.iter().filter(|c| c.group != ConditionGroup::Coarse).all(|c| c.pass)
    }

    pub fn get(&self, name: &str) -> Option<&Condition> {
        self.conditions.iter().find(|c| c.name == name)
    }
}

fn strict(name: &'static str, group: ConditionGroup, slack: f64) -> Condition {
    Condition { name, group, slack, pass: slack > 0.0 }
}

fn closed(name: &'static str, group: ConditionGroup, slack: f64) -> Condition {
    Condition { name, group, slack, pass: slack >= 0.0 }
}

/// Slack of `x` inside the open interval `(lo, hi)`.
fn inside(x: f64, lo: f64, hi: f64) -> f64 {
    (x - lo).min(hi - x)
}

pub fn validate_conditions(g: &GainSet, e: SwitchErrors, config: &GainConfig) -> ConditionReport {
    use ConditionGroup::*;
    let ld = config.ld;
    let mut out = Vec::new();

    out.push(strict("e1c in (0, k2M-Ld)", Reaching, inside(g.e1c, 0.0, config.k2_max - ld)));
    let (e2_lo, e2_hi) = config.e2c_range(g.e1c);
    out.push(Condition {
        name: "e2c in (e1c, sqrt((k2M-Ld)e1c)]",
        group: Reaching,
        slack: (g.e2c - e2_lo).min(e2_hi - g.e2c),
        pass: g.e2c > e2_lo && g.e2c <= e2_hi * (1.0 + 1e-12),
    });
    out.push(strict("kc > Ld", Reaching, g.kc - ld));
    let rho_c_needed = 0.5 * ((g.kc + ld) / (g.kc - ld)).ln();
    out.push(strict("rho_c > ln((kc+Ld)/(kc-Ld))/2", Smoothing, g.rho_c - rho_c_needed));

    let ratio = if e.e1 != 0.0 { e.e2.abs() / e.e1.abs() } else { f64::INFINITY };
    let k1_slack = match e.branch() {
        Branch::ClosingFast => inside(g.k1, 0.0, ratio),
        Branch::ClosingSlow => g.k1 - ratio,
        Branch::Other => g.k1,
    };
    out.push(strict("k1 interval", Surface, k1_slack));
    out.push(strict("k2 lower bound", Surface, g.k2 - k2_lower_bound(e, g.k1, ld)));
    out.push(closed("k2 <= k2M", Surface, config.k2_max - g.k2));

    let e2max = e2_max(e, g.k1);
    let margin = g.k2 - g.k1 * e2max - ld;
    out.push(strict("k2 > k1*e2max + Ld", Smoothing, margin));
    let rho_slack = match smoothing_log_ratio(g.k1, g.k2, e2max, ld) {
        Ok(log) => g.rho - (0.5 / g.k1).max(1.0) * log,
        Err(_) => f64::NEG_INFINITY,
    };
    out.push(strict("rho above smoothing bound", Smoothing, rho_slack));

    let coarse_k1 = if e.e1 * e.e2 < 0.0 { inside(g.k1, 0.0, ratio) } else { g.k1 };
    out.push(strict("coarse k1 interval", Coarse, coarse_k1));
    let coarse_bound = {
        let surface = g.k1 * e.e2.abs() + ld;
        let other = if e.e1 * e.e2 < 0.0 { e.e2 * e.e2 / (2.0 * e.e1.abs()) + ld } else { vertex_term(e, g.k1) + ld };
        surface.max(other)
    };
    out.push(strict("coarse k2 lower bound", Coarse, g.k2 - coarse_bound));

    ConditionReport { zone: e.zone(), e2max, conditions: out }
}

/// How reaching parameters are adapted to the measured initial errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReachPolicy {
    /// Shrink `e1c` to this fraction of `|e1(0)|` when the start is inside the band.
    pub e1c_fraction: f64,
    /// Safety factor on the deceleration needed to meet the band at speed `e2c`.
    pub decel_margin: f64,
    /// Time allowed to turn `e2` around toward `-e2c sign(e1)`.
    pub align_time: f64,
}

impl Default for ReachPolicy {
    fn default() -> Self {
        ReachPolicy { e1c_fraction: 0.5, decel_margin: 2.0, align_time: 1.0 }
    }
}

/// Adapts nominal reaching parameters to the initial errors.
///
/// A bounded reaching gain can only stop a fast approach over a long enough
/// distance, so `kc` grows with `e2(0)^2 / |e1(0)|` and `e1c` shrinks below
/// `|e1(0)|` when the start is already in the band.
pub fn adapt_reach_params(
    e1_0: f64,
    e2_0: f64,
    nominal: &ReachParams,
    config: &GainConfig,
    policy: &ReachPolicy,
) -> Result<ReachParams, GainError> {
    let mut e1c = nominal.e1c;
    let mut e2c = nominal.e2c;
    if e1_0 != 0.0 && e1_0.abs() <= e1c {
        e1c = policy.e1c_fraction * e1_0.abs();
        let (lo, hi) = config.e2c_range(e1c);
        if !(e2c > lo && e2c <= hi) {
            e2c = hi;
        }
    }
    let mut need = 0.0_f64;
    let s1 = e1_0.signum();
    // Velocity relative to the reaching target -e2c sign(e1).
    let excess = e2_0 + e2c * s1;
    if e1_0 * e2_0 < 0.0 && e2_0.abs() > e2c && e1_0.abs() > e1c {
        need = need.max(policy.decel_margin * (e2_0 * e2_0 - e2c * e2c) / (2.0 * (e1_0.abs() - e1c)));
    }
    if e1_0 != 0.0 {
        need = need.max(excess.abs() / policy.align_time);
    }
    let kc = nominal.kc.max(config.ld + need);
    select_reach_params(config, kc, Some(e1c), Some(e2c))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn predicted_switch_example41() {
        let cfg = GainConfig::new(5.0, 20.0, 50.0, 20.0);
        let r = select_reach_params(&cfg, 6.0, Some(2.0), Some(5.0)).unwrap();
        assert_eq!(predict_switch_errors(100.0, -10.0, &r), SwitchErrors::new(2.0, -5.0));
        assert_eq!(predict_switch_errors(-100.0, 3.0, &r), SwitchErrors::new(-2.0, 5.0));
        assert_eq!(predict_switch_errors(1.0, 3.0, &r), SwitchErrors::new(1.0, 3.0));
    }
    use approx::assert_abs_diff_eq;

    fn ex41() -> GainConfig {
        GainConfig::new(5.0, 20.0, 50.0, 20.0)
    }

    #[test]
    fn reach_params_overrides() {
        let r = select_reach_params(&ex41(), 6.0, Some(2.0), Some(5.0)).unwrap();
        assert_eq!((r.e1c, r.e2c, r.kc), (2.0, 5.0, 6.0));
        let (lo, hi) = ex41().e2c_range(2.0);
        assert!(lo < 5.0 && 5.0 <= hi);
        assert_abs_diff_eq!(hi, 30f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn rho_c_closed_form() {
        let r = select_reach_params(&ex41(), 6.0, Some(2.0), Some(5.0)).unwrap();
        assert_abs_diff_eq!(r.rho_c, 59.95, epsilon = 1e-2);
    }

    #[test]
    fn reach_params_zero_disturbance() {
        let cfg = GainConfig::new(0.0, 1.0, 2.0, 2.0);
        for e2c in [0.51, 0.6, 0.5f64.sqrt()] {
            assert!(select_reach_params(&cfg, 0.5, Some(0.5), Some(e2c)).is_ok());
        }
        assert!(select_reach_params(&cfg, 0.5, Some(0.5), Some(0.5)).is_err());
        assert!(select_reach_params(&cfg, 0.5, Some(0.5), Some(0.72)).is_err());
    }

    #[test]
    fn reach_params_errors() {
        let bad = GainConfig::new(5.0, 5.0, 2.0, 2.0);
        assert!(matches!(select_reach_params(&bad, 6.0, None, None), Err(GainError::InfeasibleBounds { .. })));
        assert!(matches!(select_reach_params(&ex41(), 5.0, None, None), Err(GainError::InvalidGain(_))));
    }

    #[test]
    fn default_reach_midpoint() {
        let r = select_reach_params(&ex41(), 6.0, None, None).unwrap();
        assert_abs_diff_eq!(r.e1c, 7.5);
        assert_abs_diff_eq!(r.e2c * r.e2c, 15.0 * 7.5, epsilon = 1e-9);
    }

    #[test]
    fn zones_from_examples() {
        assert_eq!(classify_zone(SwitchErrors::new(2.0, -5.0)), Zone::II2);
        assert_eq!(classify_zone(SwitchErrors::new(-2.0, 1.0)), Zone::IV1);
        assert_eq!(classify_zone(SwitchErrors::new(0.0, 0.0)), Zone::Origin);
    }

    #[test]
    fn zone_boundary_ties() {
        assert_eq!(classify_zone(SwitchErrors::new(-1.0, 0.0)), Zone::III2);
        assert_eq!(classify_zone(SwitchErrors::new(1.0, 0.0)), Zone::I2);
        assert_eq!(classify_zone(SwitchErrors::new(0.0, -1.0)), Zone::III1);
        assert_eq!(classify_zone(SwitchErrors::new(0.0, 1.0)), Zone::I1);
        assert_eq!(classify_zone(SwitchErrors::new(-1.0, -1.0)), Zone::III1);
        assert_eq!(classify_zone(SwitchErrors::new(1.0, -1.0)), Zone::II1);
        assert_eq!(classify_zone(SwitchErrors::new(-1.0, 1.0)), Zone::IV1);
    }

    #[test]
    fn k1_examples() {
        let cfg = ex41();
        assert_abs_diff_eq!(determine_k1(SwitchErrors::new(2.0, -5.0), &cfg).unwrap(), 1.25);
        assert_abs_diff_eq!(determine_k1(SwitchErrors::new(-2.0, 1.0), &cfg).unwrap(), 1.15, epsilon = 1e-12);
        assert_abs_diff_eq!(determine_k1(SwitchErrors::new(1.0, 1.0), &cfg).unwrap(), 1.0);
    }

    #[test]
    fn k1_floor_only_when_enabled() {
        let e = SwitchErrors::new(4.0, -5.0);
        let cfg = ex41();
        assert_eq!(determine_k1(e, &cfg).unwrap(), 1.0);
        let raw = GainConfig { fast_k1_floor: false, ..cfg };
        assert_abs_diff_eq!(determine_k1(e, &raw).unwrap(), 0.625);
    }

    #[test]
    fn k2_example41() {
        let k2 = determine_k2(SwitchErrors::new(2.0, -5.0), 1.25, &ex41()).unwrap();
        assert_abs_diff_eq!(k2, 16.875, epsilon = 1e-12);
        assert!((k2 - 16.93).abs() < 0.1);
    }

    #[test]
    fn k2_hover_groups() {
        let cfg = GainConfig::new(4.5, 10.0, 6.0, 3.0).with_beta13(2.0);
        let kz = determine_k2(SwitchErrors::new(0.95, -0.01), 1.0, &cfg).unwrap();
        assert!((kz - 7.70).abs() / 7.70 < 0.05);
    }

    #[test]
    fn k2_origin_floor() {
        let cfg = GainConfig::new(0.0, 1.0, 2.0, 2.0);
        let k2 = determine_k2(SwitchErrors::new(0.0, 0.0), 1.0, &cfg).unwrap();
        assert_eq!(k2, K2_EPS);
    }

    #[test]
    fn k2_ceiling_is_an_error() {
        let e = SwitchErrors::new(0.5, -20.0);
        assert!(matches!(determine_k2(e, 1.0, &ex41()), Err(GainError::GainCeilingExceeded { .. })));
    }

    #[test]
    fn rho_example42() {
        let cfg = ex41();
        let (e2max, rho) = determine_rho(SwitchErrors::new(2.0, -5.0), 1.26, 16.95, &cfg).unwrap();
        assert_abs_diff_eq!(e2max, 5.0);
        assert_abs_diff_eq!(rho, 20.0 * (28.25f64 / 5.65).ln(), epsilon = 1e-12);
        assert!((rho - 32.19).abs() < 0.5);
    }

    #[test]
    fn rho_example62() {
        let cfg = GainConfig::new(1.62, 10.0, 20.0, 20.0).with_beta13(2.0);
        let (e2max, rho) = determine_rho(SwitchErrors::new(-1.0, 2.0), 1.01, 5.49, &cfg).unwrap();
        assert_abs_diff_eq!(e2max, 2.0);
        assert!((rho - 32.19).abs() < 0.5);
    }

    #[test]
    fn rho_floor() {
        let cfg = GainConfig::new(0.0, 20.0, 2.0, 2.0);
        let (e2max, rho) = determine_rho(SwitchErrors::new(0.0, 0.0), 1.0, 10.0, &cfg).unwrap();
        assert_eq!(e2max, 0.0);
        assert_eq!(rho, RHO_MIN);
    }

    #[test]
    fn rho_saturation() {
        let cfg = ex41();
        let r = determine_rho(SwitchErrors::new(2.0, -5.0), 1.25, 11.0, &cfg);
        assert!(matches!(r, Err(GainError::SaturatedGain { .. })));
    }

    #[test]
    fn conditions_example41_pass() {
        let cfg = ex41();
        let reach = select_reach_params(&cfg, 6.0, Some(2.0), Some(5.0)).unwrap();
        let d = design_gains(SwitchErrors::new(2.0, -5.0), &reach, &cfg).unwrap();
        let rep = validate_conditions(&d.gains, d.switch, &cfg);
        assert!(rep.all_pass(), "{rep:?}");
        assert!(rep.conditions.iter().all(|c| c.slack > 0.0));
    }

    #[test]
    fn conditions_open_k1_interval() {
        let cfg = ex41();
        let reach = select_reach_params(&cfg, 6.0, Some(2.0), Some(5.0)).unwrap();
        let e = SwitchErrors::new(2.0, -5.0);
        let g = GainSet::with_surface(&reach, 2.5, 19.0, 40.0);
        let rep = validate_conditions(&g, e, &cfg);
        assert!(!rep.get("k1 interval").unwrap().pass);
        assert!(!rep.all_pass());
    }

    #[test]
    fn conditions_strict_k2() {
        let cfg = GainConfig::new(5.0, 20.0, 50.0, 20.0);
        let reach = select_reach_params(&cfg, 6.0, Some(2.0), Some(5.0)).unwrap();
        let e = SwitchErrors::new(1.0, 1.0);
        let k2 = 1.0 * 1.0 + 5.0;
        let g = GainSet::with_surface(&reach, 1.0, k2, 40.0);
        let rep = validate_conditions(&g, e, &cfg);
        assert!(k2_lower_bound(e, 1.0, 5.0) >= k2);
        assert!(!rep.get("k2 lower bound").unwrap().pass);
    }

    #[test]
    fn adapt_keeps_nominal_when_feasible() {
        let cfg = ex41();
        let reach = select_reach_params(&cfg, 6.0, Some(2.0), Some(5.0)).unwrap();
        let a = adapt_reach_params(100.0, -10.0, &reach, &cfg, &ReachPolicy::default()).unwrap();
        assert_eq!(a.e1c, 2.0);
        assert_eq!(a.e2c, 5.0);
        assert!(a.kc >= 6.0);
    }

    #[test]
    fn adapt_shrinks_band_for_inside_start() {
        let cfg = ex41();
        let reach = select_reach_params(&cfg, 6.0, Some(2.0), Some(5.0)).unwrap();
        let a = adapt_reach_params(1.0, 3.0, &reach, &cfg, &ReachPolicy::default()).unwrap();
        assert_eq!(a.e1c, 0.5);
        assert!(a.e2c > a.e1c && a.e2c * a.e2c <= 15.0 * 0.5 + 1e-12);
    }
}
