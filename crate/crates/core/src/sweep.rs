//! Parameter sweeps and the randomized non-overshoot suite.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::{Reference, Smoothing};
use crate::gains::{GainConfig, ReachPolicy};
use crate::plant::{DisturbanceSpec, KnownTerm, NoiseModel};
use crate::scenario::{RunOutput, ScenarioError, ScenarioSpec, SlidingSpec, System};
use crate::sim::{
    detect_overshoot, metrics_report, LoopController, MetricsReport, Overshoot, PlantKind, ScalarLoop, SimConfig,
};
use crate::sliding::ErrorState;

pub const DEFAULT_MAX_CELLS: usize = 10_000;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("grid has {cells} cells, above the cap of {cap}")]
    TooLarge { cells: usize, cap: usize },
    #[error("unknown sweep parameter `{0}`")]
    UnknownParam(String),
    #[error("parameter `{0}` has no values")]
    EmptyParam(String),
    #[error("sweeps need a scalar scenario")]
    NotScalar,
}

/// Names accepted by [`apply_param`].
pub const SWEEP_PARAMS: [&str; 13] =
    ["dt", "t_end", "seed", "rho0", "rho_c0", "ld", "k2_max", "kc", "e1c", "e2c", "beta13", "x1_0", "x2_0"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepParam {
    pub name: String,
    pub values: Vec<f64>,
}

/// Sets one named parameter of a scalar scenario.
pub fn apply_param(spec: &mut ScenarioSpec, name: &str, value: f64) -> Result<(), SweepError> {
    match name {
        "dt" => spec.sim.dt = value,
        "t_end" => spec.sim.t_end = value,
        "seed" => spec.sim.seed = value as u64,
        _ => {
            let sys = match &mut spec.system {
                System::DoubleIntegrator(s) | System::FirstOrder(s) => s,
                System::Uav(_) => return Err(SweepError::NotScalar),
            };
            match name {
                "x1_0" => sys.x0[0] = value,
                "x2_0" => sys.x0[1] = value,
                _ => {
                    let Some(sl) = sys.sliding.as_mut() else {
                        return Err(SweepError::UnknownParam(name.to_string()));
                    };
                    match name {
                        "rho0" => sl.config.rho0 = value,
                        "rho_c0" => sl.config.rho_c0 = value,
                        "ld" => sl.config.ld = value,
                        "k2_max" => sl.config.k2_max = value,
                        "beta13" => sl.config.beta13 = value,
                        "kc" => sl.kc = value,
                        "e1c" => sl.e1c = Some(value),
                        "e2c" => sl.e2c = Some(value),
                        _ => return Err(SweepError::UnknownParam(name.to_string())),
                    }
                }
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub values: Vec<f64>,
    pub metrics: Option<MetricsReport>,
    pub error: Option<String>,
}

/// Runs the Cartesian product of `params` over `base`, in parallel.
pub fn run_sweep(base: &ScenarioSpec, params: &[SweepParam], max_cells: usize) -> Result<Vec<SweepRow>, SweepError> {
    if matches!(base.system, System::Uav(_)) {
        return Err(SweepError::NotScalar);
    }
    let mut cells = 1usize;
    for p in params {
        if p.values.is_empty() {
            return Err(SweepError::EmptyParam(p.name.clone()));
        }
        if !SWEEP_PARAMS.contains(&p.name.as_str()) {
            return Err(SweepError::UnknownParam(p.name.clone()));
        }
        cells = cells.saturating_mul(p.values.len());
    }
    if cells > max_cells {
        return Err(SweepError::TooLarge { cells, cap: max_cells });
    }
    let grid: Vec<Vec<f64>> = (0..cells)
        .map(|mut k| {
            let mut v = vec![0.0; params.len()];
            for (j, p) in params.iter().enumerate().rev() {
                v[j] = p.values[k % p.values.len()];
                k /= p.values.len();
            }
            v
        })
        .collect();
    grid.into_par_iter()
        .map(|values| {
            let mut spec = base.clone();
            for (p, &v) in params.iter().zip(&values) {
                apply_param(&mut spec, &p.name, v)?;
            }
            let tol = spec.sim.event_tolerance;
            Ok(match spec.run() {
                Ok(RunOutput::Scalar(tr)) => SweepRow { values, metrics: Some(metrics_report(&tr, tol)), error: None },
                Ok(RunOutput::Uav(_)) => unreachable!("scalar base"),
                Err(e) => SweepRow { values, metrics: None, error: Some(e.to_string()) },
            })
        })
        .collect()
}

/// Randomized non-overshoot suite on the double integrator `x'' = u - d`
/// with `x_d = 0`, so the error dynamics see `d` directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloConfig {
    pub runs: usize,
    pub seed: u64,
    /// Initial errors are uniform on `[-e_max, e_max]^2`.
    pub e_max: f64,
    pub config: GainConfig,
    pub kc: f64,
    pub e1c: f64,
    pub e2c: f64,
    pub policy: ReachPolicy,
    pub smoothing: Smoothing,
    /// Upper bound on the step; each run also keeps `kc * dt` below
    /// `chatter_fraction * e2c`.
    pub dt: f64,
    pub chatter_fraction: f64,
    /// Simulated time after the estimated end of the reaching phase.
    pub settle_time: f64,
    pub tolerance: f64,
}

impl MonteCarloConfig {
    /// Nominal design with `Ld = 5`, `|d| <= Ld`.
    pub fn nominal(smoothing: Smoothing) -> Self {
        MonteCarloConfig {
            runs: 200,
            seed: 2024,
            e_max: 100.0,
            config: GainConfig::new(5.0, 20.0, 50.0, 200.0),
            kc: 6.0,
            e1c: 2.0,
            e2c: 5.0,
            policy: ReachPolicy::default(),
            smoothing,
            dt: 2e-4,
            chatter_fraction: 0.05,
            settle_time: 8.0,
            tolerance: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloRun {
    pub index: usize,
    pub e1_0: f64,
    pub e2_0: f64,
    pub kc: f64,
    pub t_end: f64,
    pub dt: f64,
    pub overshoot: Option<Overshoot>,
    pub final_e1: f64,
    pub error: Option<String>,
}

impl MonteCarloRun {
    pub fn passed(&self) -> bool {
        self.error.is_none() && self.overshoot.is_none()
    }
}

fn one_run(cfg: &MonteCarloConfig, index: usize) -> MonteCarloRun {
    let seed = cfg.seed.wrapping_add(index as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let e1_0 = rng.gen_range(-cfg.e_max..=cfg.e_max);
    let e2_0 = rng.gen_range(-cfg.e_max..=cfg.e_max);
    let mut out = MonteCarloRun {
        index,
        e1_0,
        e2_0,
        kc: f64::NAN,
        t_end: 0.0,
        dt: cfg.dt,
        overshoot: None,
        final_e1: f64::NAN,
        error: None,
    };
    let spec = SlidingSpec {
        config: cfg.config,
        kc: cfg.kc,
        e1c: Some(cfg.e1c),
        e2c: Some(cfg.e2c),
        adapt: Some(cfg.policy),
        fixed: None,
    };
    let ctrl = match spec.build(ErrorState::new(e1_0, e2_0), cfg.smoothing) {
        Ok(c) => c,
        Err(e) => {
            out.error = Some(e.to_string());
            return out;
        }
    };
    let r = ctrl.reach;
    out.kc = r.kc;
    // Turn-around, cruise at e2c, then settle.
    let margin = r.kc - cfg.config.ld;
    let t_reach = (e2_0.abs() + r.e2c) / margin + e1_0.abs() / r.e2c + e2_0 * e2_0 / (2.0 * margin * r.e2c);
    out.t_end = (t_reach + cfg.settle_time).ceil();
    let dist = DisturbanceSpec::BoundedRandom { bound: cfg.config.ld, components: 4, max_omega: 3.0 };
    let lp = ScalarLoop {
        plant: PlantKind::DoubleIntegrator,
        known: KnownTerm::Zero,
        disturbance: dist.build(seed),
        noise: NoiseModel::default(),
        reference: Reference::constant(0.0),
        controller: LoopController::Sliding(ctrl),
        x0: [-e1_0, -e2_0],
    };
    let dt = cfg.dt.min(cfg.chatter_fraction * r.e2c / r.kc);
    out.dt = dt;
    let mut sim = SimConfig::new(dt, out.t_end);
    sim.seed = seed;
    sim.event_tolerance = cfg.tolerance;
    match lp.run(&sim) {
        Ok(tr) => {
            out.overshoot = detect_overshoot(&tr, cfg.tolerance);
            out.final_e1 = tr.rows.last().map_or(f64::NAN, |r| r.e1);
        }
        Err(e) => out.error = Some(e.to_string()),
    }
    out
}

/// Runs the suite in parallel; results are in index order.
pub fn monte_carlo(cfg: &MonteCarloConfig) -> Vec<MonteCarloRun> {
    (0..cfg.runs).into_par_iter().map(|i| one_run(cfg, i)).collect()
}

impl From<SweepError> for ScenarioError {
    fn from(e: SweepError) -> Self {
        ScenarioError::Invalid { name: "sweep".into(), msg: e.to_string() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::find;

    #[test]
    fn grid_cap_is_enforced() {
        let base = find("example62").unwrap();
        let p = SweepParam { name: "rho0".into(), values: vec![1.5; 11] };
        assert!(matches!(run_sweep(&base, &[p], 10), Err(SweepError::TooLarge { cells: 11, cap: 10 })));
    }

    #[test]
    fn unknown_param_rejected() {
        let base = find("example62").unwrap();
        let p = SweepParam { name: "bogus".into(), values: vec![1.0] };
        assert!(matches!(run_sweep(&base, &[p], 10), Err(SweepError::UnknownParam(_))));
    }

    #[test]
    fn grid_order_is_row_major() {
        let mut base = find("example62").unwrap();
        base.sim.t_end = 0.01;
        let ps = [
            SweepParam { name: "rho0".into(), values: vec![10.0, 20.0] },
            SweepParam { name: "seed".into(), values: vec![1.0, 2.0, 3.0] },
        ];
        let rows = run_sweep(&base, &ps, 100).unwrap();
        assert_eq!(rows.len(), 6);
        assert_eq!(rows[1].values, vec![10.0, 2.0]);
        assert_eq!(rows[3].values, vec![20.0, 1.0]);
    }

    #[test]
    fn monte_carlo_is_reproducible() {
        let mut cfg = MonteCarloConfig::nominal(Smoothing::Tanh);
        cfg.runs = 2;
        cfg.dt = 1e-3;
        cfg.settle_time = 1.0;
        cfg.e_max = 5.0;
        let a = monte_carlo(&cfg);
        assert_eq!(a, monte_carlo(&cfg));
        assert_ne!(a[0].e1_0, a[1].e1_0);
    }
}
