//! Serializable scenario descriptions and the built-in registry.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::{
    FixedSurface, OrbitAxis, PidGains, Reference, ReferenceError, Segment, Shape, SlidingController, Smoothing,
};
use crate::gains::{adapt_reach_params, select_reach_params, GainConfig, GainError, ReachPolicy};
use crate::plant::uav::{UavParams, UavState};
use crate::plant::{DisturbanceSpec, KnownTerm, NoiseModel, NoiseSpec};
use crate::sim::uav::{CommandFilter, UavMission, UavTrace};
use crate::sim::{LoopController, PlantKind, ScalarLoop, SimConfig, SimError, Trace};
use crate::sliding::ErrorState;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("unknown scenario `{0}`")]
    Unknown(String),
    #[error("scenario `{name}`: {msg}")]
    Invalid { name: String, msg: String },
    #[error(transparent)]
    Gain(#[from] GainError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Reference(#[from] ReferenceError),
    #[error("cannot parse scenario: {0}")]
    Parse(#[from] toml::de::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    Ideal,
    Smooth,
    Pid,
    Pi,
}

impl ControllerKind {
    pub fn smoothing(self) -> Option<Smoothing> {
        match self {
            ControllerKind::Ideal => Some(Smoothing::Ideal),
            ControllerKind::Smooth => Some(Smoothing::Tanh),
            _ => None,
        }
    }
}

/// Gain design inputs of one sliding controller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlidingSpec {
    pub config: GainConfig,
    pub kc: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e1c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e2c: Option<f64>,
    /// Adapt `kc`, `e1c` to the initial errors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adapt: Option<ReachPolicy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed: Option<FixedSurface>,
}

impl SlidingSpec {
    pub fn new(config: GainConfig, kc: f64, e1c: f64, e2c: f64) -> Self {
        SlidingSpec { config, kc, e1c: Some(e1c), e2c: Some(e2c), adapt: None, fixed: None }
    }

    /// Controller for a run starting from errors `e0`.
    pub fn build(&self, e0: ErrorState, smoothing: Smoothing) -> Result<SlidingController, GainError> {
        let nominal = select_reach_params(&self.config, self.kc, self.e1c, self.e2c)?;
        let reach = match &self.adapt {
            Some(p) => adapt_reach_params(e0.e1, e0.e2, &nominal, &self.config, p)?,
            None => nominal,
        };
        let c = SlidingController::new(self.config, reach, smoothing);
        Ok(match self.fixed {
            Some(f) => c.with_fixed_surface(f),
            None => c,
        })
    }
}

fn default_pid() -> PidGains {
    PidGains::new(3.0, 1.0, 3.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalarSystem {
    pub x0: [f64; 2],
    #[serde(default)]
    pub known: KnownTerm,
    pub reference: Reference,
    pub disturbance: DisturbanceSpec,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sliding: Option<SlidingSpec>,
    /// Used by the PID and PI controllers.
    #[serde(default = "default_pid")]
    pub pid: PidGains,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UavReferences {
    pub x: Reference,
    pub y: Reference,
    pub z: Reference,
    pub psi: Reference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UavSystem {
    #[serde(default)]
    pub params: UavParams,
    pub x0: UavState,
    pub references: UavReferences,
    /// External force on each position channel; channel `i` is seeded with `seed + i`.
    pub position_delta: DisturbanceSpec,
    /// External torque on each attitude channel.
    pub attitude_delta: DisturbanceSpec,
    pub position: SlidingSpec,
    pub attitude: SlidingSpec,
    #[serde(default)]
    pub filter: CommandFilter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "plant", rename_all = "snake_case")]
pub enum System {
    DoubleIntegrator(ScalarSystem),
    FirstOrder(ScalarSystem),
    Uav(Box<UavSystem>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub controller: ControllerKind,
    pub sim: SimConfig,
    pub system: System,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunOutput {
    Scalar(Trace),
    Uav(UavTrace),
}

impl ScenarioSpec {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario specs always serialize")
    }

    fn invalid(&self, msg: impl Into<String>) -> ScenarioError {
        ScenarioError::Invalid { name: self.name.clone(), msg: msg.into() }
    }

    /// Checks that `Ld` covers the disturbance bound plus the reference
    /// acceleration bound for scalar sliding scenarios.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.sim.validate()?;
        match &self.system {
            System::DoubleIntegrator(s) | System::FirstOrder(s) => {
                s.reference.validate()?;
                if self.controller.smoothing().is_some() {
                    let sl =
                        s.sliding.as_ref().ok_or_else(|| self.invalid("sliding controller needs a `sliding` table"))?;
                    sl.config.validate()?;
                    let need = s.disturbance.bound() + s.reference.accel_bound(self.sim.t_end);
                    if need > sl.config.ld * (1.0 + 1e-9) {
                        return Err(self
                            .invalid(format!("Ld = {} does not cover sup|delta| + sup|xd''| = {need}", sl.config.ld)));
                    }
                }
                if matches!(self.system, System::FirstOrder(_)) && self.controller != ControllerKind::Pi {
                    return Err(self.invalid("the first-order plant only supports the pi controller"));
                }
                if matches!(self.system, System::DoubleIntegrator(_)) && self.controller == ControllerKind::Pi {
                    return Err(self.invalid("the pi controller needs the first-order plant"));
                }
            }
            System::Uav(u) => {
                if self.controller.smoothing().is_none() {
                    return Err(self.invalid("the UAV mission needs a sliding controller"));
                }
                for r in [&u.references.x, &u.references.y, &u.references.z, &u.references.psi] {
                    r.validate()?;
                }
                u.position.config.validate()?;
                u.attitude.config.validate()?;
            }
        }
        Ok(())
    }

    pub fn with_controller(mut self, kind: ControllerKind) -> Self {
        self.controller = kind;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.sim.seed = seed;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.sim.dt = dt;
        self
    }

    pub fn build_scalar(&self) -> Result<ScalarLoop, ScenarioError> {
        let (plant, s) = match &self.system {
            System::DoubleIntegrator(s) => (PlantKind::DoubleIntegrator, s),
            System::FirstOrder(s) => (PlantKind::FirstOrder, s),
            System::Uav(_) => return Err(self.invalid("not a scalar scenario")),
        };
        let r0 = s.reference.eval(0.0);
        let e0 = ErrorState::new(r0[0] - s.x0[0], r0[1] - s.x0[1]);
        let controller = match self.controller {
            ControllerKind::Pid => LoopController::Pid(s.pid),
            ControllerKind::Pi => LoopController::Pi { kp: s.pid.kp, ki: s.pid.ki },
            kind => {
                let sl = s.sliding.as_ref().ok_or_else(|| self.invalid("missing `sliding` table"))?;
                LoopController::Sliding(sl.build(e0, kind.smoothing().unwrap())?)
            }
        };
        Ok(ScalarLoop {
            plant,
            known: s.known,
            disturbance: s.disturbance.build(self.sim.seed),
            noise: s.noise.clone(),
            reference: s.reference.clone(),
            controller,
            x0: s.x0,
        })
    }

    pub fn build_uav(&self) -> Result<UavMission, ScenarioError> {
        let System::Uav(u) = &self.system else {
            return Err(self.invalid("not a UAV scenario"));
        };
        let smoothing = self.controller.smoothing().ok_or_else(|| self.invalid("needs a sliding controller"))?;
        let refs = [u.references.x.clone(), u.references.y.clone(), u.references.z.clone(), u.references.psi.clone()];
        let err = |i: usize, r: &Reference| {
            let v = r.eval(0.0);
            ErrorState::new(v[0] - u.x0.pos[i], v[1] - u.x0.vel[i])
        };
        let mut ctrls = Vec::with_capacity(6);
        for i in 0..3 {
            ctrls.push(u.position.build(err(i, &refs[i]), smoothing)?);
        }
        ctrls.push(u.attitude.build(err(3, &refs[3]), smoothing)?);
        // Tilt references start at the initial attitude.
        for _ in 0..2 {
            ctrls.push(u.attitude.build(ErrorState::new(0.0, 0.0), smoothing)?);
        }
        let controllers: [SlidingController; 6] = ctrls.try_into().expect("six controllers");
        let seed = self.sim.seed;
        let big_delta = std::array::from_fn(|i| {
            let spec = if i < 3 { &u.position_delta } else { &u.attitude_delta };
            spec.build(seed.wrapping_add(i as u64))
        });
        Ok(UavMission { params: u.params, references: refs, controllers, big_delta, filter: u.filter, x0: u.x0 })
    }

    pub fn run(&self) -> Result<RunOutput, ScenarioError> {
        self.validate()?;
        match &self.system {
            System::Uav(_) => Ok(RunOutput::Uav(self.build_uav()?.run(&self.sim)?)),
            _ => Ok(RunOutput::Scalar(self.build_scalar()?.run(&self.sim)?)),
        }
    }
}

fn constant(value: f64) -> Reference {
    Reference::constant(value)
}

/// The double integrator with `e(0) = (100, -10)`.
fn example4(name: &str, controller: ControllerKind, dt: f64) -> ScenarioSpec {
    ScenarioSpec {
        name: name.into(),
        description: "double integrator from e(0) = (100, -10) with d = 3 + 2 sin(0.3t) sin(1.6t)".into(),
        controller,
        sim: SimConfig::new(dt, 40.0),
        system: System::DoubleIntegrator(ScalarSystem {
            x0: [-100.0, 10.0],
            known: KnownTerm::Zero,
            reference: constant(0.0),
            disturbance: DisturbanceSpec::SinusoidalProduct { offset: 3.0, amplitude: 2.0, w1: 0.3, w2: 1.6 },
            noise: NoiseModel::default(),
            sliding: Some(SlidingSpec::new(GainConfig::new(5.0, 20.0, 50.0, 20.0), 6.0, 2.0, 5.0)),
            pid: default_pid(),
        }),
    }
}

/// Nonlinear plant tracking a sinusoid from `x(0) = (10, -1)`.
fn example6(name: &str, controller: ControllerKind, dt: f64) -> ScenarioSpec {
    ScenarioSpec {
        name: name.into(),
        description: "h = 5 cbrt(x1) sin(0.5t), xd = 2 + 0.5 sin(0.8t), x(0) = (10, -1)".into(),
        controller,
        sim: SimConfig::new(dt, 20.0),
        system: System::DoubleIntegrator(ScalarSystem {
            x0: [10.0, -1.0],
            known: KnownTerm::CubeRootSine { gain: 5.0, omega: 0.5 },
            reference: Reference::from_shape(Shape::Sine { offset: 2.0, amplitude: 0.5, omega: 0.8, phase: 0.0 }),
            disturbance: DisturbanceSpec::SinusoidalProduct { offset: 1.0, amplitude: 0.3, w1: 0.3, w2: 1.6 },
            noise: NoiseModel::default(),
            sliding: Some(SlidingSpec::new(GainConfig::new(1.62, 10.0, 20.0, 20.0).with_beta13(2.0), 2.5, 1.0, 2.0)),
            pid: default_pid(),
        }),
    }
}

/// Double integrator with a constant disturbance, for the PID contrast.
fn constant_disturbance(name: &str, controller: ControllerKind, e1_0: f64) -> ScenarioSpec {
    ScenarioSpec {
        name: name.into(),
        description: format!("double integrator, constant d = 2, e(0) = ({e1_0}, 0)"),
        controller,
        sim: SimConfig::new(1e-3, 40.0),
        system: System::DoubleIntegrator(ScalarSystem {
            x0: [-e1_0, 0.0],
            known: KnownTerm::Zero,
            reference: constant(0.0),
            disturbance: DisturbanceSpec::Constant { value: 2.0 },
            noise: NoiseModel::default(),
            sliding: Some(SlidingSpec::new(GainConfig::new(2.5, 20.0, 20.0, 20.0), 6.0, 2.0, 5.0)),
            pid: default_pid(),
        }),
    }
}

fn noise_filter() -> ScenarioSpec {
    let mut sim = SimConfig::new(1e-4, 10.0);
    sim.event_tolerance = 1e-3;
    ScenarioSpec {
        name: "noise-filter".into(),
        description: "on-surface start with position noise 0.01 sin(50t)".into(),
        controller: ControllerKind::Ideal,
        sim,
        system: System::DoubleIntegrator(ScalarSystem {
            x0: [0.0, 0.0],
            known: KnownTerm::Zero,
            reference: constant(0.0),
            disturbance: DisturbanceSpec::zero(),
            noise: NoiseModel {
                position: NoiseSpec::Sine { amplitude: 0.01, omega: 50.0, phase: 0.0 },
                velocity: NoiseSpec::None,
            },
            sliding: Some(SlidingSpec::new(GainConfig::new(1.0, 10.0, 20.0, 20.0), 2.0, 1.0, 2.0)),
            pid: default_pid(),
        }),
    }
}

fn pi_baseline() -> ScenarioSpec {
    ScenarioSpec {
        name: "pi-baseline".into(),
        description: "first-order plant with PI control and constant d = 1".into(),
        controller: ControllerKind::Pi,
        sim: SimConfig::new(1e-3, 20.0),
        system: System::FirstOrder(ScalarSystem {
            x0: [-10.0, 0.0],
            known: KnownTerm::Zero,
            reference: constant(0.0),
            disturbance: DisturbanceSpec::Constant { value: 1.0 },
            noise: NoiseModel::default(),
            sliding: None,
            pid: PidGains::new(2.0, 1.0, 0.0),
        }),
    }
}

/// Length of the straight cruise in x.
pub const LINE_LENGTH: f64 = 1.5;
pub const ORBIT_RADIUS: f64 = 5.0;
pub const ORBIT_HEIGHT: f64 = 2.5;
pub const MISSION_JUMP: f64 = 6.0;

/// Hover at 1 m, cruise along x, then a circle at 2.5 m; the height jumps at 6 s.
pub fn uav_mission_references() -> UavReferences {
    mission_references(LINE_LENGTH)
}

/// Mission references with a cruise of `line_length` metres.
pub fn mission_references(line_length: f64) -> UavReferences {
    // Quintic rest-to-rest profile over three seconds.
    let (l, d) = (line_length, 3.0f64);
    let line = Shape::Polynomial {
        coeffs: vec![0.0, 0.0, 0.0, 10.0 * l / d.powi(3), -15.0 * l / d.powi(4), 6.0 * l / d.powi(5)],
    };
    let orbit = |axis, center| Shape::Orbit { center, radius: ORBIT_RADIUS, omega: 0.2, spinup: 3.0, phase: 0.0, axis };
    let seg = |start, shape| Segment { start, shape };
    UavReferences {
        x: Reference {
            segments: vec![
                seg(0.0, Shape::Constant { value: 0.0 }),
                seg(3.0, line),
                seg(MISSION_JUMP, orbit(OrbitAxis::Cos, l - ORBIT_RADIUS)),
            ],
            jump_times: vec![MISSION_JUMP],
        },
        y: Reference {
            segments: vec![seg(0.0, Shape::Constant { value: 0.0 }), seg(MISSION_JUMP, orbit(OrbitAxis::Sin, 0.0))],
            jump_times: vec![MISSION_JUMP],
        },
        z: Reference {
            segments: vec![
                seg(0.0, Shape::Constant { value: 1.0 }),
                seg(MISSION_JUMP, Shape::Constant { value: ORBIT_HEIGHT }),
            ],
            jump_times: vec![MISSION_JUMP],
        },
        psi: constant(0.0),
    }
}

fn uav_mission() -> ScenarioSpec {
    let mut sim = SimConfig::new(1e-3, 20.0);
    sim.event_tolerance = 0.04;
    ScenarioSpec {
        name: "uav-mission".into(),
        description: "quadrotor: hover 1 m, line cruise, circle of radius 5 m at 2.5 m; jump at 6 s".into(),
        controller: ControllerKind::Smooth,
        sim,
        system: System::Uav(Box::new(UavSystem {
            params: UavParams::default(),
            x0: UavState { pos: [0.3, 0.2, 0.05, 0.0, 0.0, 0.0], vel: [-0.02, -0.01, 0.01, 0.0, 0.0, 0.0] },
            references: uav_mission_references(),
            position_delta: DisturbanceSpec::BoundedRandom { bound: 1.0, components: 4, max_omega: 3.0 },
            attitude_delta: DisturbanceSpec::BoundedRandom { bound: 0.05, components: 4, max_omega: 3.0 },
            position: SlidingSpec::new(GainConfig::new(4.5, 10.0, 6.0, 2.0).with_beta13(2.0), 5.5, 1.0, 1.2),
            attitude: SlidingSpec::new(GainConfig::new(100.0, 1000.0, 6.0, 3.0).with_beta13(20.0), 120.0, 1.0, 2.0),
            filter: CommandFilter { omega: 120.0, zeta: 0.9 },
        })),
    }
}

/// All built-in scenarios.
pub fn registry() -> Vec<ScenarioSpec> {
    vec![
        example4("example41", ControllerKind::Ideal, 1e-4),
        example4("example42", ControllerKind::Smooth, 1e-3),
        example6("example61", ControllerKind::Ideal, 1e-4),
        example6("example62", ControllerKind::Smooth, 1e-3),
        constant_disturbance("pid-constant", ControllerKind::Pid, 1.0),
        constant_disturbance("pid-windup", ControllerKind::Pid, 100.0),
        constant_disturbance("sliding-windup", ControllerKind::Ideal, 100.0),
        pi_baseline(),
        noise_filter(),
        uav_mission(),
    ]
}

pub fn find(name: &str) -> Result<ScenarioSpec, ScenarioError> {
    registry().into_iter().find(|s| s.name == name).ok_or_else(|| ScenarioError::Unknown(name.to_string()))
}
