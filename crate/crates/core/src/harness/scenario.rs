//! Scenario files: TOML with a `schema` version, unknown keys rejected,
//! defaults filled from the reference parameter set.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::barrier::{BarrierForm, BarrierParams};
use crate::controller::{AlphaFunction, ControllerParams, EvalPoint};
use crate::gp::{KernelParams, Point};
use crate::perception::dbscan::DbscanParams;
use crate::perception::grid::GridSpec;
use crate::perception::kalman::KalmanParams;
use crate::perception::mvee::MveeParams;
use crate::perception::PerceptionParams;
use crate::sim::{LidarSpec, Motion, ObstacleSpec, RobotState};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed scenario: {0}")]
    Parse(String),
    #[error("invalid value for `{field}`: {message}")]
    Validation { field: String, message: String },
}

impl ScenarioError {
    fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Validation {
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Log barrier with the obstacle-motion term.
    #[default]
    Dlgp,
    /// Log barrier, `dh/dt` dropped from the constraint.
    DlgpNoDhdt,
    /// Linear (non-log) barrier with the obstacle-motion term.
    GpLinear,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Dlgp, Variant::DlgpNoDhdt, Variant::GpLinear];

    pub fn name(&self) -> &'static str {
        match self {
            Variant::Dlgp => "dlgp",
            Variant::DlgpNoDhdt => "dlgp-no-dhdt",
            Variant::GpLinear => "gp-linear",
        }
    }

    pub fn form(&self) -> BarrierForm {
        match self {
            Variant::GpLinear => BarrierForm::Linear,
            _ => BarrierForm::Log,
        }
    }

    pub fn ignores_time_derivative(&self) -> bool {
        matches!(self, Variant::DlgpNoDhdt)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL.into_iter().find(|v| v.name() == s.trim()).ok_or_else(|| {
            ScenarioError::invalid(
                "variant",
                format!("unknown variant `{s}` (expected dlgp, dlgp-no-dhdt or gp-linear)"),
            )
        })
    }
}

// ---- raw file layout ----

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    schema: Option<u32>,
    name: Option<String>,
    seed: Option<u64>,
    dt: Option<f64>,
    max_time: Option<f64>,
    variant: Option<Variant>,
    #[serde(default)]
    robot: RawRobot,
    goal: RawGoal,
    #[serde(default)]
    world: RawWorld,
    #[serde(default)]
    controller: RawController,
    #[serde(default)]
    perception: RawPerception,
    #[serde(default)]
    sensor: RawSensor,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRobot {
    start: Option<[f64; 2]>,
    heading: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGoal {
    position: [f64; 2],
    arrival_radius: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWorld {
    #[serde(default)]
    obstacles: Vec<RawObstacle>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawObstacle {
    id: String,
    radius: f64,
    center: [f64; 2],
    #[serde(default)]
    motion: RawMotion,
}

#[derive(Debug, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawMotion {
    #[default]
    Static,
    ConstantVelocity {
        velocity: [f64; 2],
    },
    Sinusoidal {
        axis: [f64; 2],
        amplitude: f64,
        period: f64,
    },
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawController {
    c_s: Option<f64>,
    d_shift: Option<f64>,
    mu_floor: Option<f64>,
    length_scale: Option<f64>,
    jitter: Option<f64>,
    alpha_slope: Option<f64>,
    lead_distance: Option<f64>,
    u_max: Option<f64>,
    v_max: Option<f64>,
    omega_max: Option<f64>,
    dataset_cap: Option<usize>,
    evaluate_at: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPerception {
    grid_size: Option<f64>,
    resolution: Option<f64>,
    dbscan_eps: Option<f64>,
    dbscan_min_pts: Option<usize>,
    d_max: Option<f64>,
    mvee_tolerance: Option<f64>,
    mvee_max_iterations: Option<usize>,
    b_min: Option<f64>,
    q_pos: Option<f64>,
    q_vel: Option<f64>,
    q_acc: Option<f64>,
    q_shape: Option<f64>,
    r_center: Option<f64>,
    r_shape: Option<f64>,
    max_misses: Option<u32>,
    warmup_updates: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSensor {
    beams: Option<usize>,
    range_max: Option<f64>,
    noise_std: Option<f64>,
}

// ---- validated config ----

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub seed: u64,
    pub dt: f64,
    pub max_time: f64,
    pub variant: Variant,
    pub start: RobotState,
    pub goal: Point,
    pub arrival_radius: f64,
    pub obstacles: Vec<ObstacleSpec>,
    pub kernel: KernelParams,
    pub barrier: BarrierParams,
    pub controller: ControllerParams,
    pub dataset_cap: usize,
    pub perception: PerceptionParams,
    pub sensor: LidarSpec,
}

impl ScenarioConfig {
    pub const DEFAULT_START: [f64; 2] = [-8.0, 3.0];
    pub const DEFAULT_GOAL: [f64; 2] = [10.0, -2.0];

    /// Defaults with the given goal and obstacles; start faces the goal.
    pub fn with_world(goal: Point, obstacles: Vec<ObstacleSpec>) -> Self {
        let start = Point::new(Self::DEFAULT_START[0], Self::DEFAULT_START[1]);
        let heading = (goal - start).y.atan2((goal - start).x);
        Self {
            name: "scenario".into(),
            seed: 0,
            dt: 0.05,
            max_time: 60.0,
            variant: Variant::Dlgp,
            start: RobotState::new(start.x, start.y, heading),
            goal,
            arrival_radius: 0.05,
            obstacles,
            kernel: KernelParams::default(),
            barrier: BarrierParams::default(),
            controller: ControllerParams::default(),
            dataset_cap: 60,
            perception: PerceptionParams::default(),
            sensor: LidarSpec::default(),
        }
    }

    /// Copy configured for `variant`.
    pub fn for_variant(&self, variant: Variant) -> Self {
        let mut cfg = self.clone();
        cfg.variant = variant;
        cfg
    }

    pub fn barrier_form(&self) -> BarrierForm {
        self.variant.form()
    }

    /// Controller parameters with the variant's ablation applied.
    pub fn effective_controller(&self) -> ControllerParams {
        ControllerParams {
            ignore_time_derivative: self.variant.ignores_time_derivative(),
            ..self.controller
        }
    }
}

fn positive(field: &str, v: f64) -> Result<f64, ScenarioError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(ScenarioError::invalid(field, format!("must be positive, got {v}")))
    }
}

fn non_negative(field: &str, v: f64) -> Result<f64, ScenarioError> {
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(ScenarioError::invalid(field, format!("must be non-negative, got {v}")))
    }
}

fn finite_point(field: &str, p: [f64; 2]) -> Result<Point, ScenarioError> {
    if p.iter().all(|x| x.is_finite()) {
        Ok(Point::new(p[0], p[1]))
    } else {
        Err(ScenarioError::invalid(field, "coordinates must be finite"))
    }
}

pub fn parse_scenario(text: &str) -> Result<ScenarioConfig, ScenarioError> {
    let raw: RawScenario = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    validate(raw)
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioConfig, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut cfg = parse_scenario(&text)?;
    if cfg.name == "scenario" {
        if let Some(stem) = path.file_stem() {
            cfg.name = stem.to_string_lossy().into_owned();
        }
    }
    Ok(cfg)
}

fn validate(raw: RawScenario) -> Result<ScenarioConfig, ScenarioError> {
    if let Some(v) = raw.schema {
        if v != SCHEMA_VERSION {
            return Err(ScenarioError::invalid(
                "schema",
                format!("unsupported version {v}, expected {SCHEMA_VERSION}"),
            ));
        }
    }
    let goal = finite_point("goal.position", raw.goal.position)?;
    let mut obstacles = Vec::with_capacity(raw.world.obstacles.len());
    for (i, o) in raw.world.obstacles.into_iter().enumerate() {
        let field = |name: &str| format!("world.obstacles[{i}].{name}");
        if o.id.trim().is_empty() {
            return Err(ScenarioError::invalid(field("id"), "must not be empty"));
        }
        if obstacles.iter().any(|x: &ObstacleSpec| x.id == o.id) {
            return Err(ScenarioError::invalid(
                field("id"),
                format!("duplicate obstacle id `{}`", o.id),
            ));
        }
        let motion = match o.motion {
            RawMotion::Static => Motion::Static,
            RawMotion::ConstantVelocity { velocity } => Motion::ConstantVelocity {
                velocity: finite_point(&field("motion.velocity"), velocity)?,
            },
            RawMotion::Sinusoidal {
                axis,
                amplitude,
                period,
            } => {
                let axis = finite_point(&field("motion.axis"), axis)?;
                if axis.norm() == 0.0 {
                    return Err(ScenarioError::invalid(field("motion.axis"), "must be non-zero"));
                }
                Motion::Sinusoidal {
                    axis,
                    amplitude: non_negative(&field("motion.amplitude"), amplitude)?,
                    period: positive(&field("motion.period"), period)?,
                }
            }
        };
        obstacles.push(ObstacleSpec {
            radius: positive(&field("radius"), o.radius)?,
            initial_center: finite_point(&field("center"), o.center)?,
            id: o.id,
            motion,
        });
    }

    let mut cfg = ScenarioConfig::with_world(goal, obstacles);
    if let Some(name) = raw.name {
        cfg.name = name;
    }
    cfg.seed = raw.seed.unwrap_or(cfg.seed);
    cfg.dt = positive("dt", raw.dt.unwrap_or(cfg.dt))?;
    cfg.max_time = positive("max_time", raw.max_time.unwrap_or(cfg.max_time))?;
    cfg.variant = raw.variant.unwrap_or_default();

    let start = finite_point("robot.start", raw.robot.start.unwrap_or(ScenarioConfig::DEFAULT_START))?;
    let heading = match raw.robot.heading {
        Some(h) if h.is_finite() => h,
        Some(_) => return Err(ScenarioError::invalid("robot.heading", "must be finite")),
        None => (goal - start).y.atan2((goal - start).x),
    };
    cfg.start = RobotState::new(start.x, start.y, heading);
    if let Some(r) = raw.goal.arrival_radius {
        cfg.arrival_radius = positive("goal.arrival_radius", r)?;
    }

    let c = raw.controller;
    let c_s = positive("controller.c_s", c.c_s.unwrap_or(cfg.barrier.c_s))?;
    let d_shift = positive("controller.d_shift", c.d_shift.unwrap_or(cfg.barrier.d_shift))?;
    let mu_floor = c.mu_floor.unwrap_or(cfg.barrier.mu_floor);
    if !(mu_floor > 0.0 && mu_floor <= 1e-9) {
        return Err(ScenarioError::invalid("controller.mu_floor", "must lie in (0, 1e-9]"));
    }
    cfg.barrier = BarrierParams { c_s, d_shift, mu_floor };
    cfg.kernel = KernelParams {
        length_scale: positive(
            "controller.length_scale",
            c.length_scale.unwrap_or(cfg.kernel.length_scale),
        )?,
        jitter: non_negative("controller.jitter", c.jitter.unwrap_or(cfg.kernel.jitter))?,
    };
    let defaults = ControllerParams::default();
    cfg.controller = ControllerParams {
        alpha: AlphaFunction {
            slope: positive("controller.alpha_slope", c.alpha_slope.unwrap_or(defaults.alpha.slope))?,
        },
        lead_distance: positive(
            "controller.lead_distance",
            c.lead_distance.unwrap_or(defaults.lead_distance),
        )?,
        u_max: positive("controller.u_max", c.u_max.unwrap_or(defaults.u_max))?,
        v_max: positive("controller.v_max", c.v_max.unwrap_or(defaults.v_max))?,
        omega_max: positive("controller.omega_max", c.omega_max.unwrap_or(defaults.omega_max))?,
        eval_point: match c.evaluate_at.as_deref() {
            None | Some("lead") => EvalPoint::Lead,
            Some("position") => EvalPoint::Position,
            Some(other) => {
                return Err(ScenarioError::invalid(
                    "controller.evaluate_at",
                    format!("expected `lead` or `position`, got `{other}`"),
                ))
            }
        },
        ignore_time_derivative: false,
    };
    cfg.dataset_cap = c.dataset_cap.unwrap_or(cfg.dataset_cap);
    if cfg.dataset_cap == 0 {
        return Err(ScenarioError::invalid("controller.dataset_cap", "must be at least 1"));
    }

    let p = raw.perception;
    let d = PerceptionParams::default();
    let k = KalmanParams::default();
    cfg.perception = PerceptionParams {
        grid: GridSpec {
            size: positive("perception.grid_size", p.grid_size.unwrap_or(d.grid.size))?,
            resolution: positive("perception.resolution", p.resolution.unwrap_or(d.grid.resolution))?,
        },
        dbscan: DbscanParams {
            eps: positive("perception.dbscan_eps", p.dbscan_eps.unwrap_or(d.dbscan.eps))?,
            min_pts: p.dbscan_min_pts.unwrap_or(d.dbscan.min_pts),
        },
        mvee: MveeParams {
            tolerance: positive(
                "perception.mvee_tolerance",
                p.mvee_tolerance.unwrap_or(d.mvee.tolerance),
            )?,
            max_iterations: p.mvee_max_iterations.unwrap_or(d.mvee.max_iterations),
            b_min: positive("perception.b_min", p.b_min.unwrap_or(d.mvee.b_min))?,
        },
        d_max: positive("perception.d_max", p.d_max.unwrap_or(d.d_max))?,
        kalman: KalmanParams {
            q_pos: non_negative("perception.q_pos", p.q_pos.unwrap_or(k.q_pos))?,
            q_vel: non_negative("perception.q_vel", p.q_vel.unwrap_or(k.q_vel))?,
            q_acc: non_negative("perception.q_acc", p.q_acc.unwrap_or(k.q_acc))?,
            q_shape: non_negative("perception.q_shape", p.q_shape.unwrap_or(k.q_shape))?,
            r_center: non_negative("perception.r_center", p.r_center.unwrap_or(k.r_center))?,
            r_shape: non_negative("perception.r_shape", p.r_shape.unwrap_or(k.r_shape))?,
            ..k
        },
        max_misses: p.max_misses.unwrap_or(d.max_misses),
        warmup_updates: p.warmup_updates.unwrap_or(d.warmup_updates),
    };
    if cfg.perception.dbscan.min_pts == 0 {
        return Err(ScenarioError::invalid(
            "perception.dbscan_min_pts",
            "must be at least 1",
        ));
    }
    if cfg.perception.max_misses == 0 {
        return Err(ScenarioError::invalid("perception.max_misses", "must be at least 1"));
    }

    let s = raw.sensor;
    let beams = s.beams.unwrap_or(cfg.sensor.beams);
    if beams == 0 {
        return Err(ScenarioError::invalid("sensor.beams", "must be at least 1"));
    }
    cfg.sensor = LidarSpec {
        beams,
        range_max: positive("sensor.range_max", s.range_max.unwrap_or(cfg.sensor.range_max))?,
        noise_std: non_negative("sensor.noise_std", s.noise_std.unwrap_or(cfg.sensor.noise_std))?,
    };
    Ok(cfg)
}
