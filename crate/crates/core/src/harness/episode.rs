//! Closed-loop episode: sense, perceive, build the barrier, filter the
//! nominal command, integrate.

use std::io::Write;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{compute_metrics, Metrics};
use super::scenario::ScenarioConfig;
use crate::barrier::{build_datasets, DlgpBarrier};
use crate::controller::{control_step, unicycle_to_lead, ControlMode};
use crate::perception::{frame_json_line, Perception};
use crate::sim::{cast_lidar, step_dynamics, RobotState, World};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepMode {
    Nominal,
    Clamped,
    Inactive,
    Active,
    Brake,
    /// Terminal row: no control computed.
    End,
}

impl From<ControlMode> for StepMode {
    fn from(m: ControlMode) -> Self {
        match m {
            ControlMode::Nominal => StepMode::Nominal,
            ControlMode::Clamped => StepMode::Clamped,
            ControlMode::Inactive => StepMode::Inactive,
            ControlMode::Active => StepMode::Active,
            ControlMode::Brake => StepMode::Brake,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Arrived,
    Collision,
    Timeout,
    Error,
}

/// One control cycle. `h`, `dh_dt` and `mu` refer to the evaluation point;
/// `h` is `inf` when no obstacle data was available and `NaN` on the
/// terminal row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub step: usize,
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub v: f64,
    pub omega: f64,
    pub h: f64,
    pub dh_dt: f64,
    pub mu: f64,
    pub clearance: f64,
    pub goal_distance: f64,
    pub points: usize,
    pub mode: StepMode,
    pub saturated: bool,
    /// `a·u + b` for the QP solution.
    pub qp_slack: f64,
    /// `a·u + b` for the lead velocity actually applied after saturation.
    pub applied_slack: f64,
}

impl LogRow {
    pub fn is_terminal(&self) -> bool {
        self.mode == StepMode::End
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrajectoryLog {
    pub rows: Vec<LogRow>,
    /// Set when the episode stopped on an internal error.
    pub error: Option<String>,
}

impl TrajectoryLog {
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(input: R) -> csv::Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let rows = r.deserialize().collect::<csv::Result<Vec<LogRow>>>()?;
        Ok(Self { rows, error: None })
    }
}

/// Wall-clock cost of the per-step barrier build and evaluation. Kept out of
/// the trajectory and metrics so those stay reproducible.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct TimingStats {
    pub steps: usize,
    pub mean_ms: f64,
    pub max_ms: f64,
}

impl TimingStats {
    fn from_samples(samples: &[f64]) -> Self {
        if samples.is_empty() {
            return Self::default();
        }
        Self {
            steps: samples.len(),
            mean_ms: samples.iter().sum::<f64>() / samples.len() as f64,
            max_ms: samples.iter().copied().fold(0.0, f64::max),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EpisodeOptions {
    /// Keep one JSON line of perception state per step.
    pub record_perception: bool,
    /// Keep the barrier from the step of closest approach.
    pub capture_field: bool,
}

#[derive(Debug, Clone)]
pub struct FieldSnapshot {
    pub step: usize,
    pub t: f64,
    pub robot: RobotState,
    pub barrier: DlgpBarrier,
}

#[derive(Debug, Clone)]
pub struct EpisodeResult {
    pub log: TrajectoryLog,
    pub metrics: Metrics,
    pub timing: TimingStats,
    pub perception_lines: Vec<String>,
    pub field: Option<FieldSnapshot>,
}

pub fn run_episode(cfg: &ScenarioConfig) -> EpisodeResult {
    run_episode_with(cfg, EpisodeOptions::default())
}

pub fn run_episode_with(cfg: &ScenarioConfig, opts: EpisodeOptions) -> EpisodeResult {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut world = World::new(cfg.obstacles.clone());
    let mut perception = Perception::new(cfg.perception);
    let mut robot = cfg.start;
    let controller = cfg.effective_controller();
    let form = cfg.barrier_form();
    let max_steps = (cfg.max_time / cfg.dt).round() as usize;

    let mut log = TrajectoryLog::default();
    let mut eval_ms = Vec::with_capacity(max_steps);
    let mut perception_lines = Vec::new();
    let mut field: Option<FieldSnapshot> = None;
    let mut closest = f64::INFINITY;

    for k in 0..=max_steps {
        let t = k as f64 * cfg.dt;
        let position = robot.position();
        let clearance = world.clearance(&position);
        let goal_distance = (cfg.goal - position).norm();
        let terminal = |log: &mut TrajectoryLog| {
            log.rows.push(LogRow {
                step: k,
                t,
                x: robot.x,
                y: robot.y,
                theta: robot.theta,
                v: 0.0,
                omega: 0.0,
                h: f64::NAN,
                dh_dt: f64::NAN,
                mu: f64::NAN,
                clearance,
                goal_distance,
                points: 0,
                mode: StepMode::End,
                saturated: false,
                qp_slack: f64::NAN,
                applied_slack: f64::NAN,
            })
        };
        if clearance <= 0.0 || goal_distance <= cfg.arrival_radius || k == max_steps {
            terminal(&mut log);
            break;
        }

        let scan = cast_lidar(&world, &robot, &cfg.sensor, &mut rng);
        let frame = perception.process(&scan, &robot, cfg.dt);
        if opts.record_perception {
            perception_lines.push(frame_json_line(k, t, &frame, perception.tracker()));
        }

        let started = Instant::now();
        let (training, velocities) = build_datasets(&frame.obstacle_grid, &frame.velocity_grid, cfg.dataset_cap);
        let points = training.len();
        let barrier = match DlgpBarrier::new(training, velocities, cfg.kernel, cfg.barrier, form) {
            Ok(b) => b,
            Err(e) => {
                log.error = Some(format!("step {k}: {e}"));
                terminal(&mut log);
                break;
            }
        };
        let out = control_step(&robot, &barrier, &controller, &cfg.goal);
        eval_ms.push(started.elapsed().as_secs_f64() * 1e3);

        let (h, dh_dt, mu) = match &out.evaluation {
            Some(e) => (e.h, e.dh_dt, e.mu),
            None => (f64::INFINITY, 0.0, 0.0),
        };
        let (qp_slack, applied_slack) = match &out.constraint {
            Some(c) => {
                let applied = unicycle_to_lead(&out.input, robot.theta, controller.lead_distance);
                (c.slack(&out.lead.u), c.slack(&applied))
            }
            None => (f64::NAN, f64::NAN),
        };
        log.rows.push(LogRow {
            step: k,
            t,
            x: robot.x,
            y: robot.y,
            theta: robot.theta,
            v: out.input.v,
            omega: out.input.omega,
            h,
            dh_dt,
            mu,
            clearance,
            goal_distance,
            points,
            mode: out.mode.into(),
            saturated: out.saturated,
            qp_slack,
            applied_slack,
        });

        if opts.capture_field && !barrier.is_empty() && (clearance < closest || field.is_none()) {
            closest = clearance;
            field = Some(FieldSnapshot {
                step: k,
                t,
                robot,
                barrier: barrier.clone(),
            });
        }

        robot = step_dynamics(&robot, &out.input, cfg.dt);
        world.advance(t, cfg.dt);
    }

    let mut metrics = compute_metrics(&log, cfg.arrival_radius);
    metrics.scenario = cfg.name.clone();
    metrics.variant = cfg.variant;
    metrics.seed = cfg.seed;
    let timing = TimingStats::from_samples(&eval_ms);
    metrics.mean_eval_ms = timing.mean_ms;
    EpisodeResult {
        log,
        metrics,
        timing,
        perception_lines,
        field,
    }
}
