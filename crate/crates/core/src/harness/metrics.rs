use serde::Serialize;

use super::episode::{Outcome, StepMode, TrajectoryLog};
use super::scenario::Variant;

/// Episode summary. Every serialized field is a pure function of the
/// scenario and seed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub scenario: String,
    pub variant: Variant,
    pub seed: u64,
    pub outcome: Outcome,
    pub collision: bool,
    pub arrival_time: Option<f64>,
    /// Smallest distance from the robot center to an obstacle boundary.
    /// `None` when no obstacle existed.
    pub min_clearance: Option<f64>,
    pub linear_speed_variance: f64,
    pub angular_speed_variance: f64,
    pub path_length: f64,
    pub duration: f64,
    pub steps: usize,
    /// Smallest barrier value from the second control step onwards.
    pub min_barrier: Option<f64>,
    pub active_steps: usize,
    pub brake_steps: usize,
    pub saturated_steps: usize,
    /// Most negative `a·u + b` over steps where saturation left the QP
    /// solution unchanged.
    pub worst_unsaturated_slack: Option<f64>,
    pub mean_points: f64,
    pub error: Option<String>,
    #[serde(skip)]
    pub mean_eval_ms: f64,
}

fn population_variance(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = xs.clone().count();
    if n == 0 {
        return 0.0;
    }
    let mean = xs.clone().sum::<f64>() / n as f64;
    xs.map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64
}

fn finite_min(xs: impl Iterator<Item = f64>) -> Option<f64> {
    xs.filter(|x| x.is_finite())
        .fold(None, |acc, x| Some(acc.map_or(x, |m: f64| m.min(x))))
}

pub fn compute_metrics(log: &TrajectoryLog, arrival_radius: f64) -> Metrics {
    let rows = &log.rows;
    let controlled: Vec<_> = rows.iter().filter(|r| !r.is_terminal()).collect();
    let collision = rows.iter().any(|r| r.clearance <= 0.0);
    let arrival_time = rows.iter().find(|r| r.goal_distance <= arrival_radius).map(|r| r.t);
    let outcome = if log.error.is_some() {
        Outcome::Error
    } else if collision {
        Outcome::Collision
    } else if arrival_time.is_some() {
        Outcome::Arrived
    } else {
        Outcome::Timeout
    };
    let path_length = rows.windows(2).map(|w| (w[1].x - w[0].x).hypot(w[1].y - w[0].y)).sum();
    let first = rows.first().map_or(0.0, |r| r.t);
    let last = rows.last().map_or(0.0, |r| r.t);
    Metrics {
        scenario: String::new(),
        variant: Variant::default(),
        seed: 0,
        outcome,
        collision,
        arrival_time,
        min_clearance: finite_min(rows.iter().map(|r| r.clearance)),
        linear_speed_variance: population_variance(controlled.iter().map(|r| r.v)),
        angular_speed_variance: population_variance(controlled.iter().map(|r| r.omega)),
        path_length,
        duration: last - first,
        steps: controlled.len(),
        min_barrier: finite_min(controlled.iter().skip(1).map(|r| r.h)),
        active_steps: controlled.iter().filter(|r| r.mode == StepMode::Active).count(),
        brake_steps: controlled.iter().filter(|r| r.mode == StepMode::Brake).count(),
        saturated_steps: controlled.iter().filter(|r| r.saturated).count(),
        worst_unsaturated_slack: finite_min(controlled.iter().filter(|r| !r.saturated).map(|r| r.qp_slack)),
        mean_points: if controlled.is_empty() {
            0.0
        } else {
            controlled.iter().map(|r| r.points as f64).sum::<f64>() / controlled.len() as f64
        },
        error: log.error.clone(),
        mean_eval_ms: 0.0,
    }
}
