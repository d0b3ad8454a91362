//! Safety filter for the virtual leading point.
//!
//! The lead point sits `lead_distance` ahead of the robot and is treated as
//! a single integrator, so the barrier constraint is affine in its velocity
//! with `L_f h = 0` and `L_g h = dh/dp`. With one affine constraint and an
//! identity Hessian the QP is a halfspace projection, solved in closed form.
//! The lead-point velocity is mapped back to `(v, omega)` through the
//! near-identity diffeomorphism.

use thiserror::Error;

use crate::barrier::{BarrierError, BarrierEvaluation, DlgpBarrier};
use crate::gp::Point;
use crate::sim::RobotState;

/// Unicycle command.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlInput {
    pub v: f64,
    pub omega: f64,
}

impl ControlInput {
    pub fn new(v: f64, omega: f64) -> Self {
        Self { v, omega }
    }

    pub fn saturate(self, v_max: f64, omega_max: f64) -> Self {
        Self {
            v: self.v.clamp(-v_max, v_max),
            omega: self.omega.clamp(-omega_max, omega_max),
        }
    }
}

/// Velocity of the leading point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LeadPointCommand {
    pub u: Point,
}

impl LeadPointCommand {
    pub fn new(x: f64, y: f64) -> Self {
        Self { u: Point::new(x, y) }
    }
}

/// `a . u + b >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafetyConstraint {
    pub a: Point,
    pub b: f64,
    pub feasible: bool,
}

impl SafetyConstraint {
    pub fn slack(&self, u: &Point) -> f64 {
        self.a.dot(u) + self.b
    }
}

/// Linear class-K function `alpha(h) = slope * h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaFunction {
    pub slope: f64,
}

impl AlphaFunction {
    pub fn eval(&self, h: f64) -> f64 {
        self.slope * h
    }
}

impl Default for AlphaFunction {
    fn default() -> Self {
        Self { slope: 0.2 }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("safety constraint is infeasible (zero gradient, b = {b})")]
    InfeasibleConstraint { b: f64 },
}

const GOAL_DEADBAND: f64 = 0.05;
const GRADIENT_EPS: f64 = 1e-9;

/// Go-to-goal velocity of magnitude `u_max`, computed from the robot position.
pub fn nominal_goal(x: &RobotState, goal: &Point, u_max: f64) -> LeadPointCommand {
    let e = goal - x.position();
    let dist = e.norm();
    if dist <= GOAL_DEADBAND {
        return LeadPointCommand::default();
    }
    LeadPointCommand { u: e * (u_max / dist) }
}

pub fn build_constraint(eval: &BarrierEvaluation, alpha: &AlphaFunction) -> SafetyConstraint {
    let a = Point::new(eval.grad[0], eval.grad[1]);
    let b = eval.dh_dt + alpha.eval(eval.h);
    SafetyConstraint {
        a,
        b,
        feasible: a.norm() > GRADIENT_EPS || b >= 0.0,
    }
}

/// Closed-form solution of `min |u - u_nom|^2 s.t. a . u + b >= 0`.
pub fn solve_safety_qp(nominal: &LeadPointCommand, c: &SafetyConstraint) -> Result<LeadPointCommand, ControlError> {
    if !c.feasible {
        return Err(ControlError::InfeasibleConstraint { b: c.b });
    }
    let slack = c.slack(&nominal.u);
    if slack >= 0.0 {
        return Ok(*nominal);
    }
    let lambda = -slack / c.a.norm_squared();
    Ok(LeadPointCommand {
        u: nominal.u + c.a * lambda,
    })
}

/// Unsaturated inverse of the lead-point kinematics.
pub fn lead_to_unicycle_raw(u_lead: &LeadPointCommand, theta: f64, lead_distance: f64) -> ControlInput {
    let (s, c) = theta.sin_cos();
    let u = u_lead.u;
    ControlInput {
        v: c * u.x + s * u.y,
        omega: (-s * u.x + c * u.y) / lead_distance,
    }
}

pub fn lead_to_unicycle(
    u_lead: &LeadPointCommand,
    theta: f64,
    lead_distance: f64,
    v_max: f64,
    omega_max: f64,
) -> ControlInput {
    lead_to_unicycle_raw(u_lead, theta, lead_distance).saturate(v_max, omega_max)
}

/// Lead-point velocity produced by a unicycle command (forward kinematics).
pub fn unicycle_to_lead(u: &ControlInput, theta: f64, lead_distance: f64) -> Point {
    let (s, c) = theta.sin_cos();
    Point::new(
        u.v * c - lead_distance * u.omega * s,
        u.v * s + lead_distance * u.omega * c,
    )
}

/// Where the barrier is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EvalPoint {
    #[default]
    Lead,
    Position,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerParams {
    pub alpha: AlphaFunction,
    pub lead_distance: f64,
    pub u_max: f64,
    pub v_max: f64,
    pub omega_max: f64,
    pub eval_point: EvalPoint,
    /// Drop the `dh/dt` term from the constraint (reactive ablation).
    pub ignore_time_derivative: bool,
}

impl Default for ControllerParams {
    fn default() -> Self {
        Self {
            alpha: AlphaFunction::default(),
            lead_distance: 0.3,
            u_max: 0.8,
            v_max: 0.8,
            omega_max: 2.0,
            eval_point: EvalPoint::Lead,
            ignore_time_derivative: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlMode {
    /// No obstacle data: nominal command.
    Nominal,
    /// Barrier numerically saturated far from data: nominal command.
    Clamped,
    /// QP solved, constraint inactive.
    Inactive,
    /// QP solved, nominal command projected.
    Active,
    /// Infeasible constraint: brake.
    Brake,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlOutput {
    pub input: ControlInput,
    pub mode: ControlMode,
    pub nominal: LeadPointCommand,
    pub lead: LeadPointCommand,
    pub evaluation: Option<BarrierEvaluation>,
    pub constraint: Option<SafetyConstraint>,
    /// Saturation changed the command.
    pub saturated: bool,
}

/// One control cycle: evaluate the barrier, filter the nominal command and
/// map it to unicycle inputs.
pub fn control_step(x: &RobotState, barrier: &DlgpBarrier, params: &ControllerParams, goal: &Point) -> ControlOutput {
    let nominal = nominal_goal(x, goal, params.u_max);
    let query = match params.eval_point {
        EvalPoint::Lead => x.lead_point(params.lead_distance),
        EvalPoint::Position => x.position(),
    };
    let finish = |lead: LeadPointCommand,
                  mode: ControlMode,
                  evaluation: Option<BarrierEvaluation>,
                  constraint: Option<SafetyConstraint>| {
        let raw = lead_to_unicycle_raw(&lead, x.theta, params.lead_distance);
        let input = raw.saturate(params.v_max, params.omega_max);
        ControlOutput {
            input,
            mode,
            nominal,
            lead,
            evaluation,
            constraint,
            saturated: input != raw,
        }
    };

    let mut eval = match barrier.evaluate_full(&query) {
        Ok(e) => e,
        Err(BarrierError::EmptyDataset) => return finish(nominal, ControlMode::Nominal, None, None),
        Err(BarrierError::ClampedRegion { .. }) => {
            let e = barrier.value(&query).ok().map(|v| BarrierEvaluation {
                h: v.h,
                grad: [0.0; 3],
                dh_dt: 0.0,
                mu: v.mu,
                clamped: true,
            });
            return finish(nominal, ControlMode::Clamped, e, None);
        }
        Err(_) => return finish(nominal, ControlMode::Nominal, None, None),
    };
    if params.ignore_time_derivative {
        eval.dh_dt = 0.0;
    }
    let constraint = build_constraint(&eval, &params.alpha);
    match solve_safety_qp(&nominal, &constraint) {
        Ok(lead) => {
            let mode = if lead == nominal {
                ControlMode::Inactive
            } else {
                ControlMode::Active
            };
            finish(lead, mode, Some(eval), Some(constraint))
        }
        Err(ControlError::InfeasibleConstraint { .. }) => finish(
            LeadPointCommand::default(),
            ControlMode::Brake,
            Some(eval),
            Some(constraint),
        ),
    }
}
