use std::f64::consts::PI;

use crate::controller::ControlInput;
use crate::gp::Point;

/// Pose of the differential-drive robot. `theta` is kept in `[-pi, pi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotState {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl RobotState {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: wrap_angle(theta),
        }
    }

    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }

    pub fn heading(&self) -> Point {
        Point::new(self.theta.cos(), self.theta.sin())
    }

    /// Point `distance` ahead of the robot along its heading.
    pub fn lead_point(&self, distance: f64) -> Point {
        self.position() + self.heading() * distance
    }
}

/// Wraps an angle into `[-pi, pi)`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    // rem_euclid can round up to exactly 2pi
    if w >= PI {
        w - 2.0 * PI
    } else {
        w
    }
}

fn unicycle(theta: f64, u: &ControlInput) -> [f64; 3] {
    [u.v * theta.cos(), u.v * theta.sin(), u.omega]
}

/// One RK4 step of `p' = v (cos th, sin th)`, `th' = omega` with the input
/// held constant over `dt`.
pub fn step_dynamics(x: &RobotState, u: &ControlInput, dt: f64) -> RobotState {
    debug_assert!(dt > 0.0);
    let s = [x.x, x.y, x.theta];
    let add = |s: [f64; 3], k: [f64; 3], h: f64| [s[0] + h * k[0], s[1] + h * k[1], s[2] + h * k[2]];
    let k1 = unicycle(s[2], u);
    let k2 = unicycle(add(s, k1, 0.5 * dt)[2], u);
    let k3 = unicycle(add(s, k2, 0.5 * dt)[2], u);
    let k4 = unicycle(add(s, k3, dt)[2], u);
    let mut next = [0.0; 3];
    for i in 0..3 {
        next[i] = s[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    RobotState {
        x: next[0],
        y: next[1],
        theta: wrap_angle(next[2]),
    }
}
