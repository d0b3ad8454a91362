use std::f64::consts::PI;

use crate::gp::Point;

#[derive(Debug, Clone, PartialEq)]
pub enum Motion {
    Static,
    ConstantVelocity {
        velocity: Point,
    },
    /// Oscillation `amplitude * sin(2 pi t / period)` along the unit `axis`.
    Sinusoidal {
        axis: Point,
        amplitude: f64,
        period: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleSpec {
    pub id: String,
    pub radius: f64,
    pub initial_center: Point,
    pub motion: Motion,
}

impl ObstacleSpec {
    /// Closed-form center at time `t`.
    pub fn center_at(&self, t: f64) -> Point {
        match &self.motion {
            Motion::Static => self.initial_center,
            Motion::ConstantVelocity { velocity } => self.initial_center + velocity * t,
            Motion::Sinusoidal {
                axis,
                amplitude,
                period,
            } => {
                let dir = axis.normalize();
                self.initial_center + dir * (amplitude * (2.0 * PI * t / period).sin())
            }
        }
    }

    pub fn velocity_at(&self, t: f64) -> Point {
        match &self.motion {
            Motion::Static => Point::zeros(),
            Motion::ConstantVelocity { velocity } => *velocity,
            Motion::Sinusoidal {
                axis,
                amplitude,
                period,
            } => {
                let w = 2.0 * PI / period;
                axis.normalize() * (amplitude * w * (w * t).cos())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circle {
    pub center: Point,
    pub radius: f64,
}

impl Circle {
    /// Signed distance from `p` to the circle boundary (negative inside).
    pub fn clearance(&self, p: &Point) -> f64 {
        (p - self.center).norm() - self.radius
    }
}

/// Obstacles plus simulation time. Centers are always evaluated from the
/// closed-form paths, so stepping never accumulates drift.
#[derive(Debug, Clone)]
pub struct World {
    pub obstacles: Vec<ObstacleSpec>,
    time: f64,
    circles: Vec<Circle>,
}

impl World {
    pub fn new(obstacles: Vec<ObstacleSpec>) -> Self {
        let mut w = Self {
            obstacles,
            time: 0.0,
            circles: Vec::new(),
        };
        w.refresh();
        w
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn circles(&self) -> &[Circle] {
        &self.circles
    }

    /// Moves every obstacle to its position at `t + dt`.
    pub fn advance(&mut self, t: f64, dt: f64) {
        debug_assert!(dt > 0.0);
        self.time = t + dt;
        self.refresh();
    }

    /// Distance from `p` to the nearest obstacle boundary, `+inf` when empty.
    pub fn clearance(&self, p: &Point) -> f64 {
        self.circles
            .iter()
            .map(|c| c.clearance(p))
            .fold(f64::INFINITY, f64::min)
    }

    fn refresh(&mut self) {
        let t = self.time;
        self.circles = self
            .obstacles
            .iter()
            .map(|o| Circle {
                center: o.center_at(t),
                radius: o.radius,
            })
            .collect();
    }
}
