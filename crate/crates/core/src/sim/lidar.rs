use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::dynamics::RobotState;
use super::obstacles::{Circle, World};
use crate::gp::Point;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LidarSpec {
    pub beams: usize,
    pub range_max: f64,
    /// Standard deviation of additive Gaussian range noise on hits.
    pub noise_std: f64,
}

impl Default for LidarSpec {
    fn default() -> Self {
        Self {
            beams: 360,
            range_max: 6.0,
            noise_std: 0.0,
        }
    }
}

/// One planar sweep. Beam `i` points at `2 pi i / beams` relative to the
/// robot heading, so beam 0 looks straight ahead.
#[derive(Debug, Clone, PartialEq)]
pub struct LidarScan {
    pub angles: Vec<f64>,
    pub ranges: Vec<f64>,
    pub hits: Vec<bool>,
    pub range_max: f64,
}

impl LidarScan {
    pub fn beam_count(&self) -> usize {
        self.ranges.len()
    }

    /// World-frame endpoints of all beams that hit something.
    pub fn endpoints(&self, pose: &RobotState) -> Vec<Point> {
        self.angles
            .iter()
            .zip(&self.ranges)
            .zip(&self.hits)
            .filter(|(_, &hit)| hit)
            .map(|((a, r), _)| {
                let th = pose.theta + a;
                pose.position() + Point::new(th.cos(), th.sin()) * *r
            })
            .collect()
    }
}

/// Smallest positive `s` with `|origin + s dir - c| = r`, for unit `dir`.
pub fn ray_circle(origin: &Point, dir: &Point, circle: &Circle) -> Option<f64> {
    let oc = origin - circle.center;
    let b = oc.dot(dir);
    let c = oc.norm_squared() - circle.radius * circle.radius;
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let near = -b - sq;
    if near > 0.0 {
        return Some(near);
    }
    let far = -b + sq;
    (far > 0.0).then_some(far)
}

pub fn cast_lidar<R: Rng + ?Sized>(world: &World, pose: &RobotState, spec: &LidarSpec, rng: &mut R) -> LidarScan {
    assert!(spec.beams >= 1, "lidar needs at least one beam");
    let origin = pose.position();
    let noise = (spec.noise_std > 0.0).then(|| Normal::new(0.0, spec.noise_std).unwrap());
    let mut angles = Vec::with_capacity(spec.beams);
    let mut ranges = Vec::with_capacity(spec.beams);
    let mut hits = Vec::with_capacity(spec.beams);
    for i in 0..spec.beams {
        let a = 2.0 * PI * i as f64 / spec.beams as f64;
        let th = pose.theta + a;
        let dir = Point::new(th.cos(), th.sin());
        let nearest = world
            .circles()
            .iter()
            .filter_map(|c| ray_circle(&origin, &dir, c))
            .fold(f64::INFINITY, f64::min);
        let (range, hit) = if nearest < spec.range_max {
            let mut r = nearest;
            if let Some(n) = &noise {
                r = (r + n.sample(rng)).clamp(1e-6, spec.range_max * (1.0 - 1e-12));
            }
            (r, true)
        } else {
            (spec.range_max, false)
        };
        angles.push(a);
        ranges.push(range);
        hits.push(hit);
    }
    LidarScan {
        angles,
        ranges,
        hits,
        range_max: spec.range_max,
    }
}
