//! Constant-acceleration Kalman filter over ellipse tracks.
//!
//! State: `[cx, cy, vx, vy, ax, ay, a, b, theta]`. The center follows a
//! constant-acceleration model; the shape parameters are random walks.
//! Measurements are `[cx, cy, a, b, theta]`.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{SMatrix, SVector};

use super::mvee::Ellipse;
use crate::gp::Point;

pub type State = SVector<f64, 9>;
pub type Covariance = SMatrix<f64, 9, 9>;
type Measurement = SVector<f64, 5>;
type Observation = SMatrix<f64, 5, 9>;

const MEASURED: [usize; 5] = [0, 1, 6, 7, 8];

/// Noise settings. Process noise entries are per-second densities and are
/// multiplied by `dt` in each prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanParams {
    pub q_pos: f64,
    pub q_vel: f64,
    pub q_acc: f64,
    pub q_shape: f64,
    pub r_center: f64,
    pub r_shape: f64,
    pub init_vel_var: f64,
    pub init_acc_var: f64,
}

impl Default for KalmanParams {
    fn default() -> Self {
        Self {
            q_pos: 1e-4,
            q_vel: 1e-2,
            q_acc: 1e-1,
            q_shape: 1e-4,
            r_center: 4e-4,
            r_shape: 1e-3,
            init_vel_var: 1.0,
            init_acc_var: 0.1,
        }
    }
}

impl KalmanParams {
    /// No process or measurement noise.
    pub fn noiseless() -> Self {
        Self {
            q_pos: 0.0,
            q_vel: 0.0,
            q_acc: 0.0,
            q_shape: 0.0,
            r_center: 0.0,
            r_shape: 0.0,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackedObstacle {
    pub id: u64,
    pub state: State,
    pub covariance: Covariance,
    /// Number of measurement updates since creation.
    pub age: u32,
    /// Consecutive frames without a detection.
    pub misses: u32,
}

/// Wraps into `(-pi/2, pi/2]`.
fn wrap_innovation(d: f64) -> f64 {
    let w = (d + FRAC_PI_2).rem_euclid(PI) - FRAC_PI_2;
    if w <= -FRAC_PI_2 {
        w + PI
    } else {
        w
    }
}

/// Wraps into `[-pi/2, pi/2)`.
fn wrap_orientation(t: f64) -> f64 {
    let w = (t + FRAC_PI_2).rem_euclid(PI) - FRAC_PI_2;
    if w >= FRAC_PI_2 {
        w - PI
    } else {
        w
    }
}

fn measurement(e: &Ellipse) -> Measurement {
    Measurement::from([e.center.x, e.center.y, e.a, e.b, e.theta])
}

fn observation() -> Observation {
    let mut h = Observation::zeros();
    for (row, &col) in MEASURED.iter().enumerate() {
        h[(row, col)] = 1.0;
    }
    h
}

fn transition(dt: f64) -> Covariance {
    let mut f = Covariance::identity();
    for axis in 0..2 {
        f[(axis, 2 + axis)] = dt;
        f[(axis, 4 + axis)] = 0.5 * dt * dt;
        f[(2 + axis, 4 + axis)] = dt;
    }
    f
}

impl TrackedObstacle {
    pub fn new(id: u64, detection: &Ellipse, params: &KalmanParams) -> Self {
        let mut state = State::zeros();
        let z = measurement(detection);
        for (row, &col) in MEASURED.iter().enumerate() {
            state[col] = z[row];
        }
        let covariance = Covariance::from_diagonal(&SVector::from([
            params.r_center,
            params.r_center,
            params.init_vel_var,
            params.init_vel_var,
            params.init_acc_var,
            params.init_acc_var,
            params.r_shape,
            params.r_shape,
            params.r_shape,
        ]));
        Self {
            id,
            state,
            covariance,
            age: 0,
            misses: 0,
        }
    }

    pub fn center(&self) -> Point {
        Point::new(self.state[0], self.state[1])
    }

    pub fn velocity(&self) -> Point {
        Point::new(self.state[2], self.state[3])
    }

    /// Velocity as published to the velocity grid: zero until the track has
    /// `warmup` updates.
    pub fn reported_velocity(&self, warmup: u32) -> Point {
        if self.age >= warmup {
            self.velocity()
        } else {
            Point::zeros()
        }
    }

    pub fn ellipse(&self) -> Ellipse {
        Ellipse {
            center: self.center(),
            a: self.state[6],
            b: self.state[7],
            theta: self.state[8],
        }
    }

    fn predict(&mut self, dt: f64, params: &KalmanParams) {
        let f = transition(dt);
        let q = Covariance::from_diagonal(&SVector::from([
            params.q_pos,
            params.q_pos,
            params.q_vel,
            params.q_vel,
            params.q_acc,
            params.q_acc,
            params.q_shape,
            params.q_shape,
            params.q_shape,
        ])) * dt;
        self.state = f * self.state;
        let p = f * self.covariance * f.transpose() + q;
        self.covariance = 0.5 * (p + p.transpose());
    }

    fn update(&mut self, detection: &Ellipse, params: &KalmanParams) {
        let h = observation();
        let r = SMatrix::<f64, 5, 5>::from_diagonal(&SVector::from([
            params.r_center,
            params.r_center,
            params.r_shape,
            params.r_shape,
            params.r_shape,
        ]));
        let mut innovation = measurement(detection) - h * self.state;
        innovation[4] = wrap_innovation(innovation[4]);
        let s = h * self.covariance * h.transpose() + r;
        let s_inv = s
            .cholesky()
            .map(|c| c.inverse())
            .or_else(|| {
                let scale = s.norm().max(1.0);
                s.pseudo_inverse(1e-14 * scale).ok()
            })
            .unwrap_or_else(SMatrix::zeros);
        let gain = self.covariance * h.transpose() * s_inv;
        self.state += gain * innovation;
        self.state[8] = wrap_orientation(self.state[8]);
        // Joseph form keeps the covariance symmetric PSD
        let i_kh = Covariance::identity() - gain * h;
        let p = i_kh * self.covariance * i_kh.transpose() + gain * r * gain.transpose();
        self.covariance = 0.5 * (p + p.transpose());
    }
}

/// Predict by `dt`, then update with `detection` if present. A missing
/// detection only increments the miss counter.
pub fn kalman_step(
    track: &TrackedObstacle,
    detection: Option<&Ellipse>,
    dt: f64,
    params: &KalmanParams,
) -> TrackedObstacle {
    assert!(dt > 0.0, "kalman_step needs dt > 0");
    let mut next = track.clone();
    next.predict(dt, params);
    match detection {
        Some(d) => {
            next.update(d, params);
            next.age += 1;
            next.misses = 0;
        }
        None => next.misses += 1,
    }
    next
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn det(x: f64, y: f64) -> Ellipse {
        Ellipse {
            center: Point::new(x, y),
            a: 0.5,
            b: 0.3,
            theta: 0.2,
        }
    }

    fn min_eigen(p: &Covariance) -> f64 {
        p.symmetric_eigenvalues().min()
    }

    #[test]
    fn noiseless_constant_velocity_is_exact() {
        let params = KalmanParams::noiseless();
        let v = Point::new(0.7, -0.4);
        let dt = 0.05;
        let mut track = TrackedObstacle::new(0, &det(1.0, 2.0), &params);
        for k in 1..=3 {
            let c = Point::new(1.0, 2.0) + v * (k as f64 * dt);
            track = kalman_step(&track, Some(&det(c.x, c.y)), dt, &params);
        }
        assert!((track.velocity() - v).norm() < 1e-9, "{:?}", track.velocity());
        assert_eq!(track.age, 3);
    }

    #[test]
    fn predict_only_grows_uncertainty() {
        let params = KalmanParams::default();
        let track = TrackedObstacle::new(4, &det(0.0, 0.0), &params);
        let next = kalman_step(&track, None, 0.05, &params);
        assert!(next.covariance.trace() > track.covariance.trace());
        assert_eq!(next.misses, 1);
        assert_eq!(next.age, 0);
        assert_eq!(next.id, 4);
    }

    #[test]
    fn covariance_stays_symmetric_psd() {
        let params = KalmanParams::default();
        let mut track = TrackedObstacle::new(0, &det(0.0, 0.0), &params);
        for k in 0..100 {
            let t = k as f64 * 0.05;
            let d = (k % 7 != 3).then(|| det(t.sin(), 0.3 * t));
            track = kalman_step(&track, d.as_ref(), 0.05, &params);
            assert_eq!(track.covariance, track.covariance.transpose());
            assert!(min_eigen(&track.covariance) >= -1e-12);
        }
    }

    #[test]
    fn orientation_innovation_wraps() {
        let params = KalmanParams::default();
        let mut e = det(0.0, 0.0);
        e.theta = 1.55;
        let mut track = TrackedObstacle::new(0, &e, &params);
        // same ellipse, orientation reported on the other side of the wrap
        e.theta = -1.55;
        for _ in 0..10 {
            track = kalman_step(&track, Some(&e), 0.05, &params);
        }
        let th = track.state[8];
        assert!(th.abs() > 1.5, "{th}");
        assert!((-FRAC_PI_2..FRAC_PI_2).contains(&th));
    }

    fn velocity_error(seed: u64) -> f64 {
        let params = KalmanParams::default();
        let noise = Normal::new(0.0, 0.02).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = Point::new(1.0, 0.5);
        let dt = 0.05;
        let mut sample = |k: usize| {
            let c = v * (k as f64 * dt);
            det(c.x + noise.sample(&mut rng), c.y + noise.sample(&mut rng))
        };
        let mut track = TrackedObstacle::new(0, &sample(0), &params);
        for k in 1..=20 {
            track = kalman_step(&track, Some(&sample(k)), dt, &params);
        }
        (track.velocity() - v).norm()
    }

    #[test]
    fn noisy_velocity_estimate() {
        assert!(velocity_error(7) <= 0.1);
        let mean = (0..100).map(velocity_error).sum::<f64>() / 100.0;
        assert!(mean <= 0.1, "mean error {mean}");
    }

    #[test]
    fn warmup_hides_velocity() {
        let params = KalmanParams::default();
        let mut track = TrackedObstacle::new(0, &det(0.0, 0.0), &params);
        track.state[2] = 1.0;
        assert_eq!(track.reported_velocity(2), Point::zeros());
        track.age = 2;
        assert_eq!(track.reported_velocity(2), Point::new(1.0, 0.0));
    }
}
