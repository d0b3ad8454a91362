//! Minimum-volume enclosing ellipse via Khachiyan's algorithm with
//! Todd-Yildirim away steps.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Matrix2, Matrix3, Vector3};

use crate::gp::Point;

/// Ellipse with semi-axes `a >= b > 0` and orientation of the major axis in
/// `[-pi/2, pi/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub center: Point,
    pub a: f64,
    pub b: f64,
    pub theta: f64,
}

impl Ellipse {
    /// `sqrt` of the ellipse quadratic form at `p`: `<= 1` inside.
    pub fn normalized_radius(&self, p: &Point) -> f64 {
        let d = p - self.center;
        let (s, c) = self.theta.sin_cos();
        let u = c * d.x + s * d.y;
        let v = -s * d.x + c * d.y;
        ((u / self.a).powi(2) + (v / self.b).powi(2)).sqrt()
    }

    /// Inside the ellipse with both axes scaled by `scale`.
    pub fn contains(&self, p: &Point, scale: f64) -> bool {
        self.normalized_radius(p) <= scale
    }

    pub fn area(&self) -> f64 {
        PI * self.a * self.b
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MveeParams {
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Minimum semi-axis; degenerate clusters are padded to it.
    pub b_min: f64,
}

impl Default for MveeParams {
    fn default() -> Self {
        Self {
            tolerance: 1e-4,
            max_iterations: 10_000,
            b_min: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MveeFit {
    pub ellipse: Ellipse,
    /// `max_j M_j / 3 - 1` at termination (0 for degenerate clusters).
    pub gap: f64,
    pub iterations: usize,
    pub degenerate: bool,
}

/// Extra half-length added along the segment of a collinear cluster.
pub const DEGENERATE_PAD: f64 = 1e-6;

fn wrap_half_turn(theta: f64) -> f64 {
    let w = (theta + FRAC_PI_2).rem_euclid(PI) - FRAC_PI_2;
    if w >= FRAC_PI_2 {
        w - PI
    } else {
        w
    }
}

/// Eigenpairs of a symmetric 2x2 matrix, larger first.
fn sym_eigen(m: &Matrix2<f64>) -> (f64, f64, f64) {
    let (p, q, r) = (m[(0, 0)], m[(0, 1)], m[(1, 1)]);
    let mean = 0.5 * (p + r);
    let rad = (0.25 * (p - r).powi(2) + q * q).sqrt();
    let angle = 0.5 * (2.0 * q).atan2(p - r);
    (mean + rad, mean - rad, angle)
}

pub fn fit_mvee(cluster: &[Point], params: &MveeParams) -> MveeFit {
    assert!(!cluster.is_empty(), "cannot fit an empty cluster");
    let m = cluster.len();
    let mean = cluster.iter().sum::<Point>() / m as f64;
    let local: Vec<Point> = cluster.iter().map(|p| p - mean).collect();

    let scatter = local.iter().fold(Matrix2::zeros(), |acc, p| acc + p * p.transpose()) / m as f64;
    let (l_max, l_min, angle) = sym_eigen(&scatter);
    if m < 3 || l_min <= 1e-12 * l_max.max(1e-12) {
        return degenerate_fit(&local, mean, l_max, angle, params);
    }

    let lifted: Vec<Vector3<f64>> = local.iter().map(|p| Vector3::new(p.x, p.y, 1.0)).collect();
    let n = 3.0;
    let mut u = vec![1.0 / m as f64; m];
    let mut gap = f64::INFINITY;
    let mut iterations = 0;
    while iterations < params.max_iterations {
        let x = lifted
            .iter()
            .zip(&u)
            .fold(Matrix3::zeros(), |acc, (q, &w)| acc + q * q.transpose() * w);
        let Some(x_inv) = x.try_inverse() else {
            return degenerate_fit(&local, mean, l_max, angle, params);
        };
        let scores: Vec<f64> = lifted.iter().map(|q| q.dot(&(x_inv * q))).collect();
        let (j_up, &k_up) = scores.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        let (j_down, &k_down) = scores
            .iter()
            .enumerate()
            .filter(|(j, _)| u[*j] > 0.0)
            .min_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        gap = k_up / n - 1.0;
        let away_gap = 1.0 - k_down / n;
        if gap <= params.tolerance {
            break;
        }
        iterations += 1;
        if gap >= away_gap {
            let step = (k_up - n) / (n * (k_up - 1.0));
            u.iter_mut().for_each(|w| *w *= 1.0 - step);
            u[j_up] += step;
        } else {
            let uj = u[j_down];
            let step = ((n - k_down) / (n * (k_down - 1.0))).min(uj / (1.0 - uj));
            u.iter_mut().for_each(|w| *w *= 1.0 + step);
            u[j_down] -= step;
            if u[j_down] < 0.0 {
                u[j_down] = 0.0;
            }
        }
    }
    if iterations == params.max_iterations {
        // gap of the final iterate
        let x = lifted
            .iter()
            .zip(&u)
            .fold(Matrix3::zeros(), |acc, (q, &w)| acc + q * q.transpose() * w);
        if let Some(x_inv) = x.try_inverse() {
            gap = lifted
                .iter()
                .map(|q| q.dot(&(x_inv * q)))
                .fold(f64::NEG_INFINITY, f64::max)
                / n
                - 1.0;
        }
    }

    let c = local.iter().zip(&u).map(|(p, &w)| p * w).sum::<Point>();
    let cov = local
        .iter()
        .zip(&u)
        .fold(Matrix2::zeros(), |acc, (p, &w)| acc + p * p.transpose() * w)
        - c * c.transpose();
    let (s_max, s_min, theta) = sym_eigen(&cov);
    if s_min <= 0.0 {
        return degenerate_fit(&local, mean, l_max, angle, params);
    }
    let mut ellipse = Ellipse {
        center: c + mean,
        a: (2.0 * s_max).sqrt(),
        b: (2.0 * s_min).sqrt(),
        theta: wrap_half_turn(theta),
    };
    // the approximate optimum may leave points just outside; grow to cover
    let worst = cluster.iter().map(|p| ellipse.normalized_radius(p)).fold(0.0, f64::max);
    if worst > 1.0 {
        ellipse.a *= worst;
        ellipse.b *= worst;
    }
    ellipse.a = ellipse.a.max(params.b_min);
    ellipse.b = ellipse.b.max(params.b_min);
    MveeFit {
        ellipse,
        gap,
        iterations,
        degenerate: false,
    }
}

fn degenerate_fit(local: &[Point], mean: Point, spread: f64, angle: f64, params: &MveeParams) -> MveeFit {
    let dir = Point::new(angle.cos(), angle.sin());
    let (lo, hi) = if spread > 0.0 {
        local
            .iter()
            .map(|p| p.dot(&dir))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), t| (lo.min(t), hi.max(t)))
    } else {
        (0.0, 0.0)
    };
    let half = 0.5 * (hi - lo);
    let center = mean + dir * (0.5 * (hi + lo));
    let a = if half > 0.0 {
        (half + DEGENERATE_PAD).max(params.b_min)
    } else {
        params.b_min
    };
    MveeFit {
        ellipse: Ellipse {
            center,
            a,
            b: params.b_min,
            theta: if half > 0.0 { wrap_half_turn(angle) } else { 0.0 },
        },
        gap: 0.0,
        iterations: 0,
        degenerate: true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_point_circle() {
        let fit = fit_mvee(&[Point::new(1.0, -2.0)], &MveeParams::default());
        assert!(fit.degenerate);
        assert_eq!(fit.ellipse.center, Point::new(1.0, -2.0));
        assert_eq!(fit.ellipse.a, 0.1);
        assert_eq!(fit.ellipse.b, 0.1);
    }

    #[test]
    fn collinear_pair() {
        let pts = [Point::new(0.0, 0.0), Point::new(2f64.sqrt(), 2f64.sqrt())];
        let fit = fit_mvee(&pts, &MveeParams::default());
        assert!(fit.degenerate);
        assert_relative_eq!(fit.ellipse.a, 1.0 + DEGENERATE_PAD, epsilon = 1e-12);
        assert_eq!(fit.ellipse.b, 0.1);
        assert_relative_eq!(fit.ellipse.theta, PI / 4.0, epsilon = 1e-12);
        for p in &pts {
            assert!(fit.ellipse.contains(p, 1.0));
        }
    }

    #[test]
    fn collinear_grid_row() {
        let pts: Vec<Point> = (0..6).map(|i| Point::new(0.1 + 0.2 * i as f64, 0.3)).collect();
        let fit = fit_mvee(&pts, &MveeParams::default());
        assert!(fit.degenerate);
        assert!(pts.iter().all(|p| fit.ellipse.contains(p, 1.0)));
        assert_eq!(fit.ellipse.theta, 0.0);
    }

    /// Smallest area of `ellipse` scaled about its center to enclose `pts`.
    fn enclosing_area(shape: &Ellipse, pts: &[Point]) -> f64 {
        let s = pts.iter().map(|p| shape.normalized_radius(p)).fold(0.0, f64::max);
        shape.area() * s * s
    }

    #[test]
    fn rectangle_corners() {
        let pts = [
            Point::new(-1.0, -0.5),
            Point::new(1.0, -0.5),
            Point::new(1.0, 0.5),
            Point::new(-1.0, 0.5),
        ];
        let fit = fit_mvee(&pts, &MveeParams::default());
        assert!(!fit.degenerate);
        assert!(fit.gap <= 1e-4);
        assert!(fit.ellipse.theta.abs() < 1e-9);
        assert_relative_eq!(fit.ellipse.a, 2f64.sqrt(), epsilon = 1e-3);
        assert_relative_eq!(fit.ellipse.b, 2f64.sqrt() / 2.0, epsilon = 1e-3);
        assert!(pts.iter().all(|p| fit.ellipse.contains(p, 1.0 + 1e-9)));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let shape = Ellipse {
                center: Point::new(rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3)),
                a: rng.gen_range(0.5..2.0),
                b: rng.gen_range(0.2..0.5),
                theta: rng.gen_range(-FRAC_PI_2..FRAC_PI_2),
            };
            assert!(fit.ellipse.area() <= enclosing_area(&shape, &pts) + 1e-9);
        }
    }

    #[test]
    fn random_clusters_contained_and_converged() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let n = rng.gen_range(3..40);
            let c = Point::new(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0));
            let th: f64 = rng.gen_range(-3.0..3.0);
            let (sx, sy) = (rng.gen_range(0.2..1.5), rng.gen_range(0.05..1.0));
            let pts: Vec<Point> = (0..n)
                .map(|_| {
                    let (u, v) = (rng.gen_range(-sx..sx), rng.gen_range(-sy..sy));
                    c + Point::new(th.cos() * u - th.sin() * v, th.sin() * u + th.cos() * v)
                })
                .collect();
            let fit = fit_mvee(&pts, &MveeParams::default());
            assert!(pts.iter().all(|p| fit.ellipse.contains(p, 1.0 + 1e-3)));
            assert!(fit.ellipse.a >= fit.ellipse.b);
            assert!((-FRAC_PI_2..FRAC_PI_2).contains(&fit.ellipse.theta));
            if !fit.degenerate {
                assert!(fit.gap <= 1e-4, "gap {} after {} iterations", fit.gap, fit.iterations);
            }
        }
    }
}
