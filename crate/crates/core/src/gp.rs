//! Zero-mean Gaussian process regression with a squared-exponential kernel.
//!
//! Besides the usual predictive mean and variance this module provides the
//! derivatives the barrier needs: the gradient of the mean with respect to
//! the query point, and the time derivatives of the Gram matrix and of the
//! query covariance vector when every training point moves with its own
//! velocity. The time derivatives are kept in dense `N x N` / `N` form
//! instead of the per-point `N^2 x 2` derivative stacks.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, Vector2};
use thiserror::Error;

pub type Point = Vector2<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GpError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("label count {labels} does not match training point count {points}")]
    LabelMismatch { points: usize, labels: usize },
    #[error("velocity count {velocities} does not match training point count {points}")]
    VelocityMismatch { points: usize, velocities: usize },
    /// The Gram matrix is not positive definite: duplicate or nearly
    /// duplicate training points. Downsample before building.
    #[error("kernel matrix factorization failed ({points} points, jitter {jitter:e})")]
    FactorizationFailure { points: usize, jitter: f64 },
    #[error("invalid kernel parameters: {0}")]
    InvalidParams(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    pub length_scale: f64,
    /// Added to the diagonal of the Gram matrix before factorization.
    pub jitter: f64,
}

impl KernelParams {
    pub const DEFAULT_JITTER: f64 = 1e-8;

    pub fn new(length_scale: f64, jitter: f64) -> Result<Self, GpError> {
        if !length_scale.is_finite() || length_scale <= 0.0 {
            return Err(GpError::InvalidParams("length scale must be positive"));
        }
        if !jitter.is_finite() || jitter < 0.0 {
            return Err(GpError::InvalidParams("jitter must be non-negative"));
        }
        Ok(Self { length_scale, jitter })
    }

    fn inv_l2(&self) -> f64 {
        1.0 / (self.length_scale * self.length_scale)
    }
}

impl Default for KernelParams {
    fn default() -> Self {
        Self {
            length_scale: 0.9,
            jitter: Self::DEFAULT_JITTER,
        }
    }
}

/// Squared-exponential kernel `exp(-|p - q|^2 / (2 l^2))`.
pub fn kernel_eval(p: &Point, q: &Point, params: &KernelParams) -> f64 {
    let r2 = (p - q).norm_squared();
    (-0.5 * r2 * params.inv_l2()).exp()
}

/// Obstacle points the GP is conditioned on.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingSet {
    pub points: Vec<Point>,
}

impl TrainingSet {
    pub fn new(points: Vec<Point>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Copy of the set with every point moved by `velocity * dt`.
    pub fn displaced(&self, velocities: &VelocitySet, dt: f64) -> TrainingSet {
        TrainingSet {
            points: self
                .points
                .iter()
                .zip(&velocities.velocities)
                .map(|(d, v)| d + v * dt)
                .collect(),
        }
    }
}

/// Per-point velocities, index-aligned with a [`TrainingSet`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VelocitySet {
    pub velocities: Vec<Point>,
}

impl VelocitySet {
    pub fn new(velocities: Vec<Point>) -> Self {
        Self { velocities }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            velocities: vec![Point::zeros(); n],
        }
    }

    pub fn uniform(n: usize, v: Point) -> Self {
        Self { velocities: vec![v; n] }
    }

    pub fn len(&self) -> usize {
        self.velocities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.velocities.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelVector(pub DVector<f64>);

impl LabelVector {
    pub fn ones(n: usize) -> Self {
        Self(DVector::from_element(n, 1.0))
    }
}

/// A conditioned GP: Cholesky factor of `K + jitter I` and the weights
/// `alpha = (K + jitter I)^-1 Y`.
#[derive(Debug, Clone)]
pub struct GpModel {
    training: TrainingSet,
    labels: LabelVector,
    params: KernelParams,
    gram: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
}

impl GpModel {
    pub fn build(training: TrainingSet, labels: LabelVector, params: KernelParams) -> Result<Self, GpError> {
        let n = training.len();
        if n == 0 {
            return Err(GpError::EmptyTrainingSet);
        }
        if labels.0.len() != n {
            return Err(GpError::LabelMismatch {
                points: n,
                labels: labels.0.len(),
            });
        }
        let gram = gram_matrix(&training.points, &params);
        let mut regularized = gram.clone();
        for i in 0..n {
            regularized[(i, i)] += params.jitter;
        }
        let chol = Cholesky::new(regularized).ok_or(GpError::FactorizationFailure {
            points: n,
            jitter: params.jitter,
        })?;
        let alpha = chol.solve(&labels.0);
        Ok(Self {
            training,
            labels,
            params,
            gram,
            chol,
            alpha,
        })
    }

    /// Model with the all-ones label vector used for obstacle points.
    pub fn build_obstacle(training: TrainingSet, params: KernelParams) -> Result<Self, GpError> {
        let n = training.len();
        Self::build(training, LabelVector::ones(n), params)
    }

    pub fn len(&self) -> usize {
        self.training.len()
    }

    pub fn is_empty(&self) -> bool {
        self.training.is_empty()
    }

    pub fn training(&self) -> &TrainingSet {
        &self.training
    }

    pub fn labels(&self) -> &LabelVector {
        &self.labels
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    /// Kernel matrix without jitter.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    /// Lower-triangular factor `L` with `L L^T = K + jitter I`.
    pub fn factor(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    /// Solves `(K + jitter I) x = b`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    /// Covariance vector between `p` and every training point.
    pub fn cov_vector(&self, p: &Point) -> DVector<f64> {
        DVector::from_iterator(
            self.len(),
            self.training.points.iter().map(|d| kernel_eval(p, d, &self.params)),
        )
    }

    pub fn predictive_mean(&self, p: &Point) -> f64 {
        self.cov_vector(p).dot(&self.alpha)
    }

    pub fn predictive_variance(&self, p: &Point) -> f64 {
        let k = self.cov_vector(p);
        let mut w = k.clone();
        // w = L^-1 k, variance = k(p,p) - |w|^2
        let l = self.chol.l_dirty();
        if !l.solve_lower_triangular_mut(&mut w) {
            return 0.0;
        }
        (1.0 - w.norm_squared()).max(0.0)
    }

    /// `d mu / d p`, the gradient of the predictive mean at `p`.
    pub fn mean_gradient(&self, p: &Point) -> Point {
        let inv_l2 = self.params.inv_l2();
        self.training
            .points
            .iter()
            .zip(self.alpha.iter())
            .fold(Point::zeros(), |acc, (d, &a)| {
                let diff = p - d;
                let k = (-0.5 * diff.norm_squared() * inv_l2).exp();
                acc - diff * (a * k * inv_l2)
            })
    }

    /// `dK/dt` when training point `i` moves with velocity `v_i`:
    /// `Kdot_ij = -(1/l^2) K_ij (d_i - d_j)^T (v_i - v_j)`.
    pub fn cov_matrix_time_derivative(&self, velocities: &VelocitySet) -> Result<DMatrix<f64>, GpError> {
        self.check_velocities(velocities)?;
        let n = self.len();
        let inv_l2 = self.params.inv_l2();
        let d = &self.training.points;
        let v = &velocities.velocities;
        let mut kdot = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let val = -inv_l2 * self.gram[(i, j)] * (d[i] - d[j]).dot(&(v[i] - v[j]));
                kdot[(i, j)] = val;
                kdot[(j, i)] = val;
            }
        }
        Ok(kdot)
    }

    /// `d k~ / dt` at query `p`: entry `r` is `(1/l^2) k(p, d_r) (p - d_r)^T v_r`.
    pub fn query_cov_time_derivative(&self, p: &Point, velocities: &VelocitySet) -> Result<DVector<f64>, GpError> {
        self.check_velocities(velocities)?;
        let inv_l2 = self.params.inv_l2();
        Ok(DVector::from_iterator(
            self.len(),
            self.training.points.iter().zip(&velocities.velocities).map(|(d, v)| {
                let diff = p - d;
                inv_l2 * (-0.5 * diff.norm_squared() * inv_l2).exp() * diff.dot(v)
            }),
        ))
    }

    /// Rate of change of the predictive mean at a fixed query point when the
    /// training points move: `(K^-1 k~)^T Kdot alpha` subtracted from
    /// `k~dot^T alpha`.
    pub fn mean_time_derivative(&self, p: &Point, velocities: &VelocitySet) -> Result<f64, GpError> {
        let kdot = self.cov_matrix_time_derivative(velocities)?;
        let kqdot = self.query_cov_time_derivative(p, velocities)?;
        let beta = self.solve(&self.cov_vector(p));
        Ok(kqdot.dot(&self.alpha) - beta.dot(&(kdot * &self.alpha)))
    }

    fn check_velocities(&self, velocities: &VelocitySet) -> Result<(), GpError> {
        if velocities.len() != self.len() {
            return Err(GpError::VelocityMismatch {
                points: self.len(),
                velocities: velocities.len(),
            });
        }
        Ok(())
    }
}

fn gram_matrix(points: &[Point], params: &KernelParams) -> DMatrix<f64> {
    let n = points.len();
    let mut k = DMatrix::identity(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = kernel_eval(&points[i], &points[j], params);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}
