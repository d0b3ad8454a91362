//! Log-GP barrier `h(x, D) = -c_s log(mu(p, D)) - d_shift` built from the
//! current obstacle points, with its spatial gradient and its time
//! derivative induced by the per-point obstacle velocities.

use std::io::Write;

use thiserror::Error;

use crate::gp::{GpError, GpModel, KernelParams, Point, TrainingSet, VelocitySet};
use crate::perception::grid::{ObstacleGridMap, VelocityGridMap};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BarrierError {
    #[error("no obstacle points")]
    EmptyDataset,
    #[error("predictive mean {mu:e} at or below floor; barrier saturated")]
    ClampedRegion { mu: f64 },
    #[error(transparent)]
    Gp(#[from] GpError),
    #[error("invalid barrier parameters: {0}")]
    InvalidParams(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierParams {
    pub c_s: f64,
    pub d_shift: f64,
    /// Lower clamp on `mu` before the logarithm.
    pub mu_floor: f64,
}

impl BarrierParams {
    pub const DEFAULT_MU_FLOOR: f64 = 1e-12;

    pub fn new(c_s: f64, d_shift: f64, mu_floor: f64) -> Result<Self, BarrierError> {
        if !c_s.is_finite() || c_s <= 0.0 {
            return Err(BarrierError::InvalidParams("c_s must be positive"));
        }
        if !d_shift.is_finite() || d_shift <= 0.0 {
            return Err(BarrierError::InvalidParams("d_shift must be positive"));
        }
        if !(mu_floor > 0.0 && mu_floor <= 1e-9) {
            return Err(BarrierError::InvalidParams("mu_floor must lie in (0, 1e-9]"));
        }
        Ok(Self { c_s, d_shift, mu_floor })
    }
}

impl Default for BarrierParams {
    fn default() -> Self {
        Self {
            c_s: 1.0,
            d_shift: 0.1,
            mu_floor: Self::DEFAULT_MU_FLOOR,
        }
    }
}

/// How the GP mean is turned into a barrier value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BarrierForm {
    /// `-c_s log(mu) - d_shift`.
    #[default]
    Log,
    /// `c_s (exp(-d_shift / c_s) - mu)`: same zero level set as `Log`, but
    /// flat wherever `mu` saturates to zero.
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierValue {
    pub h: f64,
    pub mu: f64,
    pub clamped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierEvaluation {
    pub h: f64,
    /// `(dh/dp_x, dh/dp_y, dh/dtheta)`; the heading entry is always 0.
    pub grad: [f64; 3],
    pub dh_dt: f64,
    pub mu: f64,
    pub clamped: bool,
}

impl BarrierEvaluation {
    pub fn position_gradient(&self) -> Point {
        Point::new(self.grad[0], self.grad[1])
    }
}

/// One grid cell per occupied cell (cell-center coordinates), velocities
/// copied index-for-index. When more than `cap` cells are occupied every
/// `ceil(occupied / cap)`-th cell in row-major order is kept.
pub fn build_datasets(
    obstacle_grid: &ObstacleGridMap,
    velocity_grid: &VelocityGridMap,
    cap: usize,
) -> (TrainingSet, VelocitySet) {
    assert_eq!(
        obstacle_grid.geometry, velocity_grid.geometry,
        "obstacle and velocity grids must share geometry"
    );
    let occupied = obstacle_grid.occupied_indices();
    let stride = if cap == 0 || occupied.len() <= cap {
        1
    } else {
        occupied.len().div_ceil(cap)
    };
    let geometry = &obstacle_grid.geometry;
    let (points, velocities) = occupied
        .iter()
        .step_by(stride)
        .map(|&idx| {
            let (ix, iy) = geometry.cell_of_index(idx);
            (geometry.cell_center(ix, iy), velocity_grid.cells[idx])
        })
        .unzip();
    (TrainingSet::new(points), VelocitySet::new(velocities))
}

/// Barrier synthesized from one frame of obstacle points and velocities.
#[derive(Debug, Clone)]
pub struct DlgpBarrier {
    gp: Option<GpModel>,
    velocities: VelocitySet,
    params: BarrierParams,
    form: BarrierForm,
}

impl DlgpBarrier {
    pub fn new(
        training: TrainingSet,
        velocities: VelocitySet,
        kernel: KernelParams,
        params: BarrierParams,
        form: BarrierForm,
    ) -> Result<Self, BarrierError> {
        if velocities.len() != training.len() {
            return Err(GpError::VelocityMismatch {
                points: training.len(),
                velocities: velocities.len(),
            }
            .into());
        }
        let gp = if training.is_empty() {
            None
        } else {
            Some(GpModel::build_obstacle(training, kernel)?)
        };
        Ok(Self {
            gp,
            velocities,
            params,
            form,
        })
    }

    pub fn from_model(model: GpModel, velocities: VelocitySet, params: BarrierParams) -> Self {
        Self {
            gp: Some(model),
            velocities,
            params,
            form: BarrierForm::Log,
        }
    }

    pub fn model(&self) -> Option<&GpModel> {
        self.gp.as_ref()
    }

    pub fn velocities(&self) -> &VelocitySet {
        &self.velocities
    }

    pub fn params(&self) -> &BarrierParams {
        &self.params
    }

    pub fn form(&self) -> BarrierForm {
        self.form
    }

    pub fn len(&self) -> usize {
        self.gp.as_ref().map_or(0, GpModel::len)
    }

    pub fn is_empty(&self) -> bool {
        self.gp.is_none()
    }

    fn gp(&self) -> Result<&GpModel, BarrierError> {
        self.gp.as_ref().ok_or(BarrierError::EmptyDataset)
    }

    fn value_from_mu(&self, mu: f64) -> BarrierValue {
        let BarrierParams { c_s, d_shift, mu_floor } = self.params;
        match self.form {
            BarrierForm::Log => {
                let clamped = mu <= mu_floor;
                BarrierValue {
                    h: -c_s * mu.max(mu_floor).ln() - d_shift,
                    mu,
                    clamped,
                }
            }
            BarrierForm::Linear => BarrierValue {
                h: c_s * ((-d_shift / c_s).exp() - mu),
                mu,
                clamped: false,
            },
        }
    }

    /// `dh/dmu`; fails in the clamped region of the log form.
    fn mu_sensitivity(&self, mu: f64) -> Result<f64, BarrierError> {
        match self.form {
            BarrierForm::Log if mu <= self.params.mu_floor => Err(BarrierError::ClampedRegion { mu }),
            BarrierForm::Log => Ok(-self.params.c_s / mu),
            BarrierForm::Linear => Ok(-self.params.c_s),
        }
    }

    /// Barrier value at position `p`.
    pub fn value(&self, p: &Point) -> Result<BarrierValue, BarrierError> {
        let gp = self.gp()?;
        Ok(self.value_from_mu(gp.predictive_mean(p)))
    }

    pub fn evaluate(&self, p: &Point) -> Result<f64, BarrierError> {
        self.value(p).map(|v| v.h)
    }

    pub fn spatial_gradient(&self, p: &Point) -> Result<[f64; 3], BarrierError> {
        let gp = self.gp()?;
        let scale = self.mu_sensitivity(gp.predictive_mean(p))?;
        let g = gp.mean_gradient(p) * scale;
        Ok([g.x, g.y, 0.0])
    }

    /// `dh/dt` with the stored per-point velocities.
    pub fn time_derivative(&self, p: &Point) -> Result<f64, BarrierError> {
        self.time_derivative_with(p, &self.velocities)
    }

    pub fn time_derivative_with(&self, p: &Point, velocities: &VelocitySet) -> Result<f64, BarrierError> {
        let gp = self.gp()?;
        let scale = self.mu_sensitivity(gp.predictive_mean(p))?;
        Ok(scale * gp.mean_time_derivative(p, velocities)?)
    }

    /// `h`, `dh/dx` and `dh/dt` in one pass, sharing the covariance vector
    /// and the solves.
    pub fn evaluate_full(&self, p: &Point) -> Result<BarrierEvaluation, BarrierError> {
        let gp = self.gp()?;
        let k = gp.cov_vector(p);
        let mu = k.dot(gp.alpha());
        let value = self.value_from_mu(mu);
        let scale = self.mu_sensitivity(mu)?;
        let g = gp.mean_gradient(p) * scale;

        let kdot = gp.cov_matrix_time_derivative(&self.velocities)?;
        let kqdot = gp.query_cov_time_derivative(p, &self.velocities)?;
        let beta = gp.solve(&k);
        let mu_dot = kqdot.dot(gp.alpha()) - beta.dot(&(kdot * gp.alpha()));
        Ok(BarrierEvaluation {
            h: value.h,
            grad: [g.x, g.y, 0.0],
            dh_dt: scale * mu_dot,
            mu,
            clamped: value.clamped,
        })
    }
}

/// Axis-aligned sampling region for barrier-field dumps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldRegion {
    pub min: Point,
    pub max: Point,
    pub resolution: f64,
}

/// Writes `x,y,h` rows over `region` (row-major, y outer).
pub fn write_barrier_field<W: Write>(
    barrier: &DlgpBarrier,
    region: &FieldRegion,
    out: W,
) -> Result<usize, Box<dyn std::error::Error>> {
    if region.resolution <= 0.0 {
        return Err("field resolution must be positive".into());
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "y", "h"])?;
    let nx = ((region.max.x - region.min.x) / region.resolution).floor() as usize + 1;
    let ny = ((region.max.y - region.min.y) / region.resolution).floor() as usize + 1;
    let mut rows = 0;
    for j in 0..ny {
        for i in 0..nx {
            let p = Point::new(
                region.min.x + i as f64 * region.resolution,
                region.min.y + j as f64 * region.resolution,
            );
            let h = barrier.evaluate(&p)?;
            w.write_record(&[p.x.to_string(), p.y.to_string(), h.to_string()])?;
            rows += 1;
        }
    }
    w.flush()?;
    Ok(rows)
}
