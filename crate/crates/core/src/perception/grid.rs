//! Robot-centered occupancy and velocity grids.
//!
//! The window follows the robot, but its origin snaps to a fixed world
//! lattice so cell centers do not drift as the robot moves.

use crate::gp::Point;
use crate::sim::{LidarScan, RobotState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    /// Side length of the square window, meters.
    pub size: f64,
    pub resolution: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            size: 12.0,
            resolution: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridGeometry {
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    /// World lattice index of cell (0, 0).
    pub origin_index: (i64, i64),
}

impl GridGeometry {
    pub fn centered(center: &Point, spec: &GridSpec) -> Self {
        let cells = (spec.size / spec.resolution).round().max(1.0) as usize;
        let half = spec.size / 2.0;
        let origin_index = (
            ((center.x - half) / spec.resolution).floor() as i64,
            ((center.y - half) / spec.resolution).floor() as i64,
        );
        Self {
            width: cells,
            height: cells,
            resolution: spec.resolution,
            origin_index,
        }
    }

    /// World coordinates of the lower-left corner of cell (0, 0).
    pub fn origin(&self) -> Point {
        Point::new(
            self.origin_index.0 as f64 * self.resolution,
            self.origin_index.1 as f64 * self.resolution,
        )
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.width + ix
    }

    pub fn cell_of_index(&self, idx: usize) -> (usize, usize) {
        (idx % self.width, idx / self.width)
    }

    pub fn cell_of(&self, p: &Point) -> Option<(usize, usize)> {
        let gx = (p.x / self.resolution).floor() as i64 - self.origin_index.0;
        let gy = (p.y / self.resolution).floor() as i64 - self.origin_index.1;
        if gx < 0 || gy < 0 || gx >= self.width as i64 || gy >= self.height as i64 {
            return None;
        }
        Some((gx as usize, gy as usize))
    }

    pub fn cell_center(&self, ix: usize, iy: usize) -> Point {
        Point::new(
            ((self.origin_index.0 + ix as i64) as f64 + 0.5) * self.resolution,
            ((self.origin_index.1 + iy as i64) as f64 + 0.5) * self.resolution,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleGridMap {
    pub geometry: GridGeometry,
    pub cells: Vec<bool>,
}

impl ObstacleGridMap {
    pub fn empty(geometry: GridGeometry) -> Self {
        Self {
            cells: vec![false; geometry.len()],
            geometry,
        }
    }

    pub fn set(&mut self, ix: usize, iy: usize) {
        let idx = self.geometry.index(ix, iy);
        self.cells[idx] = true;
    }

    pub fn get(&self, ix: usize, iy: usize) -> bool {
        self.cells[self.geometry.index(ix, iy)]
    }

    /// Flat indices of occupied cells in row-major order.
    pub fn occupied_indices(&self) -> Vec<usize> {
        self.cells
            .iter()
            .enumerate()
            .filter_map(|(i, &c)| c.then_some(i))
            .collect()
    }

    pub fn occupied_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    /// Cell centers of occupied cells, row-major.
    pub fn occupied_points(&self) -> Vec<Point> {
        self.occupied_indices()
            .into_iter()
            .map(|i| {
                let (ix, iy) = self.geometry.cell_of_index(i);
                self.geometry.cell_center(ix, iy)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VelocityGridMap {
    pub geometry: GridGeometry,
    pub cells: Vec<Point>,
}

impl VelocityGridMap {
    pub fn zeros(geometry: GridGeometry) -> Self {
        Self {
            cells: vec![Point::zeros(); geometry.len()],
            geometry,
        }
    }
}

/// Rebuilds the occupancy grid around the robot from one scan: a cell is
/// occupied iff some hit endpoint falls inside it. Max-range returns mark
/// nothing.
pub fn update_obstacle_grid(scan: &LidarScan, robot: &RobotState, spec: &GridSpec) -> ObstacleGridMap {
    let geometry = GridGeometry::centered(&robot.position(), spec);
    let mut grid = ObstacleGridMap::empty(geometry);
    for p in scan.endpoints(robot) {
        if let Some((ix, iy)) = geometry.cell_of(&p) {
            grid.set(ix, iy);
        }
    }
    grid
}
