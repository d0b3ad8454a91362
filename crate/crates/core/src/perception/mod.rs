//! LiDAR perception: occupancy grid, DBSCAN clusters, enclosing ellipses,
//! Hungarian association and Kalman velocity estimates, combined into the
//! per-frame velocity grid.

pub mod assignment;
pub mod dbscan;
pub mod grid;
pub mod kalman;
pub mod mvee;

use serde::Serialize;

use crate::gp::Point;
use crate::sim::{LidarScan, RobotState};
use assignment::associate;
use dbscan::{cluster_members, cluster_points, ClusterLabels, DbscanParams};
use grid::{update_obstacle_grid, GridSpec, ObstacleGridMap, VelocityGridMap};
use kalman::{kalman_step, KalmanParams, TrackedObstacle};
use mvee::{fit_mvee, Ellipse, MveeFit, MveeParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerceptionParams {
    pub grid: GridSpec,
    pub dbscan: DbscanParams,
    pub mvee: MveeParams,
    pub d_max: f64,
    pub kalman: KalmanParams,
    pub max_misses: u32,
    /// Updates a track needs before its velocity is published.
    pub warmup_updates: u32,
}

impl Default for PerceptionParams {
    fn default() -> Self {
        Self {
            grid: GridSpec::default(),
            dbscan: DbscanParams::default(),
            mvee: MveeParams::default(),
            d_max: 1.0,
            kalman: KalmanParams::default(),
            max_misses: 5,
            warmup_updates: 2,
        }
    }
}

/// Multi-object tracker. Track ids are never reused.
#[derive(Debug, Clone, Default)]
pub struct Tracker {
    tracks: Vec<TrackedObstacle>,
    next_id: u64,
}

impl Tracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn tracks(&self) -> &[TrackedObstacle] {
        &self.tracks
    }

    pub fn track(&self, id: u64) -> Option<&TrackedObstacle> {
        self.tracks.iter().find(|t| t.id == id)
    }

    /// Associates `detections` with the current tracks, runs one filter
    /// step per track and returns the track id assigned to each detection.
    pub fn step(&mut self, detections: &[Ellipse], dt: f64, params: &PerceptionParams) -> Vec<u64> {
        let previous: Vec<Ellipse> = self.tracks.iter().map(TrackedObstacle::ellipse).collect();
        let assoc = associate(&previous, detections, params.d_max);
        let mut detection_ids = vec![0; detections.len()];
        let mut next_tracks = Vec::with_capacity(self.tracks.len() + assoc.new_detections.len());
        for &(t, d) in &assoc.matches {
            let updated = kalman_step(&self.tracks[t], Some(&detections[d]), dt, &params.kalman);
            detection_ids[d] = updated.id;
            next_tracks.push(updated);
        }
        for &t in &assoc.missed_tracks {
            let coasted = kalman_step(&self.tracks[t], None, dt, &params.kalman);
            if coasted.misses < params.max_misses {
                next_tracks.push(coasted);
            }
        }
        for &d in &assoc.new_detections {
            let track = TrackedObstacle::new(self.next_id, &detections[d], &params.kalman);
            self.next_id += 1;
            detection_ids[d] = track.id;
            next_tracks.push(track);
        }
        next_tracks.sort_by_key(|t| t.id);
        self.tracks = next_tracks;
        detection_ids
    }
}

/// Each occupied cell gets the published velocity of the track its cluster
/// was associated with; noise cells stay at zero.
pub fn build_velocity_grid(
    grid: &ObstacleGridMap,
    labels: &ClusterLabels,
    cluster_tracks: &[u64],
    tracker: &Tracker,
    warmup_updates: u32,
) -> VelocityGridMap {
    let mut velocity = VelocityGridMap::zeros(grid.geometry);
    for (cell, label) in grid.occupied_indices().into_iter().zip(labels) {
        let Some(c) = label else { continue };
        if let Some(track) = cluster_tracks.get(*c).and_then(|id| tracker.track(*id)) {
            velocity.cells[cell] = track.reported_velocity(warmup_updates);
        }
    }
    velocity
}

#[derive(Debug, Clone)]
pub struct PerceptionFrame {
    pub obstacle_grid: ObstacleGridMap,
    pub velocity_grid: VelocityGridMap,
    /// Occupied cell centers, row-major.
    pub points: Vec<Point>,
    pub labels: ClusterLabels,
    pub fits: Vec<MveeFit>,
    /// Track id of each cluster's ellipse.
    pub cluster_tracks: Vec<u64>,
}

impl PerceptionFrame {
    pub fn ellipses(&self) -> Vec<Ellipse> {
        self.fits.iter().map(|f| f.ellipse).collect()
    }
}

/// Sequential per-frame pipeline owning the track store.
#[derive(Debug, Clone, Default)]
pub struct Perception {
    pub params: PerceptionParams,
    tracker: Tracker,
}

impl Perception {
    pub fn new(params: PerceptionParams) -> Self {
        Self {
            params,
            tracker: Tracker::new(),
        }
    }

    pub fn tracker(&self) -> &Tracker {
        &self.tracker
    }

    pub fn process(&mut self, scan: &LidarScan, robot: &RobotState, dt: f64) -> PerceptionFrame {
        let obstacle_grid = update_obstacle_grid(scan, robot, &self.params.grid);
        let points = obstacle_grid.occupied_points();
        let labels = cluster_points(&points, &self.params.dbscan);
        let fits: Vec<MveeFit> = cluster_members(&labels)
            .iter()
            .map(|members| {
                let cluster: Vec<Point> = members.iter().map(|&i| points[i]).collect();
                fit_mvee(&cluster, &self.params.mvee)
            })
            .collect();
        let ellipses: Vec<Ellipse> = fits.iter().map(|f| f.ellipse).collect();
        let cluster_tracks = self.tracker.step(&ellipses, dt, &self.params);
        let velocity_grid = build_velocity_grid(
            &obstacle_grid,
            &labels,
            &cluster_tracks,
            &self.tracker,
            self.params.warmup_updates,
        );
        PerceptionFrame {
            obstacle_grid,
            velocity_grid,
            points,
            labels,
            fits,
            cluster_tracks,
        }
    }
}

#[derive(Debug, Serialize)]
struct EllipseRecord {
    cx: f64,
    cy: f64,
    a: f64,
    b: f64,
    theta: f64,
    gap: f64,
    iterations: usize,
    degenerate: bool,
    track: u64,
}

#[derive(Debug, Serialize)]
struct TrackRecord {
    id: u64,
    state: Vec<f64>,
    age: u32,
    misses: u32,
}

#[derive(Debug, Serialize)]
struct FrameRecord<'a> {
    step: usize,
    t: f64,
    occupied: Vec<[f64; 2]>,
    labels: &'a [Option<usize>],
    ellipses: Vec<EllipseRecord>,
    tracks: Vec<TrackRecord>,
}

/// One JSON line describing a perception frame.
pub fn frame_json_line(step: usize, t: f64, frame: &PerceptionFrame, tracker: &Tracker) -> String {
    let record = FrameRecord {
        step,
        t,
        occupied: frame.points.iter().map(|p| [p.x, p.y]).collect(),
        labels: &frame.labels,
        ellipses: frame
            .fits
            .iter()
            .zip(&frame.cluster_tracks)
            .map(|(f, &track)| EllipseRecord {
                cx: f.ellipse.center.x,
                cy: f.ellipse.center.y,
                a: f.ellipse.a,
                b: f.ellipse.b,
                theta: f.ellipse.theta,
                gap: f.gap,
                iterations: f.iterations,
                degenerate: f.degenerate,
                track,
            })
            .collect(),
        tracks: tracker
            .tracks()
            .iter()
            .map(|t| TrackRecord {
                id: t.id,
                state: t.state.iter().copied().collect(),
                age: t.age,
                misses: t.misses,
            })
            .collect(),
    };
    serde_json::to_string(&record).expect("frame record serializes")
}
