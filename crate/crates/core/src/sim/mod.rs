//! Deterministic planar world: unicycle robot, moving circular obstacles and
//! a ray-cast LiDAR.

pub mod dynamics;
pub mod lidar;
pub mod obstacles;

pub use dynamics::{step_dynamics, wrap_angle, RobotState};
pub use lidar::{cast_lidar, LidarScan, LidarSpec};
pub use obstacles::{Motion, ObstacleSpec, World};
