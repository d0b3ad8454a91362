//! Log-GP control barrier functions for LiDAR-based navigation among moving
//! obstacles: GP barrier synthesis with spatial and temporal derivatives, a
//! closed-form CBF-QP safety filter, the perception and tracking stack that
//! feeds it, a planar simulator and a scenario harness.

pub mod barrier;
pub mod controller;
pub mod gp;
pub mod harness;
pub mod perception;
pub mod sim;
