//! Scenario files, closed-loop episodes, metrics, variant comparison and
//! the barrier micro-benchmark.

pub mod bench;
pub mod compare;
pub mod episode;
pub mod metrics;
pub mod output;
pub mod scenario;

pub use bench::{bench_barrier, BenchRow};
pub use compare::{compare, Comparison};
pub use episode::{
    run_episode, run_episode_with, EpisodeOptions, EpisodeResult, LogRow, Outcome, StepMode, TrajectoryLog,
};
pub use metrics::{compute_metrics, Metrics};
pub use scenario::{load_scenario, parse_scenario, ScenarioConfig, ScenarioError, Variant};
