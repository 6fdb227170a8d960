//! Pedestrian tracking with learned motion patterns.
//!
//! Tracklets from an upstream tracker become a detection graph. Trajectories
//! through that graph, and the motion pattern each one follows, are chosen
//! jointly by maximizing a ratio of along-pattern progress to path length.
//! Patterns themselves are mined from trajectories under count and cost
//! budgets, either from ground truth or by alternating with tracking.

pub mod config;
pub mod emloop;
pub mod error;
pub mod fracopt;
pub mod graphgen;
pub mod io;
pub mod linker;
pub mod metrics;
pub mod miner;
pub mod pattern;
pub mod pipeline;
pub mod scoring;
pub mod synth;
pub mod types;

pub use config::{Config, WidthSet};
pub use error::{Error, Result};
pub use pattern::{Pattern, PatternSet};
pub use types::{
    validate_trajectory_set, Assignment, Detection, DetectionGraph, Node, Point, Track, TrackPoint,
    Trajectory, TrajectorySet, Violation,
};
