//! End-to-end entry points working on file-level tracks.

use crate::config::Config;
use crate::emloop::{run_unsupervised, Schedule, UnsupervisedOutcome};
use crate::error::Result;
use crate::graphgen::build_graph;
use crate::linker::{link, LinkOutcome};
use crate::miner::{generate_candidates, mine, MiningOutcome};
use crate::pattern::PatternSet;
use crate::types::{DetectionGraph, Track};

#[derive(Debug, Clone)]
pub struct TrackResult {
    pub graph: DetectionGraph,
    pub link: LinkOutcome,
    /// Refined tracks with ids `1..`.
    pub tracks: Vec<Track>,
}

/// Re-links `input` under fixed patterns.
pub fn track(input: &[Track], patterns: &PatternSet, cfg: &Config) -> Result<TrackResult> {
    cfg.validate()?;
    let graph = build_graph(input, cfg)?;
    let link = link(&graph, patterns, cfg)?;
    let tracks = graph.to_tracks(&link.trajectories);
    Ok(TrackResult { graph, link, tracks })
}

/// Mines patterns from ground-truth tracks.
pub fn learn_patterns(gt: &[Track], cfg: &Config) -> Result<MiningOutcome> {
    cfg.validate()?;
    let graph = build_graph(gt, cfg)?;
    let ts = graph.input_trajectories();
    let cands = generate_candidates(&graph, &ts, cfg, graph.frame_range())?;
    mine(&graph, &ts, &cands, cfg)
}

#[derive(Debug, Clone)]
pub struct UnsupervisedResult {
    pub graph: DetectionGraph,
    pub outcome: UnsupervisedOutcome,
    pub tracks: Vec<Track>,
}

/// Learns patterns and refined tracks from tracker output alone. Without a
/// schedule, [`Schedule::default_for`] the input is used.
pub fn unsupervised(
    input: &[Track],
    cfg: &Config,
    schedule: Option<Schedule>,
    max_patterns: usize,
) -> Result<UnsupervisedResult> {
    cfg.validate()?;
    let graph = build_graph(input, cfg)?;
    let initial = graph.input_trajectories();
    let schedule = match schedule {
        Some(s) => s,
        None => Schedule::default_for(&graph, &initial, cfg)?,
    };
    let outcome = run_unsupervised(&graph, &initial, cfg, &schedule, max_patterns)?;
    let tracks = graph.to_tracks(&outcome.trajectories);
    Ok(UnsupervisedResult {
        graph,
        outcome,
        tracks,
    })
}
