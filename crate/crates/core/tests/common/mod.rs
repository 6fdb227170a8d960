#![allow(dead_code)]

pub mod props;

use ptrack::metrics::MatchConfig;
use ptrack::synth::{corrupt, generate_scene, CorruptOp, SceneSpec};
use ptrack::{Pattern, PatternSet, Point, Track};

/// Two straight flows crossing at (6, 6).
pub fn x_patterns() -> PatternSet {
    PatternSet::new(vec![
        Pattern::new(vec![Point::new(0.0, 0.0), Point::new(12.0, 12.0)], 1.0).unwrap(),
        Pattern::new(vec![Point::new(0.0, 12.0), Point::new(12.0, 0.0)], 1.0).unwrap(),
    ])
}

/// Agents alternate between the two flows; pairs start `gap` frames apart.
pub fn x_scene(agents: usize, gap: u32, sigma: f64, seed: u64) -> Vec<Track> {
    let spec = SceneSpec {
        agents,
        fps: 1.0,
        speed: 1.5,
        speed_jitter: 0.0,
        lateral_sigma: sigma,
        start_gap: gap,
        seed,
    };
    generate_scene(&x_patterns(), &spec).unwrap().gt
}

/// Staggered scene used to learn patterns from ground truth.
pub fn x_training() -> Vec<Track> {
    x_scene(6, 3, 0.0, 1)
}

/// One agent per flow, both starting at frame 0.
pub fn x_pair() -> Vec<Track> {
    x_scene(2, 0, 0.0, 2)
}

pub fn swap_at_crossing(gt: &[Track]) -> Vec<Track> {
    corrupt(gt, &[CorruptOp::Swap { frame: 6, a: 1, b: 2 }]).unwrap()
}

/// Matching radius for the crossing fixtures. The two flows stay within 3 m of
/// each other for several frames around the crossing, so the default radius
/// would forgive a swap there.
pub fn tight_match() -> MatchConfig {
    MatchConfig { dist_threshold: 1.0 }
}
