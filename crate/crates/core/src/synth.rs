//! Synthetic scenes: agents walking along pattern centerlines, and edits that
//! reproduce common tracker failures on ground truth.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::pattern::PatternSet;
use crate::types::{Point, Track, TrackPoint};

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub agents: usize,
    pub fps: f64,
    /// Walking speed, m/s.
    pub speed: f64,
    /// Relative speed jitter: each agent walks at `speed · (1 + U(−j, j))`.
    pub speed_jitter: f64,
    /// Standard deviation of lateral offsets as a fraction of the pattern
    /// width. Offsets are truncated to the width.
    pub lateral_sigma: f64,
    /// Frames between successive agents on the same pattern.
    pub start_gap: u32,
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            agents: 2,
            fps: 1.0,
            speed: 1.5,
            speed_jitter: 0.0,
            lateral_sigma: 1.0 / 3.0,
            start_gap: 4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentMeta {
    pub track_id: u64,
    /// Index into the pattern set (never the empty pattern).
    pub pattern: usize,
    pub speed: f64,
    pub start_frame: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub gt: Vec<Track>,
    pub agents: Vec<AgentMeta>,
}

/// Offset drawn from a zero-mean normal, redrawn until it lies within `bound`.
fn truncated_normal(rng: &mut ChaCha8Rng, sigma: f64, bound: f64) -> f64 {
    if sigma <= 0.0 {
        return 0.0;
    }
    let normal = Normal::new(0.0, sigma).expect("positive sigma");
    loop {
        let x: f64 = normal.sample(rng);
        if x.abs() <= bound {
            return x;
        }
    }
}

/// Agent `k` walks pattern `k mod n` (over non-empty patterns), starting at
/// frame `(k / n) · start_gap`. Track ids are `1..=agents`.
pub fn generate_scene(patterns: &PatternSet, spec: &SceneSpec) -> Result<Scene> {
    let real = patterns.num_real();
    if real == 0 {
        return Err(Error::InvalidInput("scene needs at least one non-empty pattern".into()));
    }
    if !(spec.speed > 0.0 && spec.fps > 0.0) {
        return Err(Error::InvalidInput("speed and fps must be positive".into()));
    }
    if !(0.0..1.0).contains(&spec.speed_jitter) || spec.lateral_sigma < 0.0 {
        return Err(Error::InvalidInput("jitter must be in [0, 1) and sigma non-negative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut gt = Vec::with_capacity(spec.agents);
    let mut agents = Vec::with_capacity(spec.agents);
    for k in 0..spec.agents {
        let index = 1 + k % real;
        let pattern = patterns.get(index);
        let start_frame = (k / real) as u32 * spec.start_gap;
        let speed = if spec.speed_jitter > 0.0 {
            spec.speed * (1.0 + rng.random_range(-spec.speed_jitter..spec.speed_jitter))
        } else {
            spec.speed
        };
        let step = speed / spec.fps;
        let sigma = spec.lateral_sigma * pattern.width();
        let mut points = Vec::new();
        let mut i = 0u32;
        loop {
            let s = step * i as f64;
            if s > pattern.length() + 1e-9 {
                break;
            }
            let t = pattern.tangent_at(s);
            let normal = Point::new(-t.y, t.x);
            let offset = truncated_normal(&mut rng, sigma, pattern.width());
            points.push(TrackPoint {
                frame: start_frame + i,
                pos: pattern.point_at(s) + normal * offset,
            });
            i += 1;
        }
        let track_id = k as u64 + 1;
        gt.push(Track::new(track_id, points));
        agents.push(AgentMeta {
            track_id,
            pattern: index,
            speed,
            start_frame,
        });
    }
    Ok(Scene { gt, agents })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorruptOp {
    /// From `frame` on, tracks `a` and `b` exchange their detections.
    Swap { frame: u32, a: u64, b: u64 },
    /// Detections of `id` from `frame` on move to a new track.
    Fragment { id: u64, frame: u32 },
    /// Track `b` is appended to track `a`; their frames must not overlap.
    Merge { a: u64, b: u64 },
}

impl CorruptOp {
    fn frame_and_ids(&self) -> Option<(u32, Vec<u64>)> {
        match *self {
            CorruptOp::Swap { frame, a, b } => Some((frame, vec![a, b])),
            CorruptOp::Fragment { id, frame } => Some((frame, vec![id])),
            CorruptOp::Merge { .. } => None,
        }
    }
}

/// Applies `ops` in order. Detections are only regrouped, never changed.
/// New fragment ids are one above the largest id present at that point.
pub fn corrupt(gt: &[Track], ops: &[CorruptOp]) -> Result<Vec<Track>> {
    for (i, x) in ops.iter().enumerate() {
        for y in &ops[i + 1..] {
            if let (Some((fx, ix)), Some((fy, iy))) = (x.frame_and_ids(), y.frame_and_ids()) {
                if fx == fy && ix.iter().any(|id| iy.contains(id)) {
                    return Err(Error::InvalidInput(format!(
                        "conflicting edits on frame {fx}: {x:?} and {y:?}"
                    )));
                }
            }
        }
    }
    let mut tracks: BTreeMap<u64, Vec<TrackPoint>> = BTreeMap::new();
    for t in gt {
        if tracks.insert(t.id, t.points.clone()).is_some() {
            return Err(Error::InvalidInput(format!("duplicate track id {}", t.id)));
        }
    }
    let missing = |id: u64| Error::InvalidInput(format!("no track with id {id}"));
    for op in ops {
        match *op {
            CorruptOp::Swap { frame, a, b } => {
                if a == b {
                    return Err(Error::InvalidInput(format!("swap of track {a} with itself")));
                }
                let pa = tracks.remove(&a).ok_or_else(|| missing(a))?;
                let Some(pb) = tracks.remove(&b) else {
                    tracks.insert(a, pa);
                    return Err(missing(b));
                };
                let (a_keep, a_tail): (Vec<_>, Vec<_>) = pa.into_iter().partition(|p| p.frame < frame);
                let (b_keep, b_tail): (Vec<_>, Vec<_>) = pb.into_iter().partition(|p| p.frame < frame);
                tracks.insert(a, a_keep.into_iter().chain(b_tail).collect());
                tracks.insert(b, b_keep.into_iter().chain(a_tail).collect());
            }
            CorruptOp::Fragment { id, frame } => {
                let pts = tracks.get_mut(&id).ok_or_else(|| missing(id))?;
                let cut = pts.partition_point(|p| p.frame < frame);
                if cut == 0 || cut == pts.len() {
                    return Err(Error::InvalidInput(format!(
                        "frame {frame} does not split track {id}"
                    )));
                }
                let tail = pts.split_off(cut);
                let new_id = tracks.keys().next_back().copied().unwrap_or(0) + 1;
                tracks.insert(new_id, tail);
            }
            CorruptOp::Merge { a, b } => {
                if a == b {
                    return Err(Error::InvalidInput(format!("merge of track {a} with itself")));
                }
                let pb = tracks.get(&b).ok_or_else(|| missing(b))?.clone();
                let pa = tracks.get_mut(&a).ok_or_else(|| missing(a))?;
                if pb.iter().any(|q| pa.iter().any(|p| p.frame == q.frame)) {
                    return Err(Error::InvalidInput(format!("tracks {a} and {b} overlap in time")));
                }
                pa.extend(pb);
                pa.sort_by_key(|p| p.frame);
                tracks.remove(&b);
            }
        }
    }
    Ok(tracks
        .into_iter()
        .filter(|(_, pts)| !pts.is_empty())
        .map(|(id, pts)| Track::new(id, pts))
        .collect())
}
