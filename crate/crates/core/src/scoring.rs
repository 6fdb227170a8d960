//! Edge scores `n` (total length) and `m` (aligned length), their per-trajectory
//! sums and the global ratio objective.

use std::ops::{Add, AddAssign};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::pattern::{Pattern, PatternSet, Projection};
use crate::types::{Assignment, DetectionGraph, Node, Point, Trajectory};

/// `n` is the edge length plus the matching centerline length; `m` is the
/// part of both that is mutually aligned. Also used for trajectory sums.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EdgeScore {
    pub n: f64,
    pub m: f64,
}

impl EdgeScore {
    pub const ZERO: EdgeScore = EdgeScore { n: 0.0, m: 0.0 };

    pub fn new(n: f64, m: f64) -> Self {
        Self { n, m }
    }
}

impl Add for EdgeScore {
    type Output = EdgeScore;
    fn add(self, o: EdgeScore) -> EdgeScore {
        EdgeScore::new(self.n + o.n, self.m + o.m)
    }
}

impl AddAssign for EdgeScore {
    fn add_assign(&mut self, o: EdgeScore) {
        self.n += o.n;
        self.m += o.m;
    }
}

/// Whether the detection at the open end of a source/sink edge lies on the
/// first/last frame of the batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BoundaryFlags {
    pub at_batch_begin: bool,
    pub at_batch_end: bool,
}

pub fn project_to_centerline(point: Point, pattern: &Pattern) -> Result<Projection> {
    pattern.project(point)
}

/// Length of the projection of `v` onto the line spanned by `dir`; zero when
/// `dir` has no direction.
fn projected_len(v: Point, dir: Point) -> f64 {
    let norm = dir.norm();
    if norm == 0.0 {
        0.0
    } else {
        v.dot(&dir).abs() / norm
    }
}

/// Score of a detection-to-detection edge under a non-empty pattern, given
/// both endpoints and their centerline projections.
pub fn score_step(
    from: Point,
    from_proj: &Projection,
    to: Point,
    to_proj: &Projection,
    width: f64,
    eps: f64,
) -> EdgeScore {
    let edge = to - from;
    let len = edge.norm();
    let advance = to_proj.arc_length - from_proj.arc_length;
    if advance >= 0.0 {
        let n = len + advance;
        let m = if from_proj.dist > width || to_proj.dist > width {
            0.0
        } else {
            let chord = to_proj.foot - from_proj.foot;
            projected_len(chord, edge) + projected_len(edge, chord)
        };
        EdgeScore::new(n, m)
    } else {
        let back = -advance;
        EdgeScore::new(len - back, -(1.0 + eps) * back)
    }
}

/// Score of the source edge entering a trajectory at a detection.
pub fn score_enter(to_proj: &Projection, at_batch_begin: bool) -> EdgeScore {
    if at_batch_begin {
        EdgeScore::ZERO
    } else {
        EdgeScore::new(to_proj.arc_length, 0.0)
    }
}

/// Score of the sink edge leaving a trajectory at a detection.
pub fn score_exit(from_proj: &Projection, pattern_length: f64, at_batch_end: bool) -> EdgeScore {
    if at_batch_end {
        EdgeScore::ZERO
    } else {
        EdgeScore::new(pattern_length - from_proj.arc_length, 0.0)
    }
}

/// Score of a detection-to-detection edge under the empty pattern.
pub fn score_empty_step(from: Point, to: Point, eps_empty: f64) -> EdgeScore {
    let n = (to - from).norm();
    EdgeScore::new(n, eps_empty * n)
}

/// Scores one graph edge under `pattern` (which may be the empty pattern).
pub fn edge_score(
    graph: &DetectionGraph,
    from: Node,
    to: Node,
    pattern: &Pattern,
    flags: BoundaryFlags,
    cfg: &Config,
) -> Result<EdgeScore> {
    for node in [from, to] {
        if let Node::Det(id) = node {
            graph.detection(id)?;
        }
    }
    if !graph.has_edge(from, to) {
        return Err(Error::MissingEdge(from, to));
    }
    score_transition(graph, from, to, pattern, flags, cfg)
}

/// Like [`edge_score`] but without requiring `(from, to)` to be a graph edge.
fn score_transition(
    graph: &DetectionGraph,
    from: Node,
    to: Node,
    pattern: &Pattern,
    flags: BoundaryFlags,
    cfg: &Config,
) -> Result<EdgeScore> {
    let pos = |id: usize| graph.detection(id).map(|d| d.pos);
    match (from, to) {
        (Node::Det(i), Node::Det(j)) => {
            let (li, lj) = (pos(i)?, pos(j)?);
            if pattern.is_empty() {
                Ok(score_empty_step(li, lj, cfg.eps_empty))
            } else {
                let (pi, pj) = (pattern.project(li)?, pattern.project(lj)?);
                Ok(score_step(li, &pi, lj, &pj, pattern.width(), cfg.eps))
            }
        }
        (Node::Source, Node::Det(j)) => {
            let lj = pos(j)?;
            if pattern.is_empty() {
                Ok(EdgeScore::ZERO)
            } else {
                Ok(score_enter(&pattern.project(lj)?, flags.at_batch_begin))
            }
        }
        (Node::Det(i), Node::Sink) => {
            let li = pos(i)?;
            if pattern.is_empty() {
                Ok(EdgeScore::ZERO)
            } else {
                Ok(score_exit(&pattern.project(li)?, pattern.length(), flags.at_batch_end))
            }
        }
        _ => Err(Error::MissingEdge(from, to)),
    }
}

/// Sums of `n` and `m` over the source edge, interior edges and sink edge.
/// The returned `n` and `m` are the trajectory totals `N` and `M`.
pub fn trajectory_score(
    graph: &DetectionGraph,
    t: &Trajectory,
    pattern: &Pattern,
    cfg: &Config,
) -> Result<EdgeScore> {
    if t.nodes.is_empty() {
        return Err(Error::InvalidInput("empty trajectory".into()));
    }
    let flags = BoundaryFlags {
        at_batch_begin: t.starts_at_batch_begin,
        at_batch_end: t.ends_at_batch_end,
    };
    if pattern.is_empty() {
        let mut total = EdgeScore::ZERO;
        for w in t.nodes.windows(2) {
            let (a, b) = (graph.detection(w[0])?.pos, graph.detection(w[1])?.pos);
            total += score_empty_step(a, b, cfg.eps_empty);
        }
        return Ok(total);
    }
    let projections = t
        .nodes
        .iter()
        .map(|&id| {
            let d = graph.detection(id)?;
            Ok((d.pos, pattern.project(d.pos)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = score_enter(&projections[0].1, flags.at_batch_begin);
    for w in projections.windows(2) {
        total += score_step(w[0].0, &w[0].1, w[1].0, &w[1].1, pattern.width(), cfg.eps);
    }
    total += score_exit(&projections[projections.len() - 1].1, pattern.length(), flags.at_batch_end);
    Ok(total)
}

/// Total `(ΣM, ΣN)` of an assignment, returned as an [`EdgeScore`].
pub fn objective_sums(
    graph: &DetectionGraph,
    ts: &[Trajectory],
    ps: &PatternSet,
    a: &Assignment,
    cfg: &Config,
) -> Result<EdgeScore> {
    if a.len() != ts.len() {
        return Err(Error::InvalidInput(format!(
            "assignment covers {} trajectories, expected {}",
            a.len(),
            ts.len()
        )));
    }
    let mut total = EdgeScore::ZERO;
    for (k, t) in ts.iter().enumerate() {
        let p = a.pattern_of(k);
        if p >= ps.len() {
            return Err(Error::InvalidInput(format!("pattern index {p} out of range")));
        }
        total += trajectory_score(graph, t, ps.get(p), cfg)?;
    }
    Ok(total)
}

/// The ratio objective `ΣM / ΣN`.
pub fn objective(
    graph: &DetectionGraph,
    ts: &[Trajectory],
    ps: &PatternSet,
    a: &Assignment,
    cfg: &Config,
) -> Result<f64> {
    let s = objective_sums(graph, ts, ps, a, cfg)?;
    if s.n <= 0.0 {
        return Err(Error::Degenerate(format!("total length is {}", s.n)));
    }
    Ok(s.m / s.n)
}
