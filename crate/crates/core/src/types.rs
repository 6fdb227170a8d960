//! Shared domain types: detections, the detection graph, trajectories and
//! pattern assignments.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use nalgebra::Vector2;

use crate::error::{Error, Result};

/// Ground-plane location in meters.
pub type Point = Vector2<f64>;

/// Node of the detection graph. `Source` and `Sink` are the virtual entry
/// and exit nodes; they never collide with detection ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Node {
    Source,
    Det(usize),
    Sink,
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Source => write!(f, "I"),
            Node::Sink => write!(f, "O"),
            Node::Det(id) => write!(f, "{id}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub id: usize,
    pub frame: u32,
    pub pos: Point,
    /// Id of the upstream trajectory this detection came from.
    pub source_track: Option<u64>,
    pub is_track_start: bool,
    pub is_track_end: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackPoint {
    pub frame: u32,
    pub pos: Point,
}

/// A trajectory as read from or written to a file: an id and one
/// ground-plane point per frame, frames strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: u64,
    pub points: Vec<TrackPoint>,
}

impl Track {
    pub fn new(id: u64, points: Vec<TrackPoint>) -> Self {
        Self { id, points }
    }

    pub fn first_frame(&self) -> Option<u32> {
        self.points.first().map(|p| p.frame)
    }

    pub fn last_frame(&self) -> Option<u32> {
        self.points.last().map(|p| p.frame)
    }

    pub fn position_at(&self, frame: u32) -> Option<Point> {
        self.points
            .binary_search_by_key(&frame, |p| p.frame)
            .ok()
            .map(|i| self.points[i].pos)
    }
}

/// Detections plus the allowed transitions between them.
#[derive(Debug, Clone)]
pub struct DetectionGraph {
    detections: Vec<Detection>,
    edges: Vec<(Node, Node)>,
    edge_set: BTreeSet<(Node, Node)>,
    out_adj: Vec<Vec<Node>>,
    in_adj: Vec<Vec<Node>>,
    first_frame: u32,
    last_frame: u32,
}

impl DetectionGraph {
    /// Validates and indexes a graph. Detection ids must equal their index.
    pub fn new(detections: Vec<Detection>, edges: impl IntoIterator<Item = (Node, Node)>) -> Result<Self> {
        for (i, d) in detections.iter().enumerate() {
            if d.id != i {
                return Err(Error::InvalidGraph(format!(
                    "detection at index {i} has id {}",
                    d.id
                )));
            }
            if !(d.pos.x.is_finite() && d.pos.y.is_finite()) {
                return Err(Error::InvalidGraph(format!("detection {i} has a non-finite position")));
            }
        }
        let n = detections.len();
        let edge_set: BTreeSet<(Node, Node)> = edges.into_iter().collect();
        let mut out_adj = vec![Vec::new(); n];
        let mut in_adj = vec![Vec::new(); n];
        let mut has_in = vec![false; n];
        let mut has_out = vec![false; n];
        let check = |node: Node| match node {
            Node::Det(i) if i >= n => Err(Error::UnknownNode(node)),
            _ => Ok(()),
        };
        for &(a, b) in &edge_set {
            check(a)?;
            check(b)?;
            match (a, b) {
                (Node::Det(i), Node::Det(j)) => {
                    if i == j {
                        return Err(Error::InvalidGraph(format!("self edge on {i}")));
                    }
                    if detections[j].frame <= detections[i].frame {
                        return Err(Error::InvalidGraph(format!(
                            "edge ({i}, {j}) does not point forward in time"
                        )));
                    }
                }
                (Node::Source, Node::Det(j)) => has_in[j] = true,
                (Node::Det(i), Node::Sink) => has_out[i] = true,
                _ => {
                    return Err(Error::InvalidGraph(format!("edge ({a}, {b}) is not allowed")));
                }
            }
            if let Node::Det(i) = a {
                out_adj[i].push(b);
            }
            if let Node::Det(j) = b {
                in_adj[j].push(a);
            }
        }
        for i in 0..n {
            if !has_in[i] || !has_out[i] {
                return Err(Error::InvalidGraph(format!(
                    "detection {i} lacks its source or sink edge"
                )));
            }
        }
        let first_frame = detections.iter().map(|d| d.frame).min().unwrap_or(0);
        let last_frame = detections.iter().map(|d| d.frame).max().unwrap_or(0);
        Ok(Self {
            detections,
            edges: edge_set.iter().copied().collect(),
            edge_set,
            out_adj,
            in_adj,
            first_frame,
            last_frame,
        })
    }

    pub fn detections(&self) -> &[Detection] {
        &self.detections
    }

    pub fn len(&self) -> usize {
        self.detections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detections.is_empty()
    }

    pub fn detection(&self, id: usize) -> Result<&Detection> {
        self.detections.get(id).ok_or(Error::UnknownNode(Node::Det(id)))
    }

    /// All edges in a deterministic (sorted) order.
    pub fn edges(&self) -> &[(Node, Node)] {
        &self.edges
    }

    pub fn has_edge(&self, from: Node, to: Node) -> bool {
        self.edge_set.contains(&(from, to))
    }

    pub fn successors(&self, id: usize) -> &[Node] {
        &self.out_adj[id]
    }

    pub fn predecessors(&self, id: usize) -> &[Node] {
        &self.in_adj[id]
    }

    /// First and last frame over all detections.
    pub fn frame_range(&self) -> (u32, u32) {
        (self.first_frame, self.last_frame)
    }

    pub fn is_first_frame(&self, id: usize) -> bool {
        self.detections[id].frame == self.first_frame
    }

    pub fn is_last_frame(&self, id: usize) -> bool {
        self.detections[id].frame == self.last_frame
    }

    /// Area of the axis-aligned bounding box of all detections, in m².
    pub fn tracking_area(&self) -> f64 {
        let (w, h) = self.extent();
        w * h
    }

    /// Width and height of the bounding box of all detections.
    pub fn extent(&self) -> (f64, f64) {
        if self.detections.is_empty() {
            return (0.0, 0.0);
        }
        let mut lo = self.detections[0].pos;
        let mut hi = lo;
        for d in &self.detections {
            lo = lo.inf(&d.pos);
            hi = hi.sup(&d.pos);
        }
        (hi.x - lo.x, hi.y - lo.y)
    }

    /// The upstream trajectories this graph was built from, as node chains.
    pub fn input_trajectories(&self) -> TrajectorySet {
        let mut groups: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
        let mut loose = Vec::new();
        for d in &self.detections {
            match d.source_track {
                Some(t) => groups.entry(t).or_default().push(d.id),
                None => loose.push(d.id),
            }
        }
        let mut out: Vec<Trajectory> = groups
            .into_values()
            .map(|mut nodes| {
                nodes.sort_by_key(|&id| self.detections[id].frame);
                Trajectory::in_graph(nodes, self)
            })
            .collect();
        out.extend(loose.into_iter().map(|id| Trajectory::in_graph(vec![id], self)));
        out
    }

    /// Converts trajectories to file-level tracks with ids `1..`.
    pub fn to_tracks(&self, trajectories: &[Trajectory]) -> Vec<Track> {
        trajectories
            .iter()
            .enumerate()
            .map(|(k, t)| Track {
                id: k as u64 + 1,
                points: t
                    .nodes
                    .iter()
                    .map(|&id| TrackPoint {
                        frame: self.detections[id].frame,
                        pos: self.detections[id].pos,
                    })
                    .collect(),
            })
            .collect()
    }
}

/// Ordered chain of detections, implicitly entered from `I` and left to `O`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    pub nodes: Vec<usize>,
    pub starts_at_batch_begin: bool,
    pub ends_at_batch_end: bool,
}

pub type TrajectorySet = Vec<Trajectory>;

impl Trajectory {
    /// Builds a trajectory whose batch flags are taken from the graph's frame range.
    pub fn in_graph(nodes: Vec<usize>, graph: &DetectionGraph) -> Self {
        Self::with_batch(nodes, graph, graph.frame_range())
    }

    /// Builds a trajectory whose batch flags refer to an explicit frame range.
    pub fn with_batch(nodes: Vec<usize>, graph: &DetectionGraph, (first, last): (u32, u32)) -> Self {
        let frame = |id: &usize| graph.detections[*id].frame;
        let starts = nodes.first().map(frame) == Some(first);
        let ends = nodes.last().map(frame) == Some(last);
        Self {
            nodes,
            starts_at_batch_begin: starts,
            ends_at_batch_end: ends,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn first_frame(&self, graph: &DetectionGraph) -> u32 {
        graph.detections[self.nodes[0]].frame
    }

    pub fn last_frame(&self, graph: &DetectionGraph) -> u32 {
        graph.detections[*self.nodes.last().unwrap()].frame
    }
}

/// Maps each trajectory index to a pattern index of a [`crate::PatternSet`].
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Assignment(pub Vec<usize>);

impl Assignment {
    pub fn pattern_of(&self, trajectory: usize) -> usize {
        self.0[trajectory]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    EmptyTrajectory(usize),
    UnknownDetection(usize),
    DuplicateDetection(usize),
    Uncovered(usize),
    MissingEdge(Node, Node),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyTrajectory(t) => write!(f, "trajectory {t} is empty"),
            Violation::UnknownDetection(d) => write!(f, "detection {d} is not in the graph"),
            Violation::DuplicateDetection(d) => write!(f, "detection {d} used twice"),
            Violation::Uncovered(d) => write!(f, "detection {d} uncovered"),
            Violation::MissingEdge(a, b) => write!(f, "transition ({a}, {b}) is not a graph edge"),
        }
    }
}

/// Checks that every detection lies on exactly one trajectory and that every
/// transition, including the implicit source and sink edges, is a graph edge.
pub fn validate_trajectory_set(graph: &DetectionGraph, ts: &[Trajectory]) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut used = vec![false; graph.len()];
    for (k, t) in ts.iter().enumerate() {
        if t.nodes.is_empty() {
            out.push(Violation::EmptyTrajectory(k));
            continue;
        }
        let mut prev = Node::Source;
        for &id in &t.nodes {
            if id >= graph.len() {
                out.push(Violation::UnknownDetection(id));
                prev = Node::Det(id);
                continue;
            }
            if used[id] {
                out.push(Violation::DuplicateDetection(id));
            }
            used[id] = true;
            let cur = Node::Det(id);
            if !graph.has_edge(prev, cur) {
                out.push(Violation::MissingEdge(prev, cur));
            }
            prev = cur;
        }
        if !graph.has_edge(prev, Node::Sink) {
            out.push(Violation::MissingEdge(prev, Node::Sink));
        }
    }
    for (id, u) in used.iter().enumerate() {
        if !u {
            out.push(Violation::Uncovered(id));
        }
    }
    out
}
