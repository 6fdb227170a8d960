//! Joint trajectory and pattern-assignment optimization for fixed patterns.
//!
//! Every (edge, pattern) pair is a 0/1 flow variable. Each detection has one
//! unit of inflow and outflow summed over patterns, and flow of each pattern
//! is conserved through it, so a feasible solution decomposes into
//! node-disjoint source-to-sink paths that each carry a single pattern.

use crate::config::Config;
use crate::error::{Error, Result};
use crate::fracopt::{maximize_ratio, Comparator, RatioSearchConfig, SolverModel};
use crate::pattern::PatternSet;
use crate::scoring::{edge_score, objective, BoundaryFlags};
use crate::types::{Assignment, DetectionGraph, Node, Trajectory, TrajectorySet};

/// Bijection between solver variables and (edge, pattern) pairs.
#[derive(Debug, Clone)]
pub struct FlowVariables {
    edges: Vec<(Node, Node)>,
    num_patterns: usize,
}

impl FlowVariables {
    pub fn new(graph: &DetectionGraph, num_patterns: usize) -> Self {
        Self {
            edges: graph.edges().to_vec(),
            num_patterns,
        }
    }

    pub fn len(&self) -> usize {
        self.edges.len() * self.num_patterns
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, edge: usize, pattern: usize) -> usize {
        edge * self.num_patterns + pattern
    }

    /// `(pattern, from, to)` of a variable.
    pub fn decode(&self, var: usize) -> (usize, Node, Node) {
        let (from, to) = self.edges[var / self.num_patterns];
        (var % self.num_patterns, from, to)
    }
}

#[derive(Debug, Clone)]
pub struct LinkOutcome {
    /// Reported trajectories; those assigned to the empty pattern are left out
    /// when `remove_empty` is set.
    pub trajectories: TrajectorySet,
    pub assignment: Assignment,
    /// Trajectories assigned to the empty pattern that were left out.
    pub removed: TrajectorySet,
    pub alpha_star: f64,
    /// Objective of the full decoded cover.
    pub objective: f64,
    pub timed_out: bool,
    pub num_variables: usize,
}

impl LinkOutcome {
    /// All decoded trajectories, including removed ones, in canonical order.
    pub fn full_cover(&self, graph: &DetectionGraph) -> (TrajectorySet, Assignment) {
        let mut all: Vec<(Trajectory, usize)> = self
            .trajectories
            .iter()
            .cloned()
            .zip(self.assignment.0.iter().copied())
            .chain(self.removed.iter().cloned().map(|t| (t, PatternSet::EMPTY)))
            .collect();
        all.sort_by(|a, b| path_order(graph, &a.0, &b.0));
        let (ts, labels) = all.into_iter().unzip();
        (ts, Assignment(labels))
    }
}

fn path_order(graph: &DetectionGraph, a: &Trajectory, b: &Trajectory) -> std::cmp::Ordering {
    let key = |t: &Trajectory| {
        let d = &graph.detections()[t.nodes[0]];
        (d.frame, d.pos.x, d.id)
    };
    let (ka, kb) = (key(a), key(b));
    ka.0.cmp(&kb.0).then(ka.1.total_cmp(&kb.1)).then(ka.2.cmp(&kb.2))
}

/// Builds the flow model. Returns the model and its variable map.
pub fn build_model(
    graph: &DetectionGraph,
    patterns: &PatternSet,
    cfg: &Config,
) -> Result<(SolverModel, FlowVariables)> {
    for id in 0..graph.len() {
        if graph.successors(id).is_empty() {
            return Err(Error::InfeasibleGraph(id));
        }
    }
    let np = patterns.len();
    let vars = FlowVariables::new(graph, np);
    let mut model = SolverModel::new(vars.len());
    let mut outgoing: Vec<Vec<usize>> = vec![Vec::new(); graph.len()];
    let mut incoming: Vec<Vec<usize>> = vec![Vec::new(); graph.len()];
    let mut from_source = Vec::new();
    let mut into_sink = Vec::new();

    for (e, &(from, to)) in graph.edges().iter().enumerate() {
        let flags = BoundaryFlags {
            at_batch_begin: matches!(to, Node::Det(j) if graph.is_first_frame(j)),
            at_batch_end: matches!(from, Node::Det(i) if graph.is_last_frame(i)),
        };
        match from {
            Node::Det(i) => outgoing[i].push(e),
            Node::Source => from_source.push(e),
            Node::Sink => unreachable!(),
        }
        match to {
            Node::Det(j) => incoming[j].push(e),
            Node::Sink => into_sink.push(e),
            Node::Source => unreachable!(),
        }
        for p in 0..np {
            let s = edge_score(graph, from, to, patterns.get(p), flags, cfg)?;
            model.set_ratio_term(vars.index(e, p), s.m, s.n)?;
        }
    }

    let all_patterns = |edges: &[usize]| -> Vec<(usize, f64)> {
        edges
            .iter()
            .flat_map(|&e| (0..np).map(move |p| (e, p)))
            .map(|(e, p)| (vars.index(e, p), 1.0))
            .collect()
    };
    for v in 0..graph.len() {
        model.add_constraint(all_patterns(&outgoing[v]), Comparator::Eq, 1.0)?;
        model.add_constraint(all_patterns(&incoming[v]), Comparator::Eq, 1.0)?;
        for p in 0..np {
            let mut terms: Vec<(usize, f64)> =
                incoming[v].iter().map(|&e| (vars.index(e, p), 1.0)).collect();
            terms.extend(outgoing[v].iter().map(|&e| (vars.index(e, p), -1.0)));
            model.add_constraint(terms, Comparator::Eq, 0.0)?;
        }
    }
    let mut sink_balance = all_patterns(&into_sink);
    sink_balance.extend(all_patterns(&from_source).into_iter().map(|(v, _)| (v, -1.0)));
    model.add_constraint(sink_balance, Comparator::Eq, 0.0)?;
    Ok((model, vars))
}

/// Splits a selected flow into labeled source-to-sink paths.
pub fn decode_paths(
    graph: &DetectionGraph,
    vars: &FlowVariables,
    x: &[bool],
) -> Result<Vec<(Vec<usize>, usize)>> {
    let mut next: Vec<Option<(Node, usize)>> = vec![None; graph.len()];
    let mut starts = Vec::new();
    for (var, _) in x.iter().enumerate().filter(|(_, &on)| on) {
        let (p, from, to) = vars.decode(var);
        match from {
            Node::Source => starts.push((to, p)),
            Node::Det(i) => {
                if next[i].replace((to, p)).is_some() {
                    return Err(Error::InvalidInput(format!("detection {i} has two successors")));
                }
            }
            Node::Sink => unreachable!(),
        }
    }
    let mut seen = vec![false; graph.len()];
    let mut paths = Vec::with_capacity(starts.len());
    for (start, p) in starts {
        let mut nodes = Vec::new();
        let mut cur = start;
        while let Node::Det(i) = cur {
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidInput(format!("detection {i} visited twice")));
            }
            nodes.push(i);
            let (to, q) = next[i].ok_or_else(|| {
                Error::InvalidInput(format!("detection {i} has no successor"))
            })?;
            if q != p {
                return Err(Error::InvalidInput(format!(
                    "pattern changes from {p} to {q} after detection {i}"
                )));
            }
            cur = to;
        }
        paths.push((nodes, p));
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(Error::InvalidInput(format!("detection {i} uncovered")));
    }
    Ok(paths)
}

/// Optimal trajectories and pattern assignment for fixed patterns.
pub fn link(graph: &DetectionGraph, patterns: &PatternSet, cfg: &Config) -> Result<LinkOutcome> {
    cfg.validate()?;
    let (model, vars) = build_model(graph, patterns, cfg)?;
    let (lo, hi) = cfg.ratio_bounds();
    let search = RatioSearchConfig::new(lo, hi, cfg.link_iters).with_env_budget();
    let sol = maximize_ratio(&model, &search)?;
    let mut paths: Vec<(Trajectory, usize)> = decode_paths(graph, &vars, &sol.witness)?
        .into_iter()
        .map(|(nodes, p)| (Trajectory::in_graph(nodes, graph), p))
        .collect();
    paths.sort_by(|a, b| path_order(graph, &a.0, &b.0));

    let (all, labels): (TrajectorySet, Vec<usize>) = paths.iter().cloned().unzip();
    let labels = Assignment(labels);
    let objective = if all.is_empty() {
        0.0
    } else {
        objective(graph, &all, patterns, &labels, cfg).unwrap_or(sol.alpha_star)
    };

    let mut trajectories = Vec::new();
    let mut assignment = Vec::new();
    let mut removed = Vec::new();
    for (t, p) in paths {
        if cfg.remove_empty && p == PatternSet::EMPTY {
            removed.push(t);
        } else {
            trajectories.push(t);
            assignment.push(p);
        }
    }
    Ok(LinkOutcome {
        trajectories,
        assignment: Assignment(assignment),
        removed,
        alpha_star: sol.alpha_star,
        objective,
        timed_out: sol.timed_out,
        num_variables: vars.len(),
    })
}
