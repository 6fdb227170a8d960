//! Pattern mining: choose a small, cheap set of patterns and an assignment of
//! trajectories to them that maximizes the ratio objective.
//!
//! Candidates are the trajectories that lie strictly inside the batch, each
//! paired with every configured width. Selection uses assignment variables
//! `a[t][p]` and usage variables `b[p]` bounded by a count budget and a total
//! cost budget.

use crate::config::Config;
use crate::error::{Error, Result};
use crate::fracopt::{maximize_ratio, Comparator, RatioSearchConfig, SolverModel};
use crate::pattern::{Pattern, PatternSet};
use crate::scoring::{trajectory_score, EdgeScore};
use crate::types::{Assignment, DetectionGraph, Trajectory};

const TIE_TOL: f64 = 1e-12;

/// Admissible patterns. Index 0 is the empty pattern.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    patterns: PatternSet,
    /// Trajectory index each candidate's centerline came from.
    sources: Vec<Option<usize>>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn patterns(&self) -> &PatternSet {
        &self.patterns
    }

    pub fn get(&self, i: usize) -> &Pattern {
        self.patterns.get(i)
    }

    pub fn source(&self, i: usize) -> Option<usize> {
        self.sources[i]
    }

    pub fn cost(&self, i: usize) -> f64 {
        self.patterns.get(i).cost()
    }

    /// Builds a candidate set from explicit patterns; the empty pattern is added.
    pub fn from_patterns(patterns: Vec<Pattern>) -> Self {
        let patterns = PatternSet::new(patterns);
        let sources = vec![None; patterns.len()];
        Self { patterns, sources }
    }
}

/// One candidate per (trajectory strictly inside `batch`, width). Widths come
/// from `cfg.widths`, resolved against the larger side of the graph extent.
pub fn generate_candidates(
    graph: &DetectionGraph,
    trajectories: &[Trajectory],
    cfg: &Config,
    batch: (u32, u32),
) -> Result<CandidateSet> {
    let (w, h) = graph.extent();
    let widths = cfg.widths.resolve(w.max(h));
    let mut patterns = Vec::new();
    let mut sources = vec![None];
    for (k, t) in trajectories.iter().enumerate() {
        if t.is_empty() || t.first_frame(graph) <= batch.0 || t.last_frame(graph) >= batch.1 {
            continue;
        }
        let centerline = t
            .nodes
            .iter()
            .map(|&id| graph.detection(id).map(|d| d.pos))
            .collect::<Result<Vec<_>>>()?;
        let Ok(base) = Pattern::new(centerline, 1.0) else {
            continue;
        };
        for &width in &widths {
            patterns.push(base.with_width(width)?);
            sources.push(Some(k));
        }
    }
    Ok(CandidateSet {
        patterns: PatternSet::new(patterns),
        sources,
    })
}

#[derive(Debug, Clone)]
pub struct MiningOutcome {
    /// Selected patterns, empty pattern at index 0.
    pub patterns: PatternSet,
    /// Candidate index of every entry of `patterns`.
    pub selected: Vec<usize>,
    /// Trajectory to index into `patterns`.
    pub assignment: Assignment,
    pub alpha_star: f64,
    /// Objective of the returned assignment.
    pub objective: f64,
    pub timed_out: bool,
    pub num_variables: usize,
}

/// `scores[t][p]` = `(N, M)` of trajectory `t` under candidate `p`.
pub fn score_table(
    graph: &DetectionGraph,
    trajectories: &[Trajectory],
    patterns: &PatternSet,
    cfg: &Config,
) -> Result<Vec<Vec<EdgeScore>>> {
    trajectories
        .iter()
        .map(|t| {
            patterns
                .iter()
                .map(|p| trajectory_score(graph, t, p, cfg))
                .collect()
        })
        .collect()
}

fn ratio_of(scores: &[Vec<EdgeScore>], labels: &[usize]) -> Option<f64> {
    let total = labels
        .iter()
        .enumerate()
        .fold(EdgeScore::ZERO, |acc, (t, &p)| acc + scores[t][p]);
    (total.n > 0.0).then(|| total.m / total.n)
}

/// Best per-trajectory labels among `allowed`, by Dinkelbach iteration
/// starting from `start`. Returns `None` if every labeling has `ΣN ≤ 0`.
fn dinkelbach(scores: &[Vec<EdgeScore>], allowed: &[usize], start: f64) -> Option<(Vec<usize>, f64)> {
    let mut lambda = start;
    let mut best: Option<(Vec<usize>, f64)> = None;
    for _ in 0..200 {
        let labels: Vec<usize> = scores
            .iter()
            .map(|row| {
                let mut arg = allowed[0];
                for &p in &allowed[1..] {
                    let (a, b) = (row[p].m - lambda * row[p].n, row[arg].m - lambda * row[arg].n);
                    if a > b + TIE_TOL {
                        arg = p;
                    }
                }
                arg
            })
            .collect();
        let Some(r) = ratio_of(scores, &labels) else {
            break;
        };
        let improved = best.as_ref().is_none_or(|b| r > b.1 + TIE_TOL);
        if improved {
            best = Some((labels, r));
        }
        if !improved || r <= lambda + TIE_TOL {
            break;
        }
        lambda = r;
    }
    best
}

/// Optimal assignment of trajectories to the given patterns (empty pattern
/// included), with its objective.
pub fn best_assignment(
    graph: &DetectionGraph,
    trajectories: &[Trajectory],
    patterns: &PatternSet,
    cfg: &Config,
) -> Result<(Assignment, f64)> {
    if trajectories.is_empty() {
        return Err(Error::Degenerate("no trajectories to assign".into()));
    }
    let scores = score_table(graph, trajectories, patterns, cfg)?;
    let allowed: Vec<usize> = (0..patterns.len()).collect();
    let (lo, _) = cfg.ratio_bounds();
    dinkelbach(&scores, &allowed, lo)
        .map(|(labels, r)| (Assignment(labels), r))
        .ok_or_else(|| Error::Degenerate("total length is zero for every assignment".into()))
}

/// Selects patterns from `candidates` and assigns every trajectory to one.
pub fn mine(
    graph: &DetectionGraph,
    trajectories: &[Trajectory],
    candidates: &CandidateSet,
    cfg: &Config,
) -> Result<MiningOutcome> {
    cfg.validate()?;
    if trajectories.is_empty() {
        return Err(Error::InvalidInput("no trajectories to mine from".into()));
    }
    let scores = score_table(graph, trajectories, candidates.patterns(), cfg)?;
    let (nt, np) = (trajectories.len(), candidates.len());
    let a = |t: usize, p: usize| t * np + p;
    let b = |p: usize| nt * np + p - 1;
    let mut model = SolverModel::new(nt * np + np - 1);
    for (t, row) in scores.iter().enumerate() {
        for (p, s) in row.iter().enumerate() {
            if !(s.m.is_finite() && s.n.is_finite()) {
                return Err(Error::InvalidPattern(format!("candidate {p} scores non-finite")));
            }
            model.set_ratio_term(a(t, p), s.m, s.n)?;
        }
        model.add_constraint((0..np).map(|p| (a(t, p), 1.0)).collect(), Comparator::Eq, 1.0)?;
        for p in 1..np {
            model.add_constraint(vec![(a(t, p), 1.0), (b(p), -1.0)], Comparator::Le, 0.0)?;
        }
    }
    if np > 1 {
        model.add_constraint(
            (1..np).map(|p| (b(p), 1.0)).collect(),
            Comparator::Le,
            cfg.alpha_p as f64,
        )?;
        let alpha_c = cfg.alpha_c_for(graph.tracking_area());
        if alpha_c.is_finite() {
            model.add_constraint(
                (1..np).map(|p| (b(p), candidates.cost(p))).collect(),
                Comparator::Le,
                alpha_c,
            )?;
        }
    }

    let (lo, hi) = cfg.ratio_bounds();
    let search = RatioSearchConfig::new(lo, hi, cfg.mine_iters).with_env_budget();
    let sol = maximize_ratio(&model, &search)?;
    let mut labels: Vec<usize> = (0..nt)
        .map(|t| (0..np).find(|&p| sol.witness[a(t, p)]).unwrap_or(0))
        .collect();

    // Re-assign among the chosen patterns, then shrink widths that cost nothing.
    let mut used = used_set(&labels);
    if let Some((better, r)) = dinkelbach(&scores, &used, lo) {
        if ratio_of(&scores, &labels).is_none_or(|cur| r > cur + TIE_TOL) {
            labels = better;
        }
    }
    shrink_widths(&scores, candidates, &mut labels);
    used = used_set(&labels);

    let objective = ratio_of(&scores, &labels).unwrap_or(sol.alpha_star);
    let remap = |p: usize| used.iter().position(|&q| q == p).unwrap();
    let assignment = Assignment(labels.iter().map(|&p| remap(p)).collect());
    let patterns = PatternSet::new(used[1..].iter().map(|&p| candidates.get(p).clone()).collect());
    Ok(MiningOutcome {
        patterns,
        selected: used,
        assignment,
        alpha_star: sol.alpha_star.max(objective),
        objective,
        timed_out: sol.timed_out,
        num_variables: model.num_vars(),
    })
}

/// Candidates in use, always starting with the empty pattern.
fn used_set(labels: &[usize]) -> Vec<usize> {
    let mut used: Vec<usize> = labels.iter().copied().filter(|&p| p != 0).collect();
    used.sort_unstable();
    used.dedup();
    used.insert(0, 0);
    used
}

/// Moves all trajectories of a chosen candidate to the cheapest candidate with
/// the same centerline that scores at least as well.
fn shrink_widths(scores: &[Vec<EdgeScore>], candidates: &CandidateSet, labels: &mut [usize]) {
    let Some(mut current) = ratio_of(scores, labels) else {
        return;
    };
    for p in used_set(labels).into_iter().skip(1) {
        let Some(src) = candidates.source(p) else {
            continue;
        };
        let mut cheaper: Vec<usize> = (1..candidates.len())
            .filter(|&q| candidates.source(q) == Some(src) && candidates.cost(q) < candidates.cost(p))
            .collect();
        cheaper.sort_by(|&x, &y| candidates.cost(x).total_cmp(&candidates.cost(y)).then(x.cmp(&y)));
        for q in cheaper {
            let trial: Vec<usize> = labels.iter().map(|&l| if l == p { q } else { l }).collect();
            if let Some(r) = ratio_of(scores, &trial) {
                if r >= current - TIE_TOL {
                    labels.copy_from_slice(&trial);
                    current = r;
                    break;
                }
            }
        }
    }
}
