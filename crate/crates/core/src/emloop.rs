//! Unsupervised alternation between pattern mining and linking, with model
//! selection by a cross-validated proxy for IDF1.

use std::fmt::Write as _;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::linker::link;
use crate::miner::{best_assignment, generate_candidates, mine};
use crate::pattern::PatternSet;
use crate::types::{Assignment, DetectionGraph, Trajectory, TrajectorySet};

/// Trajectories split into two time-disjoint halves.
#[derive(Debug, Clone)]
pub struct Split {
    pub halves: [TrajectorySet; 2],
    /// Frame span of each half.
    pub spans: [(u32, u32); 2],
}

/// Splits at the middle frame of the span covered by `ts`. A trajectory goes
/// to the half holding more of its frames, the first half on ties. Batch
/// flags are recomputed against each half's own span.
pub fn split_halves(graph: &DetectionGraph, ts: &[Trajectory]) -> Result<Split> {
    let nonempty: Vec<&Trajectory> = ts.iter().filter(|t| !t.is_empty()).collect();
    let (Some(first), Some(last)) = (
        nonempty.iter().map(|t| t.first_frame(graph)).min(),
        nonempty.iter().map(|t| t.last_frame(graph)).max(),
    ) else {
        return Err(Error::DegenerateSplit("no trajectories".into()));
    };
    let mid = first + (last - first) / 2;
    let mut groups: [Vec<&Trajectory>; 2] = [Vec::new(), Vec::new()];
    for t in nonempty {
        let early = t
            .nodes
            .iter()
            .filter(|&&id| graph.detections()[id].frame <= mid)
            .count();
        let side = usize::from(early * 2 < t.len());
        groups[side].push(t);
    }
    let mut spans = [(0, 0); 2];
    let mut halves: [TrajectorySet; 2] = [Vec::new(), Vec::new()];
    for side in 0..2 {
        let g = &groups[side];
        if g.is_empty() {
            return Err(Error::DegenerateSplit(format!(
                "{} half of frames {first}..={last} has no trajectories",
                if side == 0 { "first" } else { "second" }
            )));
        }
        let span = (
            g.iter().map(|t| t.first_frame(graph)).min().unwrap(),
            g.iter().map(|t| t.last_frame(graph)).max().unwrap(),
        );
        spans[side] = span;
        halves[side] = g
            .iter()
            .map(|t| Trajectory::with_batch(t.nodes.clone(), graph, span))
            .collect();
    }
    Ok(Split { halves, spans })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdfTilde {
    pub score: f64,
    /// Objective of the first half under patterns mined from the second.
    pub first_on_second: f64,
    /// Objective of the second half under patterns mined from the first.
    pub second_on_first: f64,
}

/// Mines patterns on each half and scores the other half against them.
pub fn idf_tilde(graph: &DetectionGraph, ts: &[Trajectory], cfg: &Config) -> Result<IdfTilde> {
    let split = split_halves(graph, ts)?;
    let mut mined = Vec::with_capacity(2);
    for side in 0..2 {
        let cands = generate_candidates(graph, &split.halves[side], cfg, split.spans[side])?;
        mined.push(mine(graph, &split.halves[side], &cands, cfg)?.patterns);
    }
    let (_, c12) = best_assignment(graph, &split.halves[0], &mined[1], cfg)?;
    let (_, c21) = best_assignment(graph, &split.halves[1], &mined[0], cfg)?;
    Ok(IdfTilde {
        score: 0.5 * (c12 + c21),
        first_on_second: c12,
        second_on_first: c21,
    })
}

/// Cost budgets tried in order, each for a fixed number of alternations.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub alpha_c: Vec<f64>,
    pub iters_per_level: usize,
}

impl Schedule {
    pub fn geometric(start: f64, factor: f64, levels: usize) -> Self {
        Self {
            alpha_c: (0..levels).map(|k| start * factor.powi(k as i32)).collect(),
            iters_per_level: 5,
        }
    }

    /// Doubles from the cost of the cheapest candidate pattern of `initial`
    /// up to the configured cost budget, which is always the last level.
    pub fn default_for(graph: &DetectionGraph, initial: &[Trajectory], cfg: &Config) -> Result<Self> {
        let cap = cfg.alpha_c_for(graph.tracking_area());
        let cands = generate_candidates(graph, initial, cfg, graph.frame_range())?;
        let cheapest = (1..cands.len()).map(|p| cands.cost(p)).fold(f64::INFINITY, f64::min);
        let mut levels = Vec::new();
        if cheapest.is_finite() && cheapest > 0.0 {
            let mut a = cheapest;
            while a < cap && levels.len() < MAX_LEVELS - 1 {
                levels.push(a);
                a *= 2.0;
            }
        }
        levels.push(cap);
        Ok(Self {
            alpha_c: levels,
            iters_per_level: 5,
        })
    }
}

const MAX_LEVELS: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryEntry {
    pub iteration: usize,
    pub alpha_c: f64,
    pub num_patterns: usize,
    pub idf_tilde: f64,
    /// Detections on multi-detection trajectories assigned to a real pattern.
    pub explained: usize,
}

pub fn history_csv(history: &[HistoryEntry]) -> String {
    let mut s = String::from("iteration,alpha_c,num_patterns,idf_tilde,explained\n");
    for h in history {
        let _ = writeln!(
            s,
            "{},{:.6},{},{:.6},{}",
            h.iteration, h.alpha_c, h.num_patterns, h.idf_tilde, h.explained
        );
    }
    s
}

#[derive(Debug, Clone)]
pub struct UnsupervisedOutcome {
    /// Reported trajectories of the selected iterate.
    pub trajectories: TrajectorySet,
    pub assignment: Assignment,
    pub patterns: PatternSet,
    /// Full cover of the selected iterate, empty-pattern trajectories included.
    pub cover: TrajectorySet,
    pub cover_assignment: Assignment,
    pub history: Vec<HistoryEntry>,
    /// Index into `history` of the selected iterate.
    pub best: usize,
}

struct Iterate {
    cover: TrajectorySet,
    assignment: Assignment,
    patterns: PatternSet,
}

fn explained(ts: &[Trajectory], assignment: &Assignment) -> usize {
    ts.iter()
        .zip(&assignment.0)
        .filter(|(t, &p)| p != PatternSet::EMPTY && t.len() > 1)
        .map(|(t, _)| t.len())
        .sum()
}

/// Scores within this of the maximum count as ties.
const SCORE_TIE: f64 = 1e-9;

/// Highest proxy score; near-ties go to the iterate explaining more
/// detections, then to the earliest.
fn select_best(history: &[HistoryEntry]) -> usize {
    let top = history.iter().map(|h| h.idf_tilde).fold(f64::NEG_INFINITY, f64::max);
    let mut best: Option<usize> = None;
    for (k, h) in history.iter().enumerate() {
        if h.idf_tilde < top - SCORE_TIE {
            continue;
        }
        if best.is_none_or(|b| h.explained > history[b].explained) {
            best = Some(k);
        }
    }
    best.unwrap_or(0)
}

/// Alternates mining and linking, and returns the iterate chosen by the
/// proxy score. Iteration 0 is `initial` itself. Every
/// budget level restarts from `initial`; the loop stops after the level at
/// which `max_patterns` patterns are reached.
pub fn run_unsupervised(
    graph: &DetectionGraph,
    initial: &[Trajectory],
    cfg: &Config,
    schedule: &Schedule,
    max_patterns: usize,
) -> Result<UnsupervisedOutcome> {
    cfg.validate()?;
    if initial.is_empty() {
        return Err(Error::InvalidInput("no initial trajectories".into()));
    }
    if schedule.alpha_c.is_empty() || schedule.iters_per_level == 0 {
        return Err(Error::Config("empty alpha_c schedule".into()));
    }
    let batch = graph.frame_range();
    let at_level = |alpha_c: f64| Config {
        alpha_c: Some(alpha_c),
        ..cfg.clone()
    };
    let initial: TrajectorySet = initial
        .iter()
        .map(|t| Trajectory::with_batch(t.nodes.clone(), graph, batch))
        .collect();

    let mine_from = |ts: &[Trajectory], level: &Config| -> Result<PatternSet> {
        let cands = generate_candidates(graph, ts, level, batch)?;
        Ok(mine(graph, ts, &cands, level)?.patterns)
    };

    let level0 = at_level(schedule.alpha_c[0]);
    let patterns0 = mine_from(&initial, &level0)?;
    let (assignment0, _) = best_assignment(graph, &initial, &patterns0, cfg)?;
    let mut history = vec![HistoryEntry {
        iteration: 0,
        alpha_c: schedule.alpha_c[0],
        num_patterns: patterns0.num_real(),
        idf_tilde: idf_tilde(graph, &initial, cfg)?.score,
        explained: explained(&initial, &assignment0),
    }];
    let mut iterates = vec![Iterate {
        cover: initial.clone(),
        assignment: assignment0,
        patterns: patterns0,
    }];

    for &alpha_c in &schedule.alpha_c {
        let level = at_level(alpha_c);
        let mut current = initial.clone();
        let mut last_input: Option<TrajectorySet> = None;
        let mut num_patterns = 0;
        for _ in 0..schedule.iters_per_level {
            let iteration = history.len();
            // The same input at the same budget reproduces the previous iterate.
            if last_input.as_ref() == Some(&current) {
                let entry = HistoryEntry {
                    iteration,
                    ..history.last().unwrap().clone()
                };
                let prev = iterates.last().unwrap();
                let copy = Iterate {
                    cover: prev.cover.clone(),
                    assignment: prev.assignment.clone(),
                    patterns: prev.patterns.clone(),
                };
                history.push(entry);
                iterates.push(copy);
                continue;
            }
            let patterns = mine_from(&current, &level)?;
            let linked = link(graph, &patterns, cfg)?;
            let (cover, assignment) = linked.full_cover(graph);
            num_patterns = patterns.num_real();
            history.push(HistoryEntry {
                iteration,
                alpha_c,
                num_patterns,
                idf_tilde: idf_tilde(graph, &cover, cfg)?.score,
                explained: explained(&cover, &assignment),
            });
            last_input = Some(std::mem::replace(&mut current, cover.clone()));
            iterates.push(Iterate {
                cover,
                assignment,
                patterns,
            });
        }
        if num_patterns >= max_patterns {
            break;
        }
    }

    let best = select_best(&history);
    let chosen = iterates.swap_remove(best);
    let mut trajectories = Vec::new();
    let mut labels = Vec::new();
    for (t, &p) in chosen.cover.iter().zip(&chosen.assignment.0) {
        if !(cfg.remove_empty && p == PatternSet::EMPTY) {
            trajectories.push(t.clone());
            labels.push(p);
        }
    }
    Ok(UnsupervisedOutcome {
        trajectories,
        assignment: Assignment(labels),
        patterns: chosen.patterns,
        cover: chosen.cover,
        cover_assignment: chosen.assignment,
        history,
        best,
    })
}
