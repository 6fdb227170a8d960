//! Tracking metrics on the ground plane: IDF1 with identity precision and
//! recall, CLEAR MOTA with precision and recall, and MT/PT/ML counts.

use std::collections::{BTreeMap, HashMap};

use crate::types::{Point, Track};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchConfig {
    /// Maximum ground-plane distance of a match, meters.
    pub dist_threshold: f64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self { dist_threshold: 3.0 }
    }
}

impl MatchConfig {
    /// Threshold at a fraction of the tracking-area extent.
    pub fn relative(extent: f64, fraction: f64) -> Self {
        Self {
            dist_threshold: extent * fraction,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdScores {
    pub idf1: f64,
    pub idpr: f64,
    pub idrc: f64,
    pub idtp: usize,
    pub idfp: usize,
    pub idfn: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClearScores {
    pub mota: f64,
    pub precision: f64,
    pub recall: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub ids: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Coverage {
    pub mt: usize,
    pub pt: usize,
    pub ml: usize,
}

/// Minimum-cost assignment on a rectangular cost matrix. Returns, for every
/// row, the matched column (every row is matched when rows ≤ columns).
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<Option<usize>> {
    let n = cost.len();
    let m = cost.first().map_or(0, Vec::len);
    if n == 0 || m == 0 {
        return vec![None; n];
    }
    let size = n.max(m);
    let at = |i: usize, j: usize| if i < n && j < m { cost[i][j] } else { 0.0 };
    // Potentials formulation with 1-based sentinel column 0.
    let mut u = vec![0.0; size + 1];
    let mut v = vec![0.0; size + 1];
    let mut p = vec![0usize; size + 1];
    let mut way = vec![0usize; size + 1];
    for i in 1..=size {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; size + 1];
        let mut used = vec![false; size + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=size {
                if used[j] {
                    continue;
                }
                let cur = at(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=size {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![None; n];
    for j in 1..=size {
        if p[j] >= 1 && p[j] <= n && j <= m {
            out[p[j] - 1] = Some(j - 1);
        }
    }
    out
}

fn frame_map(track: &Track) -> HashMap<u32, Point> {
    track.points.iter().map(|p| (p.frame, p.pos)).collect()
}

fn total_points(tracks: &[Track]) -> usize {
    tracks.iter().map(|t| t.points.len()).sum()
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Frames on which `gt` and `pred` are both present and within the threshold.
fn shared_frames(gt: &Track, pred: &HashMap<u32, Point>, thr: f64) -> usize {
    gt.points
        .iter()
        .filter(|p| pred.get(&p.frame).is_some_and(|q| (p.pos - q).norm() <= thr))
        .count()
}

/// Identity scores from the best one-to-one matching of whole trajectories.
/// Two empty sets score 1 by convention.
pub fn idf1(gt: &[Track], pred: &[Track], cfg: &MatchConfig) -> IdScores {
    let (ngt, npred) = (total_points(gt), total_points(pred));
    if ngt == 0 && npred == 0 {
        return IdScores {
            idf1: 1.0,
            idpr: 1.0,
            idrc: 1.0,
            idtp: 0,
            idfp: 0,
            idfn: 0,
        };
    }
    let pred_maps: Vec<_> = pred.iter().map(frame_map).collect();
    let tp: Vec<Vec<usize>> = gt
        .iter()
        .map(|g| pred_maps.iter().map(|m| shared_frames(g, m, cfg.dist_threshold)).collect())
        .collect();
    let (rows, transposed) = if gt.len() <= pred.len() {
        (tp.clone(), false)
    } else {
        ((0..pred.len()).map(|j| (0..gt.len()).map(|i| tp[i][j]).collect()).collect(), true)
    };
    let cost: Vec<Vec<f64>> = rows
        .iter()
        .map(|r: &Vec<usize>| r.iter().map(|&x| -(x as f64)).collect())
        .collect();
    let idtp: usize = hungarian(&cost)
        .iter()
        .enumerate()
        .filter_map(|(i, j)| j.map(|j| if transposed { tp[j][i] } else { tp[i][j] }))
        .sum();
    let (idfp, idfn) = (npred - idtp, ngt - idtp);
    IdScores {
        idf1: ratio(2 * idtp, 2 * idtp + idfp + idfn),
        idpr: ratio(idtp, npred),
        idrc: ratio(idtp, ngt),
        idtp,
        idfp,
        idfn,
    }
}

/// Ground-truth and predicted `(track id, position)` pairs of one frame.
type FramePoints = (Vec<(u64, Point)>, Vec<(u64, Point)>);

/// Per-frame CLEAR matching. Returns the matched pred id of every matched
/// (gt id, frame), plus the switch count.
fn clear_matching(gt: &[Track], pred: &[Track], thr: f64) -> (BTreeMap<(u64, u32), u64>, usize) {
    let mut frames: BTreeMap<u32, FramePoints> = BTreeMap::new();
    for t in gt {
        for p in &t.points {
            frames.entry(p.frame).or_default().0.push((t.id, p.pos));
        }
    }
    for t in pred {
        for p in &t.points {
            frames.entry(p.frame).or_default().1.push((t.id, p.pos));
        }
    }
    let mut last: HashMap<u64, u64> = HashMap::new();
    let mut prev: HashMap<u64, u64> = HashMap::new();
    let mut matched = BTreeMap::new();
    let mut ids = 0;
    for (&frame, (gs, ps)) in &frames {
        let mut g_used = vec![false; gs.len()];
        let mut p_used = vec![false; ps.len()];
        let mut pairs = Vec::new();
        // Keep last frame's correspondences that are still valid.
        for (gi, (gid, gpos)) in gs.iter().enumerate() {
            let Some(&pid) = prev.get(gid) else { continue };
            if let Some(pi) = ps.iter().position(|(id, _)| *id == pid) {
                if !p_used[pi] && (gpos - ps[pi].1).norm() <= thr {
                    g_used[gi] = true;
                    p_used[pi] = true;
                    pairs.push((gi, pi));
                }
            }
        }
        let gfree: Vec<usize> = (0..gs.len()).filter(|&i| !g_used[i]).collect();
        let pfree: Vec<usize> = (0..ps.len()).filter(|&j| !p_used[j]).collect();
        if !gfree.is_empty() && !pfree.is_empty() {
            let big = 1e6 * (1.0 + thr);
            let cost: Vec<Vec<f64>> = gfree
                .iter()
                .map(|&i| {
                    pfree
                        .iter()
                        .map(|&j| {
                            let d = (gs[i].1 - ps[j].1).norm();
                            if d <= thr {
                                d
                            } else {
                                big
                            }
                        })
                        .collect()
                })
                .collect();
            let transposed = gfree.len() > pfree.len();
            let rows = if transposed {
                (0..pfree.len()).map(|j| (0..gfree.len()).map(|i| cost[i][j]).collect()).collect()
            } else {
                cost.clone()
            };
            for (r, c) in hungarian(&rows).into_iter().enumerate() {
                let Some(c) = c else { continue };
                let (i, j) = if transposed { (c, r) } else { (r, c) };
                if cost[i][j] < big {
                    pairs.push((gfree[i], pfree[j]));
                }
            }
        }
        let mut next = HashMap::new();
        for (gi, pi) in pairs {
            let (gid, pid) = (gs[gi].0, ps[pi].0);
            if last.get(&gid).is_some_and(|&old| old != pid) {
                ids += 1;
            }
            last.insert(gid, pid);
            next.insert(gid, pid);
            matched.insert((gid, frame), pid);
        }
        prev = next;
    }
    (matched, ids)
}

/// CLEAR MOTA. May be negative; two empty sets score 1.
pub fn mota(gt: &[Track], pred: &[Track], cfg: &MatchConfig) -> ClearScores {
    let (ngt, npred) = (total_points(gt), total_points(pred));
    let (matched, ids) = clear_matching(gt, pred, cfg.dist_threshold);
    let tp = matched.len();
    let (fp, fn_) = (npred - tp, ngt - tp);
    let mota = if ngt == 0 {
        if npred == 0 {
            1.0
        } else {
            f64::NEG_INFINITY
        }
    } else {
        1.0 - (fp + fn_ + ids) as f64 / ngt as f64
    };
    ClearScores {
        mota,
        precision: ratio(tp, npred),
        recall: ratio(tp, ngt),
        tp,
        fp,
        fn_,
        ids,
    }
}

/// Ground-truth tracks matched on at least 80% of their frames (MT), on less
/// than 20% (ML), or in between (PT).
pub fn mt_pt_ml(gt: &[Track], pred: &[Track], cfg: &MatchConfig) -> Coverage {
    let (matched, _) = clear_matching(gt, pred, cfg.dist_threshold);
    let mut out = Coverage { mt: 0, pt: 0, ml: 0 };
    for t in gt {
        if t.points.is_empty() {
            continue;
        }
        let hit = t.points.iter().filter(|p| matched.contains_key(&(t.id, p.frame))).count();
        let frac = hit as f64 / t.points.len() as f64;
        if frac >= 0.8 {
            out.mt += 1;
        } else if frac < 0.2 {
            out.ml += 1;
        } else {
            out.pt += 1;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Report {
    pub id: IdScores,
    pub clear: ClearScores,
    pub coverage: Coverage,
}

pub const CSV_HEADER: &str = "IDF1,IDPR,IDRC,MOTA,PR,RC,MT,PT,ML";

impl Report {
    pub fn compute(gt: &[Track], pred: &[Track], cfg: &MatchConfig) -> Self {
        Self {
            id: idf1(gt, pred, cfg),
            clear: mota(gt, pred, cfg),
            coverage: mt_pt_ml(gt, pred, cfg),
        }
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{},{},{}",
            self.id.idf1,
            self.id.idpr,
            self.id.idrc,
            self.clear.mota,
            self.clear.precision,
            self.clear.recall,
            self.coverage.mt,
            self.coverage.pt,
            self.coverage.ml
        )
    }
}
