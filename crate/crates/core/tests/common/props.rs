//! Random instance generators and the invariant checks shared by the
//! property tests and the acceptance suite.

use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ptrack::graphgen::build_graph;
use ptrack::io::{format_patterns, format_tracks, parse_patterns, parse_tracks, TrackFormat};
use ptrack::linker::link;
use ptrack::miner::{generate_candidates, mine};
use ptrack::scoring::{objective, objective_sums};
use ptrack::{
    validate_trajectory_set, Assignment, Config, Detection, DetectionGraph, Pattern, PatternSet,
    Point, Track, TrackPoint, WidthSet,
};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Up to `max_dets` detections in up to three short random walks inside a
/// 6 m square.
pub fn random_tracks(rng: &mut impl Rng, max_dets: usize) -> Vec<Track> {
    let mut tracks = Vec::new();
    let mut budget = max_dets;
    let count = rng.random_range(1..=3);
    for id in 1..=count {
        if budget == 0 {
            break;
        }
        let len = rng.random_range(1..=budget.min(5));
        budget -= len;
        let start: u32 = rng.random_range(0..3);
        let mut pos = Point::new(rng.random_range(0.0..6.0), rng.random_range(0.0..6.0));
        let mut points = Vec::with_capacity(len);
        for k in 0..len {
            points.push(TrackPoint {
                frame: start + k as u32,
                pos,
            });
            pos += Point::new(rng.random_range(-1.2..1.2), rng.random_range(-1.2..1.2));
        }
        tracks.push(Track::new(id as u64, points));
    }
    tracks
}

pub fn random_pattern(rng: &mut impl Rng) -> Pattern {
    loop {
        let vertices = rng.random_range(2..=3);
        let pts: Vec<Point> = (0..vertices)
            .map(|_| Point::new(rng.random_range(-1.0..7.0), rng.random_range(-1.0..7.0)))
            .collect();
        let width = [0.5, 1.0, 2.0][rng.random_range(0..3)];
        if let Ok(p) = Pattern::new(pts, width) {
            if p.length() > 0.5 {
                return p;
            }
        }
    }
}

pub fn random_patterns(rng: &mut impl Rng, max: usize) -> PatternSet {
    let k = rng.random_range(1..=max);
    PatternSet::new((0..k).map(|_| random_pattern(rng)).collect())
}

fn fail(msg: String) -> TestCaseError {
    TestCaseError::fail(msg)
}

/// Linking returns a cover that uses every detection once, along graph
/// edges only, with one valid label per trajectory.
pub fn check_flow(seed: u64) -> Result<(), TestCaseError> {
    let mut r = rng(seed);
    let tracks = random_tracks(&mut r, 10);
    let patterns = random_patterns(&mut r, 2);
    let cfg = Config::default();
    let graph = build_graph(&tracks, &cfg).map_err(|e| fail(e.to_string()))?;
    let input = graph.input_trajectories();
    prop_assert!(validate_trajectory_set(&graph, &input).is_empty());

    let out = link(&graph, &patterns, &cfg).map_err(|e| fail(e.to_string()))?;
    let (cover, labels) = out.full_cover(&graph);
    let violations = validate_trajectory_set(&graph, &cover);
    prop_assert!(violations.is_empty(), "violations: {:?}", violations);
    prop_assert_eq!(labels.len(), cover.len());
    prop_assert!(labels.0.iter().all(|&p| p < patterns.len()));
    prop_assert!(out.removed.len() + out.trajectories.len() == cover.len());

    // A broken cover must be reported.
    if cover.len() > 1 {
        let mut broken = cover.clone();
        broken.pop();
        prop_assert!(!validate_trajectory_set(&graph, &broken).is_empty());
    }
    Ok(())
}

fn rigid(p: Point, angle: f64, shift: Point) -> Point {
    let (s, c) = angle.sin_cos();
    Point::new(c * p.x - s * p.y, s * p.x + c * p.y) + shift
}

/// Rotating and translating detections and patterns together leaves the
/// objective unchanged.
pub fn check_rigid_invariance(seed: u64, angle: f64, dx: f64, dy: f64) -> Result<(), TestCaseError> {
    let mut r = rng(seed);
    let tracks = random_tracks(&mut r, 12);
    let patterns = random_patterns(&mut r, 3);
    let cfg = Config::default();
    let graph = build_graph(&tracks, &cfg).map_err(|e| fail(e.to_string()))?;
    let ts = graph.input_trajectories();
    let labels = Assignment((0..ts.len()).map(|_| r.random_range(0..patterns.len())).collect());

    let shift = Point::new(dx, dy);
    let moved_dets: Vec<Detection> = graph
        .detections()
        .iter()
        .map(|d| Detection {
            pos: rigid(d.pos, angle, shift),
            ..d.clone()
        })
        .collect();
    let moved_graph = DetectionGraph::new(moved_dets, graph.edges().to_vec()).map_err(|e| fail(e.to_string()))?;
    let moved_patterns = PatternSet::new(
        patterns
            .real()
            .iter()
            .map(|p| {
                let pts = p.centerline().iter().map(|&v| rigid(v, angle, shift)).collect();
                Pattern::new(pts, p.width()).unwrap()
            })
            .collect(),
    );

    let before = objective_sums(&graph, &ts, &patterns, &labels, &cfg).map_err(|e| fail(e.to_string()))?;
    let after = objective_sums(&moved_graph, &ts, &moved_patterns, &labels, &cfg).map_err(|e| fail(e.to_string()))?;
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * (1.0 + a.abs());
    prop_assert!(close(before.n, after.n) && close(before.m, after.m), "{:?} vs {:?}", before, after);
    // The ratio itself is only well conditioned away from a zero denominator.
    if before.n > 0.1 {
        let a = objective(&graph, &ts, &patterns, &labels, &cfg).map_err(|e| fail(e.to_string()))?;
        let b = objective(&moved_graph, &ts, &moved_patterns, &labels, &cfg).map_err(|e| fail(e.to_string()))?;
        prop_assert!((a - b).abs() <= 1e-7 * (1.0 + a.abs()), "{} vs {}", a, b);
    }
    Ok(())
}

/// Ground-truth-like tracks: several walks, some strictly inside the batch.
fn random_gt(rng: &mut impl Rng) -> Vec<Track> {
    let count = rng.random_range(2..=4);
    (1..=count)
        .map(|id| {
            let start: u32 = rng.random_range(0..4);
            let len = rng.random_range(3..=6);
            let mut pos = Point::new(rng.random_range(0.0..4.0), rng.random_range(0.0..4.0));
            let dir = Point::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let points = (0..len)
                .map(|k| {
                    let p = TrackPoint {
                        frame: start + k,
                        pos,
                    };
                    pos += dir + Point::new(rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2));
                    p
                })
                .collect();
            Track::new(id as u64, points)
        })
        .collect()
}

/// Relaxing either budget never lowers the mined ratio by more than the
/// bisection resolution.
pub fn check_budget_monotonicity(seed: u64) -> Result<(), TestCaseError> {
    let mut r = rng(seed);
    let gt = random_gt(&mut r);
    let mut cfg = Config {
        widths: WidthSet::Absolute(vec![0.5, 1.0, 2.0]),
        mine_iters: 10,
        ..Config::default()
    };
    let graph = build_graph(&gt, &cfg).map_err(|e| fail(e.to_string()))?;
    let ts = graph.input_trajectories();
    let cands = generate_candidates(&graph, &ts, &cfg, graph.frame_range()).map_err(|e| fail(e.to_string()))?;
    let (lo, hi) = cfg.ratio_bounds();
    let slack = (hi - lo) / f64::from(1u32 << cfg.mine_iters) + 1e-12;

    let mut run = |alpha_p: usize, alpha_c: f64| -> Result<f64, TestCaseError> {
        cfg.alpha_p = alpha_p;
        cfg.alpha_c = Some(alpha_c);
        Ok(mine(&graph, &ts, &cands, &cfg).map_err(|e| fail(e.to_string()))?.alpha_star)
    };
    let p = r.random_range(1..=2);
    let c = r.random_range(0.0..12.0);
    let base = run(p, c)?;
    let more_patterns = run(p + 1, c)?;
    let more_cost = run(p, 2.0 * c + 1.0)?;
    prop_assert!(more_patterns >= base - slack, "alpha_p: {} < {}", more_patterns, base);
    prop_assert!(more_cost >= base - slack, "alpha_c: {} < {}", more_cost, base);
    Ok(())
}

pub fn tracks_strategy() -> impl Strategy<Value = Vec<Track>> {
    let point = (0u32..500, -1000.0..1000.0f64, -1000.0..1000.0f64);
    proptest::collection::btree_map(1u64..10_000, proptest::collection::btree_map(0u32..500, point, 1..8), 0..6)
        .prop_map(|m| {
            m.into_iter()
                .map(|(id, pts)| {
                    let points = pts
                        .into_iter()
                        .map(|(frame, (_, x, y))| TrackPoint {
                            frame,
                            pos: Point::new(x, y),
                        })
                        .collect();
                    Track::new(id, points)
                })
                .collect()
        })
}

pub fn check_tracks_round_trip(tracks: &[Track]) -> Result<(), TestCaseError> {
    for format in [TrackFormat::Plain, TrackFormat::Mot] {
        let text = format_tracks(tracks, format);
        let back = parse_tracks(&text, "mem", format, None).map_err(|e| fail(e.to_string()))?;
        prop_assert_eq!(back.len(), tracks.len());
        for (a, b) in tracks.iter().zip(&back) {
            prop_assert_eq!(a.id, b.id);
            prop_assert_eq!(a.points.len(), b.points.len());
            for (p, q) in a.points.iter().zip(&b.points) {
                prop_assert_eq!(p.frame, q.frame);
                prop_assert!((p.pos - q.pos).amax() <= 1e-6);
            }
        }
        prop_assert_eq!(format_tracks(&back, format), text);
    }
    Ok(())
}

pub fn patterns_strategy() -> impl Strategy<Value = PatternSet> {
    let centerline = proptest::collection::vec((-500.0..500.0f64, -500.0..500.0f64), 2..6);
    proptest::collection::vec((centerline, 0.01..50.0f64), 0..5).prop_map(|ps| {
        PatternSet::new(
            ps.into_iter()
                .filter_map(|(pts, w)| {
                    Pattern::new(pts.into_iter().map(|(x, y)| Point::new(x, y)).collect(), w).ok()
                })
                .collect(),
        )
    })
}

pub fn check_patterns_round_trip(ps: &PatternSet) -> Result<(), TestCaseError> {
    let text = format_patterns(ps);
    let back = parse_patterns(&text, "mem").map_err(|e| fail(e.to_string()))?;
    prop_assert_eq!(back.len(), ps.len());
    for (a, b) in ps.real().iter().zip(back.real()) {
        prop_assert!((a.width() - b.width()).abs() <= 1e-6);
        prop_assert_eq!(a.centerline().len(), b.centerline().len());
        for (p, q) in a.centerline().iter().zip(b.centerline()) {
            prop_assert!((p - q).amax() <= 1e-6);
        }
    }
    Ok(())
}

pub fn config_strategy() -> impl Strategy<Value = Config> {
    (
        (0.01..50.0f64, 0.01..50.0f64, 0.0..20.0f64, 0.1..120.0f64, any::<bool>()),
        (1usize..20, proptest::option::of(0.0..1e6f64), 0.0..5.0f64, -5.0..1.0f64),
        (any::<bool>(), proptest::collection::vec(0.01..20.0f64, 1..6)),
        (proptest::option::of(1.0..1e6f64), 1u32..30, 1u32..30),
    )
        .prop_map(|((d1, d2, dt, fps, remove_empty), (alpha_p, alpha_c, eps, eps_empty), (relative, w), (area, li, mi))| {
            Config {
                d1,
                d2,
                dt,
                fps,
                remove_empty,
                alpha_p,
                alpha_c,
                eps,
                eps_empty,
                widths: if relative { WidthSet::Relative(w) } else { WidthSet::Absolute(w) },
                tracking_area: area,
                link_iters: li,
                mine_iters: mi,
            }
        })
}

pub fn check_config_round_trip(cfg: &Config) -> Result<(), TestCaseError> {
    let mut back = Config::default();
    back.apply_text(&cfg.to_text()).map_err(|e| fail(e.to_string()))?;
    prop_assert_eq!(&back, cfg);
    Ok(())
}
