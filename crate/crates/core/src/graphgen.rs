//! Builds the detection graph from upstream tracker output.
//!
//! Edges are the union of
//! 1. consecutive detections of each input track,
//! 2. detection pairs in successive frames within `d1` meters,
//! 3. (track end, track start) pairs within `d2` meters and `dt` seconds,
//! 4. source edges into and sink edges out of every detection.

use std::collections::{BTreeMap, BTreeSet};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::types::{Detection, DetectionGraph, Node, Track};

pub fn build_graph(tracks: &[Track], cfg: &Config) -> Result<DetectionGraph> {
    let mut detections = Vec::new();
    let mut edges: BTreeSet<(Node, Node)> = BTreeSet::new();
    let mut starts = Vec::new();
    let mut ends = Vec::new();

    for track in tracks {
        for w in track.points.windows(2) {
            if w[1].frame <= w[0].frame {
                return Err(Error::InvalidInput(format!(
                    "track {} has non-increasing frames {} -> {}",
                    track.id, w[0].frame, w[1].frame
                )));
            }
        }
        let n = track.points.len();
        for (k, pt) in track.points.iter().enumerate() {
            let id = detections.len();
            detections.push(Detection {
                id,
                frame: pt.frame,
                pos: pt.pos,
                source_track: Some(track.id),
                is_track_start: k == 0,
                is_track_end: k + 1 == n,
            });
            if k > 0 {
                edges.insert((Node::Det(id - 1), Node::Det(id)));
            }
            if k == 0 {
                starts.push(id);
            }
            if k + 1 == n {
                ends.push(id);
            }
        }
    }

    let mut by_frame: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for d in &detections {
        by_frame.entry(d.frame).or_default().push(d.id);
    }
    for (&frame, ids) in &by_frame {
        let Some(next) = by_frame.get(&(frame + 1)) else {
            continue;
        };
        for &i in ids {
            for &j in next {
                if (detections[i].pos - detections[j].pos).norm() <= cfg.d1 {
                    edges.insert((Node::Det(i), Node::Det(j)));
                }
            }
        }
    }

    let max_gap = cfg.dt_frames();
    for &e in &ends {
        for &s in &starts {
            let (de, ds) = (&detections[e], &detections[s]);
            if ds.frame > de.frame && ds.frame - de.frame <= max_gap && (de.pos - ds.pos).norm() <= cfg.d2 {
                edges.insert((Node::Det(e), Node::Det(s)));
            }
        }
    }

    for d in &detections {
        edges.insert((Node::Source, Node::Det(d.id)));
        edges.insert((Node::Det(d.id), Node::Sink));
    }

    DetectionGraph::new(detections, edges)
}
