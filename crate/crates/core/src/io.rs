//! File formats: track CSVs, ground-plane homographies, pattern files,
//! configuration files and SVG plots.
//!
//! Tracks come either as plain ground-plane rows `frame,id,x,y` or as
//! MOTChallenge rows `frame,id,bb_left,bb_top,bb_width,bb_height,conf,x,y,z`.
//! In the latter, `x = y = -1` means the ground-plane position is absent and
//! is recovered by mapping the box's bottom-center through a homography.
//! Writers use six decimals and `\n` line endings.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::pattern::{Pattern, PatternSet};
use crate::types::{Point, Track, TrackPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackFormat {
    Plain,
    Mot,
}

impl std::str::FromStr for TrackFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(TrackFormat::Plain),
            "mot" => Ok(TrackFormat::Mot),
            other => Err(Error::Config(format!("unknown track format {other}"))),
        }
    }
}

/// Image-to-ground-plane mapping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography(pub Matrix3<f64>);

impl Homography {
    pub fn identity() -> Self {
        Homography(Matrix3::identity())
    }

    pub fn apply(&self, u: f64, v: f64) -> Point {
        let p = self.0 * Vector3::new(u, v, 1.0);
        Point::new(p.x / p.z, p.y / p.z)
    }

    /// Nine row-major numbers separated by whitespace or commas.
    pub fn parse(text: &str, path: &str) -> Result<Self> {
        let values = text
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>().map_err(|e| Error::Parse {
                    path: path.to_string(),
                    line: 0,
                    msg: format!("{s}: {e}"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != 9 {
            return Err(Error::Parse {
                path: path.to_string(),
                line: 0,
                msg: format!("expected 9 homography entries, found {}", values.len()),
            });
        }
        Ok(Homography(Matrix3::from_row_slice(&values)))
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_homography(path: &Path) -> Result<Homography> {
    Homography::parse(&read_text(path)?, &path.display().to_string())
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

/// Parses track rows. `path` only labels error messages.
pub fn parse_tracks(
    text: &str,
    path: &str,
    format: TrackFormat,
    homography: Option<&Homography>,
) -> Result<Vec<Track>> {
    let mut tracks: BTreeMap<u64, BTreeMap<u32, Point>> = BTreeMap::new();
    for (line, row) in data_lines(text) {
        let err = |msg: String| Error::Parse {
            path: path.to_string(),
            line,
            msg,
        };
        let cols: Vec<&str> = row.split(',').map(str::trim).collect();
        let need = match format {
            TrackFormat::Plain => 4,
            TrackFormat::Mot => 9,
        };
        if cols.len() < need {
            return Err(err(format!("expected at least {need} columns, found {}", cols.len())));
        }
        let num = |k: usize| {
            cols[k]
                .parse::<f64>()
                .map_err(|e| err(format!("column {}: {e}", k + 1)))
                .and_then(|v| {
                    if v.is_finite() {
                        Ok(v)
                    } else {
                        Err(err(format!("column {}: not finite", k + 1)))
                    }
                })
        };
        let int = |k: usize| {
            let v = num(k)?;
            if v < 0.0 || v.fract() != 0.0 {
                return Err(err(format!("column {}: expected a non-negative integer", k + 1)));
            }
            Ok(v)
        };
        let frame = int(0)? as u32;
        let id = int(1)? as u64;
        let pos = match format {
            TrackFormat::Plain => Point::new(num(2)?, num(3)?),
            TrackFormat::Mot => {
                let (x, y) = (num(7)?, num(8)?);
                if x == -1.0 && y == -1.0 {
                    let h = homography.ok_or_else(|| Error::MissingHomography {
                        path: path.to_string(),
                        line,
                    })?;
                    let (left, top, w, hgt) = (num(2)?, num(3)?, num(4)?, num(5)?);
                    h.apply(left + w / 2.0, top + hgt)
                } else {
                    Point::new(x, y)
                }
            }
        };
        if !(pos.x.is_finite() && pos.y.is_finite()) {
            return Err(err("position maps to infinity".into()));
        }
        if tracks.entry(id).or_default().insert(frame, pos).is_some() {
            return Err(err(format!("track {id} has two rows for frame {frame}")));
        }
    }
    Ok(tracks
        .into_iter()
        .map(|(id, pts)| {
            Track::new(
                id,
                pts.into_iter().map(|(frame, pos)| TrackPoint { frame, pos }).collect(),
            )
        })
        .collect())
}

pub fn read_tracks(path: &Path, format: TrackFormat, homography: Option<&Homography>) -> Result<Vec<Track>> {
    parse_tracks(&read_text(path)?, &path.display().to_string(), format, homography)
}

/// Rows ordered by frame, then track id.
pub fn format_tracks(tracks: &[Track], format: TrackFormat) -> String {
    let mut rows: Vec<(u32, u64, Point)> = tracks
        .iter()
        .flat_map(|t| t.points.iter().map(move |p| (p.frame, t.id, p.pos)))
        .collect();
    rows.sort_by_key(|r| (r.0, r.1));
    let mut s = String::new();
    for (frame, id, p) in rows {
        let _ = match format {
            TrackFormat::Plain => writeln!(s, "{frame},{id},{:.6},{:.6}", p.x, p.y),
            TrackFormat::Mot => writeln!(
                s,
                "{frame},{id},-1,-1,-1,-1,1,{:.6},{:.6},-1",
                p.x, p.y
            ),
        };
    }
    s
}

pub fn write_tracks(path: &Path, tracks: &[Track], format: TrackFormat) -> Result<()> {
    write_text(path, &format_tracks(tracks, format))
}

/// One pattern per line: `width x1 y1 x2 y2 ...`. The empty pattern is implicit.
pub fn format_patterns(patterns: &PatternSet) -> String {
    let mut s = String::new();
    for p in patterns.real() {
        let _ = write!(s, "{:.6}", p.width());
        for v in p.centerline() {
            let _ = write!(s, " {:.6} {:.6}", v.x, v.y);
        }
        s.push('\n');
    }
    s
}

pub fn parse_patterns(text: &str, path: &str) -> Result<PatternSet> {
    let mut out = Vec::new();
    for (line, row) in data_lines(text) {
        let err = |msg: String| Error::Parse {
            path: path.to_string(),
            line,
            msg,
        };
        let values = row
            .split_whitespace()
            .map(|s| s.parse::<f64>().map_err(|e| err(format!("{s}: {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        if values.len() < 5 || values.len() % 2 == 0 {
            return Err(err("expected a width followed by x y pairs".into()));
        }
        let pts = values[1..].chunks(2).map(|c| Point::new(c[0], c[1])).collect();
        out.push(Pattern::new(pts, values[0]).map_err(|e| err(e.to_string()))?);
    }
    Ok(PatternSet::new(out))
}

pub fn read_patterns(path: &Path) -> Result<PatternSet> {
    parse_patterns(&read_text(path)?, &path.display().to_string())
}

pub fn write_patterns(path: &Path, patterns: &PatternSet) -> Result<()> {
    write_text(path, &format_patterns(patterns))
}

/// Reads a `key=value` file on top of `base`.
pub fn read_config(path: &Path, base: Config) -> Result<Config> {
    let mut cfg = base;
    cfg.apply_text(&read_text(path)?)?;
    Ok(cfg)
}

const PALETTE: [&str; 8] = [
    "#e6194b", "#3cb44b", "#ffe119", "#4363d8", "#f58231", "#911eb4", "#46f0f0", "#f032e6",
];

/// SVG with one band (`path`) and one centerline (`polyline`) per pattern,
/// one `polyline` per track, and two axis `line`s.
pub fn render_svg(patterns: &PatternSet, tracks: &[Track]) -> String {
    let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut grow = |p: Point, r: f64| {
        lo = lo.inf(&Point::new(p.x - r, p.y - r));
        hi = hi.sup(&Point::new(p.x + r, p.y + r));
    };
    for p in patterns.real() {
        for v in p.centerline() {
            grow(*v, p.width());
        }
    }
    for t in tracks {
        for p in &t.points {
            grow(p.pos, 0.0);
        }
    }
    if !lo.x.is_finite() {
        lo = Point::new(0.0, 0.0);
        hi = Point::new(1.0, 1.0);
    }
    let margin = 0.05 * (hi - lo).max().max(1.0);
    lo -= Point::new(margin, margin);
    hi += Point::new(margin, margin);
    let size = 800.0;
    let scale = size / (hi - lo).max();
    let (w, h) = ((hi.x - lo.x) * scale, (hi.y - lo.y) * scale);
    let px = |p: Point| ((p.x - lo.x) * scale, (hi.y - p.y) * scale);
    let points = |pts: &mut dyn Iterator<Item = Point>| {
        pts.map(|p| {
            let (x, y) = px(p);
            format!("{x:.3},{y:.3}")
        })
        .collect::<Vec<_>>()
        .join(" ")
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.3}" height="{h:.3}" viewBox="0 0 {w:.3} {h:.3}">"#
    );
    let _ = writeln!(s, r##"<rect x="0" y="0" width="{w:.3}" height="{h:.3}" fill="#202020"/>"##);
    let (ox, oy) = px(Point::new(lo.x.max(0.0).min(hi.x), lo.y.max(0.0).min(hi.y)));
    let _ = writeln!(s, r##"<line x1="0" y1="{oy:.3}" x2="{w:.3}" y2="{oy:.3}" stroke="#808080" stroke-width="1"/>"##);
    let _ = writeln!(s, r##"<line x1="{ox:.3}" y1="0" x2="{ox:.3}" y2="{h:.3}" stroke="#808080" stroke-width="1"/>"##);
    for p in patterns.real() {
        let mut d = String::new();
        for (k, v) in p.centerline().iter().enumerate() {
            let (x, y) = px(*v);
            let _ = write!(d, "{}{x:.3} {y:.3}", if k == 0 { "M" } else { " L" });
        }
        let _ = writeln!(
            s,
            r##"<path d="{d}" fill="none" stroke="#ffffff" stroke-opacity="0.2" stroke-width="{:.3}" stroke-linecap="round" stroke-linejoin="round"/>"##,
            2.0 * p.width() * scale
        );
    }
    for p in patterns.real() {
        let _ = writeln!(
            s,
            r##"<polyline points="{}" fill="none" stroke="#ffffff" stroke-width="2"/>"##,
            points(&mut p.centerline().iter().copied())
        );
    }
    for (k, t) in tracks.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
            points(&mut t.points.iter().map(|p| p.pos)),
            PALETTE[k % PALETTE.len()]
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn write_plot(path: &Path, patterns: &PatternSet, tracks: &[Track]) -> Result<()> {
    write_text(path, &render_svg(patterns, tracks))
}
