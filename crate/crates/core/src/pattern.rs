//! Motion patterns: a directed centerline polyline with a width band.

use crate::error::{Error, Result};
use crate::types::Point;

/// Closest point of a centerline to a query point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    /// Arc length of the foot along the centerline.
    pub arc_length: f64,
    pub foot: Point,
    /// Distance from the query point to the foot.
    pub dist: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pattern {
    centerline: Vec<Point>,
    /// Cumulative arc length at each vertex.
    cumulative: Vec<f64>,
    width: f64,
}

impl Pattern {
    /// Builds a non-empty pattern. Consecutive duplicate vertices are dropped.
    pub fn new(centerline: Vec<Point>, width: f64) -> Result<Self> {
        if !(width > 0.0 && width.is_finite()) {
            return Err(Error::InvalidPattern(format!("width must be positive, got {width}")));
        }
        let mut pts: Vec<Point> = Vec::with_capacity(centerline.len());
        for p in centerline {
            if !(p.x.is_finite() && p.y.is_finite()) {
                return Err(Error::InvalidPattern("non-finite centerline vertex".into()));
            }
            if pts.last() != Some(&p) {
                pts.push(p);
            }
        }
        if pts.len() < 2 {
            return Err(Error::InvalidPattern(
                "centerline needs at least two distinct points".into(),
            ));
        }
        let mut cumulative = Vec::with_capacity(pts.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for w in pts.windows(2) {
            acc += (w[1] - w[0]).norm();
            cumulative.push(acc);
        }
        Ok(Self {
            centerline: pts,
            cumulative,
            width,
        })
    }

    /// The empty pattern, absorbing motion that follows no pattern.
    pub fn empty() -> Self {
        Self {
            centerline: Vec::new(),
            cumulative: Vec::new(),
            width: 0.0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.centerline.is_empty()
    }

    pub fn centerline(&self) -> &[Point] {
        &self.centerline
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    /// Same centerline, different width.
    pub fn with_width(&self, width: f64) -> Result<Self> {
        if self.is_empty() {
            return Err(Error::EmptyPattern);
        }
        Pattern::new(self.centerline.clone(), width)
    }

    /// Centerline length; zero for the empty pattern.
    pub fn length(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    /// Spatial cost, length × width; zero for the empty pattern.
    pub fn cost(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.length() * self.width
        }
    }

    /// Nearest point on the centerline. Ties go to the smallest arc length.
    pub fn project(&self, point: Point) -> Result<Projection> {
        if self.is_empty() {
            return Err(Error::EmptyPattern);
        }
        let mut best = Projection {
            arc_length: 0.0,
            foot: self.centerline[0],
            dist: f64::INFINITY,
        };
        for (k, seg) in self.centerline.windows(2).enumerate() {
            let (a, b) = (seg[0], seg[1]);
            let d = b - a;
            let len2 = d.norm_squared();
            let t = ((point - a).dot(&d) / len2).clamp(0.0, 1.0);
            let foot = a + d * t;
            let dist = (point - foot).norm();
            if dist < best.dist - 1e-12 {
                best = Projection {
                    arc_length: self.cumulative[k] + t * len2.sqrt(),
                    foot,
                    dist,
                };
            }
        }
        Ok(best)
    }

    fn segment_at(&self, s: f64) -> usize {
        let n = self.centerline.len() - 1;
        match self.cumulative.binary_search_by(|c| c.total_cmp(&s)) {
            Ok(i) => i.min(n - 1),
            Err(i) => i.saturating_sub(1).min(n - 1),
        }
    }

    /// Point at arc length `s`, clamped to the centerline.
    pub fn point_at(&self, s: f64) -> Point {
        let s = s.clamp(0.0, self.length());
        let k = self.segment_at(s);
        let (a, b) = (self.centerline[k], self.centerline[k + 1]);
        let seg = self.cumulative[k + 1] - self.cumulative[k];
        a + (b - a) * ((s - self.cumulative[k]) / seg)
    }

    /// Unit direction of travel at arc length `s`.
    pub fn tangent_at(&self, s: f64) -> Point {
        let k = self.segment_at(s.clamp(0.0, self.length()));
        (self.centerline[k + 1] - self.centerline[k]).normalize()
    }
}

/// Patterns available for assignment. Index 0 is always the empty pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternSet {
    patterns: Vec<Pattern>,
}

impl Default for PatternSet {
    fn default() -> Self {
        Self::new(Vec::new())
    }
}

impl PatternSet {
    pub const EMPTY: usize = 0;

    /// Wraps non-empty patterns; empty patterns in the input are skipped and
    /// the single empty pattern is placed at index 0.
    pub fn new(patterns: Vec<Pattern>) -> Self {
        let mut all = vec![Pattern::empty()];
        all.extend(patterns.into_iter().filter(|p| !p.is_empty()));
        Self { patterns: all }
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of non-empty patterns.
    pub fn num_real(&self) -> usize {
        self.patterns.len() - 1
    }

    pub fn get(&self, i: usize) -> &Pattern {
        &self.patterns[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Pattern> {
        self.patterns.iter()
    }

    /// Non-empty patterns only.
    pub fn real(&self) -> &[Pattern] {
        &self.patterns[1..]
    }

    pub fn total_cost(&self) -> f64 {
        self.patterns.iter().map(Pattern::cost).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64) -> Point {
        Point::new(x, y)
    }

    #[test]
    fn cost_is_length_times_width() {
        let pat = Pattern::new(vec![p(0.0, 0.0), p(3.0, 4.0)], 2.0).unwrap();
        assert_eq!(pat.length(), 5.0);
        assert_eq!(pat.cost(), 10.0);
        assert_eq!(pat.with_width(4.0).unwrap().cost(), 20.0);
        assert_eq!(Pattern::empty().cost(), 0.0);
    }

    #[test]
    fn rejects_degenerate_centerlines() {
        assert!(Pattern::new(vec![p(1.0, 1.0), p(1.0, 1.0)], 1.0).is_err());
        assert!(Pattern::new(vec![p(0.0, 0.0), p(1.0, 1.0)], 0.0).is_err());
        assert!(matches!(Pattern::empty().project(p(0.0, 0.0)), Err(Error::EmptyPattern)));
    }

    #[test]
    fn point_and_tangent_along_polyline() {
        let pat = Pattern::new(vec![p(0.0, 0.0), p(4.0, 0.0), p(4.0, 3.0)], 1.0).unwrap();
        assert_eq!(pat.point_at(2.0), p(2.0, 0.0));
        assert_eq!(pat.point_at(5.0), p(4.0, 1.0));
        assert_eq!(pat.point_at(99.0), p(4.0, 3.0));
        assert_eq!(pat.tangent_at(5.0), p(0.0, 1.0));
    }

    #[test]
    fn pattern_set_keeps_single_empty_at_zero() {
        let a = Pattern::new(vec![p(0.0, 0.0), p(1.0, 0.0)], 1.0).unwrap();
        let set = PatternSet::new(vec![Pattern::empty(), a.clone()]);
        assert_eq!(set.len(), 2);
        assert!(set.get(PatternSet::EMPTY).is_empty());
        assert_eq!(set.real(), &[a]);
    }
}
