//! Tracking and learning parameters, with a flat `key=value` text form.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Pattern widths considered when generating candidate patterns.
#[derive(Debug, Clone, PartialEq)]
pub enum WidthSet {
    /// Widths in meters.
    Absolute(Vec<f64>),
    /// Fractions of the tracking-area extent, for scenes of unknown scale.
    Relative(Vec<f64>),
}

impl WidthSet {
    pub fn metric() -> Self {
        WidthSet::Absolute(vec![0.5, 1.0, 3.0, 5.0, 7.0, 9.0, 11.0, 13.0, 15.0, 17.0])
    }

    pub fn relative() -> Self {
        WidthSet::Relative(vec![0.05, 0.1, 0.2, 0.3, 0.4, 0.5])
    }

    /// Widths in meters for a tracking area whose larger side is `extent`.
    pub fn resolve(&self, extent: f64) -> Vec<f64> {
        match self {
            WidthSet::Absolute(w) => w.clone(),
            WidthSet::Relative(f) => f.iter().map(|x| x * extent).collect(),
        }
    }

    fn values(&self) -> &[f64] {
        match self {
            WidthSet::Absolute(w) | WidthSet::Relative(w) => w,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    /// Link radius between detections in successive frames, meters.
    pub d1: f64,
    /// Join radius between a track end and a track start, meters.
    pub d2: f64,
    /// Maximum gap for joining a track end to a track start, seconds.
    pub dt: f64,
    pub fps: f64,
    /// Drop trajectories assigned to the empty pattern from the output.
    pub remove_empty: bool,
    /// Maximum number of non-empty patterns.
    pub alpha_p: usize,
    /// Maximum total pattern cost (length × width). `None` means
    /// `0.3 · alpha_p · tracking area`.
    pub alpha_c: Option<f64>,
    /// Reverse-motion penalty.
    pub eps: f64,
    /// Score ratio of motion assigned to the empty pattern.
    pub eps_empty: f64,
    pub widths: WidthSet,
    /// Tracking area in m². `None` means the detections' bounding box.
    pub tracking_area: Option<f64>,
    /// Bisection steps when linking.
    pub link_iters: u32,
    /// Bisection steps when mining patterns.
    pub mine_iters: u32,
}

impl Default for Config {
    fn default() -> Self {
        Self::supervised()
    }
}

impl Config {
    pub fn supervised() -> Self {
        Self {
            d1: 2.0,
            d2: 4.0,
            dt: 2.0,
            fps: 1.0,
            remove_empty: true,
            alpha_p: 5,
            alpha_c: None,
            eps: 1.0,
            eps_empty: 0.3,
            widths: WidthSet::metric(),
            tracking_area: None,
            link_iters: 10,
            mine_iters: 5,
        }
    }

    pub fn unsupervised() -> Self {
        Self {
            eps_empty: -3.0,
            ..Self::supervised()
        }
    }

    /// Fragment-join gap in frames.
    pub fn dt_frames(&self) -> u32 {
        (self.dt * self.fps + 1e-9).floor().max(0.0) as u32
    }

    /// Resolved cost budget for a scene of the given area.
    pub fn alpha_c_for(&self, area: f64) -> f64 {
        self.alpha_c
            .unwrap_or_else(|| 0.3 * self.alpha_p as f64 * self.tracking_area.unwrap_or(area))
    }

    /// Initial bisection interval for the ratio objective. A negative empty-pattern
    /// ratio can push the objective below zero, so the lower end is widened then.
    pub fn ratio_bounds(&self) -> (f64, f64) {
        if self.eps_empty < 0.0 {
            (-(1.0 + self.eps + self.eps_empty.abs()), 1.0)
        } else {
            (0.0, 1.0)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        positive("d1", self.d1)?;
        positive("d2", self.d2)?;
        positive("dt", self.dt)?;
        positive("fps", self.fps)?;
        if self.alpha_p == 0 {
            return Err(Error::Config("alpha_p must be positive".into()));
        }
        if let Some(c) = self.alpha_c {
            if c.is_nan() || c < 0.0 {
                return Err(Error::Config(format!("alpha_c must be non-negative, got {c}")));
            }
        }
        if let Some(a) = self.tracking_area {
            positive("tracking_area", a)?;
        }
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return Err(Error::Config(format!("eps must be non-negative, got {}", self.eps)));
        }
        if !self.eps_empty.is_finite() {
            return Err(Error::Config("eps_empty must be finite".into()));
        }
        if self.widths.values().is_empty() {
            return Err(Error::Config("widths must not be empty".into()));
        }
        for &w in self.widths.values() {
            positive("width", w)?;
        }
        if self.link_iters == 0 || self.mine_iters == 0 {
            return Err(Error::Config("bisection steps must be at least 1".into()));
        }
        Ok(())
    }

    /// Sets one field from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |e: &dyn std::fmt::Display| Error::Config(format!("{key}={value}: {e}"));
        let float = |v: &str| v.trim().parse::<f64>().map_err(|e| bad(&e));
        match key.trim() {
            "d1" => self.d1 = float(value)?,
            "d2" => self.d2 = float(value)?,
            "dt" => self.dt = float(value)?,
            "fps" => self.fps = float(value)?,
            "remove_empty" => {
                self.remove_empty = match value.trim() {
                    "1" | "true" | "yes" => true,
                    "0" | "false" | "no" => false,
                    other => return Err(bad(&format!("not a boolean: {other}"))),
                }
            }
            "alpha_p" => self.alpha_p = value.trim().parse().map_err(|e| bad(&e))?,
            "alpha_c" => {
                self.alpha_c = match value.trim() {
                    "" | "auto" => None,
                    v => Some(float(v)?),
                }
            }
            "eps" => self.eps = float(value)?,
            "eps_empty" => self.eps_empty = float(value)?,
            "widths" => {
                let parsed = value
                    .split(',')
                    .map(float)
                    .collect::<Result<Vec<f64>>>()?;
                self.widths = match self.widths {
                    WidthSet::Absolute(_) => WidthSet::Absolute(parsed),
                    WidthSet::Relative(_) => WidthSet::Relative(parsed),
                };
            }
            "width_mode" => {
                let v = self.widths.values().to_vec();
                self.widths = match value.trim() {
                    "absolute" => WidthSet::Absolute(v),
                    "relative" => {
                        if matches!(self.widths, WidthSet::Absolute(_)) && v == WidthSet::metric().values() {
                            WidthSet::relative()
                        } else {
                            WidthSet::Relative(v)
                        }
                    }
                    other => return Err(bad(&format!("unknown width mode {other}"))),
                }
            }
            "tracking_area" => {
                self.tracking_area = match value.trim() {
                    "" | "auto" => None,
                    v => Some(float(v)?),
                }
            }
            "link_iters" => self.link_iters = value.trim().parse().map_err(|e| bad(&e))?,
            "mine_iters" => self.mine_iters = value.trim().parse().map_err(|e| bad(&e))?,
            other => return Err(Error::Config(format!("unknown key {other}"))),
        }
        Ok(())
    }

    /// Applies `key=value` lines on top of `self`. Blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", i + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("auto".to_string(), |x| x.to_string());
        let (mode, widths) = match &self.widths {
            WidthSet::Absolute(w) => ("absolute", w),
            WidthSet::Relative(w) => ("relative", w),
        };
        let widths: Vec<String> = widths.iter().map(|w| w.to_string()).collect();
        let mut s = String::new();
        let _ = writeln!(s, "d1={}", self.d1);
        let _ = writeln!(s, "d2={}", self.d2);
        let _ = writeln!(s, "dt={}", self.dt);
        let _ = writeln!(s, "fps={}", self.fps);
        let _ = writeln!(s, "remove_empty={}", self.remove_empty);
        let _ = writeln!(s, "alpha_p={}", self.alpha_p);
        let _ = writeln!(s, "alpha_c={}", opt(self.alpha_c));
        let _ = writeln!(s, "eps={}", self.eps);
        let _ = writeln!(s, "eps_empty={}", self.eps_empty);
        let _ = writeln!(s, "width_mode={mode}");
        let _ = writeln!(s, "widths={}", widths.join(","));
        let _ = writeln!(s, "tracking_area={}", opt(self.tracking_area));
        let _ = writeln!(s, "link_iters={}", self.link_iters);
        let _ = writeln!(s, "mine_iters={}", self.mine_iters);
        s
    }
}
