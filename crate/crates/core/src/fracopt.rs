//! Maximization of `Σ m·x / Σ n·x` over 0/1 vectors subject to linear
//! constraints.
//!
//! The ratio is maximized by bisection on `α`: a probe asks whether some
//! feasible `x` satisfies `Σ (m − α·n)·x ≥ 0`. Each probe is answered exactly
//! by a depth-first branch-and-bound search with activity-based constraint
//! propagation and an optimistic bound on the parametric sum.
//!
//! The bound recognizes two kinds of structure when present in the model:
//! * rows `Σ x ≤ 1` / `Σ x = 1` with unit coefficients ("choose one" rows):
//!   each such row contributes only its best remaining option;
//! * selector variables `y` (zero ratio terms) linked by `x − y ≤ 0` and
//!   limited by non-negative budget rows `Σ c·y ≤ B`: opening new selectors
//!   is charged through a fractional-knapsack bound on their gains.
//!
//! Without such structure the bound degrades to the sum of positive
//! coefficients of unfixed variables.

use std::time::{Duration, Instant};

use crate::error::{Error, Result};

const FEAS_TOL: f64 = 1e-9;
const OBJ_TOL: f64 = 1e-10;
const DENOM_MIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparator {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub terms: Vec<(usize, f64)>,
    pub cmp: Comparator,
    pub rhs: f64,
}

impl LinearConstraint {
    fn activity(&self, x: &[bool]) -> f64 {
        self.terms.iter().filter(|(v, _)| x[*v]).map(|(_, a)| a).sum()
    }

    pub fn is_satisfied(&self, x: &[bool]) -> bool {
        let act = self.activity(x);
        match self.cmp {
            Comparator::Le => act <= self.rhs + FEAS_TOL,
            Comparator::Ge => act >= self.rhs - FEAS_TOL,
            Comparator::Eq => (act - self.rhs).abs() <= FEAS_TOL,
        }
    }
}

/// 0/1 variables, linear constraints and per-variable ratio coefficients.
#[derive(Debug, Clone, Default)]
pub struct SolverModel {
    num_vars: usize,
    constraints: Vec<LinearConstraint>,
    ratio: Vec<(f64, f64)>,
    ratio_set: Vec<bool>,
}

impl SolverModel {
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            constraints: Vec::new(),
            ratio: vec![(0.0, 0.0); num_vars],
            ratio_set: vec![false; num_vars],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn constraints(&self) -> &[LinearConstraint] {
        &self.constraints
    }

    /// `(m, n)` coefficient of every variable; zero where unset.
    pub fn ratio_terms(&self) -> &[(f64, f64)] {
        &self.ratio
    }

    /// Adds `Σ coef·x cmp rhs`. Repeated variables are merged.
    pub fn add_constraint(&mut self, terms: Vec<(usize, f64)>, cmp: Comparator, rhs: f64) -> Result<()> {
        if !rhs.is_finite() {
            return Err(Error::MalformedModel(format!("non-finite right-hand side {rhs}")));
        }
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
        let mut sorted = terms;
        sorted.sort_by_key(|t| t.0);
        for (v, a) in sorted {
            if v >= self.num_vars {
                return Err(Error::MalformedModel(format!("variable {v} out of range")));
            }
            if !a.is_finite() {
                return Err(Error::MalformedModel(format!("non-finite coefficient on {v}")));
            }
            match merged.last_mut() {
                Some(last) if last.0 == v => last.1 += a,
                _ => merged.push((v, a)),
            }
        }
        merged.retain(|t| t.1 != 0.0);
        self.constraints.push(LinearConstraint { terms: merged, cmp, rhs });
        Ok(())
    }

    /// Sets the numerator and denominator coefficients of one variable.
    pub fn set_ratio_term(&mut self, var: usize, m: f64, n: f64) -> Result<()> {
        if var >= self.num_vars {
            return Err(Error::MalformedModel(format!("variable {var} out of range")));
        }
        if !(m.is_finite() && n.is_finite()) {
            return Err(Error::MalformedModel(format!("non-finite ratio term on {var}")));
        }
        if self.ratio_set[var] {
            return Err(Error::MalformedModel(format!("ratio term of {var} set twice")));
        }
        self.ratio_set[var] = true;
        self.ratio[var] = (m, n);
        Ok(())
    }

    pub fn satisfies(&self, x: &[bool]) -> bool {
        x.len() == self.num_vars && self.constraints.iter().all(|c| c.is_satisfied(x))
    }

    /// `(Σ m·x, Σ n·x)`.
    pub fn ratio_parts(&self, x: &[bool]) -> (f64, f64) {
        self.ratio
            .iter()
            .zip(x)
            .filter(|(_, &on)| on)
            .fold((0.0, 0.0), |(a, b), ((m, n), _)| (a + m, b + n))
    }

    /// `Σ m·x / Σ n·x`, or `None` when the denominator is not positive.
    pub fn ratio_of(&self, x: &[bool]) -> Option<f64> {
        let (a, b) = self.ratio_parts(x);
        (b > 0.0).then(|| a / b)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioSearchConfig {
    pub lo: f64,
    pub hi: f64,
    pub iters: u32,
    /// Wall-clock cap per feasibility probe. A probe that runs out of time
    /// is treated as infeasible.
    pub time_budget: Option<Duration>,
}

impl Default for RatioSearchConfig {
    fn default() -> Self {
        Self {
            lo: 0.0,
            hi: 1.0,
            iters: 10,
            time_budget: None,
        }
    }
}

/// Environment variable holding the per-probe time budget in seconds.
pub const TIME_BUDGET_ENV: &str = "PTRACK_TIME_BUDGET_S";

impl RatioSearchConfig {
    pub fn new(lo: f64, hi: f64, iters: u32) -> Self {
        Self {
            lo,
            hi,
            iters,
            time_budget: None,
        }
    }

    /// Picks up a per-probe time budget from `PTRACK_TIME_BUDGET_S`, if set.
    pub fn with_env_budget(mut self) -> Self {
        if let Some(secs) = std::env::var(TIME_BUDGET_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<f64>().ok())
            .filter(|s| *s > 0.0 && s.is_finite())
        {
            self.time_budget = Some(Duration::from_secs_f64(secs));
        }
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi) {
            return Err(Error::MalformedModel(format!(
                "invalid search interval [{}, {}]",
                self.lo, self.hi
            )));
        }
        if self.iters == 0 {
            return Err(Error::MalformedModel("at least one bisection step is required".into()));
        }
        Ok(())
    }
}

/// Answer of a single feasibility probe.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Probe {
    Feasible(Vec<bool>),
    Infeasible,
    /// The time budget ran out before the search finished.
    Unknown,
}

impl Probe {
    pub fn into_option(self) -> Option<Vec<bool>> {
        match self {
            Probe::Feasible(x) => Some(x),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioSolution {
    pub alpha_star: f64,
    pub witness: Vec<bool>,
    /// Exact ratio of the witness, when its denominator is positive.
    pub witness_ratio: Option<f64>,
    /// Some probe ran out of time; `alpha_star` is then only a lower bound.
    pub timed_out: bool,
    pub probes: u32,
}

/// Looks for any feasible `x` with `Σ (m − α·n)·x ≥ 0`.
pub fn feasible(model: &SolverModel, alpha: f64) -> Probe {
    feasible_within(model, alpha, None)
}

pub fn feasible_within(model: &SolverModel, alpha: f64, budget: Option<Duration>) -> Probe {
    let prepared = Prepared::new(model, false);
    Search::new(&prepared, model, alpha).run(budget.map(|b| Instant::now() + b))
}

/// Bisection on `α` over `[cfg.lo, cfg.hi]`. A feasible probe raises the
/// lower end to the larger of the probe point and the witness's own ratio.
///
/// Probes only accept points with `Σ n·x > 0`, since a zero denominator would
/// satisfy every probe. If no such point exists but the constraints are
/// satisfiable, the result is `lo` with a witness whose ratio is undefined.
pub fn maximize_ratio(model: &SolverModel, cfg: &RatioSearchConfig) -> Result<RatioSolution> {
    cfg.validate()?;
    let prepared = Prepared::new(model, true);
    let probe = |alpha: f64| {
        Search::new(&prepared, model, alpha).run(cfg.time_budget.map(|b| Instant::now() + b))
    };
    let mut probes = 1;
    let mut timed_out = false;
    let infeasible = Error::NoFeasibleSolution { lo: cfg.lo, hi: cfg.hi };
    let mut witness = match probe(cfg.lo) {
        Probe::Feasible(x) => x,
        Probe::Infeasible => {
            let plain = Prepared::new(model, false);
            return match Search::new(&plain, model, cfg.lo).run(None) {
                Probe::Feasible(x) => Ok(RatioSolution {
                    alpha_star: cfg.lo,
                    witness_ratio: model.ratio_of(&x),
                    witness: x,
                    timed_out: false,
                    probes: 2,
                }),
                _ => Err(infeasible),
            };
        }
        Probe::Unknown => return Err(infeasible),
    };
    let mut lo = cfg.lo;
    if let Some(r) = model.ratio_of(&witness) {
        lo = lo.max(r);
    }
    let mut hi = cfg.hi;
    for _ in 0..cfg.iters {
        if lo >= hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        probes += 1;
        match probe(mid) {
            Probe::Feasible(x) => {
                lo = model.ratio_of(&x).map_or(mid, |r| r.max(mid));
                witness = x;
            }
            Probe::Infeasible => hi = mid,
            Probe::Unknown => {
                timed_out = true;
                hi = mid;
            }
        }
    }
    Ok(RatioSolution {
        alpha_star: lo,
        witness_ratio: model.ratio_of(&witness),
        witness,
        timed_out,
        probes,
    })
}

/// α-independent indexing of a model.
struct Prepared {
    n: usize,
    rows: Vec<Row>,
    var_rows: Vec<Vec<(u32, f64)>>,
    unit_rows: Vec<UnitRow>,
    unit_count: Vec<u32>,
    selector: Vec<Option<u32>>,
    budget_rows: Vec<u32>,
    /// Position of each selector inside each budget row's term list, by row.
    in_budget: Vec<Vec<bool>>,
}

struct Row {
    terms: Vec<(u32, f64)>,
    cmp: Comparator,
    rhs: f64,
    max_abs: f64,
}

struct UnitRow {
    vars: Vec<u32>,
    exact: bool,
}

impl Prepared {
    /// With `positive_denominator`, adds the row `Σ n·x ≥ DENOM_MIN`.
    fn new(model: &SolverModel, positive_denominator: bool) -> Self {
        let n = model.num_vars;
        let denominator = positive_denominator.then(|| LinearConstraint {
            terms: (0..n)
                .filter(|&v| model.ratio[v].1 != 0.0)
                .map(|v| (v, model.ratio[v].1))
                .collect(),
            cmp: Comparator::Ge,
            rhs: DENOM_MIN,
        });
        let rows: Vec<Row> = model
            .constraints
            .iter()
            .chain(denominator.iter())
            .map(|c| Row {
                terms: c.terms.iter().map(|&(v, a)| (v as u32, a)).collect(),
                cmp: c.cmp,
                rhs: c.rhs,
                max_abs: c.terms.iter().map(|t| t.1.abs()).fold(0.0, f64::max),
            })
            .collect();
        let mut var_rows = vec![Vec::new(); n];
        for (r, row) in rows.iter().enumerate() {
            for &(v, a) in &row.terms {
                var_rows[v as usize].push((r as u32, a));
            }
        }

        let mut unit_rows = Vec::new();
        let mut unit_count = vec![0u32; n];
        for row in &rows {
            let unit = !row.terms.is_empty()
                && row.rhs == 1.0
                && matches!(row.cmp, Comparator::Le | Comparator::Eq)
                && row.terms.iter().all(|t| t.1 == 1.0);
            if unit {
                for &(v, _) in &row.terms {
                    unit_count[v as usize] += 1;
                }
                unit_rows.push(UnitRow {
                    vars: row.terms.iter().map(|t| t.0).collect(),
                    exact: row.cmp == Comparator::Eq,
                });
            }
        }

        // x − y ≤ 0 (or y − x ≥ 0) links an option x to its selector y.
        let mut selector: Vec<Option<u32>> = vec![None; n];
        for row in &rows {
            if row.terms.len() != 2 || row.rhs != 0.0 {
                continue;
            }
            let sign = match row.cmp {
                Comparator::Le => 1.0,
                Comparator::Ge => -1.0,
                Comparator::Eq => continue,
            };
            let (a, b) = (row.terms[0], row.terms[1]);
            let link = if a.1 == sign && b.1 == -sign {
                Some((a.0, b.0))
            } else if b.1 == sign && a.1 == -sign {
                Some((b.0, a.0))
            } else {
                None
            };
            if let Some((x, y)) = link {
                if selector[x as usize].is_none() {
                    selector[x as usize] = Some(y);
                }
            }
        }
        let ratio = &model.ratio;
        let mut is_selector = vec![false; n];
        for s in selector.iter().flatten() {
            is_selector[*s as usize] = true;
        }
        for y in 0..n {
            if is_selector[y] && (unit_count[y] > 0 || ratio[y] != (0.0, 0.0)) {
                is_selector[y] = false;
            }
        }
        for s in selector.iter_mut() {
            if let Some(y) = *s {
                if !is_selector[y as usize] {
                    *s = None;
                }
            }
        }

        let mut budget_rows = Vec::new();
        let mut in_budget = Vec::new();
        for (r, row) in rows.iter().enumerate() {
            if row.cmp == Comparator::Le
                && !row.terms.is_empty()
                && row.terms.iter().all(|&(v, a)| is_selector[v as usize] && a >= 0.0)
            {
                budget_rows.push(r as u32);
                let mut mask = vec![false; n];
                for &(v, _) in &row.terms {
                    mask[v as usize] = true;
                }
                in_budget.push(mask);
            }
        }

        Self {
            n,
            rows,
            var_rows,
            unit_rows,
            unit_count,
            selector,
            budget_rows,
            in_budget,
        }
    }
}

struct Frame {
    var: u32,
    /// Scan position in the branching order.
    pos: usize,
    second: Option<i8>,
    trail_len: usize,
}

struct Search<'a> {
    p: &'a Prepared,
    model: &'a SolverModel,
    cost: Vec<f64>,
    share: Vec<f64>,
    val: Vec<i8>,
    min_act: Vec<f64>,
    max_act: Vec<f64>,
    trail: Vec<u32>,
    queue: Vec<u32>,
    queued: Vec<bool>,
    order: Vec<u32>,
    gain: Vec<f64>,
    gain_touched: Vec<u32>,
}

impl<'a> Search<'a> {
    fn new(p: &'a Prepared, model: &'a SolverModel, alpha: f64) -> Self {
        let cost: Vec<f64> = model.ratio.iter().map(|(m, n)| m - alpha * n).collect();
        let share = cost
            .iter()
            .zip(&p.unit_count)
            .map(|(c, &k)| if k > 0 { c / k as f64 } else { *c })
            .collect();
        let mut order: Vec<u32> = (0..p.n as u32).collect();
        order.sort_by(|&a, &b| {
            cost[b as usize]
                .abs()
                .total_cmp(&cost[a as usize].abs())
                .then(a.cmp(&b))
        });
        let mut min_act = vec![0.0; p.rows.len()];
        let mut max_act = vec![0.0; p.rows.len()];
        for (r, row) in p.rows.iter().enumerate() {
            for &(_, a) in &row.terms {
                min_act[r] += a.min(0.0);
                max_act[r] += a.max(0.0);
            }
        }
        Self {
            p,
            model,
            cost,
            share,
            val: vec![-1; p.n],
            min_act,
            max_act,
            trail: Vec::with_capacity(p.n),
            queue: (0..p.rows.len() as u32).collect(),
            queued: vec![true; p.rows.len()],
            order,
            gain: vec![0.0; p.n],
            gain_touched: Vec::new(),
        }
    }

    fn fix(&mut self, v: u32, b: i8) {
        debug_assert_eq!(self.val[v as usize], -1);
        self.val[v as usize] = b;
        self.trail.push(v);
        let x = b as f64;
        for &(r, a) in &self.p.var_rows[v as usize] {
            let r = r as usize;
            self.min_act[r] += a * x - a.min(0.0);
            self.max_act[r] += a * x - a.max(0.0);
            if !self.queued[r] {
                self.queued[r] = true;
                self.queue.push(r as u32);
            }
        }
    }

    fn undo_to(&mut self, len: usize) {
        while self.trail.len() > len {
            let v = self.trail.pop().unwrap() as usize;
            let x = self.val[v] as f64;
            for &(r, a) in &self.p.var_rows[v] {
                let r = r as usize;
                self.min_act[r] -= a * x - a.min(0.0);
                self.max_act[r] -= a * x - a.max(0.0);
            }
            self.val[v] = -1;
        }
    }

    fn clear_queue(&mut self) {
        for r in self.queue.drain(..) {
            self.queued[r as usize] = false;
        }
    }

    /// Runs propagation to a fixpoint; `false` on conflict.
    fn propagate(&mut self) -> bool {
        while let Some(r) = self.queue.pop() {
            let r = r as usize;
            self.queued[r] = false;
            let row = &self.p.rows[r];
            let upper = matches!(row.cmp, Comparator::Le | Comparator::Eq);
            let lower = matches!(row.cmp, Comparator::Ge | Comparator::Eq);
            if upper && self.min_act[r] > row.rhs + FEAS_TOL {
                self.clear_queue();
                return false;
            }
            if lower && self.max_act[r] < row.rhs - FEAS_TOL {
                self.clear_queue();
                return false;
            }
            let need_upper = upper && self.min_act[r] + row.max_abs > row.rhs + FEAS_TOL;
            let need_lower = lower && self.max_act[r] - row.max_abs < row.rhs - FEAS_TOL;
            if !need_upper && !need_lower {
                continue;
            }
            for k in 0..self.p.rows[r].terms.len() {
                let (v, a) = self.p.rows[r].terms[k];
                if self.val[v as usize] != -1 {
                    continue;
                }
                let rhs = self.p.rows[r].rhs;
                if need_upper {
                    if a > 0.0 && self.min_act[r] + a > rhs + FEAS_TOL {
                        self.fix(v, 0);
                        continue;
                    }
                    if a < 0.0 && self.min_act[r] - a > rhs + FEAS_TOL {
                        self.fix(v, 1);
                        continue;
                    }
                }
                if need_lower {
                    if a > 0.0 && self.max_act[r] - a < rhs - FEAS_TOL {
                        self.fix(v, 1);
                        continue;
                    }
                    if a < 0.0 && self.max_act[r] + a < rhs - FEAS_TOL {
                        self.fix(v, 0);
                    }
                }
            }
        }
        true
    }

    /// Upper bound on `Σ cost·x` over completions of the current partial assignment.
    fn bound(&mut self) -> f64 {
        let p = self.p;
        let mut total = 0.0;
        for v in 0..p.n {
            if p.unit_count[v] == 0 {
                match self.val[v] {
                    1 => total += self.cost[v],
                    -1 => total += self.cost[v].max(0.0),
                    _ => {}
                }
            }
        }
        let mut row_gain: Vec<(u32, f64)> = Vec::new();
        for row in &p.unit_rows {
            let mut chosen = None;
            for &v in &row.vars {
                if self.val[v as usize] == 1 {
                    chosen = Some(v);
                    break;
                }
            }
            if let Some(v) = chosen {
                total += self.share[v as usize];
                continue;
            }
            let mut open = if row.exact { f64::NEG_INFINITY } else { 0.0 };
            let mut any = f64::NEG_INFINITY;
            for &v in &row.vars {
                let v = v as usize;
                if self.val[v] != -1 {
                    continue;
                }
                any = any.max(self.share[v]);
                let is_open = match p.selector[v] {
                    None => true,
                    Some(y) => self.val[y as usize] == 1,
                };
                if is_open {
                    open = open.max(self.share[v]);
                }
            }
            if open == f64::NEG_INFINITY {
                if any == f64::NEG_INFINITY {
                    return f64::NEG_INFINITY;
                }
                total += any;
                continue;
            }
            total += open;
            row_gain.clear();
            for &v in &row.vars {
                let v = v as usize;
                if self.val[v] != -1 {
                    continue;
                }
                let Some(y) = p.selector[v] else { continue };
                if self.val[y as usize] != -1 {
                    continue;
                }
                let g = self.share[v] - open;
                if g <= 0.0 {
                    continue;
                }
                match row_gain.iter_mut().find(|e| e.0 == y) {
                    Some(e) => e.1 = e.1.max(g),
                    None => row_gain.push((y, g)),
                }
            }
            for &(y, g) in &row_gain {
                if self.gain[y as usize] == 0.0 {
                    self.gain_touched.push(y);
                }
                self.gain[y as usize] += g;
            }
        }
        if self.gain_touched.is_empty() {
            return total;
        }
        let all: f64 = self.gain_touched.iter().map(|&y| self.gain[y as usize]).sum();
        let mut best = all;
        let mut items: Vec<(f64, f64)> = Vec::new();
        for (b, &r) in p.budget_rows.iter().enumerate() {
            let row = &p.rows[r as usize];
            let used: f64 = row
                .terms
                .iter()
                .filter(|(v, _)| self.val[*v as usize] == 1)
                .map(|t| t.1)
                .sum();
            let mut cap = row.rhs - used;
            items.clear();
            let mut outside = all;
            for &(v, a) in &row.terms {
                let g = self.gain[v as usize];
                if g > 0.0 && self.val[v as usize] == -1 {
                    outside -= g;
                    items.push((g, a));
                }
            }
            debug_assert!(p.in_budget[b].len() == p.n);
            let mut acc = outside.max(0.0);
            items.sort_by(|x, y| (y.0 * x.1).total_cmp(&(x.0 * y.1)));
            for &(g, a) in &items {
                if a <= FEAS_TOL {
                    acc += g;
                } else if cap >= a {
                    acc += g;
                    cap -= a;
                } else {
                    if cap > 0.0 {
                        acc += g * cap / a;
                    }
                    cap = 0.0;
                }
            }
            best = best.min(acc);
        }
        for y in self.gain_touched.drain(..) {
            self.gain[y as usize] = 0.0;
        }
        total + best
    }

    fn exact_value(&self) -> f64 {
        (0..self.p.n)
            .filter(|&v| self.val[v] == 1)
            .map(|v| self.cost[v])
            .sum()
    }

    fn next_branch(&self, from: usize) -> Option<(usize, u32)> {
        (from..self.order.len())
            .map(|k| (k, self.order[k]))
            .find(|&(_, v)| self.val[v as usize] == -1)
    }

    fn run(mut self, deadline: Option<Instant>) -> Probe {
        let mut stack: Vec<Frame> = Vec::new();
        let mut nodes: u64 = 0;
        // (ok, scan position) of the node being expanded
        let mut ok = self.propagate();
        let mut pos = 0usize;
        loop {
            nodes += 1;
            if nodes.is_multiple_of(256) {
                if let Some(d) = deadline {
                    if Instant::now() >= d {
                        return Probe::Unknown;
                    }
                }
            }
            if ok && self.bound() >= -OBJ_TOL {
                match self.next_branch(pos) {
                    None => {
                        if self.exact_value() >= -OBJ_TOL {
                            let x: Vec<bool> = self.val.iter().map(|&b| b == 1).collect();
                            debug_assert!(self.model.satisfies(&x));
                            return Probe::Feasible(x);
                        }
                    }
                    Some((k, v)) => {
                        let c = self.cost[v as usize];
                        let first: i8 = if c > 0.0 { 1 } else { 0 };
                        stack.push(Frame {
                            var: v,
                            pos: k + 1,
                            second: Some(1 - first),
                            trail_len: self.trail.len(),
                        });
                        self.fix(v, first);
                        ok = self.propagate();
                        pos = k + 1;
                        continue;
                    }
                }
            }
            // backtrack
            loop {
                let Some(frame) = stack.last_mut() else {
                    return Probe::Infeasible;
                };
                let trail_len = frame.trail_len;
                match frame.second.take() {
                    Some(b) => {
                        let (v, p) = (frame.var, frame.pos);
                        self.undo_to(trail_len);
                        self.fix(v, b);
                        ok = self.propagate();
                        pos = p;
                        break;
                    }
                    None => {
                        stack.pop();
                        self.undo_to(trail_len);
                    }
                }
            }
        }
    }
}
