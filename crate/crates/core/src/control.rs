//! Controlled ODEs `y' = f(y, u)` with piecewise-constant controls.
//!
//! Values are estimated by searching a finite family of schedules: `K`
//! equal pieces with values from the control grid, followed by coordinate
//! descent on the switch times. Every estimate is therefore an upper bound
//! on the infimum over all measurable controls.
//!
//! Running costs that are piecewise constant in the state are integrated
//! exactly: switch times of the cost along the path are located as events
//! inside each integration step. Continuous costs use product trapezoid
//! rules on the samples.

use std::cmp::Ordering;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::means::exp_cell_weights;
use crate::plays::{gamma_lambda, gamma_t, PiecewiseCost, Trajectory};
use crate::report::ValueReport;

/// Slack allowed when testing the admissible-set predicate.
pub const FEASIBILITY_TOL: f64 = 1e-7;

type Dynamics<const D: usize> = Arc<dyn Fn(&[f64; D], f64) -> [f64; D] + Send + Sync>;
type Flow<const D: usize> = Arc<dyn Fn(&[f64; D], f64, f64) -> [f64; D] + Send + Sync>;
type CostFn<const D: usize> = Arc<dyn Fn(&[f64; D]) -> f64 + Send + Sync>;
type Predicate<const D: usize> = Arc<dyn Fn(&[f64; D]) -> bool + Send + Sync>;

/// How the running cost depends on the state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostKind {
    /// Finitely many values; switches along a path are located as events.
    PiecewiseConstant,
    Continuous,
}

/// A deterministic controlled system with scalar control.
#[derive(Clone)]
pub struct ControlProblem<const D: usize> {
    name: String,
    dynamics: Dynamics<D>,
    exact_flow: Option<Flow<D>>,
    control_grid: Vec<f64>,
    control_range: (f64, f64),
    cost: CostFn<D>,
    cost_kind: CostKind,
    admissible: Option<Predicate<D>>,
}

impl<const D: usize> std::fmt::Debug for ControlProblem<D> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ControlProblem")
            .field("name", &self.name)
            .field("state_dim", &D)
            .field("control_grid", &self.control_grid)
            .field("control_range", &self.control_range)
            .field("cost_kind", &self.cost_kind)
            .field("exact_flow", &self.exact_flow.is_some())
            .finish()
    }
}

impl<const D: usize> ControlProblem<D> {
    pub fn new<F, G>(
        name: impl Into<String>,
        dynamics: F,
        control_grid: Vec<f64>,
        control_range: (f64, f64),
        cost: G,
        cost_kind: CostKind,
    ) -> Result<Self>
    where
        F: Fn(&[f64; D], f64) -> [f64; D] + Send + Sync + 'static,
        G: Fn(&[f64; D]) -> f64 + Send + Sync + 'static,
    {
        if control_grid.is_empty() {
            return domain("control grid must be nonempty");
        }
        if control_grid.iter().any(|u| *u < control_range.0 || *u > control_range.1) {
            return domain("control grid must lie in the control set");
        }
        Ok(Self {
            name: name.into(),
            dynamics: Arc::new(dynamics),
            exact_flow: None,
            control_grid,
            control_range,
            cost: Arc::new(cost),
            cost_kind,
            admissible: None,
        })
    }

    /// Closed-form flow `(state, u, dt) -> state` used instead of RK4.
    pub fn with_exact_flow<F>(mut self, flow: F) -> Self
    where
        F: Fn(&[f64; D], f64, f64) -> [f64; D] + Send + Sync + 'static,
    {
        self.exact_flow = Some(Arc::new(flow));
        self
    }

    pub fn with_admissible<P>(mut self, pred: P) -> Self
    where
        P: Fn(&[f64; D]) -> bool + Send + Sync + 'static,
    {
        self.admissible = Some(Arc::new(pred));
        self
    }

    pub fn with_control_grid(mut self, grid: Vec<f64>) -> Result<Self> {
        if grid.is_empty() || grid.iter().any(|u| *u < self.control_range.0 || *u > self.control_range.1) {
            return domain("control grid must be nonempty and inside the control set");
        }
        self.control_grid = grid;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn control_grid(&self) -> &[f64] {
        &self.control_grid
    }

    pub fn control_range(&self) -> (f64, f64) {
        self.control_range
    }

    pub fn cost(&self, x: &[f64; D]) -> f64 {
        (self.cost)(x)
    }

    pub fn cost_kind(&self) -> CostKind {
        self.cost_kind
    }

    pub fn derivative(&self, x: &[f64; D], u: f64) -> [f64; D] {
        (self.dynamics)(x, u)
    }

    pub fn is_admissible(&self, x: &[f64; D]) -> bool {
        self.admissible.as_ref().map_or(true, |p| p(x))
    }

    /// Advances `x` by `dt` under constant control `u`.
    pub fn advance(&self, x: &[f64; D], u: f64, dt: f64) -> [f64; D] {
        match &self.exact_flow {
            Some(flow) => flow(x, u, dt),
            None => rk4_step(&*self.dynamics, x, u, dt),
        }
    }

    /// Same step with the classical RK4 scheme, whether or not a closed
    /// form is available.
    pub fn rk4_advance(&self, x: &[f64; D], u: f64, dt: f64) -> [f64; D] {
        rk4_step(&*self.dynamics, x, u, dt)
    }
}

fn rk4_step<const D: usize>(
    f: &(dyn Fn(&[f64; D], f64) -> [f64; D] + Send + Sync),
    x: &[f64; D],
    u: f64,
    dt: f64,
) -> [f64; D] {
    let shift = |base: &[f64; D], k: &[f64; D], a: f64| -> [f64; D] {
        let mut out = *base;
        for i in 0..D {
            out[i] += a * k[i];
        }
        out
    };
    let k1 = f(x, u);
    let k2 = f(&shift(x, &k1, 0.5 * dt), u);
    let k3 = f(&shift(x, &k2, 0.5 * dt), u);
    let k4 = f(&shift(x, &k3, dt), u);
    let mut out = *x;
    for i in 0..D {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// Piecewise-constant control: `values[i]` applies on
/// `[switches[i-1], switches[i])`, the last value forever.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSchedule {
    switches: Vec<f64>,
    values: Vec<f64>,
}

impl ControlSchedule {
    pub fn new(switches: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.len() != switches.len() + 1 {
            return domain("a schedule needs one more value than switch times");
        }
        if switches.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return domain("switch times must be positive and finite");
        }
        if switches.windows(2).any(|w| w[0] >= w[1]) {
            return domain("switch times must be strictly increasing");
        }
        Ok(Self { switches, values })
    }

    pub fn constant(u: f64) -> Self {
        Self { switches: Vec::new(), values: vec![u] }
    }

    /// `u = first` on `[0, at)`, then `then`.
    pub fn one_switch(first: f64, at: f64, then: f64) -> Result<Self> {
        Self::new(vec![at], vec![first, then])
    }

    /// `K` equal pieces over `[0, horizon]`.
    pub fn equal_pieces(values: Vec<f64>, horizon: f64) -> Result<Self> {
        let k = values.len();
        let switches = (1..k).map(|i| horizon * i as f64 / k as f64).collect();
        Self::new(switches, values)
    }

    pub fn switches(&self) -> &[f64] {
        &self.switches
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value_at(&self, t: f64) -> f64 {
        let i = self.switches.partition_point(|s| *s <= t);
        self.values[i]
    }

    /// Merges adjacent pieces carrying the same value.
    pub fn canonical(&self) -> Self {
        let mut switches = Vec::new();
        let mut values = vec![self.values[0]];
        for (s, v) in self.switches.iter().zip(&self.values[1..]) {
            if *v != *values.last().unwrap() {
                switches.push(*s);
                values.push(*v);
            }
        }
        Self { switches, values }
    }

    /// Lexicographic order on the value sequence, then on switch times.
    pub fn lex_cmp(&self, other: &Self) -> Ordering {
        for (a, b) in self.values.iter().zip(&other.values) {
            match a.total_cmp(b) {
                Ordering::Equal => {}
                o => return o,
            }
        }
        match self.values.len().cmp(&other.values.len()) {
            Ordering::Equal => {}
            o => return o,
        }
        for (a, b) in self.switches.iter().zip(&other.switches) {
            match a.total_cmp(b) {
                Ordering::Equal => {}
                o => return o,
            }
        }
        Ordering::Equal
    }
}

/// Number of uniform cells used for `horizon` at target step `h`.
fn cell_count(horizon: f64, h: f64) -> usize {
    ((horizon / h) - 1e-9).ceil().max(1.0) as usize
}

/// Receives the output of a rollout.
trait PathSink<const D: usize> {
    fn sample(&mut self, t: f64, x: &[f64; D], cost: f64);
    /// The piecewise-constant cost takes `value` from time `t` on.
    fn cost_switch(&mut self, t: f64, value: f64);
}

/// Integrates the system on the uniform grid of `cells` cells, switching the
/// control exactly at the schedule's switch times.
fn rollout<const D: usize, K: PathSink<D>>(
    p: &ControlProblem<D>,
    x0: &[f64; D],
    sched: &ControlSchedule,
    horizon: f64,
    cells: usize,
    sink: &mut K,
) -> Result<()> {
    let h = horizon / cells as f64;
    let piecewise = p.cost_kind == CostKind::PiecewiseConstant;
    let check = |x: &[f64; D], t: f64| -> Result<()> {
        if p.is_admissible(x) {
            Ok(())
        } else {
            Err(Error::Feasibility { time: t })
        }
    };
    check(x0, 0.0)?;
    let mut x = *x0;
    let mut g = p.cost(&x);
    sink.sample(0.0, &x, g);
    if piecewise {
        sink.cost_switch(0.0, g);
    }
    let mut next_switch = 0;
    for k in 0..cells {
        let a = k as f64 * h;
        let b = if k + 1 == cells { horizon } else { (k + 1) as f64 * h };
        let mut t = a;
        while t < b {
            while next_switch < sched.switches.len() && sched.switches[next_switch] <= t {
                next_switch += 1;
            }
            let end = match sched.switches.get(next_switch) {
                Some(&s) if s < b => s,
                _ => b,
            };
            let u = sched.values[next_switch];
            let dt = end - t;
            let y = p.advance(&x, u, dt);
            if piecewise {
                let g_end = p.cost(&y);
                // locate each cost switch inside (t, end]
                let mut from = 0.0;
                while g != g_end {
                    let (mut lo, mut hi) = (from, dt);
                    for _ in 0..200 {
                        let mid = 0.5 * (lo + hi);
                        if mid <= lo || mid >= hi {
                            break;
                        }
                        if p.cost(&p.advance(&x, u, mid)) == g {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    g = p.cost(&p.advance(&x, u, hi));
                    sink.cost_switch(t + hi, g);
                    from = hi;
                }
            }
            check(&y, end)?;
            x = y;
            t = end;
        }
        g = p.cost(&x);
        sink.sample(b, &x, g);
    }
    Ok(())
}

struct Collect<const D: usize> {
    states: Vec<[f64; D]>,
    costs: Vec<f64>,
    starts: Vec<f64>,
    values: Vec<f64>,
}

impl<const D: usize> PathSink<D> for Collect<D> {
    fn sample(&mut self, _t: f64, x: &[f64; D], cost: f64) {
        self.states.push(*x);
        self.costs.push(cost);
    }
    fn cost_switch(&mut self, t: f64, value: f64) {
        self.starts.push(t);
        self.values.push(value);
    }
}

/// Simulates `p` from `x0` under `sched` on `[0, horizon]`.
///
/// The grid has `ceil(horizon / h)` equal cells, so the realized step is at
/// most `h`. Integration restarts at every switch time of the schedule.
pub fn simulate<const D: usize>(
    p: &ControlProblem<D>,
    x0: [f64; D],
    sched: &ControlSchedule,
    horizon: f64,
    h: f64,
) -> Result<Trajectory<[f64; D]>> {
    if !(horizon > 0.0) || !(h > 0.0) {
        return domain("simulate needs horizon > 0 and h > 0");
    }
    let (ulo, uhi) = p.control_range;
    if sched.values.iter().any(|u| *u < ulo || *u > uhi) {
        return domain("schedule uses controls outside the control set");
    }
    let cells = cell_count(horizon, h);
    let mut sink = Collect { states: Vec::with_capacity(cells + 1), costs: Vec::with_capacity(cells + 1), starts: vec![], values: vec![] };
    rollout(p, &x0, sched, horizon, cells, &mut sink)?;
    let traj = Trajectory::new(sink.states, sink.costs, horizon / cells as f64)?;
    if p.cost_kind == CostKind::PiecewiseConstant {
        let record = PiecewiseCost::new(sink.starts, sink.values, traj.horizon())?;
        traj.with_exact_cost(record)
    } else {
        Ok(traj)
    }
}

/// Payoff being minimized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Objective {
    /// `γ_t`.
    Average { t: f64 },
    /// `γ_λ` over the horizon `ln(1/tail_tol)/λ`, tail filled with 1/2.
    Discounted { lambda: f64, tail_tol: f64 },
}

impl Objective {
    pub fn horizon(&self) -> f64 {
        match *self {
            Objective::Average { t } => t,
            Objective::Discounted { lambda, tail_tol } => (1.0 / tail_tol).ln() / lambda,
        }
    }
}

/// Accumulates `∫ g` or `λ ∫ e^{-λs} g` during a rollout without storing
/// the path.
struct Accumulate {
    lambda: Option<f64>,
    piecewise: bool,
    // piecewise-constant record
    seg_start: f64,
    seg_value: f64,
    // sampled costs
    prev_t: f64,
    prev_cost: f64,
    weights: (f64, f64),
    sum: f64,
    max_speed_drop: f64,
    prev_state1: Option<f64>,
}

impl Accumulate {
    fn close_segment(&mut self, until: f64) {
        let (a, v) = (self.seg_start, self.seg_value);
        if until > a && v != 0.0 {
            self.sum += match self.lambda {
                None => v * (until - a),
                Some(l) => v * ((-l * a).exp() - (-l * until).exp()),
            };
        }
    }
}

impl<const D: usize> PathSink<D> for Accumulate {
    fn sample(&mut self, t: f64, x: &[f64; D], cost: f64) {
        if D > 1 {
            if let Some(prev) = self.prev_state1 {
                self.max_speed_drop = self.max_speed_drop.max(prev - x[1]);
            }
            self.prev_state1 = Some(x[1]);
        }
        if !self.piecewise && t > 0.0 {
            let h = t - self.prev_t;
            self.sum += match self.lambda {
                None => 0.5 * h * (self.prev_cost + cost),
                Some(l) => {
                    (-l * self.prev_t).exp() * (self.weights.0 * self.prev_cost + self.weights.1 * cost)
                }
            };
        }
        self.prev_t = t;
        self.prev_cost = cost;
    }
    fn cost_switch(&mut self, t: f64, value: f64) {
        self.close_segment(t);
        self.seg_start = t;
        self.seg_value = value;
    }
}

/// Evaluates the objective of one schedule by a storage-free rollout.
pub fn evaluate_schedule<const D: usize>(
    p: &ControlProblem<D>,
    x0: [f64; D],
    sched: &ControlSchedule,
    objective: Objective,
    h: f64,
) -> Result<f64> {
    let horizon = objective.horizon();
    let cells = cell_count(horizon, h);
    let step = horizon / cells as f64;
    let lambda = match objective {
        Objective::Average { .. } => None,
        Objective::Discounted { lambda, .. } => Some(lambda),
    };
    let mut acc = Accumulate {
        lambda,
        piecewise: p.cost_kind == CostKind::PiecewiseConstant,
        seg_start: 0.0,
        seg_value: 0.0,
        prev_t: 0.0,
        prev_cost: 0.0,
        weights: lambda.map_or((0.5, 0.5), |l| exp_cell_weights(l, step)),
        sum: 0.0,
        max_speed_drop: 0.0,
        prev_state1: None,
    };
    rollout(p, &x0, sched, horizon, cells, &mut acc)?;
    if acc.piecewise {
        acc.close_segment(horizon);
    }
    Ok(match objective {
        Objective::Average { t } => acc.sum / t,
        Objective::Discounted { lambda, .. } => acc.sum + 0.5 * (-lambda * horizon).exp(),
    })
}

/// Knobs of the schedule search.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    /// Number of equal pieces in the enumerated family.
    pub pieces: usize,
    /// Target integration step.
    pub step: f64,
    /// Upper bound on grid cells per rollout; the step grows beyond `step`
    /// for long horizons to respect it.
    pub max_cells: usize,
    /// Discount tail tolerance (sets the discounted horizon).
    pub tail_tol: f64,
    /// Coordinate-descent sweeps over the switch times.
    pub sweeps: usize,
    /// Enumerated candidates refined besides the best one per value pattern.
    pub refine_top: usize,
    /// Longest merged value pattern whose best representative is refined.
    pub refine_pattern_len: usize,
    /// Total rollouts allowed.
    pub max_evaluations: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            pieces: 8,
            step: 1e-2,
            max_cells: 100_000,
            tail_tol: 1e-9,
            sweeps: 3,
            refine_top: 2,
            refine_pattern_len: 3,
            max_evaluations: 50_000,
        }
    }
}

impl SearchConfig {
    pub fn effective_step(&self, horizon: f64) -> f64 {
        self.step.max(horizon / self.max_cells as f64)
    }
}

/// Result of a value search.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    /// Best payoff found: an upper bound on the value.
    pub value: f64,
    pub witness: ControlSchedule,
    pub evaluations: usize,
    pub budget_exhausted: bool,
    /// Integration step actually used.
    pub step: f64,
}

struct Searcher<'a, const D: usize> {
    p: &'a ControlProblem<D>,
    x0: [f64; D],
    objective: Objective,
    h: f64,
    evaluations: usize,
    budget: usize,
}

impl<'a, const D: usize> Searcher<'a, D> {
    fn exhausted(&self) -> bool {
        self.evaluations >= self.budget
    }

    /// Evaluates in parallel; infeasible schedules score +∞.
    fn eval_many(&mut self, scheds: &[ControlSchedule]) -> Vec<f64> {
        let room = self.budget.saturating_sub(self.evaluations);
        let n = scheds.len().min(room);
        self.evaluations += n;
        let (p, x0, obj, h) = (self.p, self.x0, self.objective, self.h);
        let mut out: Vec<f64> = scheds[..n]
            .par_iter()
            .map(|s| evaluate_schedule(p, x0, s, obj, h).unwrap_or(f64::INFINITY))
            .collect();
        out.resize(scheds.len(), f64::INFINITY);
        out
    }

    /// Coordinate descent on switch times, starting from `start`.
    fn refine(&mut self, start: ControlSchedule, start_value: f64, sweeps: usize) -> (ControlSchedule, f64) {
        let horizon = self.objective.horizon();
        let mut best = start;
        let mut best_value = start_value;
        for _ in 0..sweeps {
            let before = best_value;
            for i in 0..best.switches.len() {
                if self.exhausted() {
                    return (best, best_value);
                }
                let lo = if i == 0 { 0.0 } else { best.switches[i - 1] };
                let hi = if i + 1 < best.switches.len() { best.switches[i + 1] } else { horizon.max(best.switches[i]) };
                if hi <= lo {
                    continue;
                }
                let mut fracs: Vec<f64> = (1..=30).map(|j| 0.5f64.powi(j)).collect();
                fracs.extend((1..=30).map(|j| 1.0 - 0.5f64.powi(j)));
                fracs.extend((1..16).map(|j| j as f64 / 16.0));
                let mut positions: Vec<f64> = fracs.iter().map(|q| lo + q * (hi - lo)).collect();
                positions.push(best.switches[i]);
                positions.retain(|s| *s > lo && *s < hi);
                positions.sort_by(f64::total_cmp);
                positions.dedup();
                let with = |s: f64| {
                    let mut c = best.clone();
                    c.switches[i] = s;
                    c
                };
                let cands: Vec<_> = positions.iter().map(|&s| with(s)).collect();
                let vals = self.eval_many(&cands);
                let mut j = 0;
                for k in 1..vals.len() {
                    if vals[k] < vals[j] {
                        j = k;
                    }
                }
                let (mut a, mut b) = (
                    if j == 0 { lo } else { positions[j - 1] },
                    if j + 1 == positions.len() { hi } else { positions[j + 1] },
                );
                let (mut x, mut fx) = (positions[j], vals[j]);
                // golden-section search inside the bracket around the best scan point
                const INV_PHI: f64 = 0.618_033_988_749_894_8;
                let mut c = b - INV_PHI * (b - a);
                let mut d = a + INV_PHI * (b - a);
                let mut fc = self.eval_many(&[with(c)])[0];
                let mut fd = self.eval_many(&[with(d)])[0];
                for _ in 0..90 {
                    if self.exhausted() || (b - a) <= 1e-15 * b.abs().max(1e-300) {
                        break;
                    }
                    if fc <= fd {
                        b = d;
                        d = c;
                        fd = fc;
                        c = b - INV_PHI * (b - a);
                        fc = self.eval_many(&[with(c)])[0];
                    } else {
                        a = c;
                        c = d;
                        fc = fd;
                        d = a + INV_PHI * (b - a);
                        fd = self.eval_many(&[with(d)])[0];
                    }
                }
                for (s, v) in [(c, fc), (d, fd)] {
                    if v < fx && s > lo && s < hi {
                        x = s;
                        fx = v;
                    }
                }
                if fx < best_value {
                    best = with(x);
                    best_value = fx;
                }
            }
            if best_value >= before {
                break;
            }
        }
        (best, best_value)
    }
}

fn pick_best(cands: &[ControlSchedule], vals: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for i in 0..cands.len() {
        best = match best {
            None => Some(i),
            Some(j) => {
                let better = vals[i] < vals[j]
                    || (vals[i] == vals[j] && cands[i].lex_cmp(&cands[j]) == Ordering::Less);
                Some(if better { i } else { j })
            }
        };
    }
    best
}

/// Minimizes `objective` over the searched schedule family.
pub fn estimate_value<const D: usize>(
    p: &ControlProblem<D>,
    x0: [f64; D],
    objective: Objective,
    search: &SearchConfig,
) -> Result<Estimate> {
    if search.pieces == 0 {
        return domain("search needs at least one piece");
    }
    if !p.is_admissible(&x0) {
        return Err(Error::Feasibility { time: 0.0 });
    }
    let horizon = objective.horizon();
    if !(horizon > 0.0 && horizon.is_finite()) {
        return domain("objective horizon must be positive and finite");
    }
    let h = search.effective_step(horizon);
    let mut s = Searcher { p, x0, objective, h, evaluations: 0, budget: search.max_evaluations };

    // all value sequences of length K over the control grid, lexicographic
    let grid = p.control_grid();
    let k = search.pieces;
    let total = grid.len().checked_pow(k as u32).unwrap_or(usize::MAX).min(search.max_evaluations);
    let mut cands = Vec::with_capacity(total);
    let mut idx = vec![0usize; k];
    'outer: for _ in 0..total {
        let values = idx.iter().map(|&i| grid[i]).collect();
        cands.push(ControlSchedule::equal_pieces(values, horizon)?.canonical());
        for pos in (0..k).rev() {
            idx[pos] += 1;
            if idx[pos] < grid.len() {
                continue 'outer;
            }
            idx[pos] = 0;
        }
        break;
    }
    let vals = s.eval_many(&cands);

    // seeds: best per short value pattern, plus the overall top candidates
    let mut order: Vec<usize> = (0..cands.len()).collect();
    order.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]).then(cands[i].lex_cmp(&cands[j])));
    let mut seeds: Vec<usize> = Vec::new();
    let mut patterns: Vec<&[f64]> = Vec::new();
    for &i in &order {
        let pat = cands[i].values();
        if pat.len() > 1 && pat.len() <= search.refine_pattern_len && !patterns.contains(&pat) {
            patterns.push(pat);
            seeds.push(i);
        }
    }
    for &i in order.iter().take(search.refine_top) {
        if !seeds.contains(&i) {
            seeds.push(i);
        }
    }
    seeds.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]).then(cands[i].lex_cmp(&cands[j])));

    let mut pool = cands.clone();
    let mut pool_vals = vals.clone();
    for i in seeds {
        if s.exhausted() {
            break;
        }
        // infeasible seeds still carry a value pattern worth rescanning
        let (c, v) = s.refine(cands[i].clone(), vals[i], search.sweeps);
        pool.push(c);
        pool_vals.push(v);
    }
    let best = pick_best(&pool, &pool_vals).ok_or_else(|| Error::Domain("empty search".into()))?;
    if !pool_vals[best].is_finite() {
        return Err(Error::Feasibility { time: 0.0 });
    }
    Ok(Estimate {
        value: pool_vals[best],
        witness: pool[best].clone(),
        evaluations: s.evaluations,
        budget_exhausted: s.exhausted(),
        step: h,
    })
}

/// Upper bound on `V_t(x0)`.
pub fn estimate_vt<const D: usize>(
    p: &ControlProblem<D>,
    x0: [f64; D],
    t: f64,
    search: &SearchConfig,
) -> Result<Estimate> {
    if !(t > 0.0) {
        return domain("estimate_vt needs t > 0");
    }
    estimate_value(p, x0, Objective::Average { t }, search)
}

/// Upper bound on `V_λ(x0)`.
pub fn estimate_vlambda<const D: usize>(
    p: &ControlProblem<D>,
    x0: [f64; D],
    lambda: f64,
    search: &SearchConfig,
) -> Result<Estimate> {
    if !(lambda > 0.0) {
        return domain("estimate_vlambda needs lambda > 0");
    }
    estimate_value(p, x0, Objective::Discounted { lambda, tail_tol: search.tail_tol }, search)
}

/// The double integrator `x' = y, y' = u`, `u ∈ [0, 1]`, on `ℝ₊²` with
/// running cost 0 while `x ∈ [1, 2]` and 1 otherwise.
///
/// Its average values converge to [`analytic_v`] and its discounted values
/// to [`analytic_w`]; the two limits differ.
pub fn counterexample() -> ControlProblem<2> {
    ControlProblem::new(
        "counterexample",
        |s: &[f64; 2], u| [s[1], u],
        vec![0.0, 1.0],
        (0.0, 1.0),
        |s: &[f64; 2]| if (1.0..=2.0).contains(&s[0]) { 0.0 } else { 1.0 },
        CostKind::PiecewiseConstant,
    )
    .expect("valid instance")
    .with_exact_flow(|s: &[f64; 2], u, dt| [s[0] + s[1] * dt + 0.5 * u * dt * dt, s[1] + u * dt])
    .with_admissible(|s: &[f64; 2]| s[0] >= -FEASIBILITY_TOL && s[1] >= -FEASIBILITY_TOL)
}

/// Continuous cost of the compact variant: 1 outside `[0.9, 2.1]`, 0 on
/// `[1, 2]`, linear in between.
pub fn smooth_cost(x: f64) -> f64 {
    if x <= 0.9 || x >= 2.1 {
        1.0
    } else if x < 1.0 {
        (1.0 - x) / 0.1
    } else if x <= 2.0 {
        0.0
    } else {
        (x - 2.0) / 0.1
    }
}

/// Compact variant of [`counterexample`]: continuous cost, state space
/// `{0 <= y <= √(2x) <= 2√2}` and dynamics slowed down by `(4 - x)` for
/// `x >= 3` so that the state space is forward invariant.
pub fn smooth_variant() -> ControlProblem<2> {
    ControlProblem::new(
        "smooth",
        |s: &[f64; 2], u| {
            let damp = if s[0] >= 3.0 { 4.0 - s[0] } else { 1.0 };
            [damp * s[1], damp * u]
        },
        vec![0.0, 1.0],
        (0.0, 1.0),
        |s: &[f64; 2]| smooth_cost(s[0]),
        CostKind::Continuous,
    )
    .expect("valid instance")
    .with_admissible(smooth_admissible)
}

fn smooth_admissible(s: &[f64; 2]) -> bool {
    let tol = FEASIBILITY_TOL;
    let (x, y) = (s[0], s[1]);
    x >= -tol && y >= -tol && x <= 4.0 + tol && y <= (2.0 * x.max(0.0)).sqrt() + tol
}

/// Limit of `V_t(x0, y0)` on the double integrator as `t → ∞`.
pub fn analytic_v(x0: f64, y0: f64) -> f64 {
    if y0 > 0.0 || x0 > 2.0 {
        1.0
    } else if x0 >= 1.0 {
        0.0
    } else {
        (1.0 - x0) / (2.0 - x0)
    }
}

/// Limit of `V_λ(x0, y0)` on the double integrator as `λ → 0`.
pub fn analytic_w(x0: f64, y0: f64) -> f64 {
    if y0 > 0.0 || x0 > 2.0 {
        1.0
    } else if x0 >= 1.0 {
        0.0
    } else {
        let a = 1.0 - x0;
        let b = 2.0 - x0;
        1.0 - a.powf(a) / b.powf(b)
    }
}

/// `γ_t` from `(0, 0)` of the policy "u = 1 until τ, then 0".
pub fn one_switch_gamma_t(tau: f64, t: f64) -> f64 {
    let t1 = 1.0 / tau + 0.5 * tau;
    let t2 = 2.0 / tau + 0.5 * tau;
    1.0 + (t1 / t).min(1.0) - (t2 / t).min(1.0)
}

/// `γ_λ` from `(0, 0)` of the policy "u = 1 until τ, then 0".
pub fn one_switch_gamma_lambda(tau: f64, lambda: f64) -> f64 {
    let t1 = 1.0 / tau + 0.5 * tau;
    let t2 = 2.0 / tau + 0.5 * tau;
    1.0 - (-lambda * t1).exp() + (-lambda * t2).exp()
}

/// Finite-horizon monotonicity of values along a path: with `y = X(s)`,
/// `V_{t+s}(x) <= s/(t+s) + t/(t+s) V_t(y)` and
/// `V_λ(x) <= 1 - e^{-λs} + e^{-λs} V_λ(y)`.
///
/// Both sides are search estimates, so `slack` absorbs search error.
#[allow(clippy::too_many_arguments)]
pub fn monotonicity_probe<const D: usize>(
    p: &ControlProblem<D>,
    x0: [f64; D],
    path: &ControlSchedule,
    s: f64,
    t: f64,
    lambda: f64,
    search: &SearchConfig,
    slack: f64,
) -> Result<ValueReport> {
    let y = *simulate(p, x0, path, s, search.step)?.last_state();
    let at_x = estimate_vt(p, x0, t + s, search)?.value;
    let at_y = estimate_vt(p, y, t, search)?.value;
    let lx = estimate_vlambda(p, x0, lambda, search)?.value;
    let ly = estimate_vlambda(p, y, lambda, search)?.value;
    let w = (-lambda * s).exp();
    let mut report = ValueReport::new();
    let label = format!("{x0:?} -> {y:?}");
    report.check_le("monotonicity", &format!("V_t+s {label}"), Some(t), at_x, s / (t + s) + t / (t + s) * at_y + slack);
    report.check_le("monotonicity", &format!("V_lambda {label}"), Some(lambda), lx, 1.0 - w + w * ly + slack);
    Ok(report)
}

/// Simulates random schedules from `(0, 0)` on the double integrator and
/// checks `γ_t >= 1/2` and `γ_λ >= 3/4` up to `slack`, plus monotone speed.
pub fn lower_bound_audit(
    n_random: usize,
    t: f64,
    lambda: f64,
    seed: u64,
    h: f64,
    slack: f64,
) -> Result<ValueReport> {
    if n_random == 0 {
        return domain("audit needs at least one schedule");
    }
    let p = counterexample();
    let tail_tol: f64 = 1e-6;
    let horizon = t.max((1.0 / tail_tol).ln() / lambda);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut named: Vec<(String, ControlSchedule)> = vec![
        ("u=0".into(), ControlSchedule::constant(0.0)),
        ("one-switch tau=2/t".into(), ControlSchedule::one_switch(1.0, 2.0 / t, 0.0)?),
        (
            "one-switch tau=lambda/ln2".into(),
            ControlSchedule::one_switch(1.0, lambda / std::f64::consts::LN_2, 0.0)?,
        ),
    ];
    for i in 0..n_random {
        let pieces = rng.gen_range(1..=8usize);
        let mut switches: Vec<f64> = (1..pieces)
            .map(|_| {
                // log-uniform times reach both tiny bursts and late switches
                let e = rng.gen_range(-4.0..horizon.log10());
                10f64.powf(e)
            })
            .collect();
        switches.sort_by(f64::total_cmp);
        switches.dedup();
        let values: Vec<f64> = (0..=switches.len())
            .map(|_| if rng.gen_bool(0.5) { rng.gen_range(0.0..=1.0) } else { rng.gen_range(0..=1) as f64 })
            .collect();
        named.push((format!("random #{i}"), ControlSchedule::new(switches, values)?));
    }
    let results: Vec<Result<(f64, f64, f64)>> = named
        .par_iter()
        .map(|(_, sched)| {
            let traj = simulate(&p, [0.0, 0.0], sched, horizon, h)?;
            let gt = gamma_t(&traj, t)?;
            let gl = gamma_lambda(&traj, lambda, tail_tol * 1.01)?.value;
            let drop = traj
                .states()
                .windows(2)
                .map(|w| w[0][1] - w[1][1])
                .fold(0.0f64, f64::max);
            Ok((gt, gl, drop))
        })
        .collect();
    let mut report = ValueReport::new();
    report.meta("audit", "lower bounds from (0,0)").meta("t", t).meta("lambda", lambda).meta("seed", seed).meta("step", h).meta("slack", slack);
    let (mut min_t, mut min_l) = (f64::INFINITY, f64::INFINITY);
    let mut violations = 0usize;
    for ((name, _), r) in named.iter().zip(results) {
        let (gt, gl, drop) = r?;
        min_t = min_t.min(gt);
        min_l = min_l.min(gl);
        let ok = gt >= 0.5 - slack && gl >= 0.75 - slack && drop <= 1e-12;
        if !ok {
            violations += 1;
        }
        if !name.starts_with("random") || !ok {
            report.check_ge("lower_bound", &format!("{name} gamma_t"), Some(t), gt, 0.5 - slack);
            report.check_ge("lower_bound", &format!("{name} gamma_lambda"), Some(lambda), gl, 0.75 - slack);
        }
    }
    report.check_ge("lower_bound", "min gamma_t", Some(t), min_t, 0.5 - slack);
    report.check_ge("lower_bound", "min gamma_lambda", Some(lambda), min_l, 0.75 - slack);
    report.check_le("lower_bound", "violations", Some(n_random as f64), violations as f64, 0.0);
    Ok(report)
}

/// Fraction of random schedules from random admissible starts that stay in
/// the admissible set of [`smooth_variant`].
pub fn forward_invariance_audit(n_random: usize, horizon: f64, h: f64, seed: u64) -> Result<(usize, usize)> {
    let p = smooth_variant();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cases: Vec<([f64; 2], ControlSchedule)> = (0..n_random)
        .map(|_| {
            let x = rng.gen_range(0.0..4.0);
            let y = rng.gen_range(0.0..=1.0) * (2.0f64 * x).sqrt();
            let pieces = rng.gen_range(1..=6usize);
            let mut sw: Vec<f64> = (1..pieces).map(|_| rng.gen_range(0.0..horizon)).collect();
            sw.sort_by(f64::total_cmp);
            sw.dedup();
            sw.retain(|s| *s > 0.0);
            let vals = (0..=sw.len()).map(|_| rng.gen_range(0.0..=1.0)).collect();
            ([x, y], ControlSchedule::new(sw, vals).expect("sorted switches"))
        })
        .collect();
    let failures = cases
        .par_iter()
        .filter(|(x0, s)| matches!(simulate(&p, *x0, s, horizon, h), Err(Error::Feasibility { .. })))
        .count();
    Ok((n_random - failures, failures))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simulate_rest_point() {
        let p = counterexample();
        let tr = simulate(&p, [0.0, 0.0], &ControlSchedule::constant(0.0), 5.0, 0.1).unwrap();
        assert!(tr.states().iter().all(|s| *s == [0.0, 0.0]));
        assert!(tr.costs().iter().all(|c| *c == 1.0));
    }

    #[test]
    fn simulate_full_throttle() {
        let p = counterexample();
        let tr = simulate(&p, [0.0, 0.0], &ControlSchedule::constant(1.0), 2.0, 0.01).unwrap();
        let [x, y] = *tr.last_state();
        assert!((x - 2.0).abs() < 1e-12 && (y - 2.0).abs() < 1e-12);
    }

    #[test]
    fn simulate_one_switch() {
        let p = counterexample();
        let s = ControlSchedule::one_switch(1.0, 1.0, 0.0).unwrap();
        let tr = simulate(&p, [0.0, 0.0], &s, 3.0, 0.07).unwrap();
        let [x, y] = *tr.last_state();
        assert!((x - 2.5).abs() < 1e-12 && (y - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rk4_matches_closed_form_on_double_integrator() {
        let p = counterexample();
        let mut a = [0.3, 0.2];
        let mut b = a;
        for k in 0..500 {
            let u = if k % 7 < 3 { 1.0 } else { 0.25 };
            a = p.advance(&a, u, 0.013);
            b = p.rk4_advance(&b, u, 0.013);
        }
        assert!((a[0] - b[0]).abs() < 1e-10 && (a[1] - b[1]).abs() < 1e-12);
    }

    #[test]
    fn event_location_makes_cost_exact() {
        // u = 1 on [0, 1): x = s²/2 until s = 1, then x = 0.5 + (s - 1)
        let p = counterexample();
        let s = ControlSchedule::one_switch(1.0, 1.0, 0.0).unwrap();
        let tr = simulate(&p, [0.0, 0.0], &s, 4.0, 0.1).unwrap();
        // x = 1 at s = 1.5, x = 2 at s = 2.5
        assert!((gamma_t(&tr, 4.0).unwrap() - 3.0 / 4.0).abs() < 1e-12);
        let e = evaluate_schedule(&p, [0.0, 0.0], &s, Objective::Average { t: 4.0 }, 0.1).unwrap();
        assert!((e - 0.75).abs() < 1e-12);
    }

    #[test]
    fn one_switch_closed_forms_match_rollout() {
        let p = counterexample();
        let tau = 2.0 / 100.0;
        let s = ControlSchedule::one_switch(1.0, tau, 0.0).unwrap();
        let v = evaluate_schedule(&p, [0.0, 0.0], &s, Objective::Average { t: 100.0 }, 0.01).unwrap();
        assert!((v - one_switch_gamma_t(tau, 100.0)).abs() < 1e-11);
        assert!((v - 0.5001).abs() < 1e-9);
        let lam = 0.1;
        let tau = lam / std::f64::consts::LN_2;
        let s = ControlSchedule::one_switch(1.0, tau, 0.0).unwrap();
        let obj = Objective::Discounted { lambda: lam, tail_tol: 1e-12 };
        let v = evaluate_schedule(&p, [0.0, 0.0], &s, obj, 0.01).unwrap();
        assert!((v - one_switch_gamma_lambda(tau, lam)).abs() < 1e-10);
        assert!((v - 0.751_796_880_134_365_3).abs() < 1e-10);
    }

    #[test]
    fn analytic_tables() {
        assert_eq!(analytic_v(0.0, 0.0), 0.5);
        assert_eq!(analytic_w(0.0, 0.0), 0.75);
        assert_eq!(analytic_v(1.5, 0.0), 0.0);
        assert_eq!(analytic_w(1.5, 0.0), 0.0);
        assert!((analytic_v(0.5, 0.0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((analytic_w(0.5, 0.0) - 0.615_099_820_540_249_5).abs() < 1e-15);
        assert_eq!(analytic_v(3.0, 0.0), 1.0);
        assert_eq!(analytic_w(1.0, 0.5), 1.0);
    }

    #[test]
    fn schedule_validation_and_lookup() {
        assert!(ControlSchedule::new(vec![2.0, 1.0], vec![0.0, 1.0, 0.0]).is_err());
        assert!(ControlSchedule::new(vec![1.0], vec![0.0]).is_err());
        let s = ControlSchedule::new(vec![1.0, 2.0], vec![0.0, 1.0, 0.5]).unwrap();
        assert_eq!(s.value_at(0.5), 0.0);
        assert_eq!(s.value_at(1.0), 1.0);
        assert_eq!(s.value_at(7.0), 0.5);
        let e = ControlSchedule::equal_pieces(vec![1.0, 1.0, 0.0, 0.0], 4.0).unwrap().canonical();
        assert_eq!(e.switches(), &[2.0]);
        assert_eq!(e.values(), &[1.0, 0.0]);
    }

    #[test]
    fn estimates_at_rest_point_vanish() {
        let p = counterexample();
        let cfg = SearchConfig { pieces: 4, ..SearchConfig::default() };
        assert!(estimate_vt(&p, [1.5, 0.0], 50.0, &cfg).unwrap().value <= 1e-9);
        assert!(estimate_vlambda(&p, [1.5, 0.0], 0.1, &cfg).unwrap().value <= cfg.tail_tol);
    }

    #[test]
    fn estimate_vt_finds_one_switch_policy() {
        let p = counterexample();
        let e = estimate_vt(&p, [0.0, 0.0], 100.0, &SearchConfig::default()).unwrap();
        assert!(e.value >= 0.5 - 1e-12 && e.value <= 0.5001 + 1e-9, "{e:?}");
        let replay = evaluate_schedule(&p, [0.0, 0.0], &e.witness, Objective::Average { t: 100.0 }, e.step).unwrap();
        assert_eq!(replay, e.value);
    }

    #[test]
    fn smooth_variant_cost_and_invariance() {
        assert_eq!(smooth_cost(1.5), 0.0);
        assert!((smooth_cost(0.95) - 0.5).abs() < 1e-12);
        assert_eq!(smooth_cost(0.5), 1.0);
        assert!((smooth_cost(2.05) - 0.5).abs() < 1e-12);
        let p = smooth_variant();
        let tr = simulate(&p, [0.0, 0.0], &ControlSchedule::constant(1.0), 10.0, 0.01).unwrap();
        let [x, y] = *tr.last_state();
        assert!(x < 4.0 && y <= (2.0 * x).sqrt() + FEASIBILITY_TOL);
        let (ok, bad) = forward_invariance_audit(50, 10.0, 0.01, 3).unwrap();
        assert_eq!((ok, bad), (50, 0));
    }

    #[test]
    fn infeasible_start_is_reported() {
        let p = smooth_variant();
        let r = simulate(&p, [1.0, 3.0], &ControlSchedule::constant(0.0), 1.0, 0.1);
        assert!(matches!(r, Err(Error::Feasibility { time }) if time == 0.0));
    }
}
