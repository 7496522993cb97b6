//! Reduction of a continuous-time problem to a discrete one on pairs
//! `(ω, x)`, where `ω` is the state at an integer time and `x` the cost
//! accumulated over the preceding unit interval.
//!
//! The discrete cost of `(ω, x)` is `x`. A play of length `n` in the reduced
//! graph therefore averages the continuous cost over `[0, n]`.
//!
//! Discrete plays here start at the root's successors: the root carries no
//! cost of its own. [`root_value_n`] and [`root_value_lambda`] take the
//! minimum of the engine values over those successors.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::control::{estimate_vlambda, estimate_vt, simulate, ControlProblem, ControlSchedule, SearchConfig};
use crate::discrete::{value_lambda, value_n_grid, DiscreteProblem};
use crate::error::{domain, Error, Result};
use crate::report::ValueReport;

/// Resolution of the stored unit cost `x`.
pub const COST_PITCH: f64 = 1e-6;

/// Default cap on product states.
pub const DEFAULT_NODE_CAP: usize = 2_000_000;

/// Discretization knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct BridgeConfig {
    /// Number of unit steps expanded from the root.
    pub depth: usize,
    /// Lattice pitch for continuous states.
    pub quant: f64,
    /// Integration step inside one unit.
    pub step: f64,
    pub node_cap: usize,
}

impl Default for BridgeConfig {
    fn default() -> Self {
        Self { depth: 30, quant: 1e-2, step: 1e-2, node_cap: DEFAULT_NODE_CAP }
    }
}

/// `u = 0`, and bursts `u = 1` on `[0, 0.1)` or `[0, 0.07)` followed by
/// `u = 0`. Burst lengths are multiples of the default pitch, so speeds stay
/// on the lattice.
pub fn default_unit_schedules() -> Vec<ControlSchedule> {
    let burst = |b| ControlSchedule::one_switch(1.0, b, 0.0).expect("valid schedule");
    vec![ControlSchedule::constant(0.0), burst(0.1), burst(0.07)]
}

/// The reduced problem and the map back to product states.
#[derive(Debug, Clone)]
pub struct BridgedProblem<const D: usize> {
    pub base: ControlProblem<D>,
    pub x0: [f64; D],
    pub unit_schedules: Vec<ControlSchedule>,
    pub config: BridgeConfig,
    /// `(ω, x)` per discrete state; the sink, if any, is last.
    pub product_states: Vec<([f64; D], f64)>,
    pub discrete: DiscreteProblem,
    pub root: usize,
    /// Cost-1 absorbing state receiving the moves out of the last level.
    pub sink: Option<usize>,
}

type Key<const D: usize> = ([i64; D], i64);

fn lattice<const D: usize>(w: &[f64; D], quant: f64) -> [i64; D] {
    let mut k = [0i64; D];
    for i in 0..D {
        k[i] = (w[i] / quant).round() as i64;
    }
    k
}

fn from_lattice<const D: usize>(k: &[i64; D], quant: f64) -> [f64; D] {
    let mut w = [0.0; D];
    for i in 0..D {
        w[i] = k[i] as f64 * quant;
    }
    w
}

/// Expands the reduced graph breadth-first from `(x0, 0)`.
///
/// Each unit schedule is simulated over one time unit from every reached
/// lattice state; endpoints are snapped to the lattice of pitch `quant` and
/// unit costs to [`COST_PITCH`]. States first met at level `depth` lead to a
/// cost-1 sink, so the reduced values only err upwards beyond that level.
pub fn discretize<const D: usize>(
    p: &ControlProblem<D>,
    x0: [f64; D],
    unit_schedules: &[ControlSchedule],
    config: &BridgeConfig,
) -> Result<BridgedProblem<D>> {
    if config.depth == 0 {
        return domain("discretize needs depth >= 1");
    }
    if !(config.quant > 0.0) || !(config.step > 0.0) {
        return domain("discretize needs quant > 0 and step > 0");
    }
    if unit_schedules.is_empty() {
        return domain("discretize needs at least one unit schedule");
    }
    let quant = config.quant;
    let root_key: Key<D> = (lattice(&x0, quant), 0);
    let mut keys: Vec<Key<D>> = vec![root_key];
    let mut index: HashMap<Key<D>, usize> = HashMap::from([(root_key, 0)]);
    let mut edges: Vec<Vec<usize>> = vec![Vec::new()];
    let mut transitions: HashMap<[i64; D], Vec<([i64; D], i64)>> = HashMap::new();
    let mut level = vec![0usize];
    let mut frontier_hits = Vec::new();

    for depth in 0..config.depth {
        // unit moves from every new lattice state of this level, in parallel
        let mut todo: Vec<[i64; D]> = level.iter().map(|&i| keys[i].0).filter(|w| !transitions.contains_key(w)).collect();
        todo.sort_unstable();
        todo.dedup();
        let computed: Vec<Result<Vec<([i64; D], i64)>>> = todo
            .par_iter()
            .map(|w| {
                let start = from_lattice(w, quant);
                let mut moves = Vec::new();
                for s in unit_schedules {
                    match simulate(p, start, s, 1.0, config.step) {
                        Ok(tr) => {
                            let x = tr.integral(1.0).clamp(0.0, 1.0);
                            moves.push((lattice(tr.last_state(), quant), (x / COST_PITCH).round() as i64));
                        }
                        Err(Error::Feasibility { .. }) => {}
                        Err(e) => return Err(e),
                    }
                }
                moves.sort_unstable();
                moves.dedup();
                Ok(moves)
            })
            .collect();
        for (w, m) in todo.into_iter().zip(computed) {
            let m = m?;
            if m.is_empty() {
                return domain(format!("no unit schedule is feasible from {:?}", from_lattice(&w, quant)));
            }
            transitions.insert(w, m);
        }
        let mut next = Vec::new();
        for &i in &level {
            let moves = &transitions[&keys[i].0];
            let mut succ = Vec::with_capacity(moves.len());
            for &key in moves {
                let j = *index.entry(key).or_insert_with(|| {
                    keys.push(key);
                    edges.push(Vec::new());
                    next.push(keys.len() - 1);
                    keys.len() - 1
                });
                succ.push(j);
            }
            edges[i] = succ;
            if keys.len() > config.node_cap {
                return Err(Error::Capacity { cap: config.node_cap, frontier: next.len() });
            }
        }
        if depth + 1 == config.depth {
            frontier_hits = next.clone();
        }
        level = next;
    }

    let mut sink = None;
    if !frontier_hits.is_empty() {
        let s = keys.len();
        for &i in &frontier_hits {
            edges[i] = vec![s];
        }
        edges.push(vec![s]);
        sink = Some(s);
    }
    let mut product_states: Vec<([f64; D], f64)> =
        keys.iter().map(|(w, x)| (from_lattice(w, quant), *x as f64 * COST_PITCH)).collect();
    let mut nodes: Vec<(u64, f64, Vec<u64>)> = product_states
        .iter()
        .zip(&edges)
        .enumerate()
        .map(|(i, ((_, x), e))| (i as u64, x.clamp(0.0, 1.0), e.iter().map(|&j| j as u64).collect()))
        .collect();
    if let Some(s) = sink {
        product_states.push(([f64::NAN; D], 1.0));
        nodes.push((s as u64, 1.0, vec![s as u64]));
    }
    let discrete = DiscreteProblem::new(nodes)?;
    Ok(BridgedProblem {
        base: p.clone(),
        x0,
        unit_schedules: unit_schedules.to_vec(),
        config: config.clone(),
        product_states,
        discrete,
        root: 0,
        sink,
    })
}

/// Reduced `v_n` at the root, for every `n` of the grid.
pub fn root_value_n<const D: usize>(bp: &BridgedProblem<D>, n_grid: &[usize]) -> Result<Vec<f64>> {
    let succ = bp.discrete.successors(bp.root);
    Ok(value_n_grid(&bp.discrete, n_grid)?
        .into_iter()
        .map(|t| succ.iter().map(|&j| t.values[j]).fold(f64::INFINITY, f64::min))
        .collect())
}

/// Reduced `v_λ` at the root.
pub fn root_value_lambda<const D: usize>(bp: &BridgedProblem<D>, lambda: f64) -> Result<f64> {
    let t = value_lambda(&bp.discrete, lambda, 1e-12)?;
    let succ = bp.discrete.successors(bp.root);
    Ok(succ.iter().map(|&j| t.values[j]).fold(f64::INFINITY, f64::min))
}

/// Result of [`kernel_gap`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelGap {
    pub e_value: f64,
    /// `e^λ - 1`.
    pub bound: f64,
    pub pass: bool,
}

/// Integer horizon beyond which both kernels carry mass below `e^{-30}`.
pub fn default_s_max(lambda: f64) -> f64 {
    (30.0 / lambda).ceil()
}

/// Positive and negative parts of `λ ∫_0^K ((1-λ)^⌊t⌋ - e^{-λt}) dt`, with
/// `K = ceil(s_max)`, integrated exactly on each unit interval.
fn gap_parts(lambda: f64, s_max: f64) -> Result<(f64, f64, f64)> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return domain(format!("lambda = {lambda} must lie in (0, 1)"));
    }
    if !(s_max > 0.0 && s_max.is_finite()) {
        return domain("s_max must be positive and finite");
    }
    let k_max = s_max.ceil() as usize;
    let rate = -(-lambda).ln_1p(); // -ln(1 - λ) >= λ
    let (mut pos, mut neg) = (0.0, 0.0);
    for k in 0..k_max {
        let kf = k as f64;
        let q = (-rate * kf).exp();
        // (1-λ)^k = e^{-λt} at t = k·rate/λ >= k; below it the integrand is negative
        let c = (kf * rate / lambda).clamp(kf, kf + 1.0);
        let ea = (-lambda * kf).exp();
        let ec = (-lambda * c).exp();
        let eb = (-lambda * (kf + 1.0)).exp();
        pos += q * (kf + 1.0 - c) - (ec - eb) / lambda;
        neg += (ea - ec) / lambda - q * (c - kf);
    }
    let tail = (-rate * k_max as f64).exp() + (-lambda * k_max as f64).exp();
    Ok((lambda * pos, lambda * neg, tail))
}

/// `E(λ) = λ ∫ [(1-λ)^⌊t⌋ - e^{-λt}]_+ dt` against its bound `e^λ - 1`.
pub fn kernel_gap(lambda: f64, s_max: f64) -> Result<KernelGap> {
    let (pos, _, _) = gap_parts(lambda, s_max)?;
    let bound = lambda.exp_m1();
    Ok(KernelGap { e_value: pos, bound, pass: pos <= bound })
}

/// `λ ∫ |(1-λ)^⌊t⌋ - e^{-λt}| dt`; equals `2 E(λ)` because both kernels
/// have unit mass. The part beyond `s_max` is bounded by both tails and
/// included as an upper estimate.
pub fn full_gap(lambda: f64, s_max: f64) -> Result<f64> {
    let (pos, neg, tail) = gap_parts(lambda, s_max)?;
    Ok(pos + neg + tail)
}

/// Slack terms added to the reduction error bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BridgeSlack {
    /// Finite schedule family in the continuous search and in the unit moves.
    pub search: f64,
    /// Lattice snapping of states and unit costs.
    pub quantization: f64,
}

impl Default for BridgeSlack {
    fn default() -> Self {
        Self { search: 0.02, quantization: 0.02 }
    }
}

/// Compares `V_t` with the reduced `v_⌊t⌋` against `2/⌊t⌋` plus slack.
pub fn horizon_error_audit<const D: usize>(
    bp: &BridgedProblem<D>,
    t_grid: &[f64],
    search: &SearchConfig,
    slack: &BridgeSlack,
) -> Result<ValueReport> {
    let ns: Vec<usize> = t_grid.iter().map(|t| t.floor() as usize).collect();
    if let Some(t) = t_grid.iter().zip(&ns).find(|(_, n)| **n == 0 || **n > bp.config.depth) {
        return domain(format!("t = {} must satisfy 1 <= t < depth + 1 = {}", t.0, bp.config.depth + 1));
    }
    let discrete = root_value_n(bp, &ns)?;
    let mut report = ValueReport::new();
    report.meta("slack_search", slack.search).meta("slack_quantization", slack.quantization);
    for ((&t, &n), v) in t_grid.iter().zip(&ns).zip(discrete) {
        let e = estimate_vt(&bp.base, bp.x0, t, search)?;
        let bound = 2.0 / n as f64 + slack.search + slack.quantization;
        report.info("horizon_error", "V_t estimate", Some(t), e.value);
        report.info("horizon_error", "v_floor(t)", Some(t), v);
        report.check_le("horizon_error", "|difference|", Some(t), (e.value - v).abs(), bound);
    }
    Ok(report)
}

/// Compares `V_λ` with the reduced `v_λ` against the full kernel gap plus
/// slack and the weight `(1-λ)^depth` of the truncated levels.
pub fn discount_error_audit<const D: usize>(
    bp: &BridgedProblem<D>,
    lambda_grid: &[f64],
    search: &SearchConfig,
    slack: &BridgeSlack,
) -> Result<ValueReport> {
    let mut report = ValueReport::new();
    report.meta("slack_search", slack.search).meta("slack_quantization", slack.quantization);
    for &lambda in lambda_grid {
        let e = estimate_vlambda(&bp.base, bp.x0, lambda, search)?;
        let v = root_value_lambda(bp, lambda)?;
        let truncation = if bp.sink.is_some() { (1.0 - lambda).powi(bp.config.depth as i32) } else { 0.0 };
        let bound = full_gap(lambda, default_s_max(lambda))? + slack.search + slack.quantization + truncation;
        report.info("discount_error", "V_lambda estimate", Some(lambda), e.value);
        report.info("discount_error", "v_lambda", Some(lambda), v);
        report.check_le("discount_error", "|difference|", Some(lambda), (e.value - v).abs(), bound);
    }
    Ok(report)
}
