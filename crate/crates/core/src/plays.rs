//! Sampled plays, concatenation and the payoff functionals
//! `γ_t(X) = (1/t) ∫_0^t g(X(s)) ds` and `γ_λ(X) = λ ∫_0^∞ e^{-λ s} g(X(s)) ds`.
//!
//! A [`Trajectory`] stores states and running costs on a uniform grid. When
//! the running cost is piecewise constant in time and the switch times are
//! known (the simulator locates them as events), the trajectory also carries
//! a [`PiecewiseCost`]; integrals then use it and are exact. Otherwise the
//! composite trapezoid rule on the samples is used.

use std::fmt::Debug;
use std::io::Write;

use crate::error::{domain, Error, Result};
use crate::means::{discounted_interpolant, trapezoid_integral, TailBracket};

/// Tolerance used when comparing a time against the sampling grid.
const GRID_TOL: f64 = 1e-9;

/// A point of the state space.
pub trait StatePoint: Clone + Debug + Send + Sync {
    /// Whether two states are the same point (for splicing plays).
    fn coincides(&self, other: &Self) -> bool;
    /// Coordinates written to trajectory dumps.
    fn coords(&self) -> Vec<f64>;
}

impl StatePoint for () {
    fn coincides(&self, _: &Self) -> bool {
        true
    }
    fn coords(&self) -> Vec<f64> {
        Vec::new()
    }
}

impl StatePoint for usize {
    fn coincides(&self, other: &Self) -> bool {
        self == other
    }
    fn coords(&self) -> Vec<f64> {
        vec![*self as f64]
    }
}

impl<const D: usize> StatePoint for [f64; D] {
    fn coincides(&self, other: &Self) -> bool {
        let d2: f64 = self.iter().zip(other).map(|(a, b)| (a - b) * (a - b)).sum();
        d2.sqrt() <= 1e-9
    }
    fn coords(&self) -> Vec<f64> {
        self.to_vec()
    }
}

impl StatePoint for Vec<f64> {
    fn coincides(&self, other: &Self) -> bool {
        self.len() == other.len()
            && self.iter().zip(other).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() <= 1e-9
    }
    fn coords(&self) -> Vec<f64> {
        self.clone()
    }
}

/// A running cost that is constant between known switch times.
///
/// Segment `i` covers `[starts[i], starts[i + 1])`, the last one ends at
/// `end`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseCost {
    starts: Vec<f64>,
    values: Vec<f64>,
    end: f64,
}

impl PiecewiseCost {
    pub fn new(starts: Vec<f64>, values: Vec<f64>, end: f64) -> Result<Self> {
        if starts.is_empty() || starts.len() != values.len() || starts[0] != 0.0 {
            return domain("piecewise cost needs matching starts/values beginning at 0");
        }
        if starts.windows(2).any(|w| w[0] > w[1]) || *starts.last().unwrap() > end {
            return domain("piecewise cost starts must be nondecreasing and within the horizon");
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return domain("piecewise cost values must lie in [0, 1]");
        }
        Ok(Self { starts, values, end })
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn segments(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.starts.iter().enumerate().map(move |(i, &a)| {
            let b = self.starts.get(i + 1).copied().unwrap_or(self.end);
            (a, b, self.values[i])
        })
    }

    /// `∫_0^t g`.
    pub fn integral(&self, t: f64) -> f64 {
        let mut sum = 0.0;
        for (a, b, v) in self.segments() {
            if a >= t {
                break;
            }
            sum += v * (b.min(t) - a);
        }
        sum
    }

    /// `λ ∫_a^b e^{-λ s} g(s) ds`.
    pub fn discounted(&self, lambda: f64, from: f64, to: f64) -> f64 {
        let mut sum = 0.0;
        for (a, b, v) in self.segments() {
            let lo = a.max(from);
            let hi = b.min(to);
            if hi > lo && v != 0.0 {
                sum += v * ((-lambda * lo).exp() - (-lambda * hi).exp());
            }
        }
        sum
    }

    fn truncated(&self, t: f64) -> Self {
        let keep = self.starts.iter().take_while(|&&a| a < t || a == 0.0).count();
        Self { starts: self.starts[..keep].to_vec(), values: self.values[..keep].to_vec(), end: t }
    }

    fn shifted(&self, by: f64) -> Self {
        Self {
            starts: self.starts.iter().map(|a| a + by).collect(),
            values: self.values.clone(),
            end: self.end + by,
        }
    }
}

/// A play sampled on the grid `s_k = k h`, `k = 0..=N`.
#[derive(Debug, Clone)]
pub struct Trajectory<S: StatePoint = ()> {
    states: Vec<S>,
    costs: Vec<f64>,
    step: f64,
    exact: Option<PiecewiseCost>,
}

impl Trajectory<()> {
    /// A play on a trivial state space, described only by its running cost.
    pub fn from_costs(costs: Vec<f64>, step: f64) -> Result<Self> {
        let states = vec![(); costs.len()];
        Trajectory::new(states, costs, step)
    }

    /// Samples the running cost `g` on `[0, horizon]`.
    pub fn sample_cost<F: Fn(f64) -> f64>(g: F, step: f64, horizon: f64) -> Result<Self> {
        if !(step > 0.0) {
            return domain("step must be positive");
        }
        let n = (horizon / step).round() as usize;
        Self::from_costs((0..=n).map(|k| g(k as f64 * step)).collect(), step)
    }
}

impl<S: StatePoint> Trajectory<S> {
    pub fn new(states: Vec<S>, costs: Vec<f64>, step: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return domain("step must be positive");
        }
        if states.len() != costs.len() {
            return domain("states and costs must have equal length");
        }
        if costs.is_empty() {
            return domain("a trajectory needs at least one sample");
        }
        if let Some(c) = costs.iter().find(|c| !(0.0..=1.0).contains(*c)) {
            return domain(format!("cost {c} outside [0, 1]"));
        }
        Ok(Self { states, costs, step, exact: None })
    }

    /// Attaches an exact piecewise-constant description of the running cost.
    pub fn with_exact_cost(mut self, cost: PiecewiseCost) -> Result<Self> {
        if (cost.end() - self.horizon()).abs() > GRID_TOL * self.step.max(1.0) {
            return domain("exact cost record must cover the sampled horizon");
        }
        self.exact = Some(cost);
        Ok(self)
    }

    pub fn states(&self) -> &[S] {
        &self.states
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn exact_cost(&self) -> Option<&PiecewiseCost> {
        self.exact.as_ref()
    }

    pub fn len(&self) -> usize {
        self.costs.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn horizon(&self) -> f64 {
        (self.costs.len() - 1) as f64 * self.step
    }

    pub fn last_state(&self) -> &S {
        self.states.last().expect("nonempty")
    }

    /// Grid index of time `s`, if `s` is a grid point within the horizon.
    pub fn grid_index(&self, s: f64) -> Result<usize> {
        let pos = s / self.step;
        let k = pos.round();
        if (pos - k).abs() > GRID_TOL * pos.abs().max(1.0) || k < 0.0 {
            return Err(Error::Alignment(format!("time {s} is not on the grid of step {}", self.step)));
        }
        let k = k as usize;
        if k >= self.costs.len() {
            return Err(Error::InsufficientData(format!(
                "time {s} beyond horizon {}",
                self.horizon()
            )));
        }
        Ok(k)
    }

    /// `∫_0^t g(X(s)) ds`.
    pub fn integral(&self, t: f64) -> f64 {
        match &self.exact {
            Some(e) => e.integral(t),
            None => trapezoid_integral(&self.costs, self.step, t),
        }
    }

    /// `λ ∫_0^t e^{-λ s} g(X(s)) ds` (truncated at the horizon).
    pub fn discounted_integral(&self, lambda: f64, t: f64) -> f64 {
        let t = t.min(self.horizon());
        match &self.exact {
            Some(e) => e.discounted(lambda, 0.0, t),
            None => discounted_interpolant(&self.costs, self.step, lambda, t),
        }
    }

    /// `∫_0^{s_k} g` at every grid point, in one pass.
    pub fn cumulative(&self) -> Vec<f64> {
        let n = self.costs.len();
        let mut out = Vec::with_capacity(n);
        out.push(0.0);
        match &self.exact {
            None => {
                let mut acc = 0.0;
                for k in 1..n {
                    acc += 0.5 * self.step * (self.costs[k - 1] + self.costs[k]);
                    out.push(acc);
                }
            }
            Some(e) => {
                let segs: Vec<_> = e.segments().collect();
                let mut acc = 0.0;
                let mut i = 0;
                let mut prev = 0.0;
                for k in 1..n {
                    let s = k as f64 * self.step;
                    while i < segs.len() && segs[i].1 <= s {
                        let (a, b, v) = segs[i];
                        acc += v * (b - a.max(prev));
                        prev = b;
                        i += 1;
                    }
                    let partial = if i < segs.len() { segs[i].2 * (s - prev.max(segs[i].0)) } else { 0.0 };
                    out.push(acc + partial.max(0.0));
                }
            }
        }
        out
    }

    /// Writes `s,state...,cost` rows, one per grid point.
    pub fn write_csv<W: Write>(&self, mut out: W, state_names: &[&str]) -> Result<()> {
        let mut header = vec!["s".to_string()];
        header.extend(state_names.iter().map(|s| s.to_string()));
        header.push("cost".into());
        writeln!(out, "{}", header.join(","))?;
        for (k, (x, c)) in self.states.iter().zip(&self.costs).enumerate() {
            let mut cells = vec![crate::report::fmt_num(k as f64 * self.step)];
            cells.extend(x.coords().into_iter().map(crate::report::fmt_num));
            cells.push(crate::report::fmt_num(*c));
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

/// `X ∘_s Y`: follow `X` up to time `s`, then `Y` restarted at `X(s)`.
pub fn concatenate<S: StatePoint>(x: &Trajectory<S>, s: f64, y: &Trajectory<S>) -> Result<Trajectory<S>> {
    if (x.step - y.step).abs() > 1e-12 * x.step {
        return Err(Error::Alignment(format!(
            "steps differ: {} vs {}",
            x.step, y.step
        )));
    }
    let k = x.grid_index(s)?;
    if !x.states[k].coincides(&y.states[0]) {
        return Err(Error::Concatenation(format!(
            "X({s}) = {:?} but Y(0) = {:?}",
            x.states[k], y.states[0]
        )));
    }
    let mut states = x.states[..=k].to_vec();
    states.extend_from_slice(&y.states[1..]);
    let mut costs = x.costs[..=k].to_vec();
    costs.extend_from_slice(&y.costs[1..]);
    let exact = match (&x.exact, &y.exact) {
        (Some(a), Some(b)) => {
            let s = k as f64 * x.step;
            let mut head = a.truncated(s);
            let tail = b.shifted(s);
            head.starts.extend(tail.starts);
            head.values.extend(tail.values);
            head.end = tail.end;
            Some(head)
        }
        _ => None,
    };
    Ok(Trajectory { states, costs, step: x.step, exact })
}

/// Average payoff `γ_t(X)`.
pub fn gamma_t<S: StatePoint>(x: &Trajectory<S>, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return domain(format!("gamma_t needs t > 0, got {t}"));
    }
    if t > x.horizon() * (1.0 + 1e-12) + 1e-12 {
        return Err(Error::InsufficientData(format!(
            "t = {t} beyond horizon {}",
            x.horizon()
        )));
    }
    Ok(x.integral(t.min(x.horizon())) / t)
}

/// Discounted payoff `γ_λ(X)`, with the unobserved tail bracketed.
///
/// Costs lie in `[0, 1]`, so the tail `λ ∫_H^∞ e^{-λ s} g` lies in
/// `[0, e^{-λ H}]`; the midpoint is added and half the width reported.
pub fn gamma_lambda<S: StatePoint>(x: &Trajectory<S>, lambda: f64, tail_tol: f64) -> Result<TailBracket> {
    if !(lambda > 0.0) {
        return domain(format!("lambda = {lambda} must be positive"));
    }
    let rest = (-lambda * x.horizon()).exp();
    if rest > tail_tol {
        return Err(Error::InsufficientData(format!(
            "discount tail e^(-λH) = {rest:e} exceeds tolerance {tail_tol:e}"
        )));
    }
    let quad = x.discounted_integral(lambda, x.horizon());
    Ok(TailBracket { value: quad + 0.5 * rest, half_width: 0.5 * rest })
}

/// `λ ∫_0^s e^{-λ r} g(X(r)) dr`.
pub fn discounted_prefix<S: StatePoint>(x: &Trajectory<S>, lambda: f64, s: f64) -> f64 {
    x.discounted_integral(lambda, s)
}

/// Average cost over the window `[from, from + len]`.
pub fn window_average<S: StatePoint>(x: &Trajectory<S>, from: f64, len: f64) -> f64 {
    (x.integral(from + len) - x.integral(from)) / len
}

/// Running averages `γ_{s_k}(X)` at the grid points `s_k`, `k >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffCurve {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl PayoffCurve {
    /// Largest increment violation of `|γ_{k+1} - γ_k| <= 2h / s_k`.
    pub fn lipschitz_excess(&self) -> f64 {
        self.times
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(t, v)| (v[1] - v[0]).abs() - 2.0 * (t[1] - t[0]) / t[0])
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn payoff_curve<S: StatePoint>(x: &Trajectory<S>) -> Result<PayoffCurve> {
    if x.len() < 2 {
        return domain("payoff curve needs a positive horizon");
    }
    let cum = x.cumulative();
    let times: Vec<f64> = (1..x.len()).map(|k| k as f64 * x.step).collect();
    let values = times
        .iter()
        .zip(&cum[1..])
        .map(|(s, g)| (g / s).clamp(0.0, 1.0))
        .collect();
    Ok(PayoffCurve { times, values })
}

/// Output of [`good_window_time`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoodWindow {
    /// Last grid time in `(0, t]` where the running average exceeds
    /// `v_ref + ε`, or 0 when there is none.
    pub start: f64,
    /// Crossing time of the threshold, refined by one bisection step
    /// inside the grid cell following `start`.
    pub crossing: f64,
}

/// Finds a time `L` after which every window average of `X` stays below
/// `v_ref + ε`, given that `X` is `ε/2`-optimal for the horizon `t`.
pub fn good_window_time<S: StatePoint>(
    x: &Trajectory<S>,
    t: f64,
    eps: f64,
    v_ref: f64,
) -> Result<GoodWindow> {
    if !(eps > 0.0) {
        return domain("eps must be positive");
    }
    let avg = gamma_t(x, t)?;
    if avg > v_ref + 0.5 * eps + 1e-12 {
        return Err(Error::Contract(format!(
            "gamma_t = {avg} exceeds v_ref + eps/2 = {}",
            v_ref + 0.5 * eps
        )));
    }
    let threshold = v_ref + eps;
    let curve = payoff_curve(x)?;
    let last = curve
        .times
        .iter()
        .zip(&curve.values)
        .enumerate()
        .filter(|(_, (s, v))| **s <= t * (1.0 + 1e-12) && **v > threshold)
        .map(|(i, _)| i)
        .last();
    let Some(i) = last else {
        return Ok(GoodWindow { start: 0.0, crossing: 0.0 });
    };
    let a = curve.times[i];
    let b = curve.times.get(i + 1).copied().unwrap_or(t).min(t);
    let mid = 0.5 * (a + b);
    let crossing = if x.integral(mid) / mid > threshold { 0.5 * (mid + b) } else { 0.5 * (a + mid) };
    Ok(GoodWindow { start: a, crossing })
}

#[cfg(test)]
mod tests {
    use super::*;

    const H: f64 = 0.01;

    fn step_cost(until: f64, total: f64) -> Trajectory {
        Trajectory::sample_cost(|s| if s <= until { 1.0 } else { 0.0 }, H, total).unwrap()
    }

    #[test]
    fn concatenate_empty_prefix_is_y() {
        let x = step_cost(1.0, 2.0);
        let y = step_cost(0.5, 3.0);
        let z = concatenate(&x, 0.0, &y).unwrap();
        assert_eq!(z.costs(), y.costs());
        assert_eq!(z.horizon(), y.horizon());
    }

    #[test]
    fn concatenate_constant_state_path() {
        let x = Trajectory::new(vec![[1.0, 0.0]; 11], vec![0.5; 11], 0.1).unwrap();
        let z = concatenate(&x, 0.1, &x).unwrap();
        assert_eq!(z.len(), 12);
        assert!(z.states().iter().all(|s| s.coincides(&[1.0, 0.0])));
        assert!((z.horizon() - 1.1).abs() < 1e-12);
    }

    #[test]
    fn concatenate_splices_costs() {
        let x = Trajectory::sample_cost(|_| 1.0, H, 1.0).unwrap();
        let y = Trajectory::sample_cost(|_| 0.0, H, 1.0).unwrap();
        let z = concatenate(&x, 1.0, &y).unwrap();
        // one trapezoid cell straddles the splice
        assert!((gamma_t(&z, 2.0).unwrap() - 0.5).abs() <= H / 2.0 / 2.0 + 1e-12);
        let ex = x.clone().with_exact_cost(PiecewiseCost::new(vec![0.0], vec![1.0], 1.0).unwrap()).unwrap();
        let ey = y.clone().with_exact_cost(PiecewiseCost::new(vec![0.0], vec![0.0], 1.0).unwrap()).unwrap();
        let ez = concatenate(&ex, 1.0, &ey).unwrap();
        assert!((gamma_t(&ez, 2.0).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn concatenate_errors() {
        let a = Trajectory::new(vec![[0.0, 0.0]; 3], vec![1.0; 3], 0.5).unwrap();
        let b = Trajectory::new(vec![[1.0, 0.0]; 3], vec![1.0; 3], 0.5).unwrap();
        assert!(matches!(concatenate(&a, 0.5, &b), Err(Error::Concatenation(_))));
        assert!(matches!(concatenate(&a, 0.25, &a), Err(Error::Alignment(_))));
        let c = Trajectory::new(vec![[0.0, 0.0]; 3], vec![1.0; 3], 0.25).unwrap();
        assert!(matches!(concatenate(&a, 0.5, &c), Err(Error::Alignment(_))));
    }

    #[test]
    fn gamma_t_examples() {
        let c = Trajectory::sample_cost(|_| 0.3, H, 5.0).unwrap();
        assert!((gamma_t(&c, 5.0).unwrap() - 0.3).abs() < 1e-12);
        let x = step_cost(1.0, 4.0);
        assert!((gamma_t(&x, 4.0).unwrap() - 0.25).abs() <= H / 8.0 + 1e-12);
        let sq = Trajectory::sample_cost(|s| if s.rem_euclid(2.0) < 1.0 { 1.0 } else { 0.0 }, H, 10.0)
            .unwrap();
        assert!((gamma_t(&sq, 10.0).unwrap() - 0.5).abs() < 1e-9);
        assert!(matches!(gamma_t(&sq, 11.0), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn gamma_lambda_examples() {
        let tol = 1e-6;
        let c = Trajectory::sample_cost(|_| 0.3, 0.05, 200.0).unwrap();
        let r = gamma_lambda(&c, 0.1, tol).unwrap();
        assert!((r.value - 0.3).abs() <= tol);
        let ind = Trajectory::sample_cost(|s| if s <= 7.0 { 1.0 } else { 0.0 }, 1e-3, 200.0).unwrap();
        assert!((gamma_lambda(&ind, 0.1, tol).unwrap().value - 0.503_414_696_208_590_5).abs() < 1e-4);
        let sq = Trajectory::sample_cost(|s| if s.rem_euclid(2.0) < 1.0 { 1.0 } else { 0.0 }, 1e-3, 200.0)
            .unwrap();
        assert!((gamma_lambda(&sq, 0.1, tol).unwrap().value - 0.524_979_187_478_94).abs() < 1e-4);
        assert!(matches!(gamma_lambda(&sq, 0.01, tol), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn payoff_curve_examples() {
        let c = Trajectory::sample_cost(|_| 0.8, H, 3.0).unwrap();
        let pc = payoff_curve(&c).unwrap();
        assert!(pc.values.iter().all(|v| (v - 0.8).abs() < 1e-12));
        let x = Trajectory::from_costs(vec![1.0; 201].into_iter().chain(vec![0.0; 800]).collect(), H)
            .unwrap()
            .with_exact_cost(PiecewiseCost::new(vec![0.0, 2.0], vec![1.0, 0.0], 10.0).unwrap())
            .unwrap();
        let pc = payoff_curve(&x).unwrap();
        for (s, v) in pc.times.iter().zip(&pc.values) {
            assert!((v - s.min(2.0) / s).abs() < 1e-12, "s = {s}");
        }
        assert!(pc.lipschitz_excess() <= 1e-12);
    }

    #[test]
    fn good_window_constant_cost() {
        let x = Trajectory::sample_cost(|_| 0.4, H, 10.0).unwrap();
        let w = good_window_time(&x, 10.0, 0.1, 0.4).unwrap();
        assert_eq!(w.start, 0.0);
        let z = Trajectory::sample_cost(|_| 0.0, H, 10.0).unwrap();
        assert_eq!(good_window_time(&z, 10.0, 0.3, 0.0).unwrap().start, 0.0);
    }

    #[test]
    fn good_window_step_cost() {
        // γ_s = 2/s after s = 2 crosses v_ref + ε = 0.5 at s = 4
        let x = Trajectory::sample_cost(|s| if s <= 2.0 { 1.0 } else { 0.0 }, H, 10.0)
            .unwrap()
            .with_exact_cost(PiecewiseCost::new(vec![0.0, 2.0], vec![1.0, 0.0], 10.0).unwrap())
            .unwrap();
        let w = good_window_time(&x, 10.0, 0.3, 0.2).unwrap();
        assert!((w.start - 4.0).abs() <= H + 1e-9, "L = {}", w.start);
        assert!((w.crossing - 4.0).abs() <= H);
        let mut len = H;
        while w.start + len <= 10.0 + 1e-9 {
            assert!(window_average(&x, w.start, len) <= 1e-12);
            len += H;
        }
    }

    #[test]
    fn good_window_contract() {
        let x = Trajectory::sample_cost(|_| 1.0, H, 10.0).unwrap();
        assert!(matches!(good_window_time(&x, 10.0, 0.2, 0.5), Err(Error::Contract(_))));
    }
}
