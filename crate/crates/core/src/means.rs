//! Cesàro and Abel means of bounded sequences and of bounded functions of
//! continuous time.
//!
//! Sequences are indexed from 1. Continuous-time functions are carried as
//! samples on a uniform grid `s_k = k h`; integrals use the composite
//! trapezoid rule, with linear interpolation inside the last cell when the
//! horizon is not a grid point.

use std::fmt;
use std::sync::Arc;

use crate::error::{domain, Error, Result};
use crate::report::ValueReport;

/// Rule used to extend a [`BoundedSequence`] past its stored values.
#[derive(Clone)]
pub enum SequenceRule {
    /// Repeats the pattern forever: `a_i = pattern[(i - 1) % len]`.
    Periodic(Vec<f64>),
    /// Closed form in the (1-based) index.
    Formula(Arc<dyn Fn(usize) -> f64 + Send + Sync>),
}

impl fmt::Debug for SequenceRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SequenceRule::Periodic(p) => f.debug_tuple("Periodic").field(p).finish(),
            SequenceRule::Formula(_) => f.write_str("Formula(..)"),
        }
    }
}

/// A real sequence with values in `[lo, hi]`.
///
/// Stored values take precedence; indices past them are produced by the
/// optional rule. Produced values are checked against the bound.
#[derive(Debug, Clone)]
pub struct BoundedSequence {
    values: Vec<f64>,
    rule: Option<SequenceRule>,
    lo: f64,
    hi: f64,
}

impl BoundedSequence {
    pub fn from_values(values: Vec<f64>, lo: f64, hi: f64) -> Result<Self> {
        check_bound(lo, hi)?;
        if let Some(v) = values.iter().find(|v| !(lo..=hi).contains(*v)) {
            return domain(format!("value {v} outside [{lo}, {hi}]"));
        }
        Ok(Self { values, rule: None, lo, hi })
    }

    pub fn periodic(pattern: Vec<f64>) -> Result<Self> {
        if pattern.is_empty() {
            return domain("empty periodic pattern");
        }
        let lo = pattern.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = pattern.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self { values: Vec::new(), rule: Some(SequenceRule::Periodic(pattern)), lo, hi })
    }

    pub fn constant(c: f64) -> Self {
        Self { values: Vec::new(), rule: Some(SequenceRule::Periodic(vec![c])), lo: c, hi: c }
    }

    pub fn formula<F>(f: F, lo: f64, hi: f64) -> Result<Self>
    where
        F: Fn(usize) -> f64 + Send + Sync + 'static,
    {
        check_bound(lo, hi)?;
        Ok(Self { values: Vec::new(), rule: Some(SequenceRule::Formula(Arc::new(f))), lo, hi })
    }

    /// `a_i = 1` when `i` lies in a dyadic block `[4^k, 2·4^k)`, else 0.
    ///
    /// Its running averages oscillate between roughly 1/3 and 2/3, so it has
    /// no Cesàro limit.
    pub fn dyadic_blocks() -> Self {
        Self::formula(
            |i| {
                let bits = usize::BITS - 1 - i.leading_zeros();
                if bits % 2 == 0 {
                    1.0
                } else {
                    0.0
                }
            },
            0.0,
            1.0,
        )
        .expect("valid bound")
    }

    pub fn bound(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    /// Number of values available, `None` when the sequence is infinite.
    pub fn available(&self) -> Option<usize> {
        match self.rule {
            Some(_) => None,
            None => Some(self.values.len()),
        }
    }

    /// The `i`-th term (1-based).
    pub fn get(&self, i: usize) -> Result<f64> {
        if i == 0 {
            return domain("sequence indices start at 1");
        }
        let v = if let Some(v) = self.values.get(i - 1) {
            *v
        } else {
            match &self.rule {
                Some(SequenceRule::Periodic(p)) => p[(i - 1) % p.len()],
                Some(SequenceRule::Formula(f)) => f(i),
                None => {
                    return Err(Error::InsufficientData(format!(
                        "index {i} requested, only {} values stored",
                        self.values.len()
                    )))
                }
            }
        };
        if !(self.lo..=self.hi).contains(&v) {
            return domain(format!("term a_{i} = {v} outside [{}, {}]", self.lo, self.hi));
        }
        Ok(v)
    }
}

/// Samples `g(k h)` for `k = 0..=N` of a bounded function of time.
#[derive(Clone)]
pub struct SampledFunction {
    samples: Vec<f64>,
    step: f64,
    lo: f64,
    hi: f64,
    generator: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
}

impl fmt::Debug for SampledFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SampledFunction")
            .field("len", &self.samples.len())
            .field("step", &self.step)
            .field("bound", &(self.lo, self.hi))
            .field("generator", &self.generator.is_some())
            .finish()
    }
}

impl SampledFunction {
    pub fn from_samples(samples: Vec<f64>, step: f64, lo: f64, hi: f64) -> Result<Self> {
        check_bound(lo, hi)?;
        if !(step > 0.0) {
            return domain("step must be positive");
        }
        if samples.is_empty() {
            return domain("at least one sample is required");
        }
        if let Some(v) = samples.iter().find(|v| !(lo..=hi).contains(*v)) {
            return domain(format!("sample {v} outside [{lo}, {hi}]"));
        }
        Ok(Self { samples, step, lo, hi, generator: None })
    }

    /// Samples `g` on `[0, horizon]` and keeps `g` to extend the grid on
    /// demand.
    pub fn from_fn<F>(g: F, step: f64, horizon: f64, lo: f64, hi: f64) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(step > 0.0) || !(horizon >= 0.0) {
            return domain("step must be positive and horizon non-negative");
        }
        let n = (horizon / step).round() as usize;
        let samples = (0..=n).map(|k| g(k as f64 * step)).collect();
        let mut f = Self::from_samples(samples, step, lo, hi)?;
        f.generator = Some(Arc::new(g));
        Ok(f)
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn bound(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn horizon(&self) -> f64 {
        (self.samples.len() - 1) as f64 * self.step
    }

    /// Same function sampled out to at least `horizon`, using the generator.
    fn extended(&self, horizon: f64) -> Result<Self> {
        let g = self.generator.clone().ok_or_else(|| {
            Error::InsufficientData(format!(
                "horizon {} requested, samples cover {} and no generator is attached",
                horizon,
                self.horizon()
            ))
        })?;
        let n = (horizon / self.step).ceil() as usize;
        let mut samples = self.samples.clone();
        for k in samples.len()..=n {
            let v = g(k as f64 * self.step);
            if !(self.lo..=self.hi).contains(&v) {
                return domain(format!("generated value {v} outside bound"));
            }
            samples.push(v);
        }
        Ok(Self { samples, generator: Some(g), ..*self })
    }
}

fn check_bound(lo: f64, hi: f64) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return domain(format!("invalid bound [{lo}, {hi}]"));
    }
    Ok(())
}

/// A value with a guaranteed enclosure `[value - half_width, value + half_width]`
/// for the part that was not computed (a truncated tail).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailBracket {
    pub value: f64,
    pub half_width: f64,
}

impl TailBracket {
    pub fn lower(&self) -> f64 {
        self.value - self.half_width
    }
    pub fn upper(&self) -> f64 {
        self.value + self.half_width
    }
}

/// Running average `(1/n) Σ_{i=1..n} a_i`.
pub fn cesaro_mean(seq: &BoundedSequence, n: usize) -> Result<f64> {
    if n == 0 {
        return domain("cesaro mean needs n >= 1");
    }
    let mut sum = 0.0;
    for i in 1..=n {
        sum += seq.get(i)?;
    }
    Ok(sum / n as f64)
}

/// Smallest `I` with `(1 - λ)^I <= tail_tol / (hi - lo + 1)`.
pub fn abel_truncation_index(lambda: f64, tail_tol: f64, lo: f64, hi: f64) -> usize {
    if lambda >= 1.0 {
        return 1;
    }
    let target = tail_tol / (hi - lo + 1.0);
    let mut i = ((target.ln() / (1.0 - lambda).ln()).ceil().max(1.0)) as usize;
    // guard against rounding in the logarithms
    while i > 1 && (1.0 - lambda).powi(i as i32 - 1) <= target {
        i -= 1;
    }
    while (1.0 - lambda).powi(i as i32) > target {
        i += 1;
    }
    i
}

/// Discounted average `λ Σ_{i>=1} (1-λ)^{i-1} a_i`.
///
/// The series is cut at [`abel_truncation_index`]; the remaining geometric
/// mass is filled with the midpoint of the bound, so the result is within
/// `tail_tol` of the full series.
pub fn abel_mean(seq: &BoundedSequence, lambda: f64, tail_tol: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return domain(format!("lambda = {lambda} outside (0, 1]"));
    }
    if !(tail_tol > 0.0) {
        return domain("tail_tol must be positive");
    }
    if lambda == 1.0 {
        return seq.get(1);
    }
    let (lo, hi) = seq.bound();
    let terms = abel_truncation_index(lambda, tail_tol, lo, hi);
    let mut weight = lambda;
    let mut sum = 0.0;
    for i in 1..=terms {
        sum += weight * seq.get(i)?;
        weight *= 1.0 - lambda;
    }
    let rest = (1.0 - lambda).powi(terms as i32);
    Ok(sum + rest * 0.5 * (lo + hi))
}

/// `∫_0^t g` by the composite trapezoid rule on the sample grid.
pub(crate) fn trapezoid_integral(samples: &[f64], step: f64, t: f64) -> f64 {
    let pos = t / step;
    let full = (pos.floor() as usize).min(samples.len() - 1);
    let mut sum = 0.0;
    for k in 0..full {
        sum += 0.5 * (samples[k] + samples[k + 1]);
    }
    sum *= step;
    let frac = pos - full as f64;
    if frac > 1e-12 && full + 1 < samples.len() {
        let a = samples[full];
        let b = samples[full + 1];
        let end = a + frac * (b - a);
        sum += 0.5 * (a + end) * frac * step;
    }
    sum
}

/// Per-cell weights `(w0, w1)` with
/// `λ ∫_0^h e^{-λu} (a (1 - u/h) + b u/h) du = w0 a + w1 b`.
pub(crate) fn exp_cell_weights(lambda: f64, h: f64) -> (f64, f64) {
    let q = lambda * h;
    let total = -(-q).exp_m1();
    // w1 = (1 - e^{-q}(1 + q)) / q, by its alternating series for small q
    let w1 = if q < 0.1 {
        let mut term = q;
        let mut sum = 0.0;
        for k in 0..12 {
            sum += term / (k as f64 + 2.0);
            term *= -q / (k as f64 + 1.0);
        }
        sum
    } else {
        (total - q * (-q).exp()) / q
    };
    (total - w1, w1)
}

/// `λ ∫_0^t e^{-λ s} ĝ(s) ds` where `ĝ` is the piecewise-linear interpolant
/// of the samples; exact for piecewise-linear `g`.
pub(crate) fn discounted_interpolant(samples: &[f64], step: f64, lambda: f64, t: f64) -> f64 {
    let pos = t / step;
    let full = (pos.floor() as usize).min(samples.len() - 1);
    let (w0, w1) = exp_cell_weights(lambda, step);
    let decay = (-lambda * step).exp();
    let mut w = 1.0;
    let mut sum = 0.0;
    for k in 0..full {
        sum += w * (w0 * samples[k] + w1 * samples[k + 1]);
        w *= decay;
    }
    let frac = pos - full as f64;
    if frac > 1e-12 && full + 1 < samples.len() {
        let a = samples[full];
        let b = a + frac * (samples[full + 1] - a);
        let (v0, v1) = exp_cell_weights(lambda, frac * step);
        sum += (-lambda * full as f64 * step).exp() * (v0 * a + v1 * b);
    }
    sum
}

/// Time average `(1/t) ∫_0^t g(s) ds`.
pub fn time_average(f: &SampledFunction, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return domain(format!("time average needs t > 0, got {t}"));
    }
    if t > f.horizon() * (1.0 + 1e-12) {
        return Err(Error::InsufficientData(format!(
            "t = {t} exceeds sampled horizon {}",
            f.horizon()
        )));
    }
    Ok(trapezoid_integral(&f.samples, f.step, t.min(f.horizon())) / t)
}

/// Discounted average `λ ∫_0^∞ e^{-λ s} g(s) ds`.
///
/// The integral is computed on `[0, S]` where `S` is the sampled horizon
/// (extended through the generator when the tail would be too heavy). The
/// tail mass `e^{-λ S}` is filled with the bound's midpoint and reported as
/// the bracket half-width.
pub fn discounted_average(f: &SampledFunction, lambda: f64, tail_tol: f64) -> Result<TailBracket> {
    if !(lambda > 0.0) {
        return domain(format!("lambda = {lambda} must be positive"));
    }
    if !(tail_tol > 0.0) {
        return domain("tail_tol must be positive");
    }
    let scale = f.lo.abs().max(f.hi.abs()).max(f64::MIN_POSITIVE);
    let needed = (scale / tail_tol).ln().max(0.0) / lambda;
    let extended;
    let f = if f.horizon() < needed {
        extended = f.extended(needed)?;
        &extended
    } else {
        f
    };
    let quad = discounted_interpolant(&f.samples, f.step, lambda, f.horizon());
    let rest = (-lambda * f.horizon()).exp();
    Ok(TailBracket {
        value: quad + rest * 0.5 * (f.lo + f.hi),
        half_width: rest * 0.5 * (f.hi - f.lo),
    })
}

/// Tabulates Cesàro means over `n_grid` and Abel means over `lambda_grid`,
/// and estimates the lower and upper limits of the Cesàro means from the
/// last half of the `n` grid.
pub fn hardy_littlewood_report(
    seq: &BoundedSequence,
    n_grid: &[usize],
    lambda_grid: &[f64],
    tail_tol: f64,
) -> Result<ValueReport> {
    if n_grid.is_empty() || lambda_grid.is_empty() {
        return domain("grids must be nonempty");
    }
    if n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return domain("n grid must be ascending");
    }
    if lambda_grid.windows(2).any(|w| w[0] <= w[1]) {
        return domain("lambda grid must be descending");
    }
    let mut report = ValueReport::new();
    let (lo, hi) = seq.bound();
    let mut cesaro = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let v = cesaro_mean(seq, n)?;
        cesaro.push(v);
        // summation roundoff grows linearly in n
        let slack = n as f64 * f64::EPSILON * lo.abs().max(hi.abs()).max(1.0);
        report.push("cesaro", "V_n", Some(n as f64), v, None, v >= lo - slack && v <= hi + slack);
    }
    for &l in lambda_grid {
        let v = abel_mean(seq, l, tail_tol)?;
        let ok = v >= lo - tail_tol && v <= hi + tail_tol;
        report.push("abel", "V_lambda", Some(l), v, None, ok);
    }
    let (inf, sup) = window_extremes(&cesaro);
    report.info("cesaro", "liminf_estimate", None, inf);
    report.info("cesaro", "limsup_estimate", None, sup);
    Ok(report)
}

/// Min and max over the last half (rounded up) of the values.
pub fn window_extremes(values: &[f64]) -> (f64, f64) {
    let start = values.len() / 2;
    values[start..]
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)))
}
