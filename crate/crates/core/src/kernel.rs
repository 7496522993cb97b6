//! The discount kernel `μ_λ(s) = λ² s e^{-λ s}`.
//!
//! `μ_λ` is a probability density on `[0, ∞)` and mixes the finite-horizon
//! averages into the discounted one: `γ_λ(X) = ∫ γ_s(X) μ_λ(s) ds`. Its mass
//! on an interval has the closed form
//! `M(α, β; λ) = e^{-λα}(1 + λα) - e^{-λβ}(1 + λβ)`.

use crate::error::{domain, Error, Result};
use crate::plays::{payoff_curve, StatePoint, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelMass {
    lambda: f64,
}

impl KernelMass {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return domain(format!("kernel needs lambda > 0, got {lambda}"));
        }
        Ok(Self { lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `λ² s e^{-λ s}`.
    pub fn density(&self, s: f64) -> Result<f64> {
        if !(s >= 0.0) {
            return domain(format!("density needs s >= 0, got {s}"));
        }
        Ok(self.density_unchecked(s))
    }

    fn density_unchecked(&self, s: f64) -> f64 {
        let l = self.lambda;
        l * l * s * (-l * s).exp()
    }

    /// Survival function `M(α, ∞; λ) = e^{-λα}(1 + λα)`.
    pub fn upper_tail(&self, alpha: f64) -> f64 {
        if alpha.is_infinite() {
            return 0.0;
        }
        let x = self.lambda * alpha;
        (-x).exp() * (1.0 + x)
    }

    /// `M(α, β; λ)`; `beta` may be `f64::INFINITY`.
    pub fn mass(&self, alpha: f64, beta: f64) -> Result<f64> {
        if !(alpha >= 0.0) || !(beta >= alpha) {
            return domain(format!("mass needs 0 <= alpha <= beta, got [{alpha}, {beta}]"));
        }
        if alpha == beta {
            return Ok(0.0);
        }
        Ok((self.upper_tail(alpha) - self.upper_tail(beta)).clamp(0.0, 1.0))
    }
}

pub fn mu_density(k: &KernelMass, s: f64) -> Result<f64> {
    k.density(s)
}

pub fn mass(k: &KernelMass, alpha: f64, beta: f64) -> Result<f64> {
    k.mass(alpha, beta)
}

/// `∫_α^β μ_λ` by composite 4-point Gauss–Legendre on `cells` cells.
pub fn mass_by_quadrature(k: &KernelMass, alpha: f64, beta: f64, cells: usize) -> Result<f64> {
    if !(0.0..=beta).contains(&alpha) || !beta.is_finite() || cells == 0 {
        return domain(format!("need 0 <= alpha <= beta < inf and cells >= 1, got [{alpha}, {beta}], {cells}"));
    }
    let h = (beta - alpha) / cells as f64;
    let mut sum = 0.0;
    for i in 0..cells {
        let a = alpha + i as f64 * h;
        for (node, w) in GAUSS4 {
            sum += 0.5 * h * w * k.density_unchecked(a + 0.5 * (node + 1.0) * h);
        }
    }
    Ok(sum)
}

/// Mass value, the bound it is compared with, and the comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Margin {
    pub mass_value: f64,
    pub bound: f64,
    pub pass: bool,
}

/// `M((1-ε)t, t; 1/t)` against `ε / 2e`.
pub fn lemma_i_margin(t: f64, eps: f64) -> Result<Margin> {
    if !(t > 0.0) || !(eps > 0.0 && eps < 1.0) {
        return domain(format!("need t > 0 and 0 < eps < 1, got t = {t}, eps = {eps}"));
    }
    let k = KernelMass::new(1.0 / t)?;
    let mass_value = k.mass((1.0 - eps) * t, t)?;
    let bound = eps / (2.0 * std::f64::consts::E);
    Ok(Margin { mass_value, bound, pass: mass_value >= bound })
}

/// Closed form `(2-ε)e^{-1+ε} - 2e^{-1}` of the lemma (i) mass.
pub fn lemma_i_closed_form(eps: f64) -> f64 {
    (2.0 - eps) * (eps - 1.0).exp() - 2.0 * (-1.0f64).exp()
}

/// `M(εt, (1-ε)t; 1/(t√ε))` against `1 - δ`.
pub fn lemma_ii_margin(t: f64, eps: f64, delta: f64) -> Result<Margin> {
    if !(t > 0.0) || !(eps > 0.0 && eps < 1.0) || !(delta > 0.0 && delta < 1.0) {
        return domain(format!(
            "need t > 0, 0 < eps < 1, 0 < delta < 1, got t = {t}, eps = {eps}, delta = {delta}"
        ));
    }
    let mass_value = if eps >= 0.5 {
        0.0
    } else {
        let k = KernelMass::new(1.0 / (t * eps.sqrt()))?;
        k.mass(eps * t, (1.0 - eps) * t)?
    };
    let bound = 1.0 - delta;
    Ok(Margin { mass_value, bound, pass: mass_value >= bound })
}

/// Closed form `(1+√ε)e^{-√ε} - (1 + 1/√ε - √ε)e^{-1/√ε + √ε}` of the
/// lemma (ii) mass.
pub fn lemma_ii_closed_form(eps: f64) -> f64 {
    let r = eps.sqrt();
    (1.0 + r) * (-r).exp() - (1.0 + 1.0 / r - r) * (-1.0 / r + r).exp()
}

/// The lemma (ii) expression with the opposite sign inside the second
/// factor, `(1 - 1/√ε + √ε)`. It is not the kernel mass (it exceeds it by
/// `2(1/√ε - √ε)e^{-1/√ε + √ε}`); kept to quantify that difference.
pub fn lemma_ii_sign_flipped_form(eps: f64) -> f64 {
    let r = eps.sqrt();
    (1.0 + r) * (-r).exp() - (1.0 - 1.0 / r + r) * (-1.0 / r + r).exp()
}

/// Largest `ε <= eps_max` for which lemma (i) passes, by bisection.
///
/// Assumes the passing set is an interval `(0, ε₀]`. Returns `eps_max`
/// itself when it passes. Empirical; no claim is made about the constant
/// intended in the original statement.
pub fn lemma_i_threshold(eps_max: f64, iterations: usize) -> Result<f64> {
    if lemma_i_margin(1.0, eps_max)?.pass {
        return Ok(eps_max);
    }
    let (mut good, mut bad) = (1e-12, eps_max);
    if !lemma_i_margin(1.0, good)?.pass {
        return domain("lemma (i) fails even for tiny eps");
    }
    for _ in 0..iterations {
        let mid = 0.5 * (good + bad);
        if lemma_i_margin(1.0, mid)?.pass {
            good = mid;
        } else {
            bad = mid;
        }
    }
    Ok(good)
}

// 4-point Gauss-Legendre nodes and weights on [-1, 1].
pub(crate) const GAUSS4: [(f64, f64); 4] = [
    (-0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
    (-0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
];

/// Result of [`convexity_residual`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvexityCheck {
    /// Discounted payoff side.
    pub discounted: f64,
    /// Kernel mixture of running averages side.
    pub mixture: f64,
    pub residual: f64,
    /// Upper bound on the mass discarded beyond `s_max`, times `sup |γ_s|`.
    pub discarded: f64,
}

/// Compares `γ_λ(X)` with `∫_0^∞ γ_s(X) μ_λ(s) ds` on the trajectory's grid.
///
/// Both sides integrate the piecewise-linear interpolant of their integrand
/// (`g` against `λe^{-λs}`, `γ_s` against `μ_λ`) on the trajectory's grid.
/// Both are truncated at `s_max` and completed with the midpoint of their
/// tail enclosures; `tail_tol` bounds the allowed discarded mass.
pub fn convexity_residual<S: StatePoint>(
    x: &Trajectory<S>,
    lambda: f64,
    s_max: f64,
    tail_tol: f64,
) -> Result<ConvexityCheck> {
    let k = KernelMass::new(lambda)?;
    if x.horizon() + 1e-9 < s_max {
        return Err(Error::InsufficientData(format!(
            "trajectory covers {} but s_max = {s_max}",
            x.horizon()
        )));
    }
    let discarded_kernel = k.upper_tail(s_max);
    let discarded_discount = (-lambda * s_max).exp();
    if discarded_kernel > tail_tol {
        return Err(Error::InsufficientData(format!(
            "kernel mass beyond s_max is {discarded_kernel:e} > {tail_tol:e}"
        )));
    }
    let discounted = x.discounted_integral(lambda, s_max) + 0.5 * discarded_discount;

    let curve = payoff_curve(x)?;
    let h = x.step();
    let n = (s_max / h).round() as usize;
    // γ at s = 0 is the right limit, i.e. the first sample
    let mut prev = x.costs()[0];
    let mut sum = 0.0;
    for (i, g) in curve.values.iter().take(n).enumerate() {
        let a = i as f64 * h;
        for (node, w) in GAUSS4 {
            let u = 0.5 * (node + 1.0);
            let interp = prev + u * (g - prev);
            sum += 0.5 * h * w * interp * k.density_unchecked(a + u * h);
        }
        prev = *g;
    }
    let sup_gamma = curve.values.iter().take(n).copied().fold(x.costs()[0], f64::max);
    let mixture = sum + 0.5 * discarded_kernel * sup_gamma;
    Ok(ConvexityCheck {
        discounted,
        mixture,
        residual: (discounted - mixture).abs(),
        discarded: discarded_kernel * sup_gamma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    // Composite Simpson rule: independent of the closed-form mass.
    fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
        let n = n + n % 2;
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn density_examples() {
        let k = KernelMass::new(1.0).unwrap();
        assert_eq!(k.density(0.0).unwrap(), 0.0);
        assert!((k.density(1.0).unwrap() - 1.0 / E).abs() < 1e-15);
        assert!(k.density(-1.0).is_err());
        for l in [0.1, 1.0, 10.0] {
            let k = KernelMass::new(l).unwrap();
            let s_max = 60.0 / l;
            let body = simpson(|s| k.density(s).unwrap(), 0.0, s_max, 200_000);
            assert!((body + k.upper_tail(s_max) - 1.0).abs() < 1e-8, "lambda {l}");
        }
    }

    #[test]
    fn mass_examples() {
        let k = KernelMass::new(1.0).unwrap();
        assert_eq!(k.mass(0.0, f64::INFINITY).unwrap(), 1.0);
        assert!((k.mass(1.0, 2.0).unwrap() - 0.329_753_032_633_046_56).abs() < 1e-15);
        assert_eq!(k.mass(3.0, 3.0).unwrap(), 0.0);
        assert!(k.mass(2.0, 1.0).is_err());
        assert!(KernelMass::new(0.0).is_err());
    }

    #[test]
    fn lemma_i_examples() {
        let m = lemma_i_margin(1.0, 0.1).unwrap();
        assert!((m.mass_value - 0.036_723_471_164_253_56).abs() < 1e-14);
        assert!((m.bound - 0.018_393_972_058_572_117).abs() < 1e-15);
        assert!(m.pass);
        let far = lemma_i_margin(1000.0, 0.1).unwrap();
        assert!((far.mass_value - m.mass_value).abs() < 1e-13);
        let wide = lemma_i_margin(1.0, 0.9).unwrap();
        assert!((wide.mass_value - 0.259_562_277_496_671_05).abs() < 1e-14);
        assert_eq!(wide.pass, wide.mass_value >= 0.9 / (2.0 * E));
    }

    #[test]
    fn lemma_i_threshold_hits_search_cap() {
        // the margin is positive on all of (0, 1), so the cap is returned
        assert_eq!(lemma_i_threshold(0.5, 60).unwrap(), 0.5);
        assert_eq!(lemma_i_threshold(0.999, 60).unwrap(), 0.999);
    }

    #[test]
    fn lemma_ii_examples() {
        let m = lemma_ii_margin(1.0, 0.01, 0.005).unwrap();
        // direct evaluation of M(0.01, 0.99; 10)
        assert!((m.mass_value - 0.994_774_255_805_143_3).abs() < 1e-12);
        assert!((m.mass_value - lemma_ii_closed_form(0.01)).abs() < 1e-14);
        assert!(!m.pass);
        assert!(lemma_ii_margin(1.0, 0.01, 0.01).unwrap().pass);
        assert!((lemma_ii_sign_flipped_form(0.01) - 0.995_767_714_509_855_6).abs() < 1e-12);
        for t in [10.0, 1000.0] {
            let o = lemma_ii_margin(t, 0.01, 0.005).unwrap();
            assert!((o.mass_value - m.mass_value).abs() < 1e-12);
        }
        assert!(lemma_ii_closed_form(1e-6) > lemma_ii_closed_form(1e-4));
        assert!(1.0 - lemma_ii_closed_form(1e-6) < 1e-2);
    }

    #[test]
    fn convexity_constant_cost() {
        let x = Trajectory::sample_cost(|_| 0.35, 0.05, 400.0).unwrap();
        let c = convexity_residual(&x, 0.1, 400.0, 1e-9).unwrap();
        assert!(c.residual <= 1e-9, "{c:?}");
    }

    #[test]
    fn convexity_square_wave() {
        let x = Trajectory::sample_cost(|s| if s.rem_euclid(2.0) < 1.0 { 1.0 } else { 0.0 }, 0.01, 200.0)
            .unwrap();
        let c = convexity_residual(&x, 0.1, 200.0, 1e-6).unwrap();
        assert!(c.residual <= 1e-4, "{c:?}");
        assert!((c.discounted - 1.0 / (1.0 + (-0.1f64).exp())).abs() < 1e-3);
    }

    #[test]
    fn convexity_needs_horizon() {
        let x = Trajectory::sample_cost(|_| 0.5, 0.1, 10.0).unwrap();
        assert!(matches!(convexity_residual(&x, 0.1, 200.0, 1e-6), Err(Error::InsufficientData(_))));
        assert!(matches!(convexity_residual(&x, 0.1, 10.0, 1e-6), Err(Error::InsufficientData(_))));
    }
}
