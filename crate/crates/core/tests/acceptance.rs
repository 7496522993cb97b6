//! Acceptance run: one line per criterion, non-zero exit if any fails.
//!
//! Oracles here are independent of the library code they check: Simpson
//! and midpoint quadrature, exhaustive enumeration of plays and of
//! stationary policies.

use std::time::Instant;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tauberian::bridge::{
    default_s_max, default_unit_schedules, discount_error_audit, discretize, full_gap, horizon_error_audit, kernel_gap,
    BridgeConfig, BridgeSlack,
};
use tauberian::control::{
    analytic_v, analytic_w, counterexample, estimate_vlambda, estimate_vt, lower_bound_audit, SearchConfig,
};
use tauberian::discrete::{fixed_point_residual, min_mean_cycle_all, value_lambda, value_n, DiscreteProblem};
use tauberian::kernel::{convexity_residual, lemma_i_margin, lemma_ii_margin, mass, KernelMass};
use tauberian::plays::Trajectory;

struct Outcome {
    pass: bool,
    detail: String,
}

fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    s * h / 3.0
}

fn criterion_1(values: &mut (Vec<f64>, Vec<f64>)) -> Outcome {
    let clock = Instant::now();
    let p = counterexample();
    let cfg = SearchConfig::default();
    let vt: Vec<f64> = [100.0, 1000.0, 10_000.0].iter().map(|&t| estimate_vt(&p, [0.0, 0.0], t, &cfg).unwrap().value).collect();
    let vl: Vec<f64> = [0.1, 0.01, 0.001].iter().map(|&l| estimate_vlambda(&p, [0.0, 0.0], l, &cfg).unwrap().value).collect();
    let secs = clock.elapsed().as_secs_f64();
    let pass = vt.iter().all(|v| (0.5..=0.55).contains(v))
        && vt.windows(2).all(|w| w[1] < w[0])
        && vl.iter().all(|v| (0.75..=0.80).contains(v))
        && vl.windows(2).all(|w| w[1] < w[0])
        && secs <= 120.0;
    *values = (vt.clone(), vl.clone());
    Outcome { pass, detail: format!("V_t = {vt:?}, V_lambda = {vl:?}, {secs:.1} s") }
}

fn criterion_2() -> Outcome {
    let h = 0.01;
    let r = lower_bound_audit(200, 100.0, 0.01, 7, h, 10.0 * h).unwrap();
    let violations = r.rows.iter().find(|row| row.label == "violations").unwrap().value;
    let min_t = r.rows.iter().find(|row| row.label == "min gamma_t").unwrap().value;
    let min_l = r.rows.iter().find(|row| row.label == "min gamma_lambda").unwrap().value;
    Outcome {
        pass: r.all_pass() && violations == 0.0,
        detail: format!("{violations} violations; min gamma_t = {min_t:.6}, min gamma_lambda = {min_l:.6}"),
    }
}

fn criterion_3() -> Outcome {
    let expected = [
        ([0.0, 0.0], 0.5, 0.75),
        ([0.5, 0.0], 1.0 / 3.0, 0.615099),
        ([1.5, 0.0], 0.0, 0.0),
        ([3.0, 0.0], 1.0, 1.0),
        ([1.0, 0.5], 1.0, 1.0),
    ];
    let p = counterexample();
    let cfg = SearchConfig::default();
    let mut pass = true;
    let mut worst: f64 = f64::NEG_INFINITY;
    for (pt, v, w) in expected {
        let (av, aw) = (analytic_v(pt[0], pt[1]), analytic_w(pt[0], pt[1]));
        pass &= av == v && (aw - w).abs() <= 1e-6;
        let et = estimate_vt(&p, pt, 10_000.0, &cfg).unwrap().value;
        let el = estimate_vlambda(&p, pt, 0.001, &cfg).unwrap().value;
        worst = worst.max(et - av).max(el - aw);
    }
    pass &= worst <= 0.07;
    Outcome { pass, detail: format!("tables exact; largest estimator excess {worst:.3e}") }
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut mass_err: f64 = 0.0;
    for _ in 0..100 {
        let lambda = 10f64.powf(rng.gen_range(-2.0..0.3));
        let alpha = rng.gen_range(0.0..5.0) / lambda;
        let beta = alpha + rng.gen_range(0.0..5.0) / lambda;
        let k = KernelMass::new(lambda).unwrap();
        let quad = simpson(|s| lambda * lambda * s * (-lambda * s).exp(), alpha, beta, 20_000);
        mass_err = mass_err.max((mass(&k, alpha, beta).unwrap() - quad).abs());
    }
    let eps_grid: Vec<f64> = (1..=50).map(|i| i as f64 / 100.0).collect();
    let lemma_i = eps_grid.iter().all(|&e| [1.0, 10.0, 1000.0].iter().all(|&t| lemma_i_margin(t, e).unwrap().pass));
    let mut drift: f64 = 0.0;
    for eps in [0.3, 0.1, 0.01, 0.001] {
        let base = lemma_ii_margin(1.0, eps, 0.01).unwrap().mass_value;
        for t in [0.01, 3.0, 100.0, 1e4] {
            drift = drift.max((lemma_ii_margin(t, eps, 0.01).unwrap().mass_value - base).abs());
        }
    }
    // 20 random 0/1 step costs, switch times off the grid
    let lambda = 0.5;
    let s_max = 60.0;
    let mut coarse: f64 = 0.0;
    let mut halving = true;
    for _ in 0..20 {
        let mut starts: Vec<f64> = (0..rng.gen_range(1..10)).map(|_| rng.gen_range(0.0..s_max)).collect();
        starts.push(0.0);
        starts.sort_by(f64::total_cmp);
        let vals: Vec<f64> = starts.iter().map(|_| rng.gen_range(0..=1) as f64).collect();
        let g = |s: f64| vals[starts.partition_point(|a| *a <= s) - 1];
        let r = |h: f64| {
            let tr = Trajectory::sample_cost(g, h, s_max).unwrap();
            convexity_residual(&tr, lambda, s_max, 1e-9).unwrap().residual
        };
        let (a, b) = (r(0.01), r(0.005));
        coarse = coarse.max(a);
        halving &= b <= (a / 2.0).max(1e-9);
    }
    Outcome {
        pass: mass_err <= 1e-10 && lemma_i && drift <= 1e-12 && coarse <= 1e-3 && halving,
        detail: format!(
            "mass err {mass_err:.2e}; lemma (i) on eps grid {lemma_i}; lemma (ii) drift {drift:.2e}; convexity residual {coarse:.2e}, halves {halving}"
        ),
    }
}

/// Exact `v_λ` by enumerating every stationary policy and following the
/// lasso it induces until the discount weight drops below 1e-13.
fn brute_force_lambda(p: &DiscreteProblem, lambda: f64) -> Vec<f64> {
    let n = p.len();
    let depth = ((1e-13f64).ln() / (1.0 - lambda).ln()).ceil() as usize;
    let mut best = vec![f64::INFINITY; n];
    let mut choice = vec![0usize; n];
    loop {
        for z in 0..n {
            let (mut x, mut w, mut s) = (z, 1.0, 0.0);
            for _ in 0..depth {
                s += lambda * w * p.costs()[x];
                w *= 1.0 - lambda;
                x = p.successors(x)[choice[x]];
            }
            best[z] = best[z].min(s);
        }
        let mut i = 0;
        while i < n {
            choice[i] += 1;
            if choice[i] < p.successors(i).len() {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
        if i == n {
            return best;
        }
    }
}

/// Exact `v_n` by enumerating every play of length `n`.
fn brute_force_n(p: &DiscreteProblem, z: usize, n: usize) -> f64 {
    fn go(p: &DiscreteProblem, z: usize, left: usize) -> f64 {
        let c = p.costs()[z];
        if left == 1 {
            return c;
        }
        c + p.successors(z).iter().map(|&y| go(p, y, left - 1)).fold(f64::INFINITY, f64::min)
    }
    go(p, z, n) / n as f64
}

/// Least mean over all simple cycles reachable from each state, by
/// depth-first enumeration.
fn brute_force_mmc(p: &DiscreteProblem) -> Vec<f64> {
    let n = p.len();
    let mut per_start = vec![f64::INFINITY; n];
    // cycles are enumerated once, rooted at their least state
    fn dfs(p: &DiscreteProblem, root: usize, u: usize, on: &mut Vec<bool>, sum: f64, len: usize, out: &mut [f64]) {
        for &w in p.successors(u) {
            if w == root {
                let m = (sum + p.costs()[u]) / (len + 1) as f64;
                out[root] = out[root].min(m);
            } else if w > root && !on[w] {
                on[w] = true;
                dfs(p, root, w, on, sum + p.costs()[u], len + 1, out);
                on[w] = false;
            }
        }
    }
    let mut through = vec![f64::INFINITY; n];
    for root in 0..n {
        let mut on = vec![false; n];
        on[root] = true;
        let mut out = vec![f64::INFINITY; n];
        dfs(p, root, root, &mut on, 0.0, 0, &mut out);
        through[root] = out[root];
    }
    // a cycle is reachable exactly when its least state is
    for z in 0..n {
        let mut seen = vec![false; n];
        let mut stack = vec![z];
        seen[z] = true;
        while let Some(u) = stack.pop() {
            per_start[z] = per_start[z].min(through[u]);
            for &w in p.successors(u) {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
    }
    per_start
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 10_000usize;
    let mut gap_ratio: f64 = 0.0;
    let mut abel_gap: f64 = 0.0;
    let mut residual: f64 = 0.0;
    for _ in 0..30 {
        let states = rng.gen_range(2..=50usize);
        let p = DiscreteProblem::random(states, 3, rng.gen()).unwrap();
        let mmc = min_mean_cycle_all(&p);
        let vn = value_n(&p, n).unwrap();
        let vl = value_lambda(&p, 1.0 / n as f64, 1e-12).unwrap();
        gap_ratio = gap_ratio.max(vn.sup_distance(&mmc) / (2.0 * states as f64 / n as f64));
        abel_gap = abel_gap.max(vl.sup_distance(&vn.values));
        residual = residual.max(fixed_point_residual(&p, &vl.values, 1.0 / n as f64));
    }
    let mut oracle: f64 = 0.0;
    for k in 0..10 {
        let p = DiscreteProblem::random(10, 3, 100 + k).unwrap();
        let bf = brute_force_lambda(&p, 0.5);
        let v = value_lambda(&p, 0.5, 1e-12).unwrap();
        oracle = oracle.max(v.sup_distance(&bf));
        for m in [1, 4, 8] {
            let t = value_n(&p, m).unwrap();
            for z in 0..p.len() {
                oracle = oracle.max((t.values[z] - brute_force_n(&p, z, m)).abs());
            }
        }
        oracle = oracle.max(
            min_mean_cycle_all(&p).iter().zip(brute_force_mmc(&p)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max),
        );
    }
    Outcome {
        pass: gap_ratio <= 1.0 && abel_gap <= 0.02 && residual <= 1e-8 && oracle <= 1e-6,
        detail: format!(
            "sup|v_n - mmc| at {gap_ratio:.3} of 2N/n; sup|v_1/n - v_n| = {abel_gap:.2e}; residual {residual:.1e}; oracle {oracle:.1e}"
        ),
    }
}

/// Midpoint-rule value of the positive and absolute kernel gaps.
fn gap_by_quadrature(lambda: f64) -> (f64, f64) {
    let k_max = default_s_max(lambda) as usize;
    let m = if lambda < 0.005 { 200 } else { 2000 };
    let (mut pos, mut abs) = (0.0, 0.0);
    for k in 0..k_max {
        let q = (1.0 - lambda).powi(k as i32);
        for j in 0..m {
            let t = k as f64 + (j as f64 + 0.5) / m as f64;
            let d = q - (-lambda * t).exp();
            pos += d.max(0.0);
            abs += d.abs();
        }
    }
    (lambda * pos / m as f64, lambda * abs / m as f64)
}

fn criterion_6() -> Outcome {
    let clock = Instant::now();
    let grid = [0.5, 0.1, 0.01, 0.001];
    let mut pass = true;
    let mut prev = f64::INFINITY;
    let mut worst_identity: f64 = 0.0;
    let mut worst_oracle: f64 = 0.0;
    for l in grid {
        let g = kernel_gap(l, default_s_max(l)).unwrap();
        pass &= g.pass && g.e_value < prev;
        prev = g.e_value;
        worst_identity = worst_identity.max((full_gap(l, default_s_max(l)).unwrap() - 2.0 * g.e_value).abs());
        let (pos, _) = gap_by_quadrature(l);
        worst_oracle = worst_oracle.max((pos - g.e_value).abs() / g.e_value);
    }
    pass &= worst_identity <= 1e-9 && worst_oracle <= 1e-4;
    let config = BridgeConfig::default();
    let bp = discretize(&counterexample(), [0.0, 0.0], &default_unit_schedules(), &config).unwrap();
    let search = SearchConfig::default();
    let slack = BridgeSlack::default();
    let h = horizon_error_audit(&bp, &[5.0, 10.0, 20.0, 30.0], &search, &slack).unwrap();
    let d = discount_error_audit(&bp, &[0.5, 0.2, 0.1], &search, &slack).unwrap();
    let secs = clock.elapsed().as_secs_f64();
    pass &= h.all_pass() && d.all_pass() && bp.discrete.len() <= config.node_cap && secs <= 300.0;
    let worst_h = h.rows_in("horizon_error").filter(|r| r.bound.is_some()).map(|r| r.value / r.bound.unwrap()).fold(0.0, f64::max);
    let worst_d = d.rows_in("discount_error").filter(|r| r.bound.is_some()).map(|r| r.value / r.bound.unwrap()).fold(0.0, f64::max);
    Outcome {
        pass,
        detail: format!(
            "E decreasing and below e^l - 1; |full - 2E| {worst_identity:.1e}; quadrature rel err {worst_oracle:.1e}; {} reduced states; audits at {worst_h:.2} / {worst_d:.2} of bound; {secs:.1} s",
            bp.discrete.len()
        ),
    }
}

fn criterion_7(origin: &(Vec<f64>, Vec<f64>)) -> Outcome {
    let p = counterexample();
    let cfg = SearchConfig::default();
    let moving = estimate_vt(&p, [1.0, 0.01], 1000.0, &cfg).unwrap().value;
    let resting = estimate_vt(&p, [1.0, 0.0], 1000.0, &cfg).unwrap().value;
    let mismatch = origin.1.last().unwrap() - origin.0.last().unwrap();
    Outcome {
        pass: moving >= 0.9 - 1e-9 && resting <= 1e-9 && mismatch >= 0.2,
        detail: format!("V_t(1, 0.01) = {moving:.6}, V_t(1, 0) = {resting:.1e}; V_lambda - V_t at the origin = {mismatch:.4}"),
    }
}

fn main() {
    let mut origin = (Vec::new(), Vec::new());
    let mut results = Vec::new();
    results.push(("counterexample limits", criterion_1(&mut origin)));
    results.push(("lower-bound audit", criterion_2()));
    results.push(("analytic tables", criterion_3()));
    results.push(("kernel identities", criterion_4()));
    results.push(("discrete convergence", criterion_5()));
    results.push(("bridge bounds", criterion_6()));
    results.push(("mismatch and non-uniformity", criterion_7(&origin)));
    let mut failed = 0;
    for (i, (name, o)) in results.iter().enumerate() {
        println!("criterion {} {} {name}: {}", i + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
