//! Batch experiments behind the `tauberian run <name>` command.
//!
//! Each experiment produces a [`ValueReport`] written to `<out>/<name>.csv`.
//! Row order follows the input grids, so equal flags give equal bytes.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bridge::{
    default_s_max, default_unit_schedules, discount_error_audit, discretize, full_gap, horizon_error_audit, kernel_gap,
    root_value_n, BridgeConfig, BridgeSlack,
};
use crate::control::{
    analytic_v, analytic_w, counterexample, estimate_vlambda, estimate_vt, forward_invariance_audit,
    lower_bound_audit, monotonicity_probe, smooth_cost, smooth_variant, ControlSchedule, SearchConfig,
};
use crate::discrete::{
    fixed_point_residual, min_mean_cycle_all, monotonicity_audit, tauberian_gap, value_lambda, value_n, DiscreteProblem,
};
use crate::error::{domain, Error, Result};
use crate::kernel::{
    convexity_residual, lemma_i_closed_form, lemma_i_margin, lemma_ii_closed_form, lemma_ii_margin, mass,
    mass_by_quadrature, KernelMass,
};
use crate::means::{hardy_littlewood_report, BoundedSequence};
use crate::plays::Trajectory;
use crate::report::{ValueReport, ARTIFACT_VERSION};

/// Experiments known to the runner.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Means,
    Kernel,
    Counterexample,
    Smooth,
    Discrete,
    Bridge,
    All,
}

impl Experiment {
    pub const NAMES: [&'static str; 7] = ["means", "kernel", "counterexample", "smooth", "discrete", "bridge", "all"];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Means => "means",
            Experiment::Kernel => "kernel",
            Experiment::Counterexample => "counterexample",
            Experiment::Smooth => "smooth",
            Experiment::Discrete => "discrete",
            Experiment::Bridge => "bridge",
            Experiment::All => "all",
        }
    }

    fn members() -> [Experiment; 6] {
        use Experiment::*;
        [Means, Kernel, Counterexample, Smooth, Discrete, Bridge]
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        use Experiment::*;
        Ok(match s {
            "means" => Means,
            "kernel" => Kernel,
            "counterexample" => Counterexample,
            "smooth" => Smooth,
            "discrete" => Discrete,
            "bridge" => Bridge,
            "all" => All,
            other => return domain(format!("unknown experiment {other:?}; expected one of {}", Self::NAMES.join(", "))),
        })
    }
}

/// Sequences available to the `means` experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// `1, 0, 1, 0, ...`
    SquareWave,
    /// 1 on dyadic blocks `[2^k, 2^{k+1})` with `k` even, else 0.
    Dyadic,
    /// Constant `0.3`.
    Constant,
}

impl FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "square-wave" => Preset::SquareWave,
            "dyadic" => Preset::Dyadic,
            "constant" => Preset::Constant,
            other => return domain(format!("unknown preset {other:?}; expected square-wave, dyadic or constant")),
        })
    }
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::SquareWave => "square-wave",
            Preset::Dyadic => "dyadic",
            Preset::Constant => "constant",
        }
    }
}

/// Parameters of one run. Unset grids fall back to per-experiment defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub name: Experiment,
    pub t_grid: Option<Vec<f64>>,
    pub lambda_grid: Option<Vec<f64>>,
    pub n_grid: Option<Vec<usize>>,
    pub seed: u64,
    pub out: PathBuf,
    /// Integrator step.
    pub step: f64,
    pub graph: Option<PathBuf>,
    pub preset: Option<Preset>,
}

impl ExperimentSpec {
    pub fn new(name: Experiment, out: impl Into<PathBuf>) -> Self {
        Self {
            name,
            t_grid: None,
            lambda_grid: None,
            n_grid: None,
            seed: 7,
            out: out.into(),
            step: 1e-2,
            graph: None,
            preset: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(g) = &self.t_grid {
            if g.is_empty() || g.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
                return domain("t grid must be nonempty with positive finite entries");
            }
        }
        if let Some(g) = &self.lambda_grid {
            if g.is_empty() || g.iter().any(|l| !(*l > 0.0 && *l < 1.0)) {
                return domain("lambda grid must be nonempty with entries in (0, 1)");
            }
        }
        if let Some(g) = &self.n_grid {
            if g.is_empty() || g.iter().any(|n| *n < 2) {
                return domain("n grid must be nonempty with entries >= 2");
            }
        }
        if !(self.step > 0.0 && self.step <= 0.1) {
            return domain("step must lie in (0, 0.1]");
        }
        Ok(())
    }

    fn t_grid_or(&self, default: &[f64]) -> Vec<f64> {
        self.t_grid.clone().unwrap_or_else(|| default.to_vec())
    }

    fn lambda_grid_or(&self, default: &[f64]) -> Vec<f64> {
        self.lambda_grid.clone().unwrap_or_else(|| default.to_vec())
    }

    fn n_grid_or(&self, default: &[usize]) -> Vec<usize> {
        self.n_grid.clone().unwrap_or_else(|| default.to_vec())
    }

    fn search(&self) -> SearchConfig {
        SearchConfig { step: self.step, ..SearchConfig::default() }
    }
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(" ")
}

fn header(report: &mut ValueReport, spec: &ExperimentSpec, name: Experiment) {
    report
        .meta("artifact_version", ARTIFACT_VERSION)
        .meta("experiment", name)
        .meta("seed", spec.seed)
        .meta("step", spec.step);
}

fn sorted_desc(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| b.total_cmp(a));
    v.dedup();
    v
}

fn sorted_asc<T: PartialOrd + Copy>(mut v: Vec<T>) -> Vec<T> {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v.dedup();
    v
}

/// Cesàro and Abel means of a preset sequence.
pub fn means_report(spec: &ExperimentSpec) -> Result<ValueReport> {
    let preset = spec.preset.unwrap_or(Preset::SquareWave);
    let n_grid = sorted_asc(spec.n_grid_or(&[10, 100, 1000, 10_000, 100_000]));
    let lambda_grid = sorted_desc(spec.lambda_grid_or(&[0.1, 0.01, 0.001, 0.0001]));
    let seq = match preset {
        Preset::SquareWave => BoundedSequence::periodic(vec![1.0, 0.0])?,
        Preset::Dyadic => BoundedSequence::dyadic_blocks(),
        Preset::Constant => BoundedSequence::constant(0.3),
    };
    let tail_tol = 1e-12;
    let mut report = ValueReport::new();
    header(&mut report, spec, Experiment::Means);
    report.meta("preset", preset.name()).meta("n_grid", join(&n_grid)).meta("lambda_grid", join(&lambda_grid));
    let table = hardy_littlewood_report(&seq, &n_grid, &lambda_grid, tail_tol)?;
    // closed-form limits where they exist
    let limit = match preset {
        Preset::SquareWave => Some((0.5, 1.0)),
        Preset::Constant => Some((0.3, 0.0)),
        Preset::Dyadic => None,
    };
    report.extend(table.clone());
    if let Some((c, scale)) = limit {
        for row in table.rows_in("cesaro").filter(|r| r.label == "V_n") {
            let n = row.param.unwrap();
            report.check_le("cesaro", "|V_n - limit|", Some(n), (row.value - c).abs(), scale / n + 1e-12);
        }
        for row in table.rows_in("abel") {
            let l = row.param.unwrap();
            report.check_le("abel", "|V_lambda - limit|", Some(l), (row.value - c).abs(), scale * l + 2.0 * tail_tol);
        }
    } else {
        // lower and upper limits are 1/3 and 2/3; Abel means stay between them
        let (inf, sup) = (1.0 / 3.0, 2.0 / 3.0);
        for row in table.rows_in("abel") {
            let l = row.param.unwrap();
            report.check_ge("abel", "V_lambda above liminf", Some(l), row.value, inf - 0.05);
            report.check_le("abel", "V_lambda below limsup", Some(l), row.value, sup + 0.05);
        }
    }
    Ok(report)
}

/// Mass identities, mass estimates, and the convexity identity.
pub fn kernel_report(spec: &ExperimentSpec) -> Result<ValueReport> {
    let t_grid = sorted_asc(spec.t_grid_or(&[1.0, 10.0, 100.0]));
    let lambda_grid = sorted_desc(spec.lambda_grid_or(&[0.5, 0.1]));
    let mut report = ValueReport::new();
    header(&mut report, spec, Experiment::Kernel);
    report.meta("t_grid", join(&t_grid)).meta("lambda_grid", join(&lambda_grid));
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut worst = 0.0f64;
    for _ in 0..100 {
        let lambda = 10f64.powf(rng.gen_range(-2.0..0.3));
        let alpha = rng.gen_range(0.0..5.0) / lambda;
        let beta = alpha + rng.gen_range(0.0..5.0) / lambda;
        let k = KernelMass::new(lambda)?;
        let closed = mass(&k, alpha, beta)?;
        worst = worst.max((closed - mass_by_quadrature(&k, alpha, beta, 2000)?).abs());
    }
    report.check_le("mass", "max |closed form - quadrature|", Some(100.0), worst, 1e-10);

    let eps_grid = [0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5];
    for &eps in &eps_grid {
        for &t in &t_grid {
            let m = lemma_i_margin(t, eps)?;
            report.check_ge("lemma_i", "M((1-eps)t, t; 1/t) vs eps/2e", Some(eps), m.mass_value, m.bound);
        }
        let m = lemma_i_margin(1.0, eps)?;
        report.check_le("lemma_i", "|mass - closed form|", Some(eps), (m.mass_value - lemma_i_closed_form(eps)).abs(), 1e-12);
    }
    for (eps, delta) in [(0.01, 0.01), (0.001, 0.001), (0.0001, 0.0001)] {
        let base = lemma_ii_margin(1.0, eps, delta)?;
        report.check_ge("lemma_ii", "M(eps t, (1-eps)t; 1/(t sqrt eps)) vs 1-delta", Some(eps), base.mass_value, base.bound);
        report.check_le(
            "lemma_ii",
            "|mass - closed form|",
            Some(eps),
            (base.mass_value - lemma_ii_closed_form(eps)).abs(),
            1e-12,
        );
        let drift = t_grid
            .iter()
            .map(|&t| lemma_ii_margin(t, eps, delta).map(|m| (m.mass_value - base.mass_value).abs()))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        report.check_le("lemma_ii", "max drift over t", Some(eps), drift, 1e-12);
    }

    for &lambda in &lambda_grid {
        let tail_tol = 1e-9;
        let s_max = kernel_horizon(lambda, tail_tol);
        let trajectories: Vec<_> = (0..20).map(|_| random_step_cost(&mut rng, s_max)).collect();
        let residuals = |h: f64| -> Result<f64> {
            trajectories
                .par_iter()
                .map(|(starts, values)| {
                    let g = |s: f64| values[starts.partition_point(|a| *a <= s) - 1];
                    let tr = Trajectory::sample_cost(g, h, s_max)?;
                    Ok(convexity_residual(&tr, lambda, s_max, tail_tol)?.residual)
                })
                .collect::<Result<Vec<f64>>>()
                .map(|v| v.into_iter().fold(0.0, f64::max))
        };
        let coarse = residuals(spec.step)?;
        let fine = residuals(spec.step / 2.0)?;
        report.check_le("convexity", "max residual at h", Some(lambda), coarse, 1e-3);
        report.check_le("convexity", "max residual at h/2", Some(lambda), fine, (coarse / 2.0).max(tail_tol));
    }
    Ok(report)
}

/// Smallest multiple of `1/λ` beyond which the kernel carries less than
/// `tail_tol`.
fn kernel_horizon(lambda: f64, tail_tol: f64) -> f64 {
    let k = KernelMass::new(lambda).expect("positive lambda");
    let mut s = 1.0 / lambda;
    while k.upper_tail(s) > tail_tol {
        s += 1.0 / lambda;
    }
    s
}

/// Random 0/1-valued step function on `[0, horizon]`: switch times and values.
fn random_step_cost(rng: &mut ChaCha8Rng, horizon: f64) -> (Vec<f64>, Vec<f64>) {
    let pieces = rng.gen_range(1..=12usize);
    let mut starts: Vec<f64> = (1..pieces).map(|_| rng.gen_range(0.0..horizon)).collect();
    starts.push(0.0);
    starts.sort_by(f64::total_cmp);
    starts.dedup();
    let values = starts.iter().map(|_| if rng.gen_bool(0.5) { 1.0 } else { 0.0 }).collect();
    (starts, values)
}

/// Points of the analytic tables.
pub const TABLE_POINTS: [[f64; 2]; 5] = [[0.0, 0.0], [0.5, 0.0], [1.5, 0.0], [3.0, 0.0], [1.0, 0.5]];

/// Values of the double integrator from the origin, analytic limits, the
/// lower-bound audit, monotonicity and the non-uniform convergence probe.
pub fn counterexample_report(spec: &ExperimentSpec) -> Result<ValueReport> {
    let t_grid = sorted_asc(spec.t_grid_or(&[100.0, 1000.0, 10_000.0]));
    let lambda_grid = sorted_desc(spec.lambda_grid_or(&[0.1, 0.01, 0.001]));
    let p = counterexample();
    let search = spec.search();
    let mut report = ValueReport::new();
    header(&mut report, spec, Experiment::Counterexample);
    report.meta("t_grid", join(&t_grid)).meta("lambda_grid", join(&lambda_grid));

    let mut prev = f64::INFINITY;
    for &t in &t_grid {
        let e = estimate_vt(&p, [0.0, 0.0], t, &search)?;
        report.push("origin", "V_t", Some(t), e.value, Some(0.55), (0.5..=0.55).contains(&e.value) && e.value < prev);
        prev = e.value;
    }
    let mut prev = f64::INFINITY;
    for &l in &lambda_grid {
        let e = estimate_vlambda(&p, [0.0, 0.0], l, &search)?;
        report.push("origin", "V_lambda", Some(l), e.value, Some(0.80), (0.75..=0.80).contains(&e.value) && e.value < prev);
        prev = e.value;
    }

    let t_last = *t_grid.last().unwrap();
    let l_last = *lambda_grid.last().unwrap();
    for pt in TABLE_POINTS {
        let (v, w) = (analytic_v(pt[0], pt[1]), analytic_w(pt[0], pt[1]));
        let label = format!("({}, {})", pt[0], pt[1]);
        report.info("analytic", &format!("V {label}"), None, v);
        report.info("analytic", &format!("W {label}"), None, w);
        let et = estimate_vt(&p, pt, t_last, &search)?.value;
        let el = estimate_vlambda(&p, pt, l_last, &search)?.value;
        report.check_le("analytic", &format!("V_t - V {label}"), Some(t_last), et - v, 0.07);
        report.check_le("analytic", &format!("V_lambda - W {label}"), Some(l_last), el - w, 0.07);
    }

    let audit_t = t_grid[0];
    let audit_l = lambda_grid[lambda_grid.len() / 2];
    report.extend(lower_bound_audit(200, audit_t, audit_l, spec.seed, spec.step, 10.0 * spec.step)?);

    let burst = ControlSchedule::one_switch(1.0, 0.5, 0.0)?;
    for (x0, s) in [([0.0, 0.0], 2.0), ([0.5, 0.0], 1.0), ([0.0, 0.0], 5.0)] {
        report.extend(monotonicity_probe(&p, x0, &burst, s, t_grid[0], lambda_grid[0], &search, 1e-6)?);
    }

    // starting inside the band at speed eps leaves it after at most 1/eps
    let t_probe = 1000.0f64.min(t_last);
    for eps in [0.01, 0.0] {
        let v = estimate_vt(&p, [1.0, eps], t_probe, &search)?.value;
        let lower = if eps > 0.0 { 1.0 - 1.0 / (eps * t_probe) - 1e-9 } else { 0.0 };
        if eps > 0.0 {
            report.check_ge("non_uniform", "V_t(1, eps)", Some(eps), v, lower);
        } else {
            report.check_le("non_uniform", "V_t(1, 0)", Some(eps), v, 1e-9);
        }
    }
    Ok(report)
}

/// The compact variant with continuous cost.
pub fn smooth_report(spec: &ExperimentSpec) -> Result<ValueReport> {
    let t_grid = sorted_asc(spec.t_grid_or(&[100.0, 1000.0]));
    let lambda_grid = sorted_desc(spec.lambda_grid_or(&[0.01, 0.001]));
    let p = smooth_variant();
    let search = spec.search();
    let mut report = ValueReport::new();
    header(&mut report, spec, Experiment::Smooth);
    report.meta("t_grid", join(&t_grid)).meta("lambda_grid", join(&lambda_grid));

    let lipschitz = (0..=4000)
        .map(|i| {
            let x = i as f64 * 1e-3;
            (smooth_cost(x + 1e-3) - smooth_cost(x)).abs() / 1e-3
        })
        .fold(0.0, f64::max);
    report.check_le("smooth", "cost Lipschitz constant", None, lipschitz, 10.0 + 1e-6);

    let (ok, bad) = forward_invariance_audit(200, 20.0, spec.step, spec.seed)?;
    report.info("smooth", "paths kept admissible", Some(200.0), ok as f64);
    report.check_le("smooth", "paths leaving the state space", Some(200.0), bad as f64, 0.0);

    let vt: Vec<f64> = t_grid.iter().map(|&t| estimate_vt(&p, [0.0, 0.0], t, &search).map(|e| e.value)).collect::<Result<_>>()?;
    let vl: Vec<f64> =
        lambda_grid.iter().map(|&l| estimate_vlambda(&p, [0.0, 0.0], l, &search).map(|e| e.value)).collect::<Result<_>>()?;
    for (t, v) in t_grid.iter().zip(&vt) {
        report.info("smooth", "V_t at origin", Some(*t), *v);
    }
    for (l, v) in lambda_grid.iter().zip(&vl) {
        report.info("smooth", "V_lambda at origin", Some(*l), *v);
    }
    let gap = vl.last().unwrap() - vt.last().unwrap();
    report.check_ge("smooth", "V_lambda - V_t at the finest parameters", None, gap, 0.1);
    Ok(report)
}

/// Value engines and limits on finite graphs.
pub fn discrete_report(spec: &ExperimentSpec) -> Result<ValueReport> {
    let n_grid = sorted_asc(spec.n_grid_or(&[100, 1000, 10_000]));
    let lambda_grid = sorted_desc(spec.lambda_grid_or(&[0.1, 0.01]));
    let n_max = *n_grid.last().unwrap();
    let mut report = ValueReport::new();
    header(&mut report, spec, Experiment::Discrete);
    report.meta("n_grid", join(&n_grid)).meta("lambda_grid", join(&lambda_grid));
    let graphs: Vec<(String, DiscreteProblem)> = match &spec.graph {
        Some(path) => {
            report.meta("graph", path.display());
            vec![(path.display().to_string(), DiscreteProblem::read_from(fs::File::open(path)?)?)]
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            (0..30)
                .map(|k| {
                    let n = rng.gen_range(2..=50usize);
                    let seed = rng.gen::<u64>();
                    DiscreteProblem::random(n, 3, seed).map(|g| (format!("random #{k} ({n} states)"), g))
                })
                .collect::<Result<_>>()?
        }
    };
    let per_graph: Vec<Result<ValueReport>> = graphs
        .par_iter()
        .map(|(name, g)| {
            let mut r = ValueReport::new();
            let states = g.len() as f64;
            let gap = tauberian_gap(g, &n_grid)?;
            for row in gap.rows {
                r.push("tauberian_gap", &format!("{name}: {}", row.label), row.param, row.value, row.bound, row.pass);
            }
            let vn = value_n(g, n_max)?;
            let vl = value_lambda(g, 1.0 / n_max as f64, 1e-12)?;
            let mmc = min_mean_cycle_all(g);
            r.check_le("limits", &format!("{name}: sup |v_n - mmc|"), Some(n_max as f64), vn.sup_distance(&mmc), 2.0 * states / n_max as f64);
            r.check_le("limits", &format!("{name}: sup |v_1/n - v_n|"), Some(n_max as f64), vl.sup_distance(&vn.values), 0.02);
            r.check_le(
                "limits",
                &format!("{name}: fixed-point residual"),
                Some(1.0 / n_max as f64),
                fixed_point_residual(g, &vl.values, 1.0 / n_max as f64),
                1e-8,
            );
            for row in monotonicity_audit(g, 200, &lambda_grid)?.rows {
                r.push("monotonicity", &format!("{name}: {}", row.label), row.param, row.value, row.bound, row.pass);
            }
            Ok(r)
        })
        .collect();
    for r in per_graph {
        report.extend(r?);
    }
    Ok(report)
}

/// Kernel gap and the reduction error audits on the double integrator.
pub fn bridge_report(spec: &ExperimentSpec) -> Result<ValueReport> {
    let t_grid = sorted_asc(spec.t_grid_or(&[5.0, 10.0, 20.0, 30.0]));
    let lambda_grid = sorted_desc(spec.lambda_grid_or(&[0.5, 0.1, 0.01, 0.001]));
    let mut report = ValueReport::new();
    header(&mut report, spec, Experiment::Bridge);
    report.meta("t_grid", join(&t_grid)).meta("lambda_grid", join(&lambda_grid));

    let mut prev = f64::INFINITY;
    for &l in &lambda_grid {
        let g = kernel_gap(l, default_s_max(l))?;
        report.push("kernel_gap", "E(lambda) vs e^lambda - 1", Some(l), g.e_value, Some(g.bound), g.pass);
        report.check_le("kernel_gap", "E(lambda) decreasing", Some(l), g.e_value, prev);
        prev = g.e_value;
        let full = full_gap(l, default_s_max(l))?;
        report.check_le("kernel_gap", "|full gap - 2E|", Some(l), (full - 2.0 * g.e_value).abs(), 1e-9);
    }

    let depth = t_grid.last().unwrap().floor().max(1.0) as usize;
    let config = BridgeConfig { depth, step: spec.step, ..BridgeConfig::default() };
    let p = counterexample();
    let units = default_unit_schedules();
    let bp = discretize(&p, [0.0, 0.0], &units, &config)?;
    report.meta("depth", depth).meta("quant", config.quant).meta("reduced_states", bp.discrete.len());
    report.check_le("bridge", "reduced states vs node cap", None, bp.discrete.len() as f64, config.node_cap as f64);
    let slack = BridgeSlack::default();
    let search = spec.search();
    report.extend(horizon_error_audit(&bp, &t_grid, &search, &slack)?);
    report.extend(discount_error_audit(&bp, &lambda_grid, &search, &slack)?);

    // halving the lattice pitch moves the reduced values by at most the declared slack
    let short = depth.min(20);
    let coarse_cfg = BridgeConfig { depth: short, ..config.clone() };
    let fine_cfg = BridgeConfig { quant: config.quant / 2.0, ..coarse_cfg.clone() };
    let coarse = root_value_n(&discretize(&p, [0.0, 0.0], &units, &coarse_cfg)?, &[short])?[0];
    let fine = root_value_n(&discretize(&p, [0.0, 0.0], &units, &fine_cfg)?, &[short])?[0];
    report.check_le("bridge", "|v_n(quant) - v_n(quant/2)|", Some(short as f64), (coarse - fine).abs(), slack.quantization);

    let rest = discretize(&p, [1.5, 0.0], &units, &BridgeConfig { depth: 5, ..config })?;
    report.extend(horizon_error_audit(&rest, &[5.0], &search, &slack)?);
    Ok(report)
}

/// Report of one named experiment (not `all`).
pub fn report_for(name: Experiment, spec: &ExperimentSpec) -> Result<ValueReport> {
    match name {
        Experiment::Means => means_report(spec),
        Experiment::Kernel => kernel_report(spec),
        Experiment::Counterexample => counterexample_report(spec),
        Experiment::Smooth => smooth_report(spec),
        Experiment::Discrete => discrete_report(spec),
        Experiment::Bridge => bridge_report(spec),
        Experiment::All => domain("`all` is not a single experiment"),
    }
}

/// Files written by [`run`] and whether every check passed.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    pub all_pass: bool,
}

impl RunOutcome {
    /// 0 when every check passed, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.all_pass {
            0
        } else {
            2
        }
    }
}

fn write_report(dir: &Path, name: &str, report: &ValueReport) -> Result<PathBuf> {
    let path = dir.join(format!("{name}.csv"));
    let file = fs::File::create(&path)?;
    report.write_csv(std::io::BufWriter::new(file))?;
    Ok(path)
}

/// Runs the experiment and writes `<out>/<name>.csv`; `all` also writes
/// every member's file.
pub fn run(spec: &ExperimentSpec) -> Result<RunOutcome> {
    spec.validate()?;
    fs::create_dir_all(&spec.out)?;
    if spec.name != Experiment::All {
        let report = report_for(spec.name, spec)?;
        let file = write_report(&spec.out, spec.name.name(), &report)?;
        return Ok(RunOutcome { files: vec![file], all_pass: report.all_pass() });
    }
    let mut combined = ValueReport::new();
    header(&mut combined, spec, Experiment::All);
    let mut files = Vec::new();
    let mut all_pass = true;
    for member in Experiment::members() {
        let report = report_for(member, spec)?;
        all_pass &= report.all_pass();
        files.push(write_report(&spec.out, member.name(), &report)?);
        for mut row in report.rows {
            row.section = format!("{}/{}", member.name(), row.section);
            combined.rows.push(row);
        }
    }
    files.push(write_report(&spec.out, "all", &combined)?);
    Ok(RunOutcome { files, all_pass })
}
