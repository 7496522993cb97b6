//! Finite deterministic dynamic programs: a correspondence `Γ` on a finite
//! state set with costs in `[0, 1]`.
//!
//! Plays start at `z` and the first counted cost is `g(z)`, in both the
//! finite-horizon average `v_n` and the discounted value `v_λ`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Read;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::report::{fmt_num, ValueReport};

/// States are stored sorted by identifier, so "lowest identifier" and
/// "lowest index" coincide.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteProblem {
    ids: Vec<u64>,
    costs: Vec<f64>,
    successors: Vec<Vec<usize>>,
}

impl DiscreteProblem {
    /// Builds a problem from `(id, cost, successor ids)` triples.
    pub fn new(nodes: Vec<(u64, f64, Vec<u64>)>) -> Result<Self> {
        if nodes.is_empty() {
            return domain("a problem needs at least one state");
        }
        let mut nodes = nodes;
        nodes.sort_by_key(|n| n.0);
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, (id, cost, succ)) in nodes.iter().enumerate() {
            if index.insert(*id, i).is_some() {
                return domain(format!("duplicate state id {id}"));
            }
            if !(0.0..=1.0).contains(cost) {
                return domain(format!("cost {cost} of state {id} outside [0, 1]"));
            }
            if succ.is_empty() {
                return domain(format!("state {id} has no successor"));
            }
        }
        let mut successors = Vec::with_capacity(nodes.len());
        for (id, _, succ) in &nodes {
            let mut s = Vec::with_capacity(succ.len());
            for t in succ {
                match index.get(t) {
                    Some(&j) => s.push(j),
                    None => return domain(format!("state {id} points to unknown state {t}")),
                }
            }
            s.sort_unstable();
            s.dedup();
            successors.push(s);
        }
        Ok(Self {
            ids: nodes.iter().map(|n| n.0).collect(),
            costs: nodes.iter().map(|n| n.1).collect(),
            successors,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn successors(&self, i: usize) -> &[usize] {
        &self.successors[i]
    }

    pub fn edge_count(&self) -> usize {
        self.successors.iter().map(Vec::len).sum()
    }

    pub fn index_of(&self, id: u64) -> Option<usize> {
        self.ids.binary_search(&id).ok()
    }

    /// Parses the text format: one line per state, `id cost succ1 succ2 ...`,
    /// blank lines and `#` comments ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut nodes = Vec::new();
        let mut seen: HashMap<u64, usize> = HashMap::new();
        for (k, raw) in text.lines().enumerate() {
            let line_no = k + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse { line: line_no, message };
            let mut fields = line.split_whitespace();
            let id: u64 = fields
                .next()
                .unwrap()
                .parse()
                .map_err(|e| err(format!("bad state id: {e}")))?;
            let cost: f64 = fields
                .next()
                .ok_or_else(|| err("missing cost".into()))?
                .parse()
                .map_err(|e| err(format!("bad cost: {e}")))?;
            if !(0.0..=1.0).contains(&cost) {
                return Err(err(format!("cost {cost} outside [0, 1]")));
            }
            let succ = fields
                .map(|f| f.parse::<u64>().map_err(|e| err(format!("bad successor id {f:?}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            if succ.is_empty() {
                return Err(err(format!("state {id} has no successor")));
            }
            if let Some(prev) = seen.insert(id, line_no) {
                return Err(err(format!("state {id} already defined on line {prev}")));
            }
            nodes.push((id, cost, succ));
        }
        Self::new(nodes)
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut s = String::new();
        r.read_to_string(&mut s)?;
        Self::parse(&s)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for i in 0..self.len() {
            let _ = write!(out, "{} {}", self.ids[i], fmt_num(self.costs[i]));
            for &j in &self.successors[i] {
                let _ = write!(out, " {}", self.ids[j]);
            }
            out.push('\n');
        }
        out
    }

    /// Random instance with `n` states, 1 to `max_out` successors each and
    /// uniform costs.
    pub fn random(n: usize, max_out: usize, seed: u64) -> Result<Self> {
        if n == 0 || max_out == 0 {
            return domain("random graphs need n >= 1 and max_out >= 1");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nodes = (0..n as u64)
            .map(|id| {
                let cost = rng.gen_range(0.0..=1.0);
                let k = rng.gen_range(1..=max_out.min(n));
                let succ = (0..k).map(|_| rng.gen_range(0..n as u64)).collect();
                (id, cost, succ)
            })
            .collect();
        Self::new(nodes)
    }

    /// Argmin of `values` over the successors of `i`; lowest id on ties.
    fn best_successor(&self, i: usize, values: &[f64]) -> (usize, f64) {
        let mut best = self.successors[i][0];
        for &j in &self.successors[i][1..] {
            if values[j] < values[best] {
                best = j;
            }
        }
        (best, values[best])
    }
}

/// Values per state for one parameter, with an optimal successor each.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    /// `n` or `λ`.
    pub param: f64,
    pub values: Vec<f64>,
    pub witness: Vec<usize>,
}

impl ValueTable {
    pub fn sup_distance(&self, other: &[f64]) -> f64 {
        self.values.iter().zip(other).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// `v_n` by the finite-horizon recursion `S_k = g + min_succ S_{k-1}`.
pub fn value_n(p: &DiscreteProblem, n: usize) -> Result<ValueTable> {
    Ok(value_n_grid(p, &[n])?.pop().unwrap())
}

/// `v_n` for every `n` of the grid in one recursion pass.
pub fn value_n_grid(p: &DiscreteProblem, n_grid: &[usize]) -> Result<Vec<ValueTable>> {
    if n_grid.iter().any(|n| *n == 0) {
        return domain("value_n needs n >= 1");
    }
    let n_max = n_grid.iter().copied().max().unwrap_or(0);
    let mut tables: Vec<Option<ValueTable>> = vec![None; n_grid.len()];
    let mut s = p.costs.clone();
    let mut witness = p.successors.iter().map(|v| v[0]).collect::<Vec<_>>();
    let mut next = vec![0.0; p.len()];
    for k in 1..=n_max {
        if k > 1 {
            for i in 0..p.len() {
                let (j, v) = p.best_successor(i, &s);
                next[i] = p.costs[i] + v;
                witness[i] = j;
            }
            std::mem::swap(&mut s, &mut next);
        }
        for (slot, &n) in tables.iter_mut().zip(n_grid) {
            if n == k {
                *slot = Some(ValueTable {
                    param: n as f64,
                    values: s.iter().map(|v| v / n as f64).collect(),
                    witness: if n == 1 {
                        (0..p.len()).map(|i| p.best_successor(i, &p.costs).0).collect()
                    } else {
                        witness.clone()
                    },
                });
            }
        }
    }
    Ok(tables.into_iter().map(Option::unwrap).collect())
}

/// Discounted value of the stationary policy `pi`, exactly.
///
/// Every play under `pi` is a lasso; cycle values are summed in closed form
/// and the prefixes are filled in backwards.
pub fn policy_value(p: &DiscreteProblem, pi: &[usize], lambda: f64) -> Vec<f64> {
    let n = p.len();
    let keep = 1.0 - lambda;
    let mut value = vec![f64::NAN; n];
    let mut state = vec![0u8; n]; // 0 new, 1 on path, 2 done
    for start in 0..n {
        if state[start] == 2 {
            continue;
        }
        let mut path = Vec::new();
        let mut z = start;
        while state[z] == 0 {
            state[z] = 1;
            path.push(z);
            z = pi[z];
        }
        let mut end = path.len();
        if state[z] == 1 {
            // the path closes a new cycle at z
            let pos = path.iter().position(|&w| w == z).unwrap();
            let cycle = &path[pos..];
            let len = cycle.len() as f64;
            let denom = -(len * (-lambda).ln_1p()).exp_m1();
            let mut acc = 0.0;
            let mut w = 1.0;
            for &c in cycle {
                acc += w * p.costs[c];
                w *= keep;
            }
            value[z] = lambda * acc / denom;
            state[z] = 2;
            for &c in cycle.iter().rev() {
                if c != z {
                    value[c] = lambda * p.costs[c] + keep * value[pi[c]];
                    state[c] = 2;
                }
            }
            end = pos;
        }
        for &c in path[..end].iter().rev() {
            value[c] = lambda * p.costs[c] + keep * value[pi[c]];
            state[c] = 2;
        }
    }
    value
}

/// Fixed point of `v = λ g + (1 - λ) min_succ v`.
///
/// Policy iteration gives a warm start; value iteration then runs until the
/// sup-norm change is at most `tol·λ/(1-λ)`, which bounds the error by `tol`.
pub fn value_lambda(p: &DiscreteProblem, lambda: f64, tol: f64) -> Result<ValueTable> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return domain(format!("lambda = {lambda} must lie in (0, 1)"));
    }
    if !(tol > 0.0) {
        return domain(format!("tol = {tol} must be positive"));
    }
    let n = p.len();
    let mut pi: Vec<usize> = p.successors.iter().map(|s| s[0]).collect();
    let mut v = policy_value(p, &pi, lambda);
    for _ in 0..10 * n + 10 {
        let mut changed = false;
        for i in 0..n {
            let (j, best) = p.best_successor(i, &v);
            if best < v[pi[i]] - 1e-15 * v[pi[i]].abs().max(1e-300) {
                pi[i] = j;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        v = policy_value(p, &pi, lambda);
    }
    let keep = 1.0 - lambda;
    let stop = tol * lambda / keep;
    let mut next = vec![0.0; n];
    let mut witness = pi;
    let mut iterations = 0usize;
    loop {
        let mut change = 0.0f64;
        for i in 0..n {
            let (j, m) = p.best_successor(i, &v);
            next[i] = lambda * p.costs[i] + keep * m;
            witness[i] = j;
            change = change.max((next[i] - v[i]).abs());
        }
        std::mem::swap(&mut v, &mut next);
        iterations += 1;
        if change <= stop {
            break;
        }
        if iterations > 100_000_000 {
            return domain("value iteration did not settle");
        }
    }
    for i in 0..n {
        witness[i] = p.best_successor(i, &v).0;
    }
    Ok(ValueTable { param: lambda, values: v, witness })
}

/// `sup_z |v(z) - λ g(z) - (1 - λ) min_succ v|`.
pub fn fixed_point_residual(p: &DiscreteProblem, values: &[f64], lambda: f64) -> f64 {
    (0..p.len())
        .map(|i| {
            let m = p.best_successor(i, values).1;
            (values[i] - lambda * p.costs[i] - (1.0 - lambda) * m).abs()
        })
        .fold(0.0, f64::max)
}

/// States reachable from `z`, including `z`, in increasing order.
fn reachable(p: &DiscreteProblem, z: usize) -> Vec<usize> {
    let mut seen = vec![false; p.len()];
    let mut stack = vec![z];
    seen[z] = true;
    while let Some(u) = stack.pop() {
        for &w in &p.successors[u] {
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    (0..p.len()).filter(|&i| seen[i]).collect()
}

/// Karp's recurrence over the states `nodes` (all reachable from
/// `nodes[source_pos]`), with edge weight `g(tail)`.
fn karp(p: &DiscreteProblem, nodes: &[usize], source_pos: usize) -> f64 {
    let m = nodes.len();
    let mut local = vec![usize::MAX; p.len()];
    for (k, &u) in nodes.iter().enumerate() {
        local[u] = k;
    }
    let inf = f64::INFINITY;
    // d[k][v]: least weight of a walk with exactly k edges from the source to v
    let mut d = vec![vec![inf; m]; m + 1];
    d[0][source_pos] = 0.0;
    for k in 1..=m {
        let (prev, cur) = d.split_at_mut(k);
        let prev = &prev[k - 1];
        let cur = &mut cur[0];
        for (a, &u) in nodes.iter().enumerate() {
            if prev[a] == inf {
                continue;
            }
            let w = prev[a] + p.costs[u];
            for &t in &p.successors[u] {
                let b = local[t];
                if b != usize::MAX && w < cur[b] {
                    cur[b] = w;
                }
            }
        }
    }
    let mut best = inf;
    for v in 0..m {
        if d[m][v] == inf {
            continue;
        }
        let mut worst = -inf;
        for k in 0..m {
            if d[k][v] < inf {
                worst = worst.max((d[m][v] - d[k][v]) / (m - k) as f64);
            }
        }
        best = best.min(worst);
    }
    best
}

/// Least mean cost over cycles reachable from state index `z`.
pub fn min_mean_cycle(p: &DiscreteProblem, z: usize) -> f64 {
    let nodes = reachable(p, z);
    let source = nodes.binary_search(&z).unwrap();
    karp(p, &nodes, source)
}

/// [`min_mean_cycle`] for every state, one Karp run per strongly connected
/// component and a pass over the condensation.
pub fn min_mean_cycle_all(p: &DiscreteProblem) -> Vec<f64> {
    let mut g = DiGraph::<(), ()>::with_capacity(p.len(), p.edge_count());
    let idx: Vec<_> = (0..p.len()).map(|_| g.add_node(())).collect();
    for (u, succ) in p.successors.iter().enumerate() {
        for &w in succ {
            g.add_edge(idx[u], idx[w], ());
        }
    }
    // components come out sinks first
    let comps = tarjan_scc(&g);
    let mut comp_of = vec![0usize; p.len()];
    for (c, comp) in comps.iter().enumerate() {
        for v in comp {
            comp_of[v.index()] = c;
        }
    }
    let mut best = vec![f64::INFINITY; comps.len()];
    for (c, comp) in comps.iter().enumerate() {
        let mut nodes: Vec<usize> = comp.iter().map(|v| v.index()).collect();
        nodes.sort_unstable();
        let cyclic = nodes.len() > 1 || p.successors[nodes[0]].contains(&nodes[0]);
        let mut own = if cyclic { karp(p, &nodes, 0) } else { f64::INFINITY };
        for &u in &nodes {
            for &w in &p.successors[u] {
                let d = comp_of[w];
                if d != c {
                    own = own.min(best[d]);
                }
            }
        }
        best[c] = own;
    }
    (0..p.len()).map(|i| best[comp_of[i]]).collect()
}

/// Checks the discrete monotonicity of values along optimal successors.
///
/// For each state `z` with optimal successor `y`:
/// `mmc(z) <= mmc(y)`, `v_n(z) <= v_{n-1}(y) + 1/n` and
/// `v_λ(z) <= v_λ(y) + λ`.
pub fn monotonicity_audit(p: &DiscreteProblem, n_max: usize, lambda_grid: &[f64]) -> Result<ValueReport> {
    if n_max < 2 {
        return domain("monotonicity audit needs n_max >= 2");
    }
    let mmc = min_mean_cycle_all(p);
    let tables = value_n_grid(p, &[n_max - 1, n_max])?;
    let (prev, cur) = (&tables[0], &tables[1]);
    let mut report = ValueReport::new();
    let mut excess_limit = f64::NEG_INFINITY;
    let mut excess_n = f64::NEG_INFINITY;
    for z in 0..p.len() {
        let y = cur.witness[z];
        excess_limit = excess_limit.max(mmc[z] - mmc[y]);
        excess_n = excess_n.max(cur.values[z] - prev.values[y] - 1.0 / n_max as f64);
    }
    report.check_le("monotonicity", "limit along witness", None, excess_limit, 1e-12);
    report.check_le("monotonicity", "v_n along witness", Some(n_max as f64), excess_n, 1e-12);
    let lambda_tables: Vec<Result<ValueTable>> =
        lambda_grid.par_iter().map(|&l| value_lambda(p, l, 1e-12)).collect();
    for (table, &lambda) in lambda_tables.into_iter().zip(lambda_grid) {
        let table = table?;
        let excess = (0..p.len())
            .map(|z| table.values[z] - table.values[table.witness[z]] - lambda)
            .fold(f64::NEG_INFINITY, f64::max);
        report.check_le("monotonicity", "v_lambda along witness", Some(lambda), excess, 1e-12);
    }
    Ok(report)
}

/// Distances between `v_n`, `v_{1/n}` and the cycle limit, per `n`.
pub fn tauberian_gap(p: &DiscreteProblem, n_grid: &[usize]) -> Result<ValueReport> {
    if n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return domain("n_grid must be strictly ascending");
    }
    if n_grid.first() == Some(&1) {
        return domain("tauberian_gap needs n >= 2 (so that 1/n < 1)");
    }
    let mmc = min_mean_cycle_all(p);
    let vn = value_n_grid(p, n_grid)?;
    let vl: Vec<Result<ValueTable>> =
        n_grid.par_iter().map(|&n| value_lambda(p, 1.0 / n as f64, 1e-12)).collect();
    let states = p.len() as f64;
    let mut report = ValueReport::new();
    for ((&n, a), b) in n_grid.iter().zip(&vn).zip(vl) {
        let b = b?;
        let nf = n as f64;
        report.check_le("tauberian_gap", "sup |v_n - mmc|", Some(nf), a.sup_distance(&mmc), 2.0 * states / nf);
        report.check_le("tauberian_gap", "sup |v_1/n - mmc|", Some(nf), b.sup_distance(&mmc), 2.0 * states / nf);
        report.check_le("tauberian_gap", "sup |v_n - v_1/n|", Some(nf), a.sup_distance(&b.values), 4.0 * states / nf);
    }
    Ok(report)
}
