//! Average and discounted values of the double integrator from the origin
//! drift apart: `V_t -> 1/2` while `V_λ -> 3/4`.

use std::time::Instant;

use tauberian::control::{analytic_v, analytic_w, counterexample, estimate_vlambda, estimate_vt, SearchConfig};

fn main() -> tauberian::Result<()> {
    let p = counterexample();
    let cfg = SearchConfig::default();
    println!("limits at (0,0): V = {}, W = {}", analytic_v(0.0, 0.0), analytic_w(0.0, 0.0));
    for t in [100.0, 1000.0, 10_000.0] {
        let clock = Instant::now();
        let e = estimate_vt(&p, [0.0, 0.0], t, &cfg)?;
        println!(
            "V_t     t = {t:>7}: {:.10}  switches {:?} values {:?}  ({} rollouts, {:.1?})",
            e.value,
            e.witness.switches(),
            e.witness.values(),
            e.evaluations,
            clock.elapsed()
        );
    }
    for lambda in [0.1, 0.01, 0.001] {
        let clock = Instant::now();
        let e = estimate_vlambda(&p, [0.0, 0.0], lambda, &cfg)?;
        println!(
            "V_lam lam = {lambda:>7}: {:.10}  switches {:?} values {:?}  ({} rollouts, {:.1?})",
            e.value,
            e.witness.switches(),
            e.witness.values(),
            e.evaluations,
            clock.elapsed()
        );
    }
    Ok(())
}
