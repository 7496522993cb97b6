//! The smoothed double integrator: continuous cost, damped dynamics,
//! RK4 integration. The average and discounted values still separate.

use tauberian::control::{estimate_vlambda, estimate_vt, smooth_variant, SearchConfig};

fn main() -> tauberian::Result<()> {
    let p = smooth_variant();
    let cfg = SearchConfig::default();
    for t in [100.0, 1000.0] {
        let e = estimate_vt(&p, [0.0, 0.0], t, &cfg)?;
        println!("V_t   t = {t:>6}: {:.6}  step {}  witness {:?} / {:?}", e.value, e.step, e.witness.switches(), e.witness.values());
    }
    for lambda in [0.01, 0.001] {
        let e = estimate_vlambda(&p, [0.0, 0.0], lambda, &cfg)?;
        println!("V_lam lam = {lambda:>6}: {:.6}  step {}  witness {:?} / {:?}", e.value, e.step, e.witness.switches(), e.witness.values());
    }
    Ok(())
}
