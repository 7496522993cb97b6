//! A near-optimal play for the long horizon has a late start after which
//! every running average stays close to the value.
//!
//! Writes the trajectory to `good_window.csv` when given `--dump`.

use std::fs::File;

use tauberian::control::{analytic_v, counterexample, simulate, ControlSchedule};
use tauberian::plays::{gamma_t, good_window_time, window_average};

fn main() -> tauberian::Result<()> {
    let p = counterexample();
    let t = 400.0;
    // full throttle for tau, then coast; the zero-cost strip ends just before t
    let tau = 2.0 / (t - 1.0);
    let sched = ControlSchedule::one_switch(1.0, tau, 0.0)?;
    let tr = simulate(&p, [0.0, 0.0], &sched, t, 0.01)?;
    let v = analytic_v(0.0, 0.0);
    let avg = gamma_t(&tr, t)?;
    println!("gamma_t = {avg:.6}, value limit {v}");
    for eps in [0.1, 0.05, 0.02] {
        let w = good_window_time(&tr, t, eps, v)?;
        let rest = window_average(&tr, w.crossing, t - w.crossing);
        println!(
            "eps = {eps:<4}: averages exceed v + eps last at {:.3} (crossing ~ {:.3}); average on the rest {rest:.6}",
            w.start, w.crossing
        );
    }
    if std::env::args().any(|a| a == "--dump") {
        tr.write_csv(File::create("good_window.csv")?, &["x", "y"])?;
        println!("wrote good_window.csv");
    }
    Ok(())
}
