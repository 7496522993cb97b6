//! Continuous values against the values of the unit-step reduction, and the
//! kernel gap that bounds their distance under discounting.

use std::time::Instant;

use tauberian::bridge::{
    default_s_max, default_unit_schedules, discount_error_audit, discretize, full_gap, horizon_error_audit, kernel_gap,
    BridgeConfig, BridgeSlack,
};
use tauberian::control::{counterexample, SearchConfig};

fn main() -> tauberian::Result<()> {
    for lambda in [0.5, 0.1, 0.01, 0.001] {
        let g = kernel_gap(lambda, default_s_max(lambda))?;
        let full = full_gap(lambda, default_s_max(lambda))?;
        println!("lambda {lambda:>6}: E = {:.9}  bound e^l - 1 = {:.9}  full gap = {:.9}", g.e_value, g.bound, full);
    }
    let clock = Instant::now();
    let bp = discretize(&counterexample(), [0.0, 0.0], &default_unit_schedules(), &BridgeConfig::default())?;
    println!("reduced graph: {} states, built in {:.1?}", bp.discrete.len(), clock.elapsed());
    let search = SearchConfig::default();
    let slack = BridgeSlack::default();
    let clock = Instant::now();
    let mut report = horizon_error_audit(&bp, &[5.0, 10.0, 20.0, 30.0], &search, &slack)?;
    report.extend(discount_error_audit(&bp, &[0.5, 0.2, 0.1], &search, &slack)?);
    print!("{}", report.to_csv_string());
    println!("audits in {:.1?}, all pass: {}", clock.elapsed(), report.all_pass());
    Ok(())
}
