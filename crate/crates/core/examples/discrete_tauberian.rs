//! Finite-horizon and discounted values on a random graph, converging
//! to the minimum mean cycle at every node.

use tauberian::discrete::{min_mean_cycle_all, tauberian_gap, value_lambda, value_n, DiscreteProblem};

fn main() -> tauberian::Result<()> {
    let p = DiscreteProblem::random(12, 3, 2024)?;
    print!("{}", p.to_text());
    let limit = min_mean_cycle_all(&p);
    println!("\nnode  limit     v_1000    v_lam(1e-3)");
    let vn = value_n(&p, 1000)?;
    let vl = value_lambda(&p, 1e-3, 1e-12)?;
    for (z, id) in p.ids().iter().enumerate() {
        println!("{id:>4}  {:.6}  {:.6}  {:.6}", limit[z], vn.values[z], vl.values[z]);
    }
    println!();
    print!("{}", tauberian_gap(&p, &[10, 100, 1000])?.to_csv_string());
    Ok(())
}
