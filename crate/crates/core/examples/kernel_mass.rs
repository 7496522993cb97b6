//! Masses of the kernel `λ² s e^{-λs}` on the windows used to compare
//! discounted payoffs with running averages.

use tauberian::kernel::{
    lemma_i_closed_form, lemma_i_margin, lemma_i_threshold, lemma_ii_closed_form, lemma_ii_margin,
    lemma_ii_sign_flipped_form, mass, mass_by_quadrature, KernelMass,
};

fn main() -> tauberian::Result<()> {
    let k = KernelMass::new(0.1)?;
    for (a, b) in [(0.0, 10.0), (10.0, 20.0), (5.0, 50.0), (0.0, 200.0)] {
        println!(
            "lam = 0.1, [{a:>5}, {b:>5}]: closed {:.12}  gauss {:.12}",
            mass(&k, a, b)?,
            mass_by_quadrature(&k, a, b, 200)?
        );
    }

    println!("\nwindow ((1-eps)t, t) at lam = 1/t, against eps/(2e)");
    for eps in [0.01, 0.1, 0.3, 0.5] {
        let m = lemma_i_margin(50.0, eps)?;
        println!(
            "  eps = {eps:<4}: mass {:.6}  closed {:.6}  bound {:.6}  {}",
            m.mass_value,
            lemma_i_closed_form(eps),
            m.bound,
            if m.pass { "ok" } else { "FAILS" }
        );
    }
    println!("  bound holds up to eps ~ {:.4}", lemma_i_threshold(1.0 - 1e-9, 60)?);

    println!("\nwindow (eps t, (1-eps)t) at lam = 1/(t sqrt eps)");
    for eps in [1e-2, 1e-3, 1e-4, 1e-6] {
        let m = lemma_ii_margin(1.0, eps, eps)?;
        println!(
            "  eps = {eps:<7}: mass {:.8}  closed {:.8}  (sign-flipped form {:.8})",
            m.mass_value,
            lemma_ii_closed_form(eps),
            lemma_ii_sign_flipped_form(eps)
        );
    }
    Ok(())
}
