//! Cesàro and Abel means side by side for a few bounded sequences.
//!
//! The square wave has both means equal to 1/2. The dyadic block sequence
//! (blocks of ones and zeros doubling in length) has oscillating Cesàro
//! means, and its Abel means stay inside the oscillation band.

use tauberian::means::{abel_mean, cesaro_mean, BoundedSequence};

fn main() -> tauberian::Result<()> {
    let cases = [
        ("square wave", BoundedSequence::periodic(vec![1.0, 0.0])?),
        ("dyadic blocks", BoundedSequence::dyadic_blocks()),
        ("(1 + (-1)^floor(sqrt n)) / 2", BoundedSequence::formula(|n| ((n as f64).sqrt() as u64 % 2 == 0) as u8 as f64, 0.0, 1.0)?),
    ];
    for (name, seq) in &cases {
        println!("{name}");
        for n in [10, 100, 1_000, 10_000, 100_000] {
            println!("  cesaro  n = {n:>6}: {:.6}", cesaro_mean(seq, n)?);
        }
        for lambda in [0.1, 0.01, 0.001, 0.0001] {
            println!("  abel  lam = {lambda:>6}: {:.6}", abel_mean(seq, lambda, 1e-12)?);
        }
    }
    Ok(())
}
