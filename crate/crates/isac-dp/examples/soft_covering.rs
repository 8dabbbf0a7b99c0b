//! Measure how fast a random codebook's output law approaches the i.i.d.
//! law through a binary symmetric channel: above the mutual information the
//! exact total variation collapses with block length, below it the codebook
//! is too small to cover the output space and the distance stays put.
//!
//! Run with: `cargo run --example soft_covering`

use isac_dp::codesim;
use isac_dp::prob::{Alphabet, Dist, Kernel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p_u = Dist::uniform(Alphabet::bit());
    let flip = 0.2;
    let channel = Kernel::new(
        vec![Alphabet::bit()],
        vec![Alphabet::bit()],
        vec![vec![1.0 - flip, flip], vec![flip, 1.0 - flip]],
    )?;
    // I(U;V) = 1 − H2(0.2) ≈ 0.278 bits with the uniform input.
    let h2 = |p: f64| -p * p.log2() - (1.0 - p) * (1.0 - p).log2();
    let mi = 1.0 - h2(flip);
    println!("channel mutual information: {mi:.4} bits");
    println!();
    println!("rate_bits,n,mean_tv,min_tv,max_tv");
    for &rate in &[0.75, 0.40, 0.10] {
        for n in [2usize, 4, 6, 8, 10, 12] {
            let tvs = codesim::soft_covering_tv(&p_u, &channel, rate, n, 10, 7, 1 << 20)?;
            let mean = tvs.iter().sum::<f64>() / tvs.len() as f64;
            let min = tvs.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = tvs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            println!("{rate},{n},{mean:.6},{min:.6},{max:.6}");
        }
    }
    Ok(())
}
