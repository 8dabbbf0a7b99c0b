//! Use exact optimal transport two ways: first as a plain coupling between
//! two Bernoulli laws (with the optimality certificate and the
//! total-variation bound), then as the correction step that moves a
//! non-preserving estimator's output law exactly onto the state law.
//!
//! Run with: `cargo run --example transport_correction`

use isac_dp::prob::{Dist, Distortion};
use isac_dp::regions::binary_multiplicative_system;
use isac_dp::transport;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = Dist::bernoulli(0.3)?;
    let q = Dist::bernoulli(0.5)?;
    let hamming = Distortion::hamming(2)?;

    let plan = transport::optimal_coupling(&p, &q, &hamming)?;
    println!("optimal coupling from Bern(0.3) to Bern(0.5) under Hamming cost:");
    for i in 0..2 {
        for j in 0..2 {
            let mass = plan.plan()[(i, j)];
            if mass > 0.0 {
                println!("  move {mass:.2} of the mass at {i} to {j}");
            }
        }
    }
    println!("transport cost        = {:.3}", plan.cost());
    println!(
        "certified optimal     = {}",
        plan.certify_optimal(&hamming, 1e-9)
    );
    let check = transport::wasserstein_bound_check(&p, &q, &hamming)?;
    println!(
        "W1 = {:.3} ≤ d_max·Σ|p−q| = {:.3}: {}",
        check.w1, check.bound, check.holds
    );

    // Same machinery, now correcting a whole system: the threshold estimator
    // below skews the reconstruction law, and post-composing the cheapest
    // correction kernel pins it back onto the state law.
    let skewed = binary_multiplicative_system(0.25, 0.75)?;
    let before = skewed.membership()?;
    let fixed = skewed.project_estimator_preserving()?;
    let after = fixed.membership()?;
    println!();
    println!(
        "threshold estimator   : TV = {:.6}, preserving = {}",
        before.tv_s_vs_shat, before.in_p
    );
    println!(
        "after the correction  : TV = {:.2e}, preserving = {}",
        after.tv_s_vs_shat, after.in_p
    );
    println!(
        "distortion paid for it: {:.6} -> {:.6}",
        skewed.theorem1_point()?.d,
        fixed.theorem1_point()?.d
    );
    Ok(())
}
