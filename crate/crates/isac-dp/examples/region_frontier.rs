//! Trace the rate frontier of a one-parameter channel family: every
//! candidate system is corrected into the preserving set first, then its
//! main region point competes for a spot on the Pareto frontier (maximum
//! message rate, minimum common randomness) under a distortion budget.
//!
//! Run with: `cargo run --example region_frontier`

use isac_dp::fmt;
use isac_dp::regions::{trace_boundary, BinaryMultiplicativeFamily, SearchMode, SearchSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let family = BinaryMultiplicativeFamily { q: 0.25 };

    for (label, mode) in [("grid", SearchMode::Grid), ("random", SearchMode::Random)] {
        let frontier = trace_boundary(
            &family,
            &SearchSpec {
                mode,
                budget: 64,
                seed: 5,
            },
            0.45,
        )?;
        println!("{label} search, distortion budget 0.45:");
        println!("  R_bits,Rc_bits,D");
        for point in &frontier {
            println!(
                "  {},{},{}",
                fmt::rate(point.r_bits),
                fmt::rate(point.rc_bits),
                fmt::rate(point.d)
            );
        }
        println!();
    }
    Ok(())
}
