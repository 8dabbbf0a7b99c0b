//! Walk through the bundled binary multiplicative-feedback system: check
//! that its estimator preserves the state law, then print the rate points
//! the region evaluator knows how to compute for it.
//!
//! Run with: `cargo run --example binary_example`

use isac_dp::document;
use isac_dp::fmt;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let doc = document::parse_document(include_str!("../data/binary_example.json"))?;
    let sys = doc.system()?;

    let membership = sys.membership()?;
    println!(
        "TV(P_S, P_Shat)            = {}",
        fmt::prob(membership.tv_s_vs_shat)
    );
    println!("preserving                 = {}", membership.in_p);
    println!("no common randomness       = {}", membership.in_p_ncr);
    println!("deterministic-encoder form = {}", membership.in_p_de);
    println!();

    // Not every specialization applies to every system; the ones whose
    // structural preconditions fail report why instead of a number.
    let labeled = [
        ("main region point", sys.theorem1_point()),
        ("no-common-randomness corner", sys.ncr_point()),
        ("causal, strictly so", sys.causal_strict_point()),
        (
            "deterministic-encoder corner",
            sys.deterministic_encoder_point(),
        ),
        (
            "deterministic-channel capacity",
            sys.deterministic_capacity_point(),
        ),
    ];
    for (name, point) in labeled {
        match point {
            Ok(point) => println!(
                "{name:32} R = {} bits, Rc = {} bits, D = {}, feasible = {}",
                fmt::rate(point.r_bits),
                fmt::rate(point.rc_bits),
                fmt::rate(point.d),
                point.feasible
            ),
            Err(err) => println!("{name:32} skipped: {err}"),
        }
    }

    // The rate is positive even though the estimator is pinned to the state
    // law; the diagnostics carry the mutual informations behind it.
    let point = sys.theorem1_point()?;
    for (k, v) in &point.diagnostics {
        println!("  {k:24} = {}", fmt::rate(*v));
    }
    Ok(())
}
