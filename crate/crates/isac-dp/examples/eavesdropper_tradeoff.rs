//! Quantify what an insider of limited rate can tell an eavesdropper about
//! the reconstruction: sweep the insider's description rate and print the
//! guaranteed eavesdropper distortion, with and without the common
//! randomness that lets the eavesdropper recover the codeword.
//!
//! Run with: `cargo run --example eavesdropper_tradeoff`

use isac_dp::document;
use isac_dp::secrecy::{self, default_lambda_grid, eavesdropper_problems};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let doc = document::parse_document(include_str!("../data/binary_example.json"))?;
    let sys = doc.system()?;

    let joint = sys.build_joint()?;
    let (p_shat_y, p_u_shat_y) = eavesdropper_problems(sys, &joint)?;
    println!(
        "eavesdropper sees Y:      H(Shat|side) = {:.4} bits, floor = {:.4}",
        p_shat_y.conditional_entropy_bits(),
        p_shat_y.pointwise_floor()
    );
    println!(
        "eavesdropper sees (U, Y): H(Shat|side) = {:.4} bits, floor = {:.4}",
        p_u_shat_y.conditional_entropy_bits(),
        p_u_shat_y.pointwise_floor()
    );
    println!();

    // The curve the whole bound is built from.
    let curve = p_shat_y.rd_curve(&default_lambda_grid())?;
    let last = curve.points().last().unwrap();
    println!(
        "distortion-rate curve from Y alone: {} points, ends at ({:.4}, {:.4})",
        curve.points().len(),
        last.0,
        last.1
    );
    println!();

    println!("insider_rate,de_without_cr,de_with_cr_budget_0.2");
    for step in 0..=8 {
        let r_e = step as f64 * 0.05;
        let no_cr = secrecy::henchman_de(r_e, 0.0, &p_shat_y, &p_u_shat_y)?;
        let with_cr = secrecy::henchman_de(r_e, 0.2, &p_shat_y, &p_u_shat_y)?;
        println!("{r_e:.2},{no_cr},{with_cr}");
    }
    println!();

    // The same bound folded into a full region point.
    let point = secrecy::secure_region_point(sys, 0.1, None)?;
    println!(
        "at insider rate 0.1: R = {:.4}, Rc = {:.4}, D = {:.4}, guaranteed D_E = {:?}",
        point.r_bits, point.rc_bits, point.d, point.d_e
    );
    Ok(())
}
