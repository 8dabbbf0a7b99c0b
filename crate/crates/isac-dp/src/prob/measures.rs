use super::{h_term, Dist, Joint};
use crate::{Error, Result};

/// Total variation distance `½ Σ |p − q|` between pmfs on the same alphabet.
pub fn total_variation(p: &Dist, q: &Dist) -> Result<f64> {
    if !p.alphabet().compatible(q.alphabet()) {
        return Err(Error::ShapeMismatch(format!(
            "alphabet sizes differ: {} vs {}",
            p.alphabet().size(),
            q.alphabet().size()
        )));
    }
    Ok(tv_values(p.probs(), q.probs()))
}

/// Total variation distance between joints with identical axis layout
/// (same names, same order, compatible alphabets).
pub fn total_variation_joint(p: &Joint, q: &Joint) -> Result<f64> {
    if p.axis_names() != q.axis_names() {
        return Err(Error::ShapeMismatch(format!(
            "axis names differ: {:?} vs {:?}",
            p.axis_names(),
            q.axis_names()
        )));
    }
    if p.shape() != q.shape() {
        return Err(Error::ShapeMismatch(format!(
            "axis sizes differ: {:?} vs {:?}",
            p.shape(),
            q.shape()
        )));
    }
    Ok(tv_values(p.flat_values(), q.flat_values()))
}

/// `½ Σ |p − q|` over raw aligned slices (callers guarantee alignment).
pub(crate) fn tv_values(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Shannon entropy of a pmf in bits, with `0·log 0 = 0`.
pub fn entropy_bits(p: &Dist) -> f64 {
    p.probs().iter().map(|&v| h_term(v)).sum()
}

/// Uniform bound on how far expectations of a bounded function can drift
/// between `P` and `Q`: for any `f` with `|f| ≤ Υ`,
/// `|E_P f − E_Q f| ≤ Υ · Σ|p − q| = 2 Υ · TV(P, Q)`.
pub fn expectation_gap_bound(upsilon: f64, p: &Dist, q: &Dist) -> Result<f64> {
    check_upsilon(upsilon)?;
    Ok(2.0 * upsilon * total_variation(p, q)?)
}

/// Joint-distribution version of [`expectation_gap_bound`].
pub fn expectation_gap_bound_joint(upsilon: f64, p: &Joint, q: &Joint) -> Result<f64> {
    check_upsilon(upsilon)?;
    Ok(2.0 * upsilon * total_variation_joint(p, q)?)
}

fn check_upsilon(upsilon: f64) -> Result<()> {
    if !upsilon.is_finite() || upsilon < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "bound Υ = {upsilon} must be finite and nonnegative"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::Alphabet;
    use approx::assert_abs_diff_eq;

    #[test]
    fn tv_matches_hand_values() {
        let p = Dist::bernoulli(0.3).unwrap();
        let q = Dist::bernoulli(0.5).unwrap();
        assert_abs_diff_eq!(total_variation(&p, &q).unwrap(), 0.2, epsilon = 1e-15);
        assert_eq!(total_variation(&p, &p).unwrap(), 0.0);
        let a = Dist::point_mass(Alphabet::new(3).unwrap(), 0).unwrap();
        let b = Dist::point_mass(Alphabet::new(3).unwrap(), 2).unwrap();
        assert_abs_diff_eq!(total_variation(&a, &b).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn tv_rejects_mismatched_alphabets() {
        let p = Dist::bernoulli(0.3).unwrap();
        let q = Dist::uniform(Alphabet::new(3).unwrap());
        assert!(total_variation(&p, &q).is_err());
    }

    #[test]
    fn entropy_matches_hand_values() {
        // H2(0.11) ≈ 0.499916 bits
        let p = Dist::bernoulli(0.11).unwrap();
        assert_abs_diff_eq!(entropy_bits(&p), 0.4999, epsilon = 1e-3);
        let u = Dist::uniform(Alphabet::new(8).unwrap());
        assert_abs_diff_eq!(entropy_bits(&u), 3.0, epsilon = 1e-12);
        let pm = Dist::point_mass(Alphabet::new(4).unwrap(), 2).unwrap();
        assert_eq!(entropy_bits(&pm), 0.0);
    }

    #[test]
    fn gap_bound_hand_value_and_validation() {
        let p = Dist::bernoulli(0.3).unwrap();
        let q = Dist::bernoulli(0.5).unwrap();
        assert_abs_diff_eq!(
            expectation_gap_bound(1.0, &p, &q).unwrap(),
            0.4,
            epsilon = 1e-15
        );
        assert!(expectation_gap_bound(-1.0, &p, &q).is_err());
        assert!(expectation_gap_bound(f64::NAN, &p, &q).is_err());
    }
}
