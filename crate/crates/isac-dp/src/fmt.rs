//! Deterministic number formatting shared by every CSV/JSON emitter.

/// Format `x` with `digits` significant digits, `%g`-style: plain decimal
/// when the exponent is moderate, scientific otherwise. No locale, no
/// trailing-zero trimming, so equal inputs always print identically.
pub fn sig(x: f64, digits: usize) -> String {
    let digits = digits.max(1);
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if (-4..digits as i32).contains(&exp) {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{:.*e}", digits - 1, x)
    }
}

/// Probabilities and masses: 12 significant digits.
pub fn prob(x: f64) -> String {
    sig(x, 12)
}

/// Rates, distortions, and other derived scalars: 6 significant digits.
pub fn rate(x: f64) -> String {
    sig(x, 6)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_and_scientific_ranges() {
        assert_eq!(sig(0.0, 6), "0");
        assert_eq!(sig(0.25, 6), "0.250000");
        assert_eq!(sig(1.0 / 3.0, 6), "0.333333");
        assert_eq!(sig(12345.678, 6), "12345.7");
        assert_eq!(sig(1.5e-9, 6), "1.50000e-9");
        assert_eq!(sig(-0.5, 3), "-0.500");
        assert_eq!(prob(0.1), "0.100000000000");
    }

    #[test]
    fn non_finite_values_pass_through() {
        assert_eq!(sig(f64::NAN, 6), "NaN");
        assert_eq!(sig(f64::INFINITY, 6), "inf");
    }
}
