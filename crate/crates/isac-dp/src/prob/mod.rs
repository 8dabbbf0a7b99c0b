//! Probability primitives over finite alphabets.
//!
//! Everything downstream (region evaluation, block-coding simulation, the
//! rate-distortion solvers) is expressed in terms of four value types:
//!
//! - [`Alphabet`] — a finite symbol set, optionally labeled.
//! - [`Dist`] — a pmf over one alphabet.
//! - [`Kernel`] — a conditional pmf from a product of alphabets to a product
//!   of alphabets, stored row-major (last axis fastest).
//! - [`Joint`] — a pmf over named axes, the workhorse for marginalization
//!   and information measures.
//!
//! Conventions used throughout the crate:
//!
//! - all logarithms are base 2, so entropies and rates are in **bits**;
//! - `0·log 0 = 0`;
//! - total variation is `½ Σ |p − q|`;
//! - pmfs must sum to 1 within [`NORMALIZATION_TOL`] at construction time.
//!   Out-of-tolerance input is rejected, never silently renormalized.

mod alphabet;
mod chain;
mod dist;
mod distortion;
mod joint;
mod kernel;
mod measures;

pub use alphabet::Alphabet;
pub use chain::{chain_join, ChainFactor};
pub(crate) use dist::sample_pmf;
pub use dist::Dist;
pub use distortion::Distortion;
pub use joint::Joint;
pub use kernel::Kernel;
pub(crate) use measures::tv_values;
pub use measures::{
    entropy_bits, expectation_gap_bound, expectation_gap_bound_joint, total_variation,
    total_variation_joint,
};

use crate::{Error, Result};

/// Absolute tolerance on `|Σp − 1|` accepted when constructing a pmf.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Validate that `values` is a pmf: finite, nonnegative entries summing to 1
/// within `tol`.
pub(crate) fn validate_pmf(values: &[f64], tol: f64) -> Result<()> {
    for (i, &v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite(i));
        }
        if v < 0.0 {
            return Err(Error::NegativeProbability { index: i, value: v });
        }
    }
    let sum: f64 = values.iter().sum();
    if (sum - 1.0).abs() > tol {
        return Err(Error::NotNormalized { sum, tol });
    }
    Ok(())
}

/// `-p log2 p` with the `0·log 0 = 0` convention.
#[inline]
pub(crate) fn h_term(p: f64) -> f64 {
    if p > 0.0 {
        -p * p.log2()
    } else {
        0.0
    }
}

/// Total number of joint states of a product alphabet.
pub(crate) fn product_size(alphabets: &[Alphabet]) -> usize {
    alphabets.iter().map(Alphabet::size).product()
}

/// Row-major flattening of a multi-index (last axis fastest).
#[inline]
pub(crate) fn flat_index(sizes: &[usize], idx: &[usize]) -> usize {
    debug_assert_eq!(sizes.len(), idx.len());
    let mut flat = 0;
    for (s, i) in sizes.iter().zip(idx) {
        debug_assert!(i < s);
        flat = flat * s + i;
    }
    flat
}

/// Inverse of [`flat_index`]; writes the multi-index into `out`.
#[inline]
pub(crate) fn unflatten(sizes: &[usize], mut flat: usize, out: &mut [usize]) {
    for k in (0..sizes.len()).rev() {
        out[k] = flat % sizes[k];
        flat /= sizes[k];
    }
    debug_assert_eq!(flat, 0);
}

/// Sizes of a list of alphabets.
pub(crate) fn sizes_of(alphabets: &[Alphabet]) -> Vec<usize> {
    alphabets.iter().map(Alphabet::size).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pmf_validation_rejects_bad_input() {
        assert!(validate_pmf(&[0.5, 0.5], NORMALIZATION_TOL).is_ok());
        assert!(matches!(
            validate_pmf(&[0.6, 0.5], NORMALIZATION_TOL),
            Err(Error::NotNormalized { .. })
        ));
        assert!(matches!(
            validate_pmf(&[-0.1, 1.1], NORMALIZATION_TOL),
            Err(Error::NegativeProbability { index: 0, .. })
        ));
        assert!(matches!(
            validate_pmf(&[f64::NAN, 1.0], NORMALIZATION_TOL),
            Err(Error::NonFinite(0))
        ));
    }

    #[test]
    fn flat_index_round_trips() {
        let sizes = [2usize, 3, 4];
        let mut idx = [0usize; 3];
        for flat in 0..24 {
            unflatten(&sizes, flat, &mut idx);
            assert_eq!(flat_index(&sizes, &idx), flat);
        }
        // last axis fastest: (0,0,1) -> 1, (0,1,0) -> 4, (1,0,0) -> 12
        assert_eq!(flat_index(&sizes, &[0, 0, 1]), 1);
        assert_eq!(flat_index(&sizes, &[0, 1, 0]), 4);
        assert_eq!(flat_index(&sizes, &[1, 0, 0]), 12);
    }
}
