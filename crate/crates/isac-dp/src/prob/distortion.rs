use crate::{Error, Result};
use ndarray::Array2;

/// A per-letter distortion table `d(s, ŝ) ≥ 0` with its maximum cached.
///
/// Rows index the source symbol, columns the reproduction symbol. A sequence
/// pair is scored by the average of per-letter distortions.
#[derive(Debug, Clone, PartialEq)]
pub struct Distortion {
    matrix: Array2<f64>,
    d_max: f64,
}

impl Distortion {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::InvalidParameter(
                "distortion table must be non-empty".into(),
            ));
        }
        let cols = rows[0].len();
        let mut matrix = Array2::zeros((rows.len(), cols));
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::ShapeMismatch(format!(
                    "distortion row {i} has {} entries, expected {cols}",
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "distortion entry ({i}, {j}) = {v} must be finite and >= 0"
                    )));
                }
                matrix[(i, j)] = v;
            }
        }
        let d_max = matrix.iter().cloned().fold(0.0, f64::max);
        Ok(Self { matrix, d_max })
    }

    /// Hamming distortion on `n` symbols: 0 on the diagonal, 1 elsewhere.
    pub fn hamming(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter(
                "Hamming distortion needs at least one symbol".into(),
            ));
        }
        let rows = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 0.0 } else { 1.0 }).collect())
            .collect();
        Self::new(rows)
    }

    #[inline]
    pub fn get(&self, s: usize, shat: usize) -> f64 {
        self.matrix[(s, shat)]
    }

    pub fn d_max(&self) -> f64 {
        self.d_max
    }

    /// Number of source symbols (rows).
    pub fn n_source(&self) -> usize {
        self.matrix.nrows()
    }

    /// Number of reproduction symbols (columns).
    pub fn n_repro(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hamming_and_validation() {
        let h = Distortion::hamming(3).unwrap();
        assert_eq!(h.get(0, 0), 0.0);
        assert_eq!(h.get(0, 2), 1.0);
        assert_eq!(h.d_max(), 1.0);
        assert!(Distortion::new(vec![vec![0.0], vec![1.0, 2.0]]).is_err());
        assert!(Distortion::new(vec![vec![-1.0]]).is_err());
    }
}
