use super::{flat_index, product_size, sizes_of, validate_pmf, Alphabet, Dist, NORMALIZATION_TOL};
use crate::{Error, Result};
use ndarray::Array2;

/// A stochastic kernel from a product of alphabets to a product of alphabets.
///
/// Row `r` is the conditional pmf given the input whose row-major flat index
/// (last input axis fastest) is `r`; columns are likewise the row-major flat
/// index over the output axes. An empty input list is allowed and gives a
/// one-row kernel, i.e. an unconditional source — this is how plain pmfs
/// enter chain composition.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    from: Vec<Alphabet>,
    to: Vec<Alphabet>,
    probs: Array2<f64>,
}

impl Kernel {
    /// Validates that every row is a pmf within [`NORMALIZATION_TOL`].
    pub fn new(from: Vec<Alphabet>, to: Vec<Alphabet>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if to.is_empty() {
            return Err(Error::InvalidParameter(
                "kernel needs at least one output axis".into(),
            ));
        }
        let n_rows = product_size(&from);
        let n_cols = product_size(&to);
        if rows.len() != n_rows {
            return Err(Error::LengthMismatch {
                expected: n_rows,
                got: rows.len(),
            });
        }
        let mut probs = Array2::zeros((n_rows, n_cols));
        for (r, row) in rows.iter().enumerate() {
            if row.len() != n_cols {
                return Err(Error::LengthMismatch {
                    expected: n_cols,
                    got: row.len(),
                });
            }
            validate_pmf(row, NORMALIZATION_TOL).map_err(|e| match e {
                Error::NegativeProbability { index, value } => Error::ShapeMismatch(format!(
                    "row {r}: negative probability {value:e} at column {index}"
                )),
                Error::NotNormalized { sum, tol } => Error::ShapeMismatch(format!(
                    "row {r}: probabilities sum to {sum:.17}, more than {tol:e} away from 1"
                )),
                Error::NonFinite(index) => {
                    Error::ShapeMismatch(format!("row {r}: non-finite value at column {index}"))
                }
                other => other,
            })?;
            for (c, &v) in row.iter().enumerate() {
                probs[(r, c)] = v;
            }
        }
        Ok(Self { from, to, probs })
    }

    /// Kernel whose every row is a point mass, from an explicit input→output
    /// symbol map over multi-indices.
    pub fn deterministic<F>(from: Vec<Alphabet>, to: Vec<Alphabet>, map: F) -> Result<Self>
    where
        F: Fn(&[usize]) -> Vec<usize>,
    {
        let in_sizes = sizes_of(&from);
        let out_sizes = sizes_of(&to);
        let n_rows = product_size(&from);
        let n_cols = product_size(&to);
        let mut rows = vec![vec![0.0; n_cols]; n_rows];
        let mut idx = vec![0usize; from.len()];
        for (r, row) in rows.iter_mut().enumerate() {
            super::unflatten(&in_sizes, r, &mut idx);
            let out = map(&idx);
            if out.len() != to.len() || out.iter().zip(&out_sizes).any(|(i, s)| i >= s) {
                return Err(Error::InvalidParameter(format!(
                    "deterministic map returned invalid output index {out:?} for input {idx:?}"
                )));
            }
            row[flat_index(&out_sizes, &out)] = 1.0;
        }
        Self::new(from, to, rows)
    }

    /// Unconditional source emitting one axis distributed as `dist`.
    pub fn from_dist(dist: &Dist) -> Self {
        Self {
            from: Vec::new(),
            to: vec![dist.alphabet().clone()],
            probs: Array2::from_shape_vec((1, dist.len()), dist.probs().to_vec())
                .expect("shape matches by construction"),
        }
    }

    pub fn from_axes(&self) -> &[Alphabet] {
        &self.from
    }

    pub fn to_axes(&self) -> &[Alphabet] {
        &self.to
    }

    pub fn n_rows(&self) -> usize {
        self.probs.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.probs.ncols()
    }

    /// Conditional pmf for the input with flat index `row`.
    pub fn row(&self, row: usize) -> &[f64] {
        self.probs
            .row(row)
            .to_slice()
            .expect("rows are contiguous in a standard-layout matrix")
    }

    /// Transition probability by flat input/output indices.
    #[inline]
    pub fn prob(&self, row: usize, col: usize) -> f64 {
        self.probs[(row, col)]
    }

    /// If the row is a point mass within `tol` (some entry ≥ 1 − tol), the
    /// output index carrying that mass.
    pub fn point_mass_target(&self, row: usize, tol: f64) -> Option<usize> {
        self.row(row).iter().position(|&p| p >= 1.0 - tol)
    }

    /// Sample an output flat index given the input flat index.
    pub fn sample_row<R: rand::Rng + ?Sized>(&self, row: usize, rng: &mut R) -> usize {
        super::dist::sample_pmf(self.row(row), rng)
    }

    /// Post-compose the output through `t` (a kernel whose input product has
    /// the same total size as this kernel's output product): rows become
    /// `row · T`. Used to correct an output distribution in place.
    pub fn compose_output(&self, t: &Kernel) -> Result<Kernel> {
        if product_size(&t.from) != self.n_cols() {
            return Err(Error::ShapeMismatch(format!(
                "composition mismatch: output product {} vs correction input product {}",
                self.n_cols(),
                product_size(&t.from)
            )));
        }
        let composed = self.probs.dot(&t.probs);
        let rows: Vec<Vec<f64>> = composed.rows().into_iter().map(|r| r.to_vec()).collect();
        Kernel::new(self.from.clone(), t.to.clone(), rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_denormalized_rows_with_location() {
        let bit = Alphabet::bit();
        let err = Kernel::new(
            vec![bit.clone()],
            vec![bit.clone()],
            vec![vec![0.5, 0.5], vec![0.7, 0.4]],
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 1"), "{msg}");
    }

    #[test]
    fn deterministic_xor() {
        let bit = Alphabet::bit();
        let k = Kernel::deterministic(vec![bit.clone(), bit.clone()], vec![bit.clone()], |idx| {
            vec![idx[0] ^ idx[1]]
        })
        .unwrap();
        // inputs (x, s) in row-major order: (0,0) (0,1) (1,0) (1,1)
        assert_eq!(k.row(0), &[1.0, 0.0]);
        assert_eq!(k.row(1), &[0.0, 1.0]);
        assert_eq!(k.row(2), &[0.0, 1.0]);
        assert_eq!(k.row(3), &[1.0, 0.0]);
        assert_eq!(k.point_mass_target(1, 1e-9), Some(1));
    }

    #[test]
    fn compose_output_is_matrix_product() {
        let bit = Alphabet::bit();
        let k = Kernel::new(
            vec![bit.clone()],
            vec![bit.clone()],
            vec![vec![0.75, 0.25], vec![0.25, 0.75]],
        )
        .unwrap();
        let flip = Kernel::deterministic(vec![bit.clone()], vec![bit.clone()], |i| vec![1 - i[0]])
            .unwrap();
        let c = k.compose_output(&flip).unwrap();
        assert_eq!(c.row(0), &[0.25, 0.75]);
        assert_eq!(c.row(1), &[0.75, 0.25]);
    }
}
