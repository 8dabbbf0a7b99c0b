use super::{h_term, validate_pmf, Alphabet, Distortion, Kernel, NORMALIZATION_TOL};
use crate::{Error, Result};
use ndarray::{ArrayD, IxDyn};

/// A named axis of a [`Joint`].
#[derive(Debug, Clone, PartialEq)]
pub struct JointAxis {
    name: String,
    alphabet: Alphabet,
}

impl JointAxis {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }
}

/// A pmf over a product of named axes.
///
/// Axis names are unique; information measures and marginalization address
/// axes by name so that callers never juggle positional indices. The backing
/// array is kept in standard (row-major) layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Joint {
    axes: Vec<JointAxis>,
    probs: ArrayD<f64>,
}

impl Joint {
    pub fn new(axes: Vec<(String, Alphabet)>, probs: ArrayD<f64>) -> Result<Self> {
        let mut seen: Vec<&str> = Vec::with_capacity(axes.len());
        for (name, _) in &axes {
            if seen.contains(&name.as_str()) {
                return Err(Error::DuplicateAxis(name.clone()));
            }
            seen.push(name);
        }
        let expected: Vec<usize> = axes.iter().map(|(_, a)| a.size()).collect();
        if probs.shape() != expected.as_slice() {
            return Err(Error::ShapeMismatch(format!(
                "array shape {:?} does not match axis sizes {:?}",
                probs.shape(),
                expected
            )));
        }
        let probs = if probs.is_standard_layout() {
            probs
        } else {
            probs.as_standard_layout().to_owned()
        };
        validate_pmf(
            probs.as_slice().expect("standard layout"),
            NORMALIZATION_TOL,
        )?;
        Ok(Self {
            axes: axes
                .into_iter()
                .map(|(name, alphabet)| JointAxis { name, alphabet })
                .collect(),
            probs,
        })
    }

    /// Build from a row-major flat vector (last axis fastest).
    pub fn from_flat(axes: Vec<(String, Alphabet)>, flat: Vec<f64>) -> Result<Self> {
        let shape: Vec<usize> = axes.iter().map(|(_, a)| a.size()).collect();
        let probs = ArrayD::from_shape_vec(IxDyn(&shape), flat).map_err(|e| {
            Error::ShapeMismatch(format!("flat vector does not fill axis product: {e}"))
        })?;
        Self::new(axes, probs)
    }

    /// The empty product: zero axes carrying total mass 1. Used as the seed
    /// of chain composition.
    pub(crate) fn scalar_unit() -> Self {
        Self {
            axes: Vec::new(),
            probs: ArrayD::from_elem(IxDyn(&[]), 1.0),
        }
    }

    pub fn axes(&self) -> &[JointAxis] {
        &self.axes
    }

    pub fn axis_names(&self) -> Vec<&str> {
        self.axes.iter().map(|a| a.name.as_str()).collect()
    }

    pub fn n_axes(&self) -> usize {
        self.axes.len()
    }

    pub fn shape(&self) -> &[usize] {
        self.probs.shape()
    }

    pub fn axis_index(&self, name: &str) -> Result<usize> {
        self.axes
            .iter()
            .position(|a| a.name == name)
            .ok_or_else(|| Error::UnknownAxis(name.to_string()))
    }

    /// Flat view in row-major order.
    pub fn flat_values(&self) -> &[f64] {
        self.probs
            .as_slice()
            .expect("standard layout is maintained")
    }

    pub fn array(&self) -> &ArrayD<f64> {
        &self.probs
    }

    pub fn prob(&self, idx: &[usize]) -> f64 {
        self.probs[IxDyn(idx)]
    }

    /// Resolve a group of axis names to positions, rejecting unknown names
    /// and duplicates within the group.
    fn resolve(&self, names: &[&str]) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(names.len());
        for &n in names {
            let i = self.axis_index(n)?;
            if out.contains(&i) {
                return Err(Error::DuplicateAxis(n.to_string()));
            }
            out.push(i);
        }
        Ok(out)
    }

    fn check_disjoint(groups: &[&[&str]]) -> Result<()> {
        for (gi, g) in groups.iter().enumerate() {
            for name in g.iter() {
                for other in groups.iter().skip(gi + 1) {
                    if other.contains(name) {
                        return Err(Error::OverlappingAxes((*name).to_string()));
                    }
                }
            }
        }
        Ok(())
    }

    /// Marginal over `keep`, with output axes ordered exactly as `keep`.
    /// Mass is preserved.
    pub fn marginalize(&self, keep: &[&str]) -> Result<Joint> {
        let keep_pos = self.resolve(keep)?;
        let keep_sizes: Vec<usize> = keep_pos
            .iter()
            .map(|&p| self.axes[p].alphabet.size())
            .collect();
        let out_len: usize = keep_sizes.iter().product();
        let mut out = vec![0.0; out_len];
        // Row-major accumulation: for each source entry, project its
        // multi-index onto the kept axes.
        let src_shape = self.probs.shape().to_vec();
        let n_axes = src_shape.len();
        let mut idx = vec![0usize; n_axes];
        for &v in self.flat_values() {
            if v != 0.0 {
                let mut flat = 0;
                for (k, &p) in keep_pos.iter().enumerate() {
                    flat = flat * keep_sizes[k] + idx[p];
                }
                out[flat] += v;
            }
            // odometer increment (no-op after the final entry)
            for ax in (0..n_axes).rev() {
                idx[ax] += 1;
                if idx[ax] < src_shape[ax] {
                    break;
                }
                idx[ax] = 0;
            }
        }
        let axes = keep_pos
            .iter()
            .map(|&p| (self.axes[p].name.clone(), self.axes[p].alphabet.clone()))
            .collect();
        Joint::from_flat(axes, out)
    }

    /// View a single-axis joint as a [`super::Dist`].
    pub fn to_dist(&self) -> Result<super::Dist> {
        if self.axes.len() != 1 {
            return Err(Error::ShapeMismatch(format!(
                "expected exactly one axis, got {}",
                self.axes.len()
            )));
        }
        super::Dist::new(self.axes[0].alphabet.clone(), self.flat_values().to_vec())
    }

    /// Shannon entropy of the whole joint, in bits.
    pub fn entropy_bits(&self) -> f64 {
        self.flat_values().iter().map(|&p| h_term(p)).sum()
    }

    /// `I(A; B)` in bits between two disjoint axis groups, computed as
    /// `H(A) + H(B) − H(A,B)` on the `(A, B)` marginal.
    pub fn mutual_information(&self, a: &[&str], b: &[&str]) -> Result<f64> {
        if a.is_empty() || b.is_empty() {
            return Err(Error::InvalidParameter(
                "mutual information needs non-empty axis groups".into(),
            ));
        }
        Self::check_disjoint(&[a, b])?;
        let mut ab: Vec<&str> = a.to_vec();
        ab.extend_from_slice(b);
        let m_ab = self.marginalize(&ab)?;
        let h_ab = m_ab.entropy_bits();
        let h_a = m_ab.marginalize(a)?.entropy_bits();
        let h_b = m_ab.marginalize(b)?.entropy_bits();
        Ok(h_a + h_b - h_ab)
    }

    /// `I(A; B | C)` in bits, computed as `H(A,C) + H(B,C) − H(A,B,C) − H(C)`.
    pub fn conditional_mutual_information(
        &self,
        a: &[&str],
        b: &[&str],
        c: &[&str],
    ) -> Result<f64> {
        if a.is_empty() || b.is_empty() {
            return Err(Error::InvalidParameter(
                "conditional mutual information needs non-empty A and B groups".into(),
            ));
        }
        Self::check_disjoint(&[a, b, c])?;
        let mut abc: Vec<&str> = a.to_vec();
        abc.extend_from_slice(b);
        abc.extend_from_slice(c);
        let m = self.marginalize(&abc)?;
        let mut ac: Vec<&str> = a.to_vec();
        ac.extend_from_slice(c);
        let mut bc: Vec<&str> = b.to_vec();
        bc.extend_from_slice(c);
        let h_abc = m.entropy_bits();
        let h_ac = m.marginalize(&ac)?.entropy_bits();
        let h_bc = m.marginalize(&bc)?.entropy_bits();
        let h_c = if c.is_empty() {
            0.0
        } else {
            m.marginalize(c)?.entropy_bits()
        };
        Ok(h_ac + h_bc - h_abc - h_c)
    }

    /// Conditional entropy `H(A | B)` in bits.
    pub fn conditional_entropy(&self, a: &[&str], b: &[&str]) -> Result<f64> {
        Self::check_disjoint(&[a, b])?;
        let mut ab: Vec<&str> = a.to_vec();
        ab.extend_from_slice(b);
        let m_ab = self.marginalize(&ab)?;
        let h_ab = m_ab.entropy_bits();
        let h_b = if b.is_empty() {
            0.0
        } else {
            m_ab.marginalize(b)?.entropy_bits()
        };
        Ok(h_ab - h_b)
    }

    /// `E[d(S, Ŝ)]` between two axes under this joint.
    pub fn expected_distortion(
        &self,
        d: &Distortion,
        s_axis: &str,
        shat_axis: &str,
    ) -> Result<f64> {
        let m = self.marginalize(&[s_axis, shat_axis])?;
        let (ns, nr) = (m.shape()[0], m.shape()[1]);
        if d.n_source() != ns || d.n_repro() != nr {
            return Err(Error::ShapeMismatch(format!(
                "distortion table is {}×{}, joint marginal is {ns}×{nr}",
                d.n_source(),
                d.n_repro()
            )));
        }
        let flat = m.flat_values();
        let mut acc = 0.0;
        for s in 0..ns {
            for r in 0..nr {
                acc += flat[s * nr + r] * d.get(s, r);
            }
        }
        Ok(acc)
    }

    /// The conditional kernel `P(out | given)` extracted from this joint.
    /// Rows whose conditioning event has zero probability are filled with
    /// the uniform pmf (they are never reachable under this joint).
    pub fn conditional_kernel(&self, given: &[&str], out: &[&str]) -> Result<Kernel> {
        if out.is_empty() {
            return Err(Error::InvalidParameter(
                "conditional kernel needs at least one output axis".into(),
            ));
        }
        Self::check_disjoint(&[given, out])?;
        let mut all: Vec<&str> = given.to_vec();
        all.extend_from_slice(out);
        let m = self.marginalize(&all)?;
        let n_given: usize = m.shape()[..given.len()].iter().product();
        let n_out: usize = m.shape()[given.len()..].iter().product();
        let flat = m.flat_values();
        let mut rows = Vec::with_capacity(n_given);
        for g in 0..n_given {
            let slice = &flat[g * n_out..(g + 1) * n_out];
            let mass: f64 = slice.iter().sum();
            if mass > 0.0 {
                rows.push(slice.iter().map(|&p| p / mass).collect());
            } else {
                rows.push(vec![1.0 / n_out as f64; n_out]);
            }
        }
        let given_alphabets = m.axes[..given.len()]
            .iter()
            .map(|a| a.alphabet.clone())
            .collect();
        let out_alphabets = m.axes[given.len()..]
            .iter()
            .map(|a| a.alphabet.clone())
            .collect();
        Kernel::new(given_alphabets, out_alphabets, rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn two_axis(probs: [[f64; 2]; 2]) -> Joint {
        Joint::from_flat(
            vec![("A".into(), Alphabet::bit()), ("B".into(), Alphabet::bit())],
            probs.concat(),
        )
        .unwrap()
    }

    #[test]
    fn marginalize_preserves_mass_and_order() {
        let j = two_axis([[0.1, 0.2], [0.3, 0.4]]);
        let ma = j.marginalize(&["A"]).unwrap();
        assert_abs_diff_eq!(ma.flat_values()[0], 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(ma.flat_values()[1], 0.7, epsilon = 1e-15);
        // reversed keep order transposes
        let ba = j.marginalize(&["B", "A"]).unwrap();
        assert_eq!(ba.axis_names(), vec!["B", "A"]);
        assert_abs_diff_eq!(ba.prob(&[1, 0]), 0.2, epsilon = 1e-15);
        assert!(matches!(j.marginalize(&["C"]), Err(Error::UnknownAxis(_))));
    }

    #[test]
    fn independent_axes_have_zero_information() {
        // product of Bern(0.3) and Bern(0.6)
        let j = two_axis([[0.7 * 0.4, 0.7 * 0.6], [0.3 * 0.4, 0.3 * 0.6]]);
        let i = j.mutual_information(&["A"], &["B"]).unwrap();
        assert!(i.abs() < 1e-12, "I = {i}");
    }

    #[test]
    fn perfectly_correlated_axes_share_entropy() {
        let j = two_axis([[0.25, 0.0], [0.0, 0.75]]);
        let i = j.mutual_information(&["A"], &["B"]).unwrap();
        let h = j.marginalize(&["A"]).unwrap().entropy_bits();
        assert_abs_diff_eq!(i, h, epsilon = 1e-12);
        // H2(1/4) = 2 − (3/4)·log2(3)
        assert_abs_diff_eq!(h, 2.0 - 0.75 * 3f64.log2(), epsilon = 1e-12);
    }

    #[test]
    fn overlapping_groups_are_rejected() {
        let j = two_axis([[0.25, 0.25], [0.25, 0.25]]);
        assert!(matches!(
            j.mutual_information(&["A"], &["A"]),
            Err(Error::OverlappingAxes(_))
        ));
    }

    #[test]
    fn conditional_kernel_recovers_rows() {
        let j = two_axis([[0.1, 0.2], [0.3, 0.4]]);
        let k = j.conditional_kernel(&["A"], &["B"]).unwrap();
        assert_abs_diff_eq!(k.prob(0, 0), 0.1 / 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(k.prob(1, 1), 0.4 / 0.7, epsilon = 1e-15);
    }

    #[test]
    fn expected_distortion_hamming_is_disagreement_mass() {
        let j = two_axis([[0.1, 0.2], [0.3, 0.4]]);
        let d = Distortion::hamming(2).unwrap();
        let e = j.expected_distortion(&d, "A", "B").unwrap();
        assert_abs_diff_eq!(e, 0.5, epsilon = 1e-15);
    }
}
