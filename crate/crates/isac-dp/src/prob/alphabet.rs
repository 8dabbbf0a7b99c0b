use crate::{Error, Result};

/// A finite symbol set `{0, …, size−1}`, optionally carrying display labels.
///
/// Symbols are always addressed by index; labels only affect formatting and
/// document round-trips.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    size: usize,
    labels: Option<Vec<String>>,
}

impl Alphabet {
    /// An unlabeled alphabet of `size` symbols.
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::EmptyAlphabet);
        }
        Ok(Self { size, labels: None })
    }

    /// An alphabet whose symbols carry distinct labels.
    pub fn with_labels(size: usize, labels: Vec<String>) -> Result<Self> {
        if size == 0 {
            return Err(Error::EmptyAlphabet);
        }
        if labels.len() != size {
            return Err(Error::LabelCountMismatch {
                expected: size,
                got: labels.len(),
            });
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::DuplicateLabel(l.clone()));
            }
        }
        Ok(Self {
            size,
            labels: Some(labels),
        })
    }

    /// Convenience: the binary alphabet labeled "0"/"1".
    pub fn bit() -> Self {
        Self::with_labels(2, vec!["0".into(), "1".into()]).expect("static labels are valid")
    }

    /// A one-symbol alphabet, used to model an absent variable (any quantity
    /// conditioned on it is unconditional, and information shared with it
    /// is zero).
    pub fn singleton() -> Self {
        Self::new(1).expect("1 > 0")
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Display label of symbol `i` (its index if unlabeled).
    pub fn label(&self, i: usize) -> String {
        match &self.labels {
            Some(ls) => ls[i].clone(),
            None => i.to_string(),
        }
    }

    /// Two alphabets are compatible when they have the same size; labels are
    /// cosmetic and do not affect compatibility.
    pub fn compatible(&self, other: &Self) -> bool {
        self.size == other.size
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_and_bad_labels() {
        assert!(matches!(Alphabet::new(0), Err(Error::EmptyAlphabet)));
        assert!(matches!(
            Alphabet::with_labels(2, vec!["a".into()]),
            Err(Error::LabelCountMismatch {
                expected: 2,
                got: 1
            })
        ));
        assert!(matches!(
            Alphabet::with_labels(2, vec!["a".into(), "a".into()]),
            Err(Error::DuplicateLabel(_))
        ));
    }

    #[test]
    fn labels_are_cosmetic_for_compatibility() {
        let a = Alphabet::new(2).unwrap();
        let b = Alphabet::bit();
        assert!(a.compatible(&b));
        assert_ne!(a, b);
    }
}
