use super::{validate_pmf, Alphabet, NORMALIZATION_TOL};
use crate::{Error, Result};

/// A pmf over a single [`Alphabet`].
#[derive(Debug, Clone, PartialEq)]
pub struct Dist {
    alphabet: Alphabet,
    probs: Vec<f64>,
}

impl Dist {
    /// Validates length, nonnegativity, and normalization within
    /// [`NORMALIZATION_TOL`]; out-of-tolerance input is rejected rather than
    /// renormalized.
    pub fn new(alphabet: Alphabet, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != alphabet.size() {
            return Err(Error::LengthMismatch {
                expected: alphabet.size(),
                got: probs.len(),
            });
        }
        validate_pmf(&probs, NORMALIZATION_TOL)?;
        Ok(Self { alphabet, probs })
    }

    /// `P(1) = p` on the binary alphabet.
    pub fn bernoulli(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!(
                "Bernoulli parameter {p} outside [0, 1]"
            )));
        }
        Self::new(Alphabet::bit(), vec![1.0 - p, p])
    }

    /// Uniform pmf over `alphabet`.
    pub fn uniform(alphabet: Alphabet) -> Self {
        let n = alphabet.size();
        Self {
            alphabet,
            probs: vec![1.0 / n as f64; n],
        }
    }

    /// Point mass at `symbol`.
    pub fn point_mass(alphabet: Alphabet, symbol: usize) -> Result<Self> {
        if symbol >= alphabet.size() {
            return Err(Error::InvalidParameter(format!(
                "symbol {symbol} outside alphabet of size {}",
                alphabet.size()
            )));
        }
        let mut probs = vec![0.0; alphabet.size()];
        probs[symbol] = 1.0;
        Ok(Self { alphabet, probs })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, symbol: usize) -> f64 {
        self.probs[symbol]
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Sample a symbol with cumulative inversion.
    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_pmf(&self.probs, rng)
    }
}

/// Sample an index from an (assumed normalized) pmf slice.
pub(crate) fn sample_pmf<R: rand::Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Rounding can leave acc marginally below 1; fall back to the last
    // positive-probability symbol.
    probs
        .iter()
        .rposition(|&p| p > 0.0)
        .expect("pmf has positive mass")
}
