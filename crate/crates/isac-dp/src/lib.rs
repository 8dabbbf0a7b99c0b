//! Finite-alphabet probability toolkit and desk-scale simulator for
//! distribution-preserving sensing/communication systems.
//!
//! The crate is organized bottom-up:
//!
//! - [`prob`] — alphabets, pmfs, stochastic kernels, multi-axis joints, and
//!   the information measures everything else is built on (all rates in bits).
//! - [`document`] — the JSON interchange format for alphabets/dists/kernels
//!   and fully bound systems.
//! - [`regions`] — single-letter rate/distortion region evaluation for a
//!   state-dependent channel with an in-loop estimator, including membership
//!   checks for the distribution-preserving constraint sets.
//! - [`gaussian`] — closed-form region points and a Monte Carlo validator for
//!   the scalar Gaussian instance.
//! - [`codesim`] — block-coding simulator: random codebooks, a likelihood
//!   encoder, exact sequence-level distributions, and soft-covering decay
//!   measurements.
//! - [`transport`] — exact and greedy couplings between pmfs, used both as a
//!   distribution-correction step and to check Wasserstein/total-variation
//!   bounds.
//! - [`secrecy`] — side-information rate-distortion curves and the piecewise
//!   eavesdropper-distortion evaluation built on them.
//! - [`cli`] — config parsing, dispatch, and deterministic CSV/JSON output
//!   for the `isac-dp` binary.
//!
//! Runnable walkthroughs of each capability live in `examples/`.

pub mod cli;
pub mod codesim;
pub mod document;
pub mod fmt;
pub mod gaussian;
pub mod prob;
pub mod regions;
pub mod secrecy;
pub mod transport;

use thiserror::Error;

/// Crate-wide error type.
///
/// Construction errors are raised eagerly: a pmf or kernel that fails
/// validation is rejected outright rather than renormalized, so every value
/// that exists downstream is known to be well formed.
#[derive(Debug, Error)]
pub enum Error {
    #[error("alphabet must have at least one symbol")]
    EmptyAlphabet,
    #[error("expected {expected} labels, got {got}")]
    LabelCountMismatch { expected: usize, got: usize },
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("negative probability {value:e} at index {index}")]
    NegativeProbability { index: usize, value: f64 },
    #[error("probabilities sum to {sum:.17}, more than {tol:e} away from 1")]
    NotNormalized { sum: f64, tol: f64 },
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("unknown axis `{0}`")]
    UnknownAxis(String),
    #[error("duplicate axis `{0}`")]
    DuplicateAxis(String),
    #[error("axis `{0}` appears in more than one group")]
    OverlappingAxes(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("state space of {states} elements exceeds the cap of {cap}")]
    StateSpaceTooLarge { states: u128, cap: usize },
    #[error("document invalid:\n{}", diagnostics.join("\n"))]
    InvalidDocument { diagnostics: Vec<String> },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
