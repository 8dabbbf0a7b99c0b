//! Desk-scale block-coding simulator: random codebooks, the likelihood
//! encoder, a joint-typicality decoder, and exact sequence-level
//! distributions at small block lengths.
//!
//! Two sequence laws are compared. The *idealized* law draws the triple
//! `(M, I, Γ)` uniformly and then the side-information sequence through the
//! per-symbol kernel `P(Se | U)` applied to the selected codeword. The
//! *induced* law is what the actual system does: `(M, Γ)` uniform, the
//! sequence `Se^n` i.i.d. from `P_Se`, and the bin index `I` sampled by the
//! likelihood encoder. Everything downstream of `(U^n, Se^n)` is shared, so
//! the total-variation distance between the two laws is exactly the distance
//! between their `(M, I, Γ, Se^n)` heads — and, because the encoder weight
//! equals the idealized conditional of `I`, also between the
//! `(M, Γ, Se^n)` marginals. Both routes are computed and can be asserted
//! equal.
//!
//! Rates are specified as integer log-sizes per block, `(k_m, k_i, k_g)`,
//! giving `2^k` messages/bins/common-randomness values and per-symbol rates
//! `k/n` bits — no rounding ambiguity. Exact enumeration is guarded by a
//! configurable state cap (default `2^20`).

use crate::prob::{sample_pmf, Alphabet, Dist, Kernel};
use crate::regions::{axis, IsacSystem};
use crate::{Error, Result};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Default cap on enumerated joint states in exact mode.
pub const DEFAULT_STATE_CAP: usize = 1 << 20;

/// Cap on `codewords × block length` at generation time.
const GENERATION_CAP: u128 = 1 << 26;

fn checked_pow(base: usize, exp: usize, cap: usize) -> Result<usize> {
    let mut acc: u128 = 1;
    for _ in 0..exp {
        acc = acc.saturating_mul(base as u128);
        if acc > cap as u128 {
            return Err(Error::StateSpaceTooLarge { states: acc, cap });
        }
    }
    Ok(acc as usize)
}

fn unflatten_base(base: usize, mut flat: usize, out: &mut [usize]) {
    for slot in out.iter_mut().rev() {
        *slot = flat % base;
        flat /= base;
    }
}

/// Elementwise product distribution `Π_t rows[t]` over the sequence space,
/// row-major with the last position fastest.
fn sequence_product(rows: &[&[f64]]) -> Vec<f64> {
    let mut acc = vec![1.0];
    for row in rows {
        let mut next = vec![0.0; acc.len() * row.len()];
        for (i, &a) in acc.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (j, &r) in row.iter().enumerate() {
                next[i * row.len() + j] = a * r;
            }
        }
        acc = next;
    }
    acc
}

/// The i.i.d. product pmf `p^n` as a flat vector of length `|p|^n`.
pub fn iid_product(p: &Dist, n: usize, cap: usize) -> Result<Vec<f64>> {
    checked_pow(p.len(), n, cap)?;
    let rows: Vec<&[f64]> = (0..n).map(|_| p.probs()).collect();
    Ok(sequence_product(&rows))
}

fn tv_slices(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

// ---------------------------------------------------------------------------
// Codebook
// ---------------------------------------------------------------------------

/// A random codebook: `2^km · 2^ki · 2^kg` length-`n` words over the `U`
/// alphabet, indexed by `(message, bin, common randomness)`.
#[derive(Debug, Clone)]
pub struct Codebook {
    n: usize,
    km: u32,
    ki: u32,
    kg: u32,
    alphabet: Alphabet,
    words: Vec<Vec<usize>>,
    seed: u64,
}

impl Codebook {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn log_sizes(&self) -> (u32, u32, u32) {
        (self.km, self.ki, self.kg)
    }

    pub fn n_messages(&self) -> usize {
        1 << self.km
    }

    /// Number of bin indices (the private-randomization axis).
    pub fn n_bins(&self) -> usize {
        1 << self.ki
    }

    pub fn n_common(&self) -> usize {
        1 << self.kg
    }

    pub fn n_words(&self) -> usize {
        self.words.len()
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn flat(&self, m: usize, i: usize, g: usize) -> usize {
        (m * self.n_bins() + i) * self.n_common() + g
    }

    pub fn word(&self, m: usize, i: usize, g: usize) -> &[usize] {
        &self.words[self.flat(m, i, g)]
    }

    /// Build from explicit words (mainly for tests and worked examples);
    /// word count must be exactly `2^(km+ki+kg)` in `(m, i, g)` order.
    pub fn from_words(
        alphabet: Alphabet,
        n: usize,
        km: u32,
        ki: u32,
        kg: u32,
        words: Vec<Vec<usize>>,
    ) -> Result<Self> {
        let want = 1usize << (km + ki + kg);
        if words.len() != want {
            return Err(Error::LengthMismatch {
                expected: want,
                got: words.len(),
            });
        }
        for w in &words {
            if w.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    got: w.len(),
                });
            }
            if let Some(&bad) = w.iter().find(|&&s| s >= alphabet.size()) {
                return Err(Error::InvalidParameter(format!(
                    "codeword symbol {bad} outside alphabet of size {}",
                    alphabet.size()
                )));
            }
        }
        Ok(Self {
            n,
            km,
            ki,
            kg,
            alphabet,
            words,
            seed: 0,
        })
    }
}

/// Draw a codebook i.i.d. from `p_u`, deterministically in `seed` (each word
/// has its own RNG stream, so generation order and thread count are
/// irrelevant).
pub fn generate_codebook(
    p_u: &Dist,
    n: usize,
    km: u32,
    ki: u32,
    kg: u32,
    seed: u64,
) -> Result<Codebook> {
    if n == 0 {
        return Err(Error::InvalidParameter("block length must be >= 1".into()));
    }
    if km + ki + kg > 32 {
        return Err(Error::InvalidParameter(format!(
            "log-sizes km+ki+kg = {} exceed 32",
            km + ki + kg
        )));
    }
    let total = 1u128 << (km + ki + kg);
    if total * n as u128 > GENERATION_CAP {
        return Err(Error::StateSpaceTooLarge {
            states: total * n as u128,
            cap: GENERATION_CAP as usize,
        });
    }
    let words: Vec<Vec<usize>> = (0..total as usize)
        .into_par_iter()
        .map(|w| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            rng.set_stream(w as u64);
            (0..n).map(|_| sample_pmf(p_u.probs(), &mut rng)).collect()
        })
        .collect();
    Ok(Codebook {
        n,
        km,
        ki,
        kg,
        alphabet: p_u.alphabet().clone(),
        words,
        seed,
    })
}

// ---------------------------------------------------------------------------
// Likelihood encoder
// ---------------------------------------------------------------------------

/// Normalized bin weights `w_i ∝ Π_t P(se_t | u_t(m, i, γ))` for the
/// observed side-information sequence. Errors if the sequence has zero
/// likelihood under every codeword in the bin.
pub fn likelihood_weights(
    cb: &Codebook,
    se_given_u: &Kernel,
    m: usize,
    g: usize,
    se_seq: &[usize],
) -> Result<Vec<f64>> {
    if se_seq.len() != cb.n() {
        return Err(Error::LengthMismatch {
            expected: cb.n(),
            got: se_seq.len(),
        });
    }
    if m >= cb.n_messages() || g >= cb.n_common() {
        return Err(Error::InvalidParameter(format!(
            "index (m={m}, g={g}) outside codebook of {}x{} (messages x common)",
            cb.n_messages(),
            cb.n_common()
        )));
    }
    let mut weights = Vec::with_capacity(cb.n_bins());
    for i in 0..cb.n_bins() {
        let word = cb.word(m, i, g);
        let like: f64 = word
            .iter()
            .zip(se_seq)
            .map(|(&u, &se)| se_given_u.prob(u, se))
            .product();
        weights.push(like);
    }
    let sum: f64 = weights.iter().sum();
    if sum <= 0.0 {
        return Err(Error::Precondition(
            "side-information sequence has zero likelihood under every codeword in the bin".into(),
        ));
    }
    for w in &mut weights {
        *w /= sum;
    }
    Ok(weights)
}

/// Sample a bin index with the exact likelihood weights.
pub fn likelihood_encoder<R: Rng + ?Sized>(
    cb: &Codebook,
    se_given_u: &Kernel,
    m: usize,
    g: usize,
    se_seq: &[usize],
    rng: &mut R,
) -> Result<usize> {
    let weights = likelihood_weights(cb, se_given_u, m, g, se_seq)?;
    Ok(sample_pmf(&weights, rng))
}

// ---------------------------------------------------------------------------
// Single-letter view of a system
// ---------------------------------------------------------------------------

/// Per-symbol kernels precomputed from a system, shaped for sequence work:
/// everything downstream of `(U, Se)` collapses to per-symbol conditionals
/// because the factor chain is memoryless.
#[derive(Debug, Clone)]
pub struct SystemView {
    sys: IsacSystem,
    p_u: Dist,
    p_se: Dist,
    se_given_u: Kernel,
    s_given_se: Kernel,
    /// Rows over `(u, se)`, columns `Shat`.
    shat_given_use: Array2<f64>,
    /// Rows over `(u, se)`, columns `Y`.
    y_given_use: Array2<f64>,
    /// Expected single-symbol distortion at each `(u, se)`.
    e_d: Array2<f64>,
    /// Single-letter joint `P(U, Y)`, the typicality reference.
    p_uy: Array2<f64>,
}

impl SystemView {
    pub fn new(sys: &IsacSystem) -> Result<Self> {
        let joint = sys.build_joint()?;
        let p_u = joint.marginalize(&[axis::U])?.to_dist()?;
        let p_se = joint.marginalize(&[axis::SE])?.to_dist()?;
        let se_given_u = joint.conditional_kernel(&[axis::U], &[axis::SE])?;
        let s_given_se = joint.conditional_kernel(&[axis::SE], &[axis::S])?;

        let n_u = p_u.len();
        let n_se = p_se.len();
        let n_s = s_given_se.to_axes()[0].size();
        let n_x = sys.x_given_use().to_axes()[0].size();
        let n_y = sys.channel().to_axes()[0].size();
        let n_z = sys.channel().to_axes()[1].size();
        let n_shat = sys.estimator().to_axes()[0].size();

        let mut shat_given_use = Array2::zeros((n_u * n_se, n_shat));
        let mut y_given_use = Array2::zeros((n_u * n_se, n_y));
        let mut e_d = Array2::zeros((n_u, n_se));
        for u in 0..n_u {
            for se in 0..n_se {
                let row = u * n_se + se;
                for s in 0..n_s {
                    let ps = s_given_se.prob(se, s);
                    if ps == 0.0 {
                        continue;
                    }
                    for x in 0..n_x {
                        let px = sys.x_given_use().prob(u * n_se + se, x);
                        if px == 0.0 {
                            continue;
                        }
                        for y in 0..n_y {
                            for z in 0..n_z {
                                let pyz = sys.channel().prob(x * n_s + s, y * n_z + z);
                                if pyz == 0.0 {
                                    continue;
                                }
                                let base = ps * px * pyz;
                                y_given_use[(row, y)] += base;
                                let est_row = (x * n_se + se) * n_z + z;
                                for shat in 0..n_shat {
                                    let psh = sys.estimator().prob(est_row, shat);
                                    if psh == 0.0 {
                                        continue;
                                    }
                                    shat_given_use[(row, shat)] += base * psh;
                                    e_d[(u, se)] += base * psh * sys.distortion().get(s, shat);
                                }
                            }
                        }
                    }
                }
            }
        }

        let uy = joint.marginalize(&[axis::U, axis::Y])?;
        let p_uy =
            Array2::from_shape_vec((n_u, n_y), uy.flat_values().to_vec()).expect("marginal shape");

        Ok(Self {
            sys: sys.clone(),
            p_u,
            p_se,
            se_given_u,
            s_given_se,
            shat_given_use,
            y_given_use,
            e_d,
            p_uy,
        })
    }

    pub fn p_u(&self) -> &Dist {
        &self.p_u
    }

    pub fn p_se(&self) -> &Dist {
        &self.p_se
    }

    pub fn se_given_u(&self) -> &Kernel {
        &self.se_given_u
    }

    pub fn p_uy(&self) -> &Array2<f64> {
        &self.p_uy
    }

    pub fn n_shat(&self) -> usize {
        self.shat_given_use.ncols()
    }

    pub fn n_y(&self) -> usize {
        self.y_given_use.ncols()
    }

    /// The state marginal `P_S`, the preservation target for output checks.
    pub fn p_s(&self) -> Result<Dist> {
        self.sys.build_joint()?.marginalize(&[axis::S])?.to_dist()
    }
}

// ---------------------------------------------------------------------------
// Typicality decoding
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DecodeOutcome {
    /// Unique jointly typical codeword found.
    Decoded { m: usize, i: usize },
    /// No codeword typical with the received sequence.
    NoneTypical,
    /// More than one typical codeword.
    Ambiguous,
}

fn is_typical(
    word: &[usize],
    y_seq: &[usize],
    p_uy: &Array2<f64>,
    delta: f64,
    counts: &mut [f64],
) -> bool {
    counts.fill(0.0);
    let n_y = p_uy.ncols();
    let inv_n = 1.0 / word.len() as f64;
    for (&u, &y) in word.iter().zip(y_seq) {
        counts[u * n_y + y] += inv_n;
    }
    counts
        .iter()
        .zip(p_uy.iter())
        .all(|(&c, &p)| (c - p).abs() <= delta)
}

/// Look for the unique `(m, i)` whose codeword (for the given common
/// randomness `g`) is jointly typical with `y_seq`: every empirical
/// `(u, y)` frequency within `delta` of the single-letter joint.
pub fn typicality_decode(
    cb: &Codebook,
    p_uy: &Array2<f64>,
    g: usize,
    y_seq: &[usize],
    delta: f64,
) -> Result<DecodeOutcome> {
    if delta.is_nan() || delta <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "typicality slack delta = {delta} must be positive"
        )));
    }
    if y_seq.len() != cb.n() {
        return Err(Error::LengthMismatch {
            expected: cb.n(),
            got: y_seq.len(),
        });
    }
    let mut counts = vec![0.0; p_uy.len()];
    let mut found: Option<(usize, usize)> = None;
    for m in 0..cb.n_messages() {
        for i in 0..cb.n_bins() {
            if is_typical(cb.word(m, i, g), y_seq, p_uy, delta, &mut counts) {
                if found.is_some() {
                    return Ok(DecodeOutcome::Ambiguous);
                }
                found = Some((m, i));
            }
        }
    }
    Ok(match found {
        Some((m, i)) => DecodeOutcome::Decoded { m, i },
        None => DecodeOutcome::NoneTypical,
    })
}

/// Per-`g` decode lookup over all `y^n`: entry is the decoded message, or
/// `n_messages` as the failure sentinel (none/ambiguous).
fn decode_tables(
    cb: &Codebook,
    p_uy: &Array2<f64>,
    delta: f64,
    yn: usize,
    n_y: usize,
) -> Vec<Vec<u32>> {
    let fail = cb.n_messages() as u32;
    (0..cb.n_common())
        .into_par_iter()
        .map(|g| {
            let mut table = vec![fail; yn];
            let mut y_buf = vec![0usize; cb.n()];
            let mut counts = vec![0.0; p_uy.len()];
            for (y_flat, slot) in table.iter_mut().enumerate() {
                unflatten_base(n_y, y_flat, &mut y_buf);
                let mut found: Option<u32> = None;
                'scan: for m in 0..cb.n_messages() {
                    for i in 0..cb.n_bins() {
                        if is_typical(cb.word(m, i, g), &y_buf, p_uy, delta, &mut counts) {
                            if found.is_some() {
                                found = None;
                                break 'scan;
                            }
                            found = Some(m as u32);
                        }
                    }
                }
                if let Some(m) = found {
                    *slot = m;
                }
            }
            table
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Exact sequence laws
// ---------------------------------------------------------------------------

/// The two `(M, I, Γ, Se^n)` head tensors side by side.
#[derive(Debug, Clone)]
pub struct HeadLaws {
    n_messages: usize,
    n_bins: usize,
    n_common: usize,
    n_se_seq: usize,
    pub idealized: Vec<f64>,
    pub induced: Vec<f64>,
}

impl HeadLaws {
    /// Route A: total variation over the full `(M, I, Γ, Se^n)` head.
    pub fn tv(&self) -> f64 {
        tv_slices(&self.idealized, &self.induced)
    }

    /// Route B: total variation after marginalizing the bin index, over
    /// `(M, Γ, Se^n)`. Equal to route A exactly when the encoder weight
    /// matches the idealized conditional of `I` — which it does by
    /// construction, so the two routes cross-check each other.
    pub fn tv_after_bin_marginalization(&self) -> f64 {
        let (mm, ii, gg, ss) = (self.n_messages, self.n_bins, self.n_common, self.n_se_seq);
        let mut q = vec![0.0; mm * gg * ss];
        let mut qb = vec![0.0; mm * gg * ss];
        for m in 0..mm {
            for i in 0..ii {
                for g in 0..gg {
                    let src = ((m * ii + i) * gg + g) * ss;
                    let dst = (m * gg + g) * ss;
                    for s in 0..ss {
                        q[dst + s] += self.idealized[src + s];
                        qb[dst + s] += self.induced[src + s];
                    }
                }
            }
        }
        tv_slices(&q, &qb)
    }
}

/// Compute both heads exactly. Only the side-information sequence space is
/// enumerated (`|Se|^n` states per codeword triple), so this is much lighter
/// than the full downstream enumeration.
pub fn head_laws(view: &SystemView, cb: &Codebook, cap: usize) -> Result<HeadLaws> {
    let n = cb.n();
    let n_se = view.p_se.len();
    let sen = checked_pow(n_se, n, cap)?;
    let (mm, ii, gg) = (cb.n_messages(), cb.n_bins(), cb.n_common());
    let states = (mm as u128) * (ii as u128) * (gg as u128) * (sen as u128);
    if states > cap as u128 {
        return Err(Error::StateSpaceTooLarge { states, cap });
    }
    let mut idealized = vec![0.0; states as usize];
    let mut induced = vec![0.0; states as usize];
    let inv_mig = 1.0 / (mm * ii * gg) as f64;
    let inv_mg = 1.0 / (mm * gg) as f64;
    let mut se_buf = vec![0usize; n];
    let mut likes = vec![0.0; ii];
    for se_flat in 0..sen {
        unflatten_base(n_se, se_flat, &mut se_buf);
        let pse: f64 = se_buf.iter().map(|&s| view.p_se.prob(s)).product();
        for m in 0..mm {
            for g in 0..gg {
                let mut sum = 0.0;
                for (i, like) in likes.iter_mut().enumerate() {
                    *like = cb
                        .word(m, i, g)
                        .iter()
                        .zip(&se_buf)
                        .map(|(&u, &se)| view.se_given_u.prob(u, se))
                        .product();
                    sum += *like;
                }
                if sum <= 0.0 {
                    if pse > 0.0 {
                        return Err(Error::Precondition(format!(
                            "encoder weights vanish for a positive-probability sequence \
                             (m={m}, g={g}, se^n flat index {se_flat})"
                        )));
                    }
                    continue;
                }
                for (i, &like) in likes.iter().enumerate() {
                    let idx = ((m * ii + i) * gg + g) * sen + se_flat;
                    idealized[idx] = inv_mig * like;
                    induced[idx] = inv_mg * pse * like / sum;
                }
            }
        }
    }
    Ok(HeadLaws {
        n_messages: mm,
        n_bins: ii,
        n_common: gg,
        n_se_seq: sen,
        idealized,
        induced,
    })
}

/// One fully enumerated sequence law with its derived summaries.
#[derive(Debug, Clone)]
pub struct SequenceLaw {
    /// Output-sequence marginal over `Shat^n` (flat, last symbol fastest).
    pub shat_marginal: Vec<f64>,
    /// Joint law of `(M, decoded M̂)`; the extra final column is the
    /// decode-failure outcome (none or ambiguous).
    pub message_pair: Array2<f64>,
    /// `Pr{M̂ ≠ M}` (failures count as errors).
    pub p_err: f64,
    /// Probability of the decode-failure outcome alone.
    pub decode_failure: f64,
    /// Expected per-symbol distortion `E[d(S^n, Ŝ^n)]/n`.
    pub mean_distortion: f64,
}

impl SequenceLaw {
    /// TV between the output marginal and the i.i.d. product `p^n`.
    pub fn output_tv_vs_iid(&self, p: &Dist, n: usize) -> Result<f64> {
        let prod = iid_product(p, n, self.shat_marginal.len())?;
        if prod.len() != self.shat_marginal.len() {
            return Err(Error::LengthMismatch {
                expected: self.shat_marginal.len(),
                got: prod.len(),
            });
        }
        Ok(tv_slices(&self.shat_marginal, &prod))
    }
}

struct LawAccumulator {
    shat: Vec<f64>,
    pair: Array2<f64>,
    distortion: f64,
}

impl LawAccumulator {
    fn new(shn: usize, mm: usize) -> Self {
        Self {
            shat: vec![0.0; shn],
            pair: Array2::zeros((mm, mm + 1)),
            distortion: 0.0,
        }
    }

    fn finish(self) -> SequenceLaw {
        let mm = self.pair.nrows();
        let correct: f64 = (0..mm).map(|m| self.pair[(m, m)]).sum();
        let fail: f64 = (0..mm).map(|m| self.pair[(m, mm)]).sum();
        SequenceLaw {
            shat_marginal: self.shat,
            message_pair: self.pair,
            p_err: (1.0 - correct).max(0.0),
            decode_failure: fail,
            mean_distortion: self.distortion,
        }
    }
}

fn enumerate_laws(
    view: &SystemView,
    cb: &Codebook,
    delta: f64,
    cap: usize,
) -> Result<(SequenceLaw, SequenceLaw, HeadLaws)> {
    if delta.is_nan() || delta <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "typicality slack delta = {delta} must be positive"
        )));
    }
    let n = cb.n();
    let n_se = view.p_se.len();
    let n_y = view.n_y();
    let n_shat = view.n_shat();
    let sen = checked_pow(n_se, n, cap)?;
    let yn = checked_pow(n_y, n, cap)?;
    let shn = checked_pow(n_shat, n, cap)?;
    let heads = head_laws(view, cb, cap)?;
    let tables = decode_tables(cb, &view.p_uy, delta, yn, n_y);

    let (mm, ii, gg) = (cb.n_messages(), cb.n_bins(), cb.n_common());
    let mut ideal = LawAccumulator::new(shn, mm);
    let mut induc = LawAccumulator::new(shn, mm);
    let inv_n = 1.0 / n as f64;
    let mut se_buf = vec![0usize; n];
    let mut shat_rows: Vec<&[f64]> = Vec::with_capacity(n);
    let mut y_rows: Vec<&[f64]> = Vec::with_capacity(n);
    for se_flat in 0..sen {
        unflatten_base(n_se, se_flat, &mut se_buf);
        for m in 0..mm {
            for i in 0..ii {
                for (g, table) in tables.iter().enumerate() {
                    let idx = ((m * ii + i) * gg + g) * sen + se_flat;
                    let w_q = heads.idealized[idx];
                    let w_qb = heads.induced[idx];
                    if w_q == 0.0 && w_qb == 0.0 {
                        continue;
                    }
                    let word = cb.word(m, i, g);
                    shat_rows.clear();
                    y_rows.clear();
                    let mut d_term = 0.0;
                    for (&u, &se) in word.iter().zip(&se_buf) {
                        let row = u * n_se + se;
                        shat_rows.push(
                            view.shat_given_use
                                .row(row)
                                .to_slice()
                                .expect("standard layout"),
                        );
                        y_rows.push(
                            view.y_given_use
                                .row(row)
                                .to_slice()
                                .expect("standard layout"),
                        );
                        d_term += view.e_d[(u, se)];
                    }
                    d_term *= inv_n;
                    let shat_vec = sequence_product(&shat_rows);
                    let y_vec = sequence_product(&y_rows);
                    for (acc, w) in [(&mut ideal, w_q), (&mut induc, w_qb)] {
                        if w == 0.0 {
                            continue;
                        }
                        for (slot, &v) in acc.shat.iter_mut().zip(&shat_vec) {
                            *slot += w * v;
                        }
                        for (y_flat, &v) in y_vec.iter().enumerate() {
                            acc.pair[(m, table[y_flat] as usize)] += w * v;
                        }
                        acc.distortion += w * d_term;
                    }
                }
            }
        }
    }
    Ok((ideal.finish(), induc.finish(), heads))
}

/// The idealized sequence law (uniform `(M, I, Γ)`, side information through
/// the codeword), fully enumerated.
pub fn idealized_distribution(
    view: &SystemView,
    cb: &Codebook,
    delta: f64,
    cap: usize,
) -> Result<SequenceLaw> {
    Ok(enumerate_laws(view, cb, delta, cap)?.0)
}

/// The induced sequence law (i.i.d. side information, likelihood-encoded
/// bin index), fully enumerated.
pub fn induced_distribution(
    view: &SystemView,
    cb: &Codebook,
    delta: f64,
    cap: usize,
) -> Result<SequenceLaw> {
    Ok(enumerate_laws(view, cb, delta, cap)?.1)
}

// ---------------------------------------------------------------------------
// Simulation driver
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SimMode {
    Exact,
    MonteCarlo,
}

/// Simulation parameters. `km/ki/kg` are integer log-sizes per block;
/// `delta` is the typicality slack (convention: 0.1); `trials` applies to
/// Monte Carlo mode.
#[derive(Debug, Clone, Serialize)]
pub struct SimConfig {
    pub n: usize,
    pub km: u32,
    pub ki: u32,
    pub kg: u32,
    pub delta: f64,
    pub trials: usize,
    pub seed: u64,
    pub mode: SimMode,
    pub state_cap: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n: 4,
            km: 1,
            ki: 1,
            kg: 1,
            delta: 0.1,
            trials: 1000,
            seed: 0,
            mode: SimMode::Exact,
            state_cap: DEFAULT_STATE_CAP,
        }
    }
}

/// Everything one run reports. Exact mode fills the TV fields; Monte Carlo
/// fills the confidence half-widths (95%, normal approximation).
#[derive(Debug, Clone, Serialize)]
pub struct SimReport {
    pub n: usize,
    pub km: u32,
    pub ki: u32,
    pub kg: u32,
    pub delta: f64,
    pub seed: u64,
    pub mode: SimMode,
    pub trials: Option<usize>,
    pub p_err: f64,
    pub p_err_ci: Option<f64>,
    pub decode_failure: f64,
    pub tv_q_vs_qbar: Option<f64>,
    pub tv_head_marginal: Option<f64>,
    pub tv_output_vs_iid: Option<f64>,
    pub mean_distortion: f64,
    pub distortion_ci: Option<f64>,
}

/// Run one simulation: generate the codebook from the system's `U` marginal
/// and either enumerate the induced law exactly or estimate it by sampling.
pub fn run(sys: &IsacSystem, cfg: &SimConfig) -> Result<SimReport> {
    let view = SystemView::new(sys)?;
    let cb = generate_codebook(&view.p_u, cfg.n, cfg.km, cfg.ki, cfg.kg, cfg.seed)?;
    match cfg.mode {
        SimMode::Exact => exact_report(&view, &cb, cfg),
        SimMode::MonteCarlo => mc_report(&view, &cb, cfg),
    }
}

fn exact_report(view: &SystemView, cb: &Codebook, cfg: &SimConfig) -> Result<SimReport> {
    let (_, induced, heads) = enumerate_laws(view, cb, cfg.delta, cfg.state_cap)?;
    let p_s = view.p_s()?;
    let tv_out = induced.output_tv_vs_iid(&p_s, cb.n())?;
    Ok(SimReport {
        n: cfg.n,
        km: cfg.km,
        ki: cfg.ki,
        kg: cfg.kg,
        delta: cfg.delta,
        seed: cfg.seed,
        mode: cfg.mode,
        trials: None,
        p_err: induced.p_err,
        p_err_ci: None,
        decode_failure: induced.decode_failure,
        tv_q_vs_qbar: Some(heads.tv()),
        tv_head_marginal: Some(heads.tv_after_bin_marginalization()),
        tv_output_vs_iid: Some(tv_out),
        mean_distortion: induced.mean_distortion,
        distortion_ci: None,
    })
}

/// Offset so Monte Carlo trial streams never collide with codebook-word
/// streams under the same seed.
const MC_SEED_OFFSET: u64 = 0x9E37_79B9_7F4A_7C15;

fn mc_report(view: &SystemView, cb: &Codebook, cfg: &SimConfig) -> Result<SimReport> {
    if cfg.trials == 0 {
        return Err(Error::InvalidParameter(
            "Monte Carlo mode needs at least one trial".into(),
        ));
    }
    if cfg.delta.is_nan() || cfg.delta <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "typicality slack delta = {} must be positive",
            cfg.delta
        )));
    }
    let n = cb.n();
    let n_se = view.p_se.len();
    let n_z = view.sys.channel().to_axes()[1].size();
    let n_s = view.s_given_se.to_axes()[0].size();
    let results: Vec<Result<(f64, f64, f64)>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed.wrapping_add(MC_SEED_OFFSET));
            rng.set_stream(t as u64);
            let m = rng.random_range(0..cb.n_messages());
            let g = rng.random_range(0..cb.n_common());
            let se_seq: Vec<usize> = (0..n).map(|_| view.p_se.sample(&mut rng)).collect();
            let i = likelihood_encoder(cb, &view.se_given_u, m, g, &se_seq, &mut rng)?;
            let word = cb.word(m, i, g);
            let mut y_seq = vec![0usize; n];
            let mut dist = 0.0;
            for (t, (&u, &se)) in word.iter().zip(&se_seq).enumerate() {
                let s = view.s_given_se.sample_row(se, &mut rng);
                let x = view.sys.x_given_use().sample_row(u * n_se + se, &mut rng);
                let yz = view.sys.channel().sample_row(x * n_s + s, &mut rng);
                let (y, z) = (yz / n_z, yz % n_z);
                y_seq[t] = y;
                let shat = view
                    .sys
                    .estimator()
                    .sample_row((x * n_se + se) * n_z + z, &mut rng);
                dist += view.sys.distortion().get(s, shat);
            }
            dist /= n as f64;
            let outcome = typicality_decode(cb, &view.p_uy, g, &y_seq, cfg.delta)?;
            let (err, fail) = match outcome {
                DecodeOutcome::Decoded { m: mh, .. } => ((mh != m) as u8 as f64, 0.0),
                _ => (1.0, 1.0),
            };
            Ok((err, fail, dist))
        })
        .collect();

    let mut err_sum = 0.0;
    let mut fail_sum = 0.0;
    let mut d_sum = 0.0;
    let mut d_sq = 0.0;
    for r in results {
        let (e, f, d) = r?;
        err_sum += e;
        fail_sum += f;
        d_sum += d;
        d_sq += d * d;
    }
    let t = cfg.trials as f64;
    let p_err = err_sum / t;
    let d_mean = d_sum / t;
    let d_var = (d_sq / t - d_mean * d_mean).max(0.0);
    let half = |var: f64| 1.96 * (var / t).sqrt();
    Ok(SimReport {
        n: cfg.n,
        km: cfg.km,
        ki: cfg.ki,
        kg: cfg.kg,
        delta: cfg.delta,
        seed: cfg.seed,
        mode: cfg.mode,
        trials: Some(cfg.trials),
        p_err,
        p_err_ci: Some(half(p_err * (1.0 - p_err))),
        decode_failure: fail_sum / t,
        tv_q_vs_qbar: None,
        tv_head_marginal: None,
        tv_output_vs_iid: None,
        mean_distortion: d_mean,
        distortion_ci: Some(half(d_var)),
    })
}

/// Run the same configuration across several block lengths (log-sizes stay
/// fixed, so per-symbol rates scale as `k/n`).
pub fn run_curve(sys: &IsacSystem, base: &SimConfig, ns: &[usize]) -> Result<Vec<SimReport>> {
    ns.iter()
        .map(|&n| run(sys, &SimConfig { n, ..base.clone() }))
        .collect()
}

pub fn curve_csv(reports: &[SimReport]) -> String {
    let mut out =
        String::from("n,p_err,decode_failure,tv_Q_vs_Qbar,tv_output_vs_iid,mean_distortion\n");
    for r in reports {
        let opt = |v: Option<f64>| v.map_or("NaN".to_string(), crate::fmt::rate);
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.n,
            crate::fmt::rate(r.p_err),
            crate::fmt::rate(r.decode_failure),
            opt(r.tv_q_vs_qbar),
            opt(r.tv_output_vs_iid),
            crate::fmt::rate(r.mean_distortion),
        ));
    }
    out
}

// ---------------------------------------------------------------------------
// Soft covering
// ---------------------------------------------------------------------------

/// For each of `n_codebooks` random codebooks of `max(1, round(2^{nR}))`
/// words drawn i.i.d. from `p_u`, the exact total variation between the
/// codebook-mixture output law over `V^n` and the i.i.d. product `P_V^n`.
pub fn soft_covering_tv(
    p_u: &Dist,
    v_given_u: &Kernel,
    r_bits: f64,
    n: usize,
    n_codebooks: usize,
    seed: u64,
    cap: usize,
) -> Result<Vec<f64>> {
    if v_given_u.from_axes().len() != 1
        || v_given_u.to_axes().len() != 1
        || !v_given_u.from_axes()[0].compatible(p_u.alphabet())
    {
        return Err(Error::ShapeMismatch(
            "soft covering needs a single-axis kernel from the code alphabet".into(),
        ));
    }
    if !r_bits.is_finite() || r_bits < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "rate {r_bits} must be finite and nonnegative"
        )));
    }
    if n == 0 || n_codebooks == 0 {
        return Err(Error::InvalidParameter(
            "block length and codebook count must be >= 1".into(),
        ));
    }
    let n_v = v_given_u.to_axes()[0].size();
    let vn = checked_pow(n_v, n, cap)?;
    let exponent = r_bits * n as f64;
    if exponent > 40.0 {
        return Err(Error::StateSpaceTooLarge {
            states: u128::MAX,
            cap,
        });
    }
    let n_words = (exponent.exp2().round() as u64).max(1) as usize;

    // single-letter output law -> i.i.d. reference
    let mut p_v = vec![0.0; n_v];
    for u in 0..p_u.len() {
        let pu = p_u.prob(u);
        for (v, slot) in p_v.iter_mut().enumerate() {
            *slot += pu * v_given_u.prob(u, v);
        }
    }
    let iid_rows: Vec<&[f64]> = (0..n).map(|_| p_v.as_slice()).collect();
    let iid = sequence_product(&iid_rows);

    (0..n_codebooks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let mut mix = vec![0.0; vn];
            let inv = 1.0 / n_words as f64;
            let mut rows: Vec<&[f64]> = Vec::with_capacity(n);
            for _ in 0..n_words {
                let word: Vec<usize> = (0..n).map(|_| sample_pmf(p_u.probs(), &mut rng)).collect();
                rows.clear();
                rows.extend(word.iter().map(|&u| v_given_u.row(u)));
                let prod = sequence_product(&rows);
                for (slot, &v) in mix.iter_mut().zip(&prod) {
                    *slot += inv * v;
                }
            }
            Ok(tv_slices(&mix, &iid))
        })
        .collect()
}
