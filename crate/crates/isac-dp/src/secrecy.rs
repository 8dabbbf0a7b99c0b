//! Eavesdropper-side quantities: conditional distortion-rate functions with
//! side information available at both sides, the piecewise leaked-distortion
//! bound, secure region points, and a concavity probe for the distortion
//! functional.
//!
//! The model: an insider observes the reconstruction `Ŝ^n` and describes it
//! to an eavesdropper at rate `R_E` bits per symbol; the eavesdropper also
//! sees the channel output `Y^n` (and, if it can buy the common randomness
//! for `R_c` of those bits, the codeword `U^n` too). The guaranteed
//! eavesdropper distortion is a *floor*: the piecewise rule is
//! `D(R_E, P_{ŜY})` when `R_E < R_c`, else the minimum of that and
//! `D(R_E − R_c, P_{UŜY})`.
//!
//! The conditional distortion-rate function `D(r, ·)` decomposes across side
//! symbols: for a Lagrangian slope common to all side symbols, each side
//! symbol independently runs an alternating-minimization rate-distortion
//! iteration, and the weighted aggregate lands on the joint curve. Sweeping
//! the slope plus two exact endpoints (zero rate, lossless rate) yields the
//! curve; queries interpolate the lower envelope. Every reported point comes
//! from an explicit test kernel, so the curve is achievable throughout and
//! converges to the true function as the slope grid refines.

use crate::prob::{Distortion, Joint};
use crate::regions::{axis, IsacSystem, RegionPoint};
use crate::{Error, Result};
use ndarray::Array2;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::LN_2;

/// Accuracy target of the curve solver on small alphabets.
pub const SOLVER_TOL: f64 = 1e-4;

/// Default slack for the concavity probe (twice the solver tolerance).
pub const CONCAVITY_TOL: f64 = 2.0 * SOLVER_TOL;

/// Side symbols lighter than this are skipped outright.
const WEIGHT_FLOOR: f64 = 1e-15;

const BA_MAX_ITERS: usize = 500;
const BA_CONVERGENCE: f64 = 1e-12;

/// Cap on enumerated test kernels per side symbol in the brute-force oracle.
const BRUTE_KERNEL_CAP: u128 = 1 << 26;

/// A distortion-rate value; negative rates map to the explicit infinity
/// marker rather than a large float.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RdValue {
    Infinite,
    Finite(f64),
}

impl RdValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            RdValue::Finite(v) => Some(v),
            RdValue::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, RdValue::Infinite)
    }

    /// Minimum with infinity as the top element.
    pub fn min_with(self, other: RdValue) -> RdValue {
        match (self, other) {
            (RdValue::Infinite, v) | (v, RdValue::Infinite) => v,
            (RdValue::Finite(a), RdValue::Finite(b)) => RdValue::Finite(a.min(b)),
        }
    }
}

impl std::fmt::Display for RdValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RdValue::Infinite => write!(f, "inf"),
            RdValue::Finite(v) => write!(f, "{}", crate::fmt::rate(*v)),
        }
    }
}

// ---------------------------------------------------------------------------
// Problem definition
// ---------------------------------------------------------------------------

/// A lossy-compression problem for a source `Ŝ` with side information shared
/// by compressor and decompressor: the joint law over `(side, Ŝ)` plus a
/// distortion table whose rows index `Ŝ` and whose columns index the
/// reproduction alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct SideInfoRDProblem {
    /// Rows: flattened side symbol; columns: source symbol. Sums to one.
    joint: Array2<f64>,
    distortion: Distortion,
}

impl SideInfoRDProblem {
    /// Build from an explicit `P(side, source)` table.
    pub fn from_matrix(rows: Vec<Vec<f64>>, distortion: Distortion) -> Result<Self> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::InvalidParameter(
                "joint table must be non-empty".into(),
            ));
        }
        let n_source = rows[0].len();
        if distortion.n_source() != n_source {
            return Err(Error::ShapeMismatch(format!(
                "distortion has {} source rows, joint has {n_source} source symbols",
                distortion.n_source()
            )));
        }
        let mut joint = Array2::zeros((rows.len(), n_source));
        let mut total = 0.0;
        for (y, row) in rows.iter().enumerate() {
            if row.len() != n_source {
                return Err(Error::ShapeMismatch(format!(
                    "joint row {y} has {} entries, expected {n_source}",
                    row.len()
                )));
            }
            for (s, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite(y * n_source + s));
                }
                if v < 0.0 {
                    return Err(Error::NegativeProbability {
                        index: y * n_source + s,
                        value: v,
                    });
                }
                joint[(y, s)] = v;
                total += v;
            }
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::NotNormalized {
                sum: total,
                tol: 1e-9,
            });
        }
        Ok(Self { joint, distortion })
    }

    /// Extract `P(side..., source)` from a joint distribution. The side axes
    /// are flattened row-major in the order given; an empty list means no
    /// side information (a single side symbol of weight one).
    pub fn from_joint(
        joint: &Joint,
        source_axis: &str,
        side_axes: &[&str],
        distortion: Distortion,
    ) -> Result<Self> {
        let mut keep: Vec<&str> = side_axes.to_vec();
        keep.push(source_axis);
        let marg = joint.marginalize(&keep)?;
        let shape = marg.shape().to_vec();
        let n_source = *shape.last().expect("at least the source axis");
        let n_side: usize = shape[..shape.len() - 1].iter().product();
        if distortion.n_source() != n_source {
            return Err(Error::ShapeMismatch(format!(
                "distortion has {} source rows, source axis {source_axis} has {n_source}",
                distortion.n_source()
            )));
        }
        let joint = Array2::from_shape_vec((n_side, n_source), marg.flat_values().to_vec())
            .expect("marginal is row-major over (side, source)");
        Ok(Self { joint, distortion })
    }

    pub fn n_side(&self) -> usize {
        self.joint.nrows()
    }

    pub fn n_source(&self) -> usize {
        self.joint.ncols()
    }

    pub fn n_repro(&self) -> usize {
        self.distortion.n_repro()
    }

    pub fn distortion(&self) -> &Distortion {
        &self.distortion
    }

    pub fn side_weight(&self, y: usize) -> f64 {
        self.joint.row(y).sum()
    }

    /// Conditional source pmf given side symbol `y` (all zeros if the side
    /// symbol itself has zero probability).
    pub fn conditional_source(&self, y: usize) -> Vec<f64> {
        let w = self.side_weight(y);
        if w <= WEIGHT_FLOOR {
            return vec![0.0; self.n_source()];
        }
        self.joint.row(y).iter().map(|&v| v / w).collect()
    }

    /// `H(source | side)` in bits — the lossless-description threshold.
    pub fn conditional_entropy_bits(&self) -> f64 {
        let mut h = 0.0;
        for y in 0..self.n_side() {
            let w = self.side_weight(y);
            if w <= WEIGHT_FLOOR {
                continue;
            }
            for &v in self.joint.row(y) {
                if v > 0.0 {
                    h -= v * (v / w).log2();
                }
            }
        }
        h.max(0.0)
    }

    /// Best achievable distortion with no message at all: the decompressor
    /// picks one reproduction per side symbol.
    pub fn zero_rate_distortion(&self) -> f64 {
        let mut total = 0.0;
        for y in 0..self.n_side() {
            let best = (0..self.n_repro())
                .map(|v| {
                    self.joint
                        .row(y)
                        .iter()
                        .enumerate()
                        .map(|(s, &p)| p * self.distortion.get(s, v))
                        .sum::<f64>()
                })
                .fold(f64::INFINITY, f64::min);
            if best.is_finite() {
                total += best;
            }
        }
        total
    }

    /// Distortion floor with unlimited rate: each source symbol maps to its
    /// own best reproduction (zero for Hamming-like tables).
    pub fn pointwise_floor(&self) -> f64 {
        let mut total = 0.0;
        for y in 0..self.n_side() {
            for (s, &p) in self.joint.row(y).iter().enumerate() {
                if p > 0.0 {
                    let best = (0..self.n_repro())
                        .map(|v| self.distortion.get(s, v))
                        .fold(f64::INFINITY, f64::min);
                    total += p * best;
                }
            }
        }
        total
    }

    /// Convex mixture `w·self + (1−w)·other`; shapes and distortion tables
    /// must match.
    pub fn mix(&self, other: &Self, w: f64) -> Result<Self> {
        if self.joint.dim() != other.joint.dim() || self.distortion != other.distortion {
            return Err(Error::ShapeMismatch(
                "mixture needs identical shapes and distortion tables".into(),
            ));
        }
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::InvalidParameter(format!(
                "mixture weight {w} outside [0, 1]"
            )));
        }
        Ok(Self {
            joint: &self.joint * w + &other.joint * (1.0 - w),
            distortion: self.distortion.clone(),
        })
    }

    /// Sweep the slope grid and assemble the distortion-rate curve.
    pub fn rd_curve(&self, lambda_grid: &[f64]) -> Result<RDCurve> {
        if lambda_grid.is_empty() {
            return Err(Error::InvalidParameter("empty slope grid".into()));
        }
        for &l in lambda_grid {
            if !l.is_finite() || l < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "slope {l} must be finite and nonnegative"
                )));
            }
        }
        let sides: Vec<(f64, Vec<f64>)> = (0..self.n_side())
            .filter(|&y| self.side_weight(y) > WEIGHT_FLOOR)
            .map(|y| (self.side_weight(y), self.conditional_source(y)))
            .collect();
        let mut points: Vec<(f64, f64)> = lambda_grid
            .par_iter()
            .map(|&lam| {
                let (mut r, mut d) = (0.0, 0.0);
                for (w, p) in &sides {
                    let (pr, pd) = blahut_point(p, &self.distortion, lam);
                    r += w * pr;
                    d += w * pd;
                }
                (r.max(0.0), d)
            })
            .collect();
        points.push((0.0, self.zero_rate_distortion()));
        points.push((self.conditional_entropy_bits(), self.pointwise_floor()));
        points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        // lower envelope: achievable distortion can only improve with rate
        let mut cleaned: Vec<(f64, f64)> = Vec::with_capacity(points.len());
        for (r, d) in points {
            match cleaned.last_mut() {
                Some((lr, ld)) if (r - *lr).abs() <= 1e-12 => {
                    *ld = ld.min(d);
                }
                Some((_, ld)) => {
                    let capped = d.min(*ld);
                    cleaned.push((r, capped));
                }
                None => cleaned.push((r, d)),
            }
        }
        Ok(RDCurve {
            points: cleaned,
            lambda_grid: lambda_grid.to_vec(),
        })
    }

    /// `D(r)` for this problem on the default slope grid.
    pub fn distortion_rate(&self, r_bits: f64) -> Result<RdValue> {
        if r_bits.is_nan() {
            return Err(Error::InvalidParameter("rate is NaN".into()));
        }
        if r_bits < 0.0 {
            return Ok(RdValue::Infinite);
        }
        Ok(self.rd_curve(&default_lambda_grid())?.distortion_at(r_bits))
    }
}

/// Geometric slope grid covering the useful range on small alphabets.
pub fn default_lambda_grid() -> Vec<f64> {
    const POINTS: usize = 97;
    (0..POINTS)
        .map(|i| 1e-4 * 1e8f64.powf(i as f64 / (POINTS - 1) as f64))
        .collect()
}

/// One alternating-minimization pass at slope `lam_bits` (bits per unit
/// distortion): returns the exact `(rate, distortion)` of the test kernel it
/// lands on, so the output is achievable even before full convergence.
fn blahut_point(p: &[f64], d: &Distortion, lam_bits: f64) -> (f64, f64) {
    let nv = d.n_repro();
    let ns = p.len();
    let lam = lam_bits * LN_2;
    let mut q = vec![1.0 / nv as f64; nv];
    let mut cond = vec![0.0; ns * nv];
    for _ in 0..BA_MAX_ITERS {
        for (s, &ps) in p.iter().enumerate() {
            if ps == 0.0 {
                continue;
            }
            let row = &mut cond[s * nv..(s + 1) * nv];
            let base = (0..nv).map(|v| d.get(s, v)).fold(f64::INFINITY, f64::min);
            let mut sum = 0.0;
            for (v, slot) in row.iter_mut().enumerate() {
                *slot = q[v] * (-lam * (d.get(s, v) - base)).exp();
                sum += *slot;
            }
            for slot in row.iter_mut() {
                *slot /= sum;
            }
        }
        let mut qn = vec![0.0; nv];
        for (s, &ps) in p.iter().enumerate() {
            if ps == 0.0 {
                continue;
            }
            for v in 0..nv {
                qn[v] += ps * cond[s * nv + v];
            }
        }
        let delta: f64 = qn.iter().zip(&q).map(|(a, b)| (a - b).abs()).sum();
        q = qn;
        if delta < BA_CONVERGENCE {
            break;
        }
    }
    let mut rate = 0.0;
    let mut dist = 0.0;
    for (s, &ps) in p.iter().enumerate() {
        if ps == 0.0 {
            continue;
        }
        for v in 0..nv {
            let c = cond[s * nv + v];
            if c > 0.0 {
                rate += ps * c * (c / q[v]).log2();
                dist += ps * c * d.get(s, v);
            }
        }
    }
    (rate.max(0.0), dist)
}

// ---------------------------------------------------------------------------
// The curve object
// ---------------------------------------------------------------------------

/// A swept distortion-rate curve: achievable `(rate, distortion)` points
/// sorted by rate with distortion nonincreasing.
#[derive(Debug, Clone, Serialize)]
pub struct RDCurve {
    points: Vec<(f64, f64)>,
    lambda_grid: Vec<f64>,
}

impl RDCurve {
    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn lambda_grid(&self) -> &[f64] {
        &self.lambda_grid
    }

    /// Distortion at rate `r`: infinite below zero, linear interpolation on
    /// the envelope (time sharing, hence achievable), flat past the last
    /// point.
    pub fn distortion_at(&self, r: f64) -> RdValue {
        if r < 0.0 {
            return RdValue::Infinite;
        }
        let pts = &self.points;
        if pts.is_empty() {
            return RdValue::Infinite;
        }
        if r <= pts[0].0 {
            return RdValue::Finite(pts[0].1);
        }
        if r >= pts[pts.len() - 1].0 {
            return RdValue::Finite(pts[pts.len() - 1].1);
        }
        let hi = pts.partition_point(|&(pr, _)| pr <= r);
        let (r0, d0) = pts[hi - 1];
        let (r1, d1) = pts[hi];
        if r1 - r0 <= 1e-15 {
            return RdValue::Finite(d0.min(d1));
        }
        let t = (r - r0) / (r1 - r0);
        RdValue::Finite(d0 + t * (d1 - d0))
    }

    pub fn csv(&self) -> String {
        let mut out = String::from("rate_bits,distortion\n");
        for &(r, d) in &self.points {
            out.push_str(&format!(
                "{},{}\n",
                crate::fmt::rate(r),
                crate::fmt::rate(d)
            ));
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Brute-force oracle
// ---------------------------------------------------------------------------

fn simplex_points(n: usize, steps: usize) -> Vec<Vec<f64>> {
    fn rec(n: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if n == 1 {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for k in 0..=left {
            cur.push(k);
            rec(n - 1, left - k, cur, out);
            cur.pop();
        }
    }
    let mut raw = Vec::new();
    rec(n, steps, &mut Vec::new(), &mut raw);
    raw.into_iter()
        .map(|c| c.into_iter().map(|k| k as f64 / steps as f64).collect())
        .collect()
}

/// Keep the lower-left frontier of `(rate, distortion)` candidates.
fn pareto_front(mut pts: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (r, d) in pts {
        if out.last().is_none_or(|&(_, ld)| d < ld - 1e-15) {
            out.push((r, d));
        }
    }
    out
}

/// Lower convex envelope of a rate-sorted frontier (Andrew's monotone chain,
/// lower hull only). Each envelope point is achievable: a λ-mixture of the
/// two neighbouring kernels is itself a test kernel with exactly the
/// interpolated distortion and at most the interpolated rate, because mutual
/// information is convex in the kernel.
fn lower_envelope(pts: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for &p in pts {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            let cross = (b.0 - a.0) * (p.1 - a.1) - (p.0 - a.0) * (b.1 - a.1);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull
}

/// Evaluate a convex rate-sorted frontier at `r`, clamping outside the
/// covered rate range (distortion is flat beyond the last point).
fn envelope_at(hull: &[(f64, f64)], r: f64) -> f64 {
    if r <= hull[0].0 {
        return hull[0].1;
    }
    match hull.iter().position(|&(rate, _)| rate >= r) {
        None => hull[hull.len() - 1].1,
        Some(i) => {
            let (r0, d0) = hull[i - 1];
            let (r1, d1) = hull[i];
            if r1 == r0 {
                d1
            } else {
                d0 + (d1 - d0) * (r - r0) / (r1 - r0)
            }
        }
    }
}

/// Exhaustive minimization of `E[d]` subject to `I(source; repro | side) ≤ r`
/// over a simplex grid of test kernels, convexified by time sharing. An
/// upper bound on the true `D(r)` that tightens as the grid refines;
/// alphabets are capped at three symbols and `grid_steps` at fifty.
pub fn rd_bruteforce(
    problem: &SideInfoRDProblem,
    r_bits: f64,
    grid_steps: usize,
) -> Result<RdValue> {
    if r_bits.is_nan() {
        return Err(Error::InvalidParameter("rate is NaN".into()));
    }
    if r_bits < 0.0 {
        return Ok(RdValue::Infinite);
    }
    let (ns, ny, nv) = (problem.n_source(), problem.n_side(), problem.n_repro());
    if ns > 3 || ny > 3 || nv > 3 {
        return Err(Error::InvalidParameter(format!(
            "brute force caps alphabets at 3 (got source {ns}, side {ny}, reproduction {nv})"
        )));
    }
    if grid_steps == 0 || grid_steps > 50 {
        return Err(Error::InvalidParameter(format!(
            "grid_steps = {grid_steps} outside 1..=50"
        )));
    }
    let rows = simplex_points(nv, grid_steps);
    let kernels = (rows.len() as u128).pow(ns as u32);
    if kernels > BRUTE_KERNEL_CAP {
        return Err(Error::StateSpaceTooLarge {
            states: kernels,
            cap: BRUTE_KERNEL_CAP as usize,
        });
    }

    // Rate and distortion are weighted sums of per-side-symbol terms, so
    // enumerate each side symbol's frontier and fold them together.
    let mut frontier = vec![(0.0f64, 0.0f64)];
    for y in 0..ny {
        let w = problem.side_weight(y);
        if w <= WEIGHT_FLOOR {
            continue;
        }
        let p = problem.conditional_source(y);
        let mut row_choice = vec![0usize; ns];
        let mut cands = Vec::with_capacity(kernels as usize);
        loop {
            // exact I and E[d] of this grid kernel
            let mut q = vec![0.0; nv];
            for (s, &ri) in row_choice.iter().enumerate() {
                for v in 0..nv {
                    q[v] += p[s] * rows[ri][v];
                }
            }
            let mut rate = 0.0;
            let mut dist = 0.0;
            for (s, &ri) in row_choice.iter().enumerate() {
                if p[s] == 0.0 {
                    continue;
                }
                for v in 0..nv {
                    let c = rows[ri][v];
                    if c > 0.0 {
                        rate += p[s] * c * (c / q[v]).log2();
                        dist += p[s] * c * problem.distortion.get(s, v);
                    }
                }
            }
            // The KL terms carry ~1e-16 of float noise (the conditional
            // source itself is a quotient), so distinct near-zero rates
            // would sort in noise order and could shadow the true rate-zero
            // optimum; snap them to an exact zero instead.
            cands.push((if rate < 1e-12 { 0.0 } else { rate }, dist));
            // odometer over row choices
            let mut ax = ns;
            loop {
                if ax == 0 {
                    break;
                }
                ax -= 1;
                row_choice[ax] += 1;
                if row_choice[ax] < rows.len() {
                    break;
                }
                row_choice[ax] = 0;
            }
            if row_choice.iter().all(|&c| c == 0) {
                break;
            }
        }
        let cands = pareto_front(cands);
        let mut next = Vec::with_capacity(frontier.len() * cands.len());
        for &(fr, fd) in &frontier {
            for &(cr, cd) in &cands {
                next.push((fr + w * cr, fd + w * cd));
            }
        }
        frontier = pareto_front(next);
    }
    // Time sharing between any two folded strategies is achievable, so the
    // oracle reads off the lower convex envelope rather than the nearest
    // grid point; this turns the O(1/grid) quantization error into a much
    // smaller curvature error.
    let hull = lower_envelope(&frontier);
    Ok(RdValue::Finite(envelope_at(&hull, r_bits + 1e-12)))
}

// ---------------------------------------------------------------------------
// The piecewise eavesdropper bound and secure region points
// ---------------------------------------------------------------------------

/// The guaranteed eavesdropper distortion at insider rate `r_e` when the
/// legitimate pair uses `r_c` bits of common randomness: below `r_c` the
/// eavesdropper works from `Y` alone; at or above it, it may spend `r_c`
/// bits to learn the codeword and use `U` as extra side information.
pub fn henchman_de(
    r_e: f64,
    r_c: f64,
    p_shat_y: &SideInfoRDProblem,
    p_u_shat_y: &SideInfoRDProblem,
) -> Result<RdValue> {
    if !r_e.is_finite() || r_e < 0.0 || !r_c.is_finite() || r_c < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "rates (r_e = {r_e}, r_c = {r_c}) must be finite and nonnegative"
        )));
    }
    let from_output = p_shat_y.distortion_rate(r_e)?;
    if r_e < r_c {
        return Ok(from_output);
    }
    let with_codeword = p_u_shat_y.distortion_rate(r_e - r_c)?;
    Ok(from_output.min_with(with_codeword))
}

/// The two rate-distortion problems the eavesdropper bound is built from:
/// reconstructing `Shat` from `Y` alone, and from `(U, Y)` once the
/// codeword is known. Both reuse the system's own distortion table.
pub fn eavesdropper_problems(
    sys: &IsacSystem,
    joint: &Joint,
) -> Result<(SideInfoRDProblem, SideInfoRDProblem)> {
    // reconstruction and state share an alphabet, so the system's distortion
    // table doubles as d(ŝ, ŝ_E)
    let d = sys.distortion().clone();
    let p_sy = SideInfoRDProblem::from_joint(joint, axis::SHAT, &[axis::Y], d.clone())?;
    let p_usy = SideInfoRDProblem::from_joint(joint, axis::SHAT, &[axis::U, axis::Y], d)?;
    Ok((p_sy, p_usy))
}

/// The communication point plus the eavesdropper-distortion floor. The
/// common-randomness budget defaults to the point's own minimum; a larger
/// budget can only raise the floor.
pub fn secure_region_point(
    sys: &IsacSystem,
    r_e: f64,
    r_c_bits: Option<f64>,
) -> Result<RegionPoint> {
    let mut point = sys.theorem1_point()?;
    let joint = sys.build_joint()?;
    let (p_sy, p_usy) = eavesdropper_problems(sys, &joint)?;
    let r_c = match r_c_bits {
        Some(rc) => rc,
        None => point.rc_bits,
    };
    let d_e = henchman_de(r_e, r_c, &p_sy, &p_usy)?;
    point.d_e = d_e.finite();
    point.diagnostics.insert("r_e_bits".into(), r_e);
    point.diagnostics.insert("rc_used_bits".into(), r_c);
    Ok(point)
}

/// Deterministic-channel variant: full feedback rate, no common randomness,
/// and the eavesdropper floor taken from `P(Ŝ, Y)` alone.
pub fn secure_deterministic_point(sys: &IsacSystem, r_e: f64) -> Result<RegionPoint> {
    if !r_e.is_finite() || r_e < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "insider rate {r_e} must be finite and nonnegative"
        )));
    }
    let mut point = sys.deterministic_capacity_point()?;
    let joint = sys.build_joint()?;
    let d = sys.distortion().clone();
    let p_sy = SideInfoRDProblem::from_joint(&joint, axis::SHAT, &[axis::Y], d)?;
    point.d_e = p_sy.distortion_rate(r_e)?.finite();
    point.diagnostics.insert("r_e_bits".into(), r_e);
    Ok(point)
}

// ---------------------------------------------------------------------------
// Concavity probe
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct ConcavityCheck {
    /// Mixing weight on the first problem.
    pub lambda: f64,
    /// `D(r)` of the mixed problem.
    pub mixed: f64,
    /// The convex combination of the endpoint values.
    pub combo: f64,
    /// `combo − mixed`; a concavity violation when this exceeds the slack.
    pub deficit: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConcavityReport {
    pub r_bits: f64,
    pub tol: f64,
    pub checks: Vec<ConcavityCheck>,
    pub violations: usize,
}

/// Check `D(r, λP1 + (1−λ)P2) ≥ λ·D(r, P1) + (1−λ)·D(r, P2) − tol` across a
/// grid of mixing weights. The distortion-rate value is concave in the joint
/// law, so a correct solver reports no violations beyond its own tolerance
/// (convention: [`CONCAVITY_TOL`]).
pub fn concavity_probe(
    p1: &SideInfoRDProblem,
    p2: &SideInfoRDProblem,
    r_bits: f64,
    mix_grid: &[f64],
    tol: f64,
) -> Result<ConcavityReport> {
    if !r_bits.is_finite() || r_bits < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "rate {r_bits} must be finite and nonnegative"
        )));
    }
    if mix_grid.is_empty() {
        return Err(Error::InvalidParameter("empty mixing grid".into()));
    }
    let value = |p: &SideInfoRDProblem| -> Result<f64> {
        p.distortion_rate(r_bits)?
            .finite()
            .ok_or_else(|| Error::Precondition("distortion-rate value is infinite".into()))
    };
    let d1 = value(p1)?;
    let d2 = value(p2)?;
    let checks: Vec<ConcavityCheck> = mix_grid
        .par_iter()
        .map(|&lam| -> Result<ConcavityCheck> {
            if !(0.0..=1.0).contains(&lam) {
                return Err(Error::InvalidParameter(format!(
                    "mixing weight {lam} outside [0, 1]"
                )));
            }
            let mixed = value(&p1.mix(p2, lam)?)?;
            let combo = lam * d1 + (1.0 - lam) * d2;
            Ok(ConcavityCheck {
                lambda: lam,
                mixed,
                combo,
                deficit: combo - mixed,
            })
        })
        .collect::<Result<_>>()?;
    let violations = checks.iter().filter(|c| c.deficit > tol).count();
    Ok(ConcavityReport {
        r_bits,
        tol,
        checks,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::{Alphabet, Kernel};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn h2(p: f64) -> f64 {
        if p <= 0.0 || p >= 1.0 {
            return 0.0;
        }
        -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
    }

    /// Invert the binary-source Hamming rate-distortion relation
    /// R(D) = h2(p) − h2(D) by bisection on D ∈ [0, min(p, 1−p)].
    fn binary_hamming_dr(p: f64, r: f64) -> f64 {
        let top = p.min(1.0 - p);
        if r >= h2(p) {
            return 0.0;
        }
        if r <= 0.0 {
            return top;
        }
        let target = h2(p) - r;
        let (mut lo, mut hi) = (0.0, top);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if h2(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn no_side(p: f64) -> SideInfoRDProblem {
        SideInfoRDProblem::from_matrix(vec![vec![1.0 - p, p]], Distortion::hamming(2).unwrap())
            .unwrap()
    }

    fn binary_example() -> IsacSystem {
        let doc =
            crate::document::parse_document(include_str!("../data/binary_example.json")).unwrap();
        doc.system().unwrap().clone()
    }

    fn xor_system() -> IsacSystem {
        let doc = crate::document::parse_document(include_str!("../data/xor_deterministic.json"))
            .unwrap();
        doc.system().unwrap().clone()
    }

    fn random_binary_problem(rng: &mut impl Rng) -> SideInfoRDProblem {
        let mut cells = [0.0; 4];
        let mut total = 0.0;
        for c in &mut cells {
            *c = rng.random::<f64>() + 0.05;
            total += *c;
        }
        for c in &mut cells {
            *c /= total;
        }
        SideInfoRDProblem::from_matrix(
            vec![vec![cells[0], cells[1]], vec![cells[2], cells[3]]],
            Distortion::hamming(2).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn matches_the_binary_hamming_closed_form() {
        for &p in &[0.5, 0.3] {
            let prob = no_side(p);
            assert_abs_diff_eq!(
                prob.distortion_rate(0.0).unwrap().finite().unwrap(),
                p.min(1.0 - p),
                epsilon = 1e-12
            );
            for &r in &[0.1, 0.2, 0.5, 0.8] {
                let got = prob.distortion_rate(r).unwrap().finite().unwrap();
                let want = binary_hamming_dr(p, r);
                assert!(
                    (got - want).abs() <= 2e-3,
                    "p={p}, r={r}: got {got}, closed form {want}"
                );
                // achievability: the solver never dips below the true curve
                assert!(got >= want - 1e-9);
            }
            // lossless threshold
            let at_h = prob
                .distortion_rate(h2(p) + 1e-6)
                .unwrap()
                .finite()
                .unwrap();
            assert!(at_h <= 1e-12);
        }
    }

    #[test]
    fn negative_rate_is_the_infinity_marker() {
        let prob = no_side(0.4);
        assert!(prob.distortion_rate(-0.1).unwrap().is_infinite());
        assert!(rd_bruteforce(&prob, -1.0, 10).unwrap().is_infinite());
        assert_eq!(
            RdValue::Infinite.min_with(RdValue::Finite(0.3)),
            RdValue::Finite(0.3)
        );
        assert!(prob.distortion_rate(f64::NAN).is_err());
    }

    #[test]
    fn curve_is_monotone_and_capped_by_zero_rate() {
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        for _ in 0..10 {
            let prob = random_binary_problem(&mut rng);
            let curve = prob.rd_curve(&default_lambda_grid()).unwrap();
            let pts = curve.points();
            assert!(pts.windows(2).all(|w| w[0].0 <= w[1].0));
            assert!(pts.windows(2).all(|w| w[0].1 >= w[1].1 - 1e-12));
            assert!(pts.iter().all(|&(r, _)| r >= 0.0));
            let d0 = prob.zero_rate_distortion();
            for &r in &[0.0, 0.05, 0.3, 2.0] {
                let d = curve.distortion_at(r).finite().unwrap();
                assert!(d <= d0 + 1e-12);
            }
        }
    }

    #[test]
    fn independent_side_information_changes_nothing() {
        // side = fair coin independent of a Bern(0.3) source
        let p = 0.3;
        let with_side = SideInfoRDProblem::from_matrix(
            vec![
                vec![0.5 * (1.0 - p), 0.5 * p],
                vec![0.5 * (1.0 - p), 0.5 * p],
            ],
            Distortion::hamming(2).unwrap(),
        )
        .unwrap();
        let without = no_side(p);
        for &r in &[0.0, 0.2, 0.6] {
            let a = with_side.distortion_rate(r).unwrap().finite().unwrap();
            let b = without.distortion_rate(r).unwrap().finite().unwrap();
            assert!((a - b).abs() <= 1e-3, "r={r}: {a} vs {b}");
        }
    }

    #[test]
    fn brute_force_tracks_the_solver() {
        let mut rng = ChaCha12Rng::seed_from_u64(77);
        for trial in 0..6 {
            let prob = random_binary_problem(&mut rng);
            for &r in &[0.0, 0.15, 0.4, 1.2] {
                let solver = prob.distortion_rate(r).unwrap().finite().unwrap();
                let brute = rd_bruteforce(&prob, r, 40).unwrap().finite().unwrap();
                assert!(
                    (solver - brute).abs() <= 1e-2,
                    "trial {trial}, r={r}: solver {solver}, brute {brute}"
                );
            }
        }
        // caps
        let big =
            SideInfoRDProblem::from_matrix(vec![vec![0.25; 4]], Distortion::hamming(4).unwrap())
                .unwrap();
        assert!(rd_bruteforce(&big, 0.5, 10).is_err());
        let ok = no_side(0.5);
        assert!(rd_bruteforce(&ok, 0.5, 51).is_err());
        assert!(rd_bruteforce(&ok, 0.5, 0).is_err());
    }

    #[test]
    fn extra_side_information_never_hurts() {
        let sys = binary_example();
        let joint = sys.build_joint().unwrap();
        let (p_sy, p_usy) = eavesdropper_problems(&sys, &joint).unwrap();
        for &r in &[0.0, 0.1, 0.3, 0.7] {
            let coarse = p_sy.distortion_rate(r).unwrap().finite().unwrap();
            let fine = p_usy.distortion_rate(r).unwrap().finite().unwrap();
            assert!(fine <= coarse + 1e-4, "r={r}: with U {fine} vs {coarse}");
        }
    }

    #[test]
    fn piecewise_bound_branches() {
        let sys = binary_example();
        let joint = sys.build_joint().unwrap();
        let (p_sy, p_usy) = eavesdropper_problems(&sys, &joint).unwrap();
        // below the budget the codeword branch is ignored entirely
        let below = henchman_de(0.1, 0.5, &p_sy, &p_usy).unwrap();
        assert_eq!(below, p_sy.distortion_rate(0.1).unwrap());
        let below2 = henchman_de(0.1, 0.9, &p_sy, &p_usy).unwrap();
        assert_eq!(below, below2);
        // at r_c = 0 the bound can only improve on the output-only value
        let open = henchman_de(0.1, 0.0, &p_sy, &p_usy)
            .unwrap()
            .finite()
            .unwrap();
        assert!(open <= p_sy.distortion_rate(0.1).unwrap().finite().unwrap() + 1e-12);
        assert!(henchman_de(-0.1, 0.0, &p_sy, &p_usy).is_err());
        assert!(henchman_de(0.1, -1.0, &p_sy, &p_usy).is_err());
    }

    #[test]
    fn secure_point_on_the_binary_example() {
        let sys = binary_example();
        let zero = secure_region_point(&sys, 0.0, None).unwrap();
        assert!(zero.feasible);
        let joint = sys.build_joint().unwrap();
        let (p_sy, p_usy) = eavesdropper_problems(&sys, &joint).unwrap();
        // rc defaults to 0 here, so the floor is the better of the two
        // zero-rate values
        let want = p_sy
            .zero_rate_distortion()
            .min(p_usy.zero_rate_distortion());
        assert_abs_diff_eq!(zero.d_e.unwrap(), want, epsilon = 1e-9);
        // a generous insider rate drives the Hamming floor to zero
        let open = secure_region_point(&sys, 5.0, None).unwrap();
        assert!(open.d_e.unwrap() <= 1e-9);
        // r_e below an explicit common-randomness budget: Y-only branch
        let gated = secure_region_point(&sys, 0.05, Some(1.0)).unwrap();
        assert_abs_diff_eq!(
            gated.d_e.unwrap(),
            p_sy.distortion_rate(0.05).unwrap().finite().unwrap(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(gated.diagnostics["rc_used_bits"], 1.0);
    }

    #[test]
    fn secure_deterministic_point_on_the_xor_system() {
        let sys = xor_system();
        let point = secure_deterministic_point(&sys, 0.0).unwrap();
        assert_abs_diff_eq!(point.r_bits, 1.0, epsilon = 1e-12);
        assert_eq!(point.rc_bits, 0.0);
        // reconstruction equals the state: a fair bit, independent of Y,
        // so the zero-rate floor is exactly one half
        assert_abs_diff_eq!(point.d_e.unwrap(), 0.5, epsilon = 1e-12);
        let open = secure_deterministic_point(&sys, 1.0).unwrap();
        assert!(open.d_e.unwrap() <= 1e-12);
        assert!(secure_deterministic_point(&sys, -0.5).is_err());

        // a noisy channel fails the precondition
        let bit = Alphabet::bit();
        let state = crate::prob::Joint::from_flat(
            vec![("Se".into(), bit.clone()), ("S".into(), bit.clone())],
            vec![0.5, 0.0, 0.0, 0.5],
        )
        .unwrap();
        let u_given_se = Kernel::new(
            vec![bit.clone()],
            vec![bit.clone()],
            vec![vec![0.5, 0.5], vec![0.5, 0.5]],
        )
        .unwrap();
        let x_given_use =
            Kernel::deterministic(vec![bit.clone(), bit.clone()], vec![bit.clone()], |idx| {
                vec![idx[0]]
            })
            .unwrap();
        let mut rows = Vec::new();
        for x in 0..2usize {
            for s in 0..2usize {
                let y = x ^ s;
                let mut row = vec![0.0; 4];
                row[y * 2 + y] = 0.9;
                row[(1 - y) * 2 + (1 - y)] = 0.1;
                rows.push(row);
            }
        }
        let channel = Kernel::new(
            vec![bit.clone(), bit.clone()],
            vec![bit.clone(), bit.clone()],
            rows,
        )
        .unwrap();
        let estimator = Kernel::deterministic(
            vec![bit.clone(), bit.clone(), bit.clone()],
            vec![bit],
            |idx| vec![idx[0] ^ idx[2]],
        )
        .unwrap();
        let noisy = IsacSystem::new(
            state,
            u_given_se,
            x_given_use,
            channel,
            estimator,
            Distortion::hamming(2).unwrap(),
        )
        .unwrap();
        assert!(matches!(
            secure_deterministic_point(&noisy, 0.0),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn concavity_holds_on_random_pairs() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let grid = [0.0, 0.25, 0.5, 0.75, 1.0];
        for _ in 0..10 {
            let p1 = random_binary_problem(&mut rng);
            let p2 = random_binary_problem(&mut rng);
            let report = concavity_probe(&p1, &p2, 0.3, &grid, 5e-4).unwrap();
            assert_eq!(report.violations, 0, "checks: {:?}", report.checks);
        }
        // identical endpoints: equality up to solver noise
        let p = random_binary_problem(&mut rng);
        let report = concavity_probe(&p, &p, 0.3, &grid, CONCAVITY_TOL).unwrap();
        assert_eq!(report.violations, 0);
        for c in &report.checks {
            assert!(c.deficit.abs() <= 1e-9);
        }
        assert!(concavity_probe(&p, &p, 0.3, &[1.5], 1e-4).is_err());
        assert!(concavity_probe(&p, &p, -0.3, &grid, 1e-4).is_err());
    }

    #[test]
    fn randomization_never_beats_the_deterministic_decoder() {
        // zero-rate eavesdropper on tiny instances: the best randomized
        // reproduction choice is a vertex, i.e. deterministic
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        for _ in 0..20 {
            let prob = random_binary_problem(&mut rng);
            let steps = 25;
            for y in 0..prob.n_side() {
                for k in 0..=steps {
                    let q1 = k as f64 / steps as f64;
                    let mut rand_d = 0.0;
                    for (s, &pj) in prob.joint.row(y).iter().enumerate() {
                        rand_d += pj
                            * ((1.0 - q1) * prob.distortion.get(s, 0)
                                + q1 * prob.distortion.get(s, 1));
                    }
                    // compare against this side symbol's deterministic best
                    let best = (0..2)
                        .map(|v| {
                            prob.joint
                                .row(y)
                                .iter()
                                .enumerate()
                                .map(|(s, &pj)| pj * prob.distortion.get(s, v))
                                .sum::<f64>()
                        })
                        .fold(f64::INFINITY, f64::min);
                    assert!(rand_d >= best - 1e-12);
                }
            }
        }
    }

    #[test]
    fn mixture_validation_and_csv() {
        let a = no_side(0.2);
        let b = no_side(0.7);
        let m = a.mix(&b, 0.25).unwrap();
        assert_abs_diff_eq!(m.joint[(0, 1)], 0.25 * 0.2 + 0.75 * 0.7, epsilon = 1e-15);
        assert!(a.mix(&b, 1.5).is_err());
        let two_sides = SideInfoRDProblem::from_matrix(
            vec![vec![0.25, 0.25], vec![0.25, 0.25]],
            Distortion::hamming(2).unwrap(),
        )
        .unwrap();
        assert!(a.mix(&two_sides, 0.5).is_err());
        let curve = a.rd_curve(&default_lambda_grid()).unwrap();
        let csv = curve.csv();
        assert!(csv.starts_with("rate_bits,distortion\n"));
        assert!(csv.lines().count() >= 3);
        assert!(a.rd_curve(&[]).is_err());
        assert!(a.rd_curve(&[-1.0]).is_err());
    }
}
