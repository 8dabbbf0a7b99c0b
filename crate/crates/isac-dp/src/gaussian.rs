//! Closed-form rate/common-randomness evaluation for the additive Gaussian
//! channel `Y = X + S + N` with perfect feedback `Z = Y`, side information
//! `S_e` correlated with the state `S`, auxiliary `U = X + α·S_e`, and the
//! linear-plus-noise estimator `Ŝ = a(X + α·S_e + Z) + W`.
//!
//! The rate formulas are evaluated **exactly as printed** in the source
//! expressions, including a suspicious bare `σ_Se` (standard deviation, not
//! variance) in the common-randomness denominator. [`mc_validate`] exists to
//! surface any inconsistency between those printed formulas and sampled
//! mutual informations as a reported gap; nothing is silently corrected.
//!
//! Estimator-coefficient convention: `a` is the positive root of the
//! preservation equality (the negative root only inflates the achieved
//! distortion `(2−2a)σ_S² − 2αa²ρσ_Sσ_Se` when `ρα ≥ 0`).

use crate::{Error, Result};
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Model parameters. Defaults are the worked example: `σ_S² = 2`,
/// `σ_Se² = 3`, `σ_N² = 1`, input power `σ_X² = 2`, `σ_W² = 1/2`, `ρ = 0`,
/// `α = 0`, distortion budget `D = 3`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaussianConfig {
    pub var_s: f64,
    pub var_se: f64,
    pub var_n: f64,
    pub var_x: f64,
    pub var_w: f64,
    pub rho: f64,
    pub alpha: f64,
    pub d_max: f64,
}

impl Default for GaussianConfig {
    fn default() -> Self {
        Self {
            var_s: 2.0,
            var_se: 3.0,
            var_n: 1.0,
            var_x: 2.0,
            var_w: 0.5,
            rho: 0.0,
            alpha: 0.0,
            d_max: 3.0,
        }
    }
}

impl GaussianConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("var_s", self.var_s),
            ("var_se", self.var_se),
            ("var_n", self.var_n),
            ("var_x", self.var_x),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "{name} = {v} must be a positive finite variance"
                )));
            }
        }
        if !self.var_w.is_finite() || self.var_w < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "var_w = {} must be a nonnegative finite variance",
                self.var_w
            )));
        }
        if !self.rho.is_finite() || self.rho.abs() > 1.0 {
            return Err(Error::InvalidParameter(format!(
                "rho = {} must lie in [-1, 1]",
                self.rho
            )));
        }
        if !self.alpha.is_finite() || self.alpha < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "alpha = {} must be nonnegative",
                self.alpha
            )));
        }
        if !self.d_max.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "d_max = {} must be finite",
                self.d_max
            )));
        }
        Ok(())
    }

    /// Receiver output variance `σ_Y² = σ_X² + σ_S² + σ_N²` (input chosen
    /// independent of the state pair).
    pub fn var_y(&self) -> f64 {
        self.var_x + self.var_s + self.var_n
    }

    /// The correlation term `ρ·σ_S·σ_Se`.
    fn rho_ss(&self) -> f64 {
        self.rho * (self.var_s * self.var_se).sqrt()
    }
}

/// One evaluated operating point.
#[derive(Debug, Clone, Serialize)]
pub struct GaussianPoint {
    /// Message rate in bits from the printed rate expression.
    pub r_bits: f64,
    /// Common-randomness rate in bits from the printed expression (not
    /// clamped at zero; a negative value means no common randomness is
    /// needed).
    pub rc_bits: f64,
    /// Estimator coefficient (NaN when the preservation equality has no
    /// real root).
    pub a: f64,
    /// `(2−2a)σ_S² − 2αa²ρσ_Sσ_Se`.
    pub achieved_d: f64,
    pub feasible: bool,
    /// Reason for infeasibility, when any.
    pub note: Option<String>,
}

/// Solve the preservation equality
/// `4a²σ_X² + a²α²σ_Se² + (a²−1)σ_S² + a²σ_N² + 2αa²ρσ_Sσ_Se + σ_W² = 0`
/// for the positive root. `Ok(None)` marks a negative radicand (estimator
/// noise exceeds the state variance), which makes the whole point
/// infeasible rather than erroring.
pub fn solve_a(cfg: &GaussianConfig) -> Result<Option<f64>> {
    cfg.validate()?;
    let denom = 4.0 * cfg.var_x
        + cfg.alpha * cfg.alpha * cfg.var_se
        + cfg.var_s
        + cfg.var_n
        + 2.0 * cfg.alpha * cfg.rho_ss();
    if denom <= 0.0 {
        return Err(Error::Precondition(format!(
            "estimator variance denominator {denom} must be positive"
        )));
    }
    let radicand = (cfg.var_s - cfg.var_w) / denom;
    if radicand < 0.0 {
        return Ok(None);
    }
    Ok(Some(radicand.sqrt()))
}

/// Evaluate the printed region expressions at `cfg`. Infeasibility (no real
/// estimator coefficient, nonpositive log argument, busted distortion
/// budget) is reported in-band via `feasible = false` plus a note.
pub fn region_point(cfg: &GaussianConfig) -> Result<GaussianPoint> {
    cfg.validate()?;
    let vy = cfg.var_y();
    let (vx, vs, vse) = (cfg.var_x, cfg.var_s, cfg.var_se);
    let (alpha, _rho) = (cfg.alpha, cfg.rho);
    let rho_ss = cfg.rho_ss();

    // shared inner expression: (σ_X² + α²σ_Se²)σ_Y² − (σ_X² + αρσ_Sσ_Se)²
    let inner = (vx + alpha * alpha * vse) * vy - (vx + alpha * rho_ss).powi(2);
    let r_bits = if inner > 0.0 {
        0.5 * (vx * vy / inner).log2()
    } else {
        f64::NAN
    };

    let a = match solve_a(cfg)? {
        Some(a) => a,
        None => {
            return Ok(GaussianPoint {
                r_bits,
                rc_bits: f64::NAN,
                a: f64::NAN,
                achieved_d: f64::NAN,
                feasible: false,
                note: Some("no real estimator coefficient (negative radicand)".into()),
            });
        }
    };

    // As printed: the second factor in the denominator uses a bare σ_Se.
    let cov_u_shat = 2.0 * a * vx + a * alpha * alpha * vse + a * alpha * rho_ss;
    let rc_den = vy * ((vx + alpha * alpha * vse.sqrt()) * vs - cov_u_shat.powi(2));
    let rc_num = vs * inner;
    let rc_bits = if rc_num > 0.0 && rc_den > 0.0 {
        0.5 * (rc_num / rc_den).log2()
    } else {
        f64::NAN
    };

    let achieved_d = (2.0 - 2.0 * a) * vs - 2.0 * alpha * a * a * rho_ss;
    let logs_ok = r_bits.is_finite() && rc_bits.is_finite();
    let within_d = achieved_d <= cfg.d_max + 1e-12;
    let note = if !logs_ok {
        Some("nonpositive log argument in a rate expression".into())
    } else if !within_d {
        Some(format!(
            "achieved distortion {achieved_d:.6} exceeds budget {}",
            cfg.d_max
        ))
    } else {
        None
    };
    Ok(GaussianPoint {
        r_bits,
        rc_bits,
        a,
        achieved_d,
        feasible: logs_ok && within_d,
        note,
    })
}

/// One sweep row: the grid coordinates plus the evaluated point.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub rho: f64,
    pub alpha: f64,
    #[serde(flatten)]
    pub point: GaussianPoint,
}

impl SweepRow {
    pub fn csv_header() -> &'static str {
        "rho,alpha,a,R_bits,Rc_bits,achieved_D,feasible"
    }

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.rho,
            self.alpha,
            crate::fmt::rate(self.point.a),
            crate::fmt::rate(self.point.r_bits),
            crate::fmt::rate(self.point.rc_bits),
            crate::fmt::rate(self.point.achieved_d),
            self.point.feasible
        )
    }
}

/// Evaluate the region over the cross product of `rho_list × alpha_grid`,
/// one row per pair, sorted by `(ρ, α)`. Deterministic: pure closed forms,
/// reduced in index order.
pub fn sweep(base: &GaussianConfig, rho_list: &[f64], alpha_grid: &[f64]) -> Result<Vec<SweepRow>> {
    if rho_list.is_empty() || alpha_grid.is_empty() {
        return Err(Error::InvalidParameter(
            "sweep grids must be nonempty".into(),
        ));
    }
    let mut rhos = rho_list.to_vec();
    let mut alphas = alpha_grid.to_vec();
    rhos.sort_by(f64::total_cmp);
    alphas.sort_by(f64::total_cmp);
    let pairs: Vec<(f64, f64)> = rhos
        .iter()
        .flat_map(|&r| alphas.iter().map(move |&a| (r, a)))
        .collect();
    pairs
        .par_iter()
        .map(|&(rho, alpha)| {
            let cfg = GaussianConfig {
                rho,
                alpha,
                ..base.clone()
            };
            Ok(SweepRow {
                rho,
                alpha,
                point: region_point(&cfg)?,
            })
        })
        .collect()
}

/// Monte-Carlo cross-check of the printed formulas.
#[derive(Debug, Clone, Serialize)]
pub struct McReport {
    pub n_samples: usize,
    pub seed: u64,
    /// Sampled mutual informations (bits), via exact Gaussian MI on the
    /// empirical covariance.
    pub i_uy_hat: f64,
    pub i_use_hat: f64,
    pub i_ushat_hat: f64,
    /// |(Î(U;Y) − Î(U;S_e)) − printed rate|.
    pub r_gap: f64,
    /// |(Î(U;Ŝ) − Î(U;Y)) − printed common-randomness rate|.
    pub rc_gap: f64,
    /// |Î(U;S_e) − ½log₂((σ_X²+α²σ_Se²)/σ_X²)|.
    pub i_use_gap: f64,
    /// Set when the common-randomness gap exceeds 0.05 bits — the printed
    /// expression disagrees with what the sampled model actually does.
    pub rc_flagged: bool,
}

const MC_BLOCK: usize = 1 << 16;

/// Sample the model `n_samples` times and compare sampled mutual
/// informations against the printed rate expressions. Requires
/// `n_samples ≥ 10⁴`. Deterministic per `(cfg, n_samples, seed)`: each
/// block draws from its own RNG stream and block sums are combined in
/// index order.
pub fn mc_validate(cfg: &GaussianConfig, n_samples: usize, seed: u64) -> Result<McReport> {
    cfg.validate()?;
    if n_samples < 10_000 {
        return Err(Error::InvalidParameter(format!(
            "n_samples = {n_samples} must be at least 10^4"
        )));
    }
    let a = solve_a(cfg)?.ok_or_else(|| {
        Error::Precondition("no real estimator coefficient for this configuration".into())
    })?;

    let n_blocks = n_samples.div_ceil(MC_BLOCK);
    let blocks: Vec<[f64; 12]> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let count = MC_BLOCK.min(n_samples - b * MC_BLOCK);
            let mut acc = [0.0f64; 12];
            let sqrt = |v: f64| v.sqrt();
            let (ss, sse, sx, sn, sw) = (
                sqrt(cfg.var_s),
                sqrt(cfg.var_se),
                sqrt(cfg.var_x),
                sqrt(cfg.var_n),
                sqrt(cfg.var_w),
            );
            let tail = (1.0 - cfg.rho * cfg.rho).max(0.0).sqrt();
            for _ in 0..count {
                let g1: f64 = StandardNormal.sample(&mut rng);
                let g2: f64 = StandardNormal.sample(&mut rng);
                let g3: f64 = StandardNormal.sample(&mut rng);
                let g4: f64 = StandardNormal.sample(&mut rng);
                let g5: f64 = StandardNormal.sample(&mut rng);
                let s = ss * g1;
                let se = sse * (cfg.rho * g1 + tail * g2);
                let x = sx * g3;
                let n = sn * g4;
                let w = sw * g5;
                let u = x + cfg.alpha * se;
                let y = x + s + n;
                let shat = a * (x + cfg.alpha * se + y) + w;
                acc[0] += u;
                acc[1] += se;
                acc[2] += y;
                acc[3] += shat;
                acc[4] += u * u;
                acc[5] += se * se;
                acc[6] += y * y;
                acc[7] += shat * shat;
                acc[8] += u * se;
                acc[9] += u * y;
                acc[10] += u * shat;
                acc[11] += 1.0;
            }
            acc
        })
        .collect();

    let mut t = [0.0f64; 12];
    for b in &blocks {
        for (ti, bi) in t.iter_mut().zip(b) {
            *ti += bi;
        }
    }
    let n = t[11];
    let mean = |s: f64| s / n;
    let cov = |sab: f64, sa: f64, sb: f64| sab / n - mean(sa) * mean(sb);
    let vu = cov(t[4], t[0], t[0]);
    let vse = cov(t[5], t[1], t[1]);
    let vy = cov(t[6], t[2], t[2]);
    let vsh = cov(t[7], t[3], t[3]);
    let c_use = cov(t[8], t[0], t[1]);
    let c_uy = cov(t[9], t[0], t[2]);
    let c_ush = cov(t[10], t[0], t[3]);

    let gauss_mi = |va: f64, vb: f64, c: f64| -> Result<f64> {
        let det = va * vb - c * c;
        if va <= 0.0 || vb <= 0.0 || det <= 0.0 {
            return Err(Error::Precondition(format!(
                "degenerate empirical covariance (var_a={va}, var_b={vb}, det={det})"
            )));
        }
        Ok(0.5 * (va * vb / det).log2())
    };
    let i_uy_hat = gauss_mi(vu, vy, c_uy)?;
    let i_use_hat = gauss_mi(vu, vse, c_use)?;
    let i_ushat_hat = gauss_mi(vu, vsh, c_ush)?;

    let point = region_point(cfg)?;
    let i_use_closed = 0.5 * ((cfg.var_x + cfg.alpha * cfg.alpha * cfg.var_se) / cfg.var_x).log2();
    let r_gap = ((i_uy_hat - i_use_hat) - point.r_bits).abs();
    let rc_gap = ((i_ushat_hat - i_uy_hat) - point.rc_bits).abs();
    let i_use_gap = (i_use_hat - i_use_closed).abs();
    Ok(McReport {
        n_samples,
        seed,
        i_uy_hat,
        i_use_hat,
        i_ushat_hat,
        r_gap,
        rc_gap,
        i_use_gap,
        rc_flagged: rc_gap > 0.05,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn coefficient_matches_hand_value_and_equality() {
        let cfg = GaussianConfig::default();
        let a = solve_a(&cfg).unwrap().unwrap();
        assert_abs_diff_eq!(a, (1.5f64 / 11.0).sqrt(), epsilon = 1e-14);
        // substitute back into the defining equality for a spread of configs
        for (rho, alpha) in [(0.0, 0.0), (0.5, 0.7), (-0.4, 1.3), (0.9, 2.0)] {
            let cfg = GaussianConfig {
                rho,
                alpha,
                ..GaussianConfig::default()
            };
            let a = solve_a(&cfg).unwrap().unwrap();
            let rho_ss = rho * (cfg.var_s * cfg.var_se).sqrt();
            let residual = 4.0 * a * a * cfg.var_x
                + a * a * alpha * alpha * cfg.var_se
                + (a * a - 1.0) * cfg.var_s
                + a * a * cfg.var_n
                + 2.0 * alpha * a * a * rho_ss
                + cfg.var_w;
            assert!(residual.abs() <= 1e-10, "residual {residual:e}");
        }
    }

    #[test]
    fn coefficient_edge_cases() {
        let flat = GaussianConfig {
            var_w: 2.0,
            ..GaussianConfig::default()
        };
        assert_abs_diff_eq!(solve_a(&flat).unwrap().unwrap(), 0.0);
        let impossible = GaussianConfig {
            var_w: 5.0,
            ..GaussianConfig::default()
        };
        assert!(solve_a(&impossible).unwrap().is_none());
        let bad = GaussianConfig {
            rho: 1.5,
            ..GaussianConfig::default()
        };
        assert!(solve_a(&bad).is_err());
    }

    #[test]
    fn default_point_matches_hand_values() {
        let pt = region_point(&GaussianConfig::default()).unwrap();
        // σ_Y² = 5: rate = ½log2(10/6), common randomness = ½log2(12/(100/11))
        assert_abs_diff_eq!(pt.r_bits, 0.5 * (5.0f64 / 3.0).log2(), epsilon = 1e-14);
        assert_abs_diff_eq!(pt.rc_bits, 0.5 * 1.32f64.log2(), epsilon = 1e-14);
        let a = (1.5f64 / 11.0).sqrt();
        assert_abs_diff_eq!(pt.achieved_d, (2.0 - 2.0 * a) * 2.0, epsilon = 1e-14);
        assert!(pt.achieved_d < 3.0 && pt.feasible);
    }

    #[test]
    fn rate_ignores_correlation_when_side_info_unused() {
        let base = region_point(&GaussianConfig::default()).unwrap();
        for rho in [-0.9, -0.3, 0.5, 0.99] {
            let cfg = GaussianConfig {
                rho,
                ..GaussianConfig::default()
            };
            let pt = region_point(&cfg).unwrap();
            assert_eq!(pt.r_bits.to_bits(), base.r_bits.to_bits());
        }
    }

    #[test]
    fn infeasible_configs_are_flagged_not_errors() {
        let pt = region_point(&GaussianConfig {
            var_w: 5.0,
            ..GaussianConfig::default()
        })
        .unwrap();
        assert!(!pt.feasible && pt.a.is_nan());
        let tight = region_point(&GaussianConfig {
            d_max: 1.0,
            ..GaussianConfig::default()
        })
        .unwrap();
        assert!(!tight.feasible);
        assert!(tight.note.as_deref().unwrap().contains("budget"));
    }

    #[test]
    fn achieved_distortion_decreases_in_coefficient() {
        // direct check on the printed expression for ρα ≥ 0
        let cfg = GaussianConfig {
            rho: 0.6,
            alpha: 0.8,
            ..GaussianConfig::default()
        };
        let d = |a: f64| (2.0 - 2.0 * a) * cfg.var_s - 2.0 * cfg.alpha * a * a * cfg.rho_ss();
        let grid: Vec<f64> = (0..50).map(|i| i as f64 / 50.0).collect();
        for w in grid.windows(2) {
            assert!(d(w[0]) >= d(w[1]));
        }
    }

    #[test]
    fn sweep_is_sorted_and_matches_point_eval() {
        assert!(sweep(&GaussianConfig::default(), &[], &[0.0]).is_err());
        let rows = sweep(&GaussianConfig::default(), &[0.9, 0.0], &[0.5, 0.0]).unwrap();
        assert_eq!(rows.len(), 4);
        let coords: Vec<(f64, f64)> = rows.iter().map(|r| (r.rho, r.alpha)).collect();
        assert_eq!(coords, vec![(0.0, 0.0), (0.0, 0.5), (0.9, 0.0), (0.9, 0.5)]);
        let single = sweep(&GaussianConfig::default(), &[0.9], &[0.5]).unwrap();
        let direct = region_point(&GaussianConfig {
            rho: 0.9,
            alpha: 0.5,
            ..GaussianConfig::default()
        })
        .unwrap();
        assert_eq!(single[0].point.r_bits.to_bits(), direct.r_bits.to_bits());
        assert_eq!(single[0].point.rc_bits.to_bits(), direct.rc_bits.to_bits());
        assert!(SweepRow::csv_header().starts_with("rho,alpha"));
        assert!(single[0].csv_line().starts_with("0.9,0.5,"));
    }

    #[test]
    fn monte_carlo_agrees_where_formulas_are_consistent() {
        let cfg = GaussianConfig::default();
        let rep = mc_validate(&cfg, 50_000, 7).unwrap();
        assert!(rep.i_use_hat.abs() < 0.01, "I(U;Se) = {}", rep.i_use_hat);
        assert!(rep.r_gap < 0.05, "r_gap = {}", rep.r_gap);
        assert!(rep.rc_gap < 0.05, "rc_gap = {}", rep.rc_gap);
        assert!(!rep.rc_flagged);
        // determinism
        let again = mc_validate(&cfg, 50_000, 7).unwrap();
        assert_eq!(rep.i_uy_hat.to_bits(), again.i_uy_hat.to_bits());
        assert!(mc_validate(&cfg, 5_000, 7).is_err());
    }

    #[test]
    fn monte_carlo_flags_printed_inconsistency_when_side_info_active() {
        // with α > 0 the bare-σ_Se term in the printed common-randomness
        // denominator no longer matches the sampled model
        let cfg = GaussianConfig {
            rho: 0.5,
            alpha: 1.0,
            ..GaussianConfig::default()
        };
        let rep = mc_validate(&cfg, 50_000, 3).unwrap();
        assert!(rep.rc_flagged, "rc_gap = {}", rep.rc_gap);
        assert!(rep.rc_gap > 0.5, "rc_gap = {}", rep.rc_gap);
        // the rate expression, by contrast, stays consistent
        assert!(rep.r_gap < 0.05, "r_gap = {}", rep.r_gap);
    }
}
