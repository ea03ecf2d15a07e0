//! Closed-form figures of merit for storing and retrieving one of two known
//! qubit phase gates: entanglement/average fidelity of the deterministic
//! strategy, success probability of the probabilistic-exact strategy (with its
//! two-regime branch structure), instrument weights, small-angle expansions,
//! and the continuous program-angle ("processor") generalizations.
//!
//! Everything here is a pure function of `(n, alpha)` or `(alpha, beta)`;
//! dimension enters only through the entanglement-to-average conversion.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which branch of the success-probability formula applies at `(n, alpha)`.
///
/// The probabilistic-exact strategy changes character at the angle `chi_n`
/// where `cos(2n a)·(cos 2a + sin 2a) = 1`: below it the optimal instrument
/// has a single success outcome, above it two.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `0 < alpha < chi_n`: single success outcome.
    SmallAlpha,
    /// `chi_n < alpha <= pi/(4n)`: two success outcomes.
    LargeAlpha,
    /// `alpha = chi_n` (to 1e-12): both branch formulas coincide.
    Boundary,
    /// `alpha = 0`: the two channels are identical; values are limits.
    Degenerate,
}

impl Regime {
    /// Stable lowercase tag used in CSV/JSON output.
    pub fn tag(self) -> &'static str {
        match self {
            Regime::SmallAlpha => "small_alpha",
            Regime::LargeAlpha => "large_alpha",
            Regime::Boundary => "boundary",
            Regime::Degenerate => "degenerate",
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

/// Angles closer to the regime seam than this are classified `Boundary`.
const SEAM_TOL: f64 = 1e-12;
/// Angles smaller than this are classified `Degenerate`.
const DEGENERATE_TOL: f64 = 1e-12;

fn check_range(n: u32, alpha: f64) -> Result<()> {
    if !alpha.is_finite() || alpha < 0.0 || 4.0 * n as f64 * alpha > std::f64::consts::PI + 1e-12 {
        return Err(Error::AlphaOutOfRange { alpha, n });
    }
    Ok(())
}

/// Seam angle `chi_n`: the unique root of
/// `cos(2n a)·(cos 2a + sin 2a) = 1` on `(0, pi/(4n))`.
///
/// Solved by bisection to ~1e-14; `chi_1 = pi/8` exactly.
pub fn chi_n(n: u32) -> f64 {
    assert!(n >= 1, "seam angle needs n >= 1");
    let nf = n as f64;
    let g = |a: f64| (2.0 * nf * a).cos() * ((2.0 * a).cos() + (2.0 * a).sin()) - 1.0;
    // g > 0 just right of the trivial root at 0 and g(pi/4n) = -1.
    let mut lo = 1e-6;
    let mut hi = std::f64::consts::FRAC_PI_4 / nf;
    debug_assert!(g(lo) > 0.0 && g(hi) < 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Overlap of the two n-use storage states: `cos(2n·alpha)`.
pub fn storage_overlap(n: u32, alpha: f64) -> f64 {
    (2.0 * n as f64 * alpha).cos()
}

/// Optimal entanglement fidelity of deterministic retrieval from `n` uses:
/// `1/2 + (1/2)·sqrt(1 - (sin 2a · cos 2na)^2)`.
///
/// Valid for `0 <= 4n·alpha <= pi`; equals 1 at both `alpha = 0` (identical
/// channels) and `alpha = pi/(4n)` (orthogonal storage states).
pub fn deterministic_fidelity(n: u32, alpha: f64) -> Result<f64> {
    check_range(n, alpha)?;
    let x = (2.0 * alpha).sin() * storage_overlap(n, alpha);
    Ok(0.5 + 0.5 * (1.0 - x * x).max(0.0).sqrt())
}

/// Convert an entanglement fidelity to the average output-state fidelity in
/// dimension `d`: `1/(d+1) + d·F_e/(d+1)`.
pub fn average_from_entanglement(d: usize, f_e: f64) -> f64 {
    let df = d as f64;
    (1.0 + df * f_e) / (df + 1.0)
}

fn small_branch(n: u32, alpha: f64) -> f64 {
    let cn = storage_overlap(n, alpha);
    let ct = (2.0 * alpha).cos();
    (1.0 - cn * cn) / (2.0 * (1.0 - cn * ct))
}

fn large_branch(n: u32, alpha: f64) -> f64 {
    1.0 - storage_overlap(n, alpha) * (2.0 * alpha).sin()
}

/// Classify `alpha` against the seam and the degenerate point.
pub fn classify_regime(n: u32, alpha: f64) -> Regime {
    if alpha.abs() < DEGENERATE_TOL {
        return Regime::Degenerate;
    }
    let chi = chi_n(n);
    if (alpha - chi).abs() <= SEAM_TOL {
        Regime::Boundary
    } else if alpha < chi {
        Regime::SmallAlpha
    } else {
        Regime::LargeAlpha
    }
}

/// Optimal probability of exact retrieval from `n` uses, with the branch that
/// produced it.
///
/// * small regime: `(1 - cos^2 2na) / (2(1 - cos 2na · cos 2a))`
/// * large regime: `1 - cos 2na · sin 2a`
/// * `alpha = 0`: returned as the limit `n^2/(n^2+1)` with a degenerate flag.
///
/// The value is independent of the carrier dimension.
pub fn success_probability(n: u32, alpha: f64) -> Result<(f64, Regime)> {
    assert!(n >= 1, "success probability needs n >= 1");
    check_range(n, alpha)?;
    let regime = classify_regime(n, alpha);
    let p = match regime {
        Regime::Degenerate => {
            let nf = n as f64;
            nf * nf / (nf * nf + 1.0)
        }
        Regime::SmallAlpha => small_branch(n, alpha),
        // At the seam both formulas agree; prefer the branch-free large form.
        Regime::Boundary | Regime::LargeAlpha => large_branch(n, alpha),
    };
    Ok((p, regime))
}

/// Weights of the two success outcomes of the optimal instrument.
///
/// Large regime: `lambda_A = (1 + cos 2na (cos 2a - sin 2a))/2`,
/// `lambda_B = (1 - cos 2na (cos 2a + sin 2a))/2`.
/// Small regime (and the degenerate limit): a single outcome of weight equal
/// to the success probability, returned as `(q, 0)`.
///
/// In every regime `lambda_A + lambda_B` equals [`success_probability`].
pub fn lambdas(n: u32, alpha: f64) -> Result<(f64, f64)> {
    assert!(n >= 1, "instrument weights need n >= 1");
    check_range(n, alpha)?;
    match classify_regime(n, alpha) {
        Regime::SmallAlpha | Regime::Degenerate => {
            let (q, _) = success_probability(n, alpha)?;
            Ok((q, 0.0))
        }
        Regime::Boundary | Regime::LargeAlpha => {
            let cn = storage_overlap(n, alpha);
            let ct = (2.0 * alpha).cos();
            let st = (2.0 * alpha).sin();
            let la = 0.5 * (1.0 + cn * (ct - st));
            let lb = 0.5 * (1.0 - cn * (ct + st));
            Ok((la.max(0.0), lb.max(0.0)))
        }
    }
}

/// Small-angle expansion of the success probability through second order:
/// `1 - 1/(n^2+1) + (n^2 + 2n^4 - 3n^6) / (3(n^2+1)^2) · alpha^2`.
pub fn asymptotic_success(n: u32, alpha: f64) -> f64 {
    assert!(n >= 1, "expansion needs n >= 1");
    let n2 = (n as f64).powi(2);
    let coeff = (n2 + 2.0 * n2 * n2 - 3.0 * n2 * n2 * n2) / (3.0 * (n2 + 1.0) * (n2 + 1.0));
    1.0 - 1.0 / (n2 + 1.0) + coeff * alpha * alpha
}

/// Success probability of exact retrieval when only the group is known, not
/// the pair: `1 - (d^2-1)/(n + d^2 - 1)` for a general unitary, or
/// `1 - 1/(n+1)` when it is promised to be a phase gate.
pub fn group_baseline(d: usize, n: u32, phase_gate: bool) -> f64 {
    assert!(d >= 2 && n >= 1, "baseline needs d >= 2, n >= 1");
    let nf = n as f64;
    if phase_gate {
        1.0 - 1.0 / (nf + 1.0)
    } else {
        let k = (d * d - 1) as f64;
        1.0 - k / (nf + k)
    }
}

/// Entanglement fidelity of the deterministic processor as a function of the
/// program overlap angle `beta`: `1/2 + (1/2)·sqrt(1 - (sin 2a · cos b)^2)`.
///
/// At `beta = 2n·alpha` this reproduces [`deterministic_fidelity`].
pub fn processor_fidelity(alpha: f64, beta: f64) -> f64 {
    let x = (2.0 * alpha).sin() * beta.cos();
    0.5 + 0.5 * (1.0 - x * x).max(0.0).sqrt()
}

/// Program angle at which the success-probability branch changes:
/// `beta_B(alpha) = arccos(1/(cos 2a + sin 2a))`, for `alpha` in `[0, pi/4]`.
pub fn beta_boundary(alpha: f64) -> f64 {
    let denom = (2.0 * alpha).cos() + (2.0 * alpha).sin();
    // denom >= 1 on [0, pi/4]; clamp guards the endpoints where it equals 1.
    (1.0 / denom).clamp(-1.0, 1.0).acos()
}

/// Success probability of the probabilistic-exact processor at program angle
/// `beta`; branches at [`beta_boundary`]. At `beta = 2n·alpha` this
/// reproduces [`success_probability`].
pub fn processor_success(alpha: f64, beta: f64) -> f64 {
    let cb = beta.cos();
    let ct = (2.0 * alpha).cos();
    let st = (2.0 * alpha).sin();
    if beta < beta_boundary(alpha) {
        let denom = 2.0 * (1.0 - cb * ct);
        if denom < 1e-300 {
            // beta = alpha = 0: identical programs of identical channels.
            return 0.0;
        }
        (1.0 - cb * cb) / denom
    } else {
        1.0 - cb * st
    }
}

/// Norm-squared of the "aligned" component of the storage/target pairing:
/// `eta_u = (1 + cos 2na · cos 2a)/2 >= 1/2`.
pub fn eta_u(n: u32, alpha: f64) -> f64 {
    0.5 * (1.0 + storage_overlap(n, alpha) * (2.0 * alpha).cos())
}

/// Complementary component: `eta_v = 1 - eta_u`.
pub fn eta_v(n: u32, alpha: f64) -> f64 {
    0.5 * (1.0 - storage_overlap(n, alpha) * (2.0 * alpha).cos())
}

/// One evaluation of a processor formula, for sweep output.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ProcessorPoint {
    pub alpha: f64,
    pub beta: f64,
    pub value: f64,
}

/// Every closed-form figure of merit at one `(d, n, alpha)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProtocolReport {
    pub d: usize,
    pub n: u32,
    pub alpha: f64,
    /// Two-level deterministic optimum; `d` enters only via `f_avg`.
    pub f_e: f64,
    pub f_avg: f64,
    pub p_succ: f64,
    pub lambda_a: f64,
    pub lambda_b: f64,
    pub regime: Regime,
    pub chi_n: f64,
}

impl ProtocolReport {
    pub fn compute(d: usize, n: u32, alpha: f64) -> Result<Self> {
        if d < 2 {
            return Err(Error::Dimension(format!("carrier dimension {d} < 2")));
        }
        let f_e = deterministic_fidelity(n, alpha)?;
        let (p_succ, regime) = success_probability(n, alpha)?;
        let (lambda_a, lambda_b) = lambdas(n, alpha)?;
        Ok(ProtocolReport {
            d,
            n,
            alpha,
            f_e,
            f_avg: average_from_entanglement(d, f_e),
            p_succ,
            lambda_a,
            lambda_b,
            regime,
            chi_n: chi_n(n),
        })
    }
}

#[cfg(test)]
mod test {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_4, FRAC_PI_6, FRAC_PI_8, PI};

    #[test]
    fn fidelity_spot_values() {
        // n=1, alpha=pi/8: 1/2 + sqrt(3)/4.
        let f = deterministic_fidelity(1, FRAC_PI_8).unwrap();
        assert_abs_diff_eq!(f, 0.5 + 3f64.sqrt() / 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f, 0.9330127018922193, epsilon = 1e-12);
        // Perfect at both ends of the range.
        for n in 1..=6u32 {
            let top = FRAC_PI_4 / n as f64;
            assert_abs_diff_eq!(deterministic_fidelity(n, top).unwrap(), 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(deterministic_fidelity(n, 0.0).unwrap(), 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn fidelity_rejects_out_of_range_angles() {
        assert!(deterministic_fidelity(1, 0.9).is_err()); // 4a > pi
        assert!(deterministic_fidelity(3, 0.3).is_err());
        assert!(deterministic_fidelity(1, -0.1).is_err());
        assert!(deterministic_fidelity(1, f64::NAN).is_err());
    }

    #[test]
    fn average_conversion() {
        assert_abs_diff_eq!(average_from_entanglement(2, 1.0), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(average_from_entanglement(2, 0.5), 2.0 / 3.0, epsilon = 1e-15);
        // d=3: 1/4 + 3/4 F_e.
        assert_abs_diff_eq!(average_from_entanglement(3, 0.8), 0.25 + 0.6, epsilon = 1e-15);
    }

    #[test]
    fn seam_angle_exact_for_one_use() {
        assert_abs_diff_eq!(chi_n(1), FRAC_PI_8, epsilon = 1e-13);
    }

    #[test]
    fn seam_angle_roots_and_ordering() {
        let mut prev = f64::INFINITY;
        for n in 1..=8u32 {
            let chi = chi_n(n);
            let nf = n as f64;
            let g = (2.0 * nf * chi).cos() * ((2.0 * chi).cos() + (2.0 * chi).sin()) - 1.0;
            assert!(g.abs() <= 1e-12, "n={n}: residual {g:.3e}");
            assert!(chi > 0.0 && chi < FRAC_PI_4 / nf);
            assert!(chi < prev, "seam angle should shrink with n");
            prev = chi;
        }
    }

    #[test]
    fn success_branches_agree_at_seam() {
        for n in 1..=8u32 {
            let chi = chi_n(n);
            let diff = (small_branch(n, chi) - large_branch(n, chi)).abs();
            assert!(diff <= 1e-10, "n={n}: branch gap {diff:.3e}");
        }
    }

    #[test]
    fn success_spot_values() {
        // At the n=1 seam (pi/8) both branches give exactly 1/2.
        let (p, regime) = success_probability(1, FRAC_PI_8).unwrap();
        assert_abs_diff_eq!(p, 0.5, epsilon = 1e-12);
        assert_eq!(regime, Regime::Boundary);
        assert_abs_diff_eq!(small_branch(1, FRAC_PI_8), 0.5, epsilon = 1e-12);

        let (p, regime) = success_probability(1, FRAC_PI_4).unwrap();
        assert_abs_diff_eq!(p, 1.0, epsilon = 1e-15);
        assert_eq!(regime, Regime::LargeAlpha);

        let (p, regime) = success_probability(2, 0.0).unwrap();
        assert_abs_diff_eq!(p, 0.8, epsilon = 1e-15);
        assert_eq!(regime, Regime::Degenerate);
    }

    #[test]
    fn instrument_weights_spot_values() {
        // n=1, alpha=pi/6 is in the large regime (chi_1 = pi/8 < pi/6).
        let (la, lb) = lambdas(1, FRAC_PI_6).unwrap();
        assert_abs_diff_eq!(la, 0.408494, epsilon = 1e-6);
        assert_abs_diff_eq!(lb, 0.158494, epsilon = 1e-6);
        let expect = 1.0 - (PI / 3.0).cos() * (PI / 3.0).sin();
        assert_abs_diff_eq!(la + lb, expect, epsilon = 1e-12);

        // Top of the range: equal weights summing to 1.
        for n in 1..=4u32 {
            let (la, lb) = lambdas(n, FRAC_PI_4 / n as f64).unwrap();
            assert_abs_diff_eq!(la, 0.5, epsilon = 1e-12);
            assert_abs_diff_eq!(lb, 0.5, epsilon = 1e-12);
        }

        // Small regime: single outcome carrying the whole success weight.
        let a = PI / 16.0;
        let (la, lb) = lambdas(1, a).unwrap();
        let q = (FRAC_PI_8).sin().powi(2) / (2.0 * (1.0 - FRAC_PI_8.cos() * FRAC_PI_8.cos()));
        assert_abs_diff_eq!(la, q, epsilon = 1e-12);
        assert_eq!(lb, 0.0);
        assert_abs_diff_eq!(la, success_probability(1, a).unwrap().0, epsilon = 1e-15);
    }

    #[test]
    fn weight_sum_identity_on_grid() {
        for n in 1..=6u32 {
            let top = FRAC_PI_4 / n as f64;
            for i in 1..=60 {
                let alpha = top * i as f64 / 60.0;
                let (la, lb) = lambdas(n, alpha).unwrap();
                let (p, regime) = success_probability(n, alpha).unwrap();
                assert_abs_diff_eq!(la + lb, p, epsilon = 1e-12);
                if regime == Regime::LargeAlpha || regime == Regime::Boundary {
                    let cn = storage_overlap(n, alpha);
                    assert_abs_diff_eq!(
                        la + lb,
                        1.0 - cn * (2.0 * alpha).sin(),
                        epsilon = 1e-12
                    );
                }
            }
        }
    }

    #[test]
    fn expansion_constants_and_convergence_order() {
        assert_abs_diff_eq!(asymptotic_success(1, 0.0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(asymptotic_success(3, 0.0), 0.9, epsilon = 1e-15);
        // Truncation error should scale like alpha^4: doubling alpha
        // multiplies it by ~16.
        let err = |a: f64| {
            (success_probability(2, a).unwrap().0 - asymptotic_success(2, a)).abs()
        };
        let ratio = err(0.02) / err(0.01);
        assert!(
            (ratio - 16.0).abs() <= 16.0 * 0.2,
            "quartic ratio off: {ratio:.3}"
        );
    }

    #[test]
    fn comparison_baselines() {
        assert_abs_diff_eq!(group_baseline(2, 3, false), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(group_baseline(2, 3, true), 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(group_baseline(2, 1, true), 0.5, epsilon = 1e-15);
        // Knowing the pair is never worse than knowing only the phase-gate
        // family, on a grid over the whole angle range. (For n=1 the small
        // branch is identically 1/2 and ties the n=1 baseline.)
        for n in 1..=8u32 {
            let base = group_baseline(2, n, true);
            let top = FRAC_PI_4 / n as f64;
            for i in 1..=50 {
                let alpha = top * i as f64 / 50.0;
                let (p, _) = success_probability(n, alpha).unwrap();
                assert!(p >= base - 1e-12, "n={n}, alpha={alpha}: {p} < {base}");
            }
            let (p_top, _) = success_probability(n, top).unwrap();
            assert!(p_top > base, "pair knowledge should win at the top angle");
        }
    }

    #[test]
    fn processor_forms_match_indexed_forms_on_program_line() {
        for n in 1..=4u32 {
            let top = FRAC_PI_4 / n as f64;
            for i in 1..25 {
                let alpha = top * i as f64 / 25.0;
                let beta = 2.0 * n as f64 * alpha;
                assert_abs_diff_eq!(
                    processor_fidelity(alpha, beta),
                    deterministic_fidelity(n, alpha).unwrap(),
                    epsilon = 1e-12
                );
                assert_abs_diff_eq!(
                    processor_success(alpha, beta),
                    success_probability(n, alpha).unwrap().0,
                    epsilon = 1e-10
                );
            }
        }
    }

    #[test]
    fn processor_edge_values() {
        assert_abs_diff_eq!(beta_boundary(FRAC_PI_8), FRAC_PI_4, epsilon = 1e-12);
        assert_abs_diff_eq!(beta_boundary(0.0), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(beta_boundary(FRAC_PI_4), 0.0, epsilon = 1e-7);
        // Orthogonal programs retrieve perfectly with certainty.
        for i in 0..10 {
            let alpha = FRAC_PI_4 * i as f64 / 10.0;
            assert_abs_diff_eq!(processor_fidelity(alpha, PI / 2.0), 1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(processor_success(alpha, PI / 2.0), 1.0, epsilon = 1e-15);
        }
        // Identical programs, distinct channels: exact retrieval never succeeds.
        assert_abs_diff_eq!(processor_success(0.3, 0.0), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn eta_split_is_a_probability_pair() {
        for n in 1..=5u32 {
            let top = FRAC_PI_4 / n as f64;
            for i in 0..=20 {
                let alpha = top * i as f64 / 20.0;
                let u = eta_u(n, alpha);
                let v = eta_v(n, alpha);
                assert_abs_diff_eq!(u + v, 1.0, epsilon = 1e-15);
                assert!(u >= 0.5 - 1e-15, "eta_u below 1/2 at n={n}, alpha={alpha}");
                let expect = 0.5 * (1.0 + (2.0 * n as f64 * alpha).cos() * (2.0 * alpha).cos());
                assert_abs_diff_eq!(u, expect, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn success_shape_survey() {
        // Monotonicity in alpha does NOT hold for n >= 2: the quadratic
        // coefficient of the small-angle expansion is negative, and the curve
        // dips below the alpha=0 limit (by as much as ~0.08 for n=4..6)
        // before climbing to 1 at pi/(4n). What does hold empirically is a
        // single-valley shape, which we pin down here.
        for n in 2..=6u32 {
            let top = FRAC_PI_4 / n as f64;
            let grid: Vec<f64> = (1..=400)
                .map(|i| success_probability(n, top * i as f64 / 400.0).unwrap().0)
                .collect();
            let arg_min = grid
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            for w in grid[..=arg_min].windows(2) {
                assert!(w[1] <= w[0] + 1e-12, "n={n}: rise before the valley floor");
            }
            for w in grid[arg_min..].windows(2) {
                assert!(w[1] >= w[0] - 1e-12, "n={n}: drop after the valley floor");
            }
            // The dip is real, not numerical noise.
            let limit = (n as f64).powi(2) / ((n as f64).powi(2) + 1.0);
            assert!(
                limit - grid[arg_min] > 0.01,
                "n={n}: expected a visible dip below the degenerate limit"
            );
        }
        // n=1 is flat at 1/2 through the small regime, then increases.
        let mut prev = 0.0;
        for i in 1..=200 {
            let alpha = FRAC_PI_4 * i as f64 / 200.0;
            let (p, _) = success_probability(1, alpha).unwrap();
            assert!(p >= prev - 1e-12);
            prev = p;
        }
        // Monotone in n at fixed alpha, over the n allowed by the range.
        for &alpha in &[0.02, 0.05, 0.11] {
            let n_max = (PI / (4.0 * alpha)).floor() as u32;
            let mut prev = 0.0;
            for n in 1..=n_max.min(20) {
                let (p, _) = success_probability(n, alpha).unwrap();
                assert!(p >= prev - 1e-12, "drop at n={n}, alpha={alpha}");
                prev = p;
            }
        }
    }

    #[test]
    fn report_is_internally_consistent() {
        let r = ProtocolReport::compute(2, 2, 0.17).unwrap();
        assert_abs_diff_eq!(
            r.f_avg,
            average_from_entanglement(2, r.f_e),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(r.lambda_a + r.lambda_b, r.p_succ, epsilon = 1e-12);
        assert_eq!(r.regime, Regime::LargeAlpha);
        assert!(ProtocolReport::compute(1, 1, 0.1).is_err());
        // Regime tag serialization is the snake_case CSV vocabulary.
        assert_eq!(
            serde_json::to_string(&Regime::SmallAlpha).unwrap(),
            "\"small_alpha\""
        );
        assert_eq!(Regime::LargeAlpha.tag(), "large_alpha");
    }
}
