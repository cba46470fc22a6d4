//! One-sided sensitivity bounds for the McNemar test of no treatment effect,
//! and a search for the largest bias magnitude the finding survives.
//!
//! Among the `s` discordant pairs, the count `t` of hazard-window exposures
//! behaves, under the null, like a sum of independent Bernoulli draws whose
//! success probabilities are unknown but confined to
//! `[1/(1+gamma), gamma/(1+gamma)]` when treatment odds within a pair are
//! biased by at most `gamma`. The two extreme binomials bound the p-value
//! from both sides; the same binomial bound is valid when `gamma` is read as
//! the sample-average bias instead of a per-pair worst case.

use serde::Serialize;

use crate::dist;
use crate::error::{Error, Result};
use crate::study::{DiscordantSummary, GammaSpec, PValueBounds};

/// Tail computation backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Exact binomial tail sums.
    Exact,
    /// One-sided normal approximation, optionally continuity-corrected.
    Normal { continuity_correction: bool },
}

fn reference_upper_tail(s: u64, p: f64, t: u64, method: Method) -> Result<f64> {
    match method {
        Method::Exact => dist::binom_upper_tail(s, p, t),
        Method::Normal {
            continuity_correction,
        } => {
            let var = s as f64 * p * (1.0 - p);
            if var <= 0.0 {
                return Err(Error::DegenerateVariance);
            }
            let shift = if continuity_correction { 0.5 } else { 0.0 };
            let z = (t as f64 - shift - s as f64 * p) / var.sqrt();
            Ok(dist::normal_cdf(-z))
        }
    }
}

/// Bounds on the one-sided p-value for observing at least `t` hazard-window
/// exposures among `s` discordant pairs, under bias at most `gamma`.
pub fn pvalue_bounds(
    summary: &DiscordantSummary,
    gamma: &GammaSpec,
    method: Method,
) -> Result<PValueBounds> {
    if summary.s() == 0 {
        return Err(Error::NoDiscordantPairs);
    }
    let upper = reference_upper_tail(summary.s(), gamma.p_gamma(), summary.t(), method)?;
    let lower = reference_upper_tail(summary.s(), gamma.p_gamma_lower(), summary.t(), method)?;
    Ok(PValueBounds {
        lower: lower.min(upper),
        upper,
    })
}

/// Search ceiling for [`gamma_sens_search`].
pub const GAMMA_SEARCH_CAP: f64 = 1e6;

/// Default bisection tolerance on gamma.
pub const DEFAULT_GAMMA_TOL: f64 = 1e-4;

/// Outcome of the sensitivity search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaSens {
    /// Largest gamma (to within the tolerance, from below) at which the upper
    /// p-value bound is still <= alpha.
    Value(f64),
    /// Not significant even with no bias (gamma = 1).
    NotSignificantAtGammaOne,
    /// Still significant at the search cap.
    InsensitiveUpToCap,
}

impl GammaSens {
    pub fn value(&self) -> Option<f64> {
        match self {
            GammaSens::Value(g) => Some(*g),
            _ => None,
        }
    }
}

/// Reminder attached to every search result: the binomial bound behind the
/// search is valid under both readings of gamma, so the same threshold
/// applies whether bias is capped per pair or on sample average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationNote {
    ValidForWorstCaseAndAverage,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SensResult {
    pub gamma_sens: GammaSens,
    pub calibration_note: CalibrationNote,
    pub method: Method,
    pub alpha: f64,
}

/// Largest bias magnitude at which the upper p-value bound stays at or below
/// `alpha`, found by doubling then bisection to within `tol`.
pub fn gamma_sens_search(
    summary: &DiscordantSummary,
    alpha: f64,
    method: Method,
    tol: f64,
) -> Result<SensResult> {
    if !alpha.is_finite() || alpha <= 0.0 || alpha >= 1.0 {
        return Err(Error::Domain(format!("alpha = {alpha} outside (0, 1)")));
    }
    if !tol.is_finite() || tol <= 0.0 {
        return Err(Error::Domain(format!("tolerance {tol} must be positive")));
    }
    let done = |gamma_sens| SensResult {
        gamma_sens,
        calibration_note: CalibrationNote::ValidForWorstCaseAndAverage,
        method,
        alpha,
    };
    let upper_at = |g: f64| -> Result<f64> {
        Ok(pvalue_bounds(summary, &GammaSpec::worst_case(g)?, method)?.upper)
    };

    if upper_at(1.0)? > alpha {
        return Ok(done(GammaSens::NotSignificantAtGammaOne));
    }
    let mut lo = 1.0;
    let mut hi = 2.0;
    while upper_at(hi)? <= alpha {
        lo = hi;
        if hi >= GAMMA_SEARCH_CAP {
            return Ok(done(GammaSens::InsensitiveUpToCap));
        }
        hi = (hi * 2.0).min(GAMMA_SEARCH_CAP);
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if upper_at(mid)? <= alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(done(GammaSens::Value(lo)))
}

/// Sensitivity search after discarding a fraction `beta` of the discordant
/// pairs, all taken from the hazard-window side. Removing `ceil(beta * s)`
/// such pairs makes the reported threshold robust to that share of the pairs
/// being aberrant.
pub fn trimmed_gamma_search(
    summary: &DiscordantSummary,
    beta: f64,
    alpha: f64,
    method: Method,
    tol: f64,
) -> Result<SensResult> {
    if !beta.is_finite() || !(0.0..1.0).contains(&beta) {
        return Err(Error::Domain(format!("trim fraction {beta} outside [0, 1)")));
    }
    let d = (beta * summary.s() as f64).ceil() as u64;
    if d > summary.t() {
        return Err(Error::CannotTrimMoreThanT {
            requested: d,
            available: summary.t(),
        });
    }
    let trimmed = DiscordantSummary::new(summary.s() - d, summary.t() - d, summary.c_plus())?;
    gamma_sens_search(&trimmed, alpha, method, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::study::Calibration;
    use approx::assert_abs_diff_eq;

    fn summary(s: u64, t: u64) -> DiscordantSummary {
        DiscordantSummary::new(s, t, 0).unwrap()
    }

    fn exact_upper(s: u64, t: u64, gamma: f64) -> f64 {
        pvalue_bounds(&summary(s, t), &GammaSpec::worst_case(gamma).unwrap(), Method::Exact)
            .unwrap()
            .upper
    }

    #[test]
    fn no_bias_is_fair_coin() {
        // 3 of 3 discordant pairs on the hazard side: p = 1/8.
        let b = pvalue_bounds(&summary(3, 3), &GammaSpec::worst_case(1.0).unwrap(), Method::Exact)
            .unwrap();
        assert_abs_diff_eq!(b.upper, 0.125, epsilon = 1e-15);
        assert_abs_diff_eq!(b.lower, 0.125, epsilon = 1e-15);
    }

    #[test]
    fn bounds_at_gamma_two() {
        // s = 2, t = 2: upper (2/3)^2 = 4/9, lower (1/3)^2 = 1/9.
        let b = pvalue_bounds(&summary(2, 2), &GammaSpec::worst_case(2.0).unwrap(), Method::Exact)
            .unwrap();
        assert_abs_diff_eq!(b.upper, 4.0 / 9.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b.lower, 1.0 / 9.0, epsilon = 1e-15);
    }

    #[test]
    fn upper_bound_monotone_in_gamma() {
        for &(s, t) in &[(181u64, 158u64), (10, 7), (50, 25)] {
            let mut last = 0.0;
            for i in 0..40 {
                let gamma = 1.0 + 0.25 * i as f64;
                let u = exact_upper(s, t, gamma);
                assert!(u >= last - 1e-13, "gamma={gamma}: {u} < {last}");
                last = u;
            }
        }
    }

    #[test]
    fn lower_bound_monotone_decreasing_in_gamma() {
        let case = summary(50, 30);
        let mut last = 1.0;
        for i in 0..30 {
            let gamma = 1.0 + 0.3 * i as f64;
            let b = pvalue_bounds(&case, &GammaSpec::worst_case(gamma).unwrap(), Method::Exact)
                .unwrap();
            assert!(b.lower <= last + 1e-13);
            assert!(b.lower >= 0.0 && b.lower <= b.upper && b.upper <= 1.0);
            last = b.lower;
        }
    }

    #[test]
    fn average_case_reading_gives_same_numbers() {
        let w = pvalue_bounds(&summary(181, 158), &GammaSpec::worst_case(2.0).unwrap(), Method::Exact)
            .unwrap();
        let a = pvalue_bounds(
            &summary(181, 158),
            &GammaSpec::new(2.0, Calibration::AverageCase).unwrap(),
            Method::Exact,
        )
        .unwrap();
        assert_eq!(w, a);
    }

    #[test]
    fn no_discordant_pairs_is_an_error() {
        let err = pvalue_bounds(&summary(0, 0), &GammaSpec::worst_case(1.0).unwrap(), Method::Exact)
            .unwrap_err();
        assert!(matches!(err, Error::NoDiscordantPairs));
    }

    #[test]
    fn bundled_windows_significant_without_bias() {
        for (s, t) in [(181u64, 158u64), (185, 164), (139, 119), (178, 135)] {
            assert!(exact_upper(s, t, 1.0) < 1e-10);
        }
    }

    #[test]
    fn frozen_gamma_sens_values() {
        // mpmath bisection at tol 1e-4 (exact binomial tails, alpha 0.05).
        let cases = [
            (181u64, 158u64, 4.70775446819),
            (185, 164, 5.27603670558),
            (139, 119, 3.94621849923),
            (178, 135, 2.33124215954),
        ];
        for (s, t, expect) in cases {
            let r = gamma_sens_search(&summary(s, t), 0.05, Method::Exact, 1e-4).unwrap();
            let g = r.gamma_sens.value().unwrap();
            assert_abs_diff_eq!(g, expect, epsilon = 2e-4);
        }
    }

    #[test]
    fn frozen_gamma_sens_normal_method() {
        let cases = [
            (181u64, 158u64, 4.76853937291),
            (185, 164, 5.34622340722),
            (139, 119, 4.0086503931),
            (178, 135, 2.35615760495),
        ];
        for (s, t, expect) in cases {
            let r = gamma_sens_search(
                &summary(s, t),
                0.05,
                Method::Normal {
                    continuity_correction: false,
                },
                1e-4,
            )
            .unwrap();
            assert_abs_diff_eq!(r.gamma_sens.value().unwrap(), expect, epsilon = 2e-4);
        }
    }

    #[test]
    fn search_result_brackets_alpha() {
        let alpha = 0.05;
        let r = gamma_sens_search(&summary(178, 135), alpha, Method::Exact, 1e-4).unwrap();
        let g = r.gamma_sens.value().unwrap();
        assert!(exact_upper(178, 135, g) <= alpha);
        assert!(exact_upper(178, 135, g + 1e-4) > alpha);
    }

    #[test]
    fn not_significant_marker() {
        let r = gamma_sens_search(&summary(100, 50), 0.05, Method::Exact, 1e-4).unwrap();
        assert_eq!(r.gamma_sens, GammaSens::NotSignificantAtGammaOne);
    }

    #[test]
    fn insensitive_marker_at_cap() {
        // t = s, huge s: the upper bound (gamma/(1+gamma))^s is still below
        // alpha at the cap, so the search reports the marker, not a value.
        let r = gamma_sens_search(&summary(4_000_000, 4_000_000), 0.05, Method::Exact, 1e-4)
            .unwrap();
        assert_eq!(r.gamma_sens, GammaSens::InsensitiveUpToCap);
    }

    #[test]
    fn alpha_and_tol_validation() {
        assert!(gamma_sens_search(&summary(10, 9), 0.0, Method::Exact, 1e-4).is_err());
        assert!(gamma_sens_search(&summary(10, 9), 1.0, Method::Exact, 1e-4).is_err());
        assert!(gamma_sens_search(&summary(10, 9), 0.05, Method::Exact, 0.0).is_err());
    }

    #[test]
    fn exact_and_normal_stay_close_on_bundled_windows() {
        // Plain normal tails sit within 0.06 of exact over gamma in [1, 10]
        // on all four bundled windows; with continuity correction the gap
        // tightens to 0.02.
        for (s, t) in [(181u64, 158u64), (185, 164), (139, 119), (178, 135)] {
            let case = summary(s, t);
            let mut max_plain = 0.0f64;
            let mut max_corrected = 0.0f64;
            for i in 0..=900 {
                let gamma = 1.0 + 9.0 * i as f64 / 900.0;
                let spec = GammaSpec::worst_case(gamma).unwrap();
                let exact = pvalue_bounds(&case, &spec, Method::Exact).unwrap();
                let plain = pvalue_bounds(
                    &case,
                    &spec,
                    Method::Normal {
                        continuity_correction: false,
                    },
                )
                .unwrap();
                let corrected = pvalue_bounds(
                    &case,
                    &spec,
                    Method::Normal {
                        continuity_correction: true,
                    },
                )
                .unwrap();
                max_plain = max_plain.max((exact.upper - plain.upper).abs());
                max_corrected = max_corrected.max((exact.upper - corrected.upper).abs());
            }
            assert!(max_plain <= 0.06, "({s},{t}): plain gap {max_plain}");
            assert!(max_corrected <= 0.02, "({s},{t}): corrected gap {max_corrected}");
        }
    }

    #[test]
    fn trimming_shrinks_gamma_sens() {
        for (s, t, expect_05, expect_10) in [
            (181u64, 158u64, 4.401247828, 4.125435145),
            (185, 164, 4.945695981, 4.648427093),
            (139, 119, 3.705782362, 3.465398627),
            (178, 135, 2.169475308, 2.007780468),
        ] {
            let full = gamma_sens_search(&summary(s, t), 0.05, Method::Exact, 1e-4)
                .unwrap()
                .gamma_sens
                .value()
                .unwrap();
            let b05 = trimmed_gamma_search(&summary(s, t), 0.05, 0.05, Method::Exact, 1e-4)
                .unwrap()
                .gamma_sens
                .value()
                .unwrap();
            let b10 = trimmed_gamma_search(&summary(s, t), 0.10, 0.05, Method::Exact, 1e-4)
                .unwrap()
                .gamma_sens
                .value()
                .unwrap();
            assert_abs_diff_eq!(b05, expect_05, epsilon = 2e-4);
            assert_abs_diff_eq!(b10, expect_10, epsilon = 2e-4);
            assert!(b10 < b05 && b05 < full);
        }
    }

    #[test]
    fn zero_trim_is_identity() {
        let a = gamma_sens_search(&summary(139, 119), 0.05, Method::Exact, 1e-4).unwrap();
        let b = trimmed_gamma_search(&summary(139, 119), 0.0, 0.05, Method::Exact, 1e-4).unwrap();
        assert_eq!(a.gamma_sens, b.gamma_sens);
    }

    #[test]
    fn trim_larger_than_t_is_an_error() {
        let err =
            trimmed_gamma_search(&summary(100, 10), 0.2, 0.05, Method::Exact, 1e-4).unwrap_err();
        assert_eq!(
            err,
            Error::CannotTrimMoreThanT {
                requested: 20,
                available: 10
            }
        );
        assert!(trimmed_gamma_search(&summary(100, 10), 1.0, 0.05, Method::Exact, 1e-4).is_err());
    }

    #[test]
    fn normal_method_coincides_at_gamma_one() {
        let b = pvalue_bounds(
            &summary(181, 158),
            &GammaSpec::worst_case(1.0).unwrap(),
            Method::Normal {
                continuity_correction: true,
            },
        )
        .unwrap();
        assert_eq!(b.lower, b.upper);
    }
}
