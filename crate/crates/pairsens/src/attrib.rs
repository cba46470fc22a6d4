//! One-sided sensitivity intervals for attributable effects.
//!
//! The question answered here: how many of the hazard-window events can be
//! attributed to treatment, allowing for bias? Candidate counts `a` are
//! tested in turn. Attributing `a` events removes `a` pairs from the
//! hazard-window side; the remaining `s - a` pairs are compared against a
//! null reference whose success probability reflects the bias model. The
//! smallest `a` whose standardized deviate drops below the normal critical
//! value is the inclusive lower confidence bound: every count below it is
//! rejected, every count from it upward is plausible.

use serde::Serialize;

use crate::dist;
use crate::error::{Error, Result};
use crate::study::{Calibration, DiscordantSummary, GammaSpec};

/// Standardized deviate for testing `a` attributable events against a fixed
/// per-pair success probability `p` on the `s - a` remaining pairs.
fn deviate_at(s: u64, t: u64, a: u64, p: f64) -> Result<f64> {
    if a >= s {
        return Err(Error::DegenerateReference { a, s });
    }
    let m = (s - a) as f64;
    let var = m * p * (1.0 - p);
    if var <= 0.0 {
        return Err(Error::DegenerateVariance);
    }
    Ok((t as f64 - a as f64 - m * p) / var.sqrt())
}

/// Deviate with no bias: fair-coin reference on the remaining pairs.
pub fn deviate_no_bias(summary: &DiscordantSummary, a: u64) -> Result<f64> {
    deviate_at(summary.s(), summary.t(), a, 0.5)
}

/// Deviate when every remaining pair is tilted to the worst case allowed by
/// `gamma`: reference probability `gamma / (1 + gamma)`.
pub fn deviate_worst_case(summary: &DiscordantSummary, a: u64, gamma: f64) -> Result<f64> {
    let spec = GammaSpec::worst_case(gamma)?;
    deviate_at(summary.s(), summary.t(), a, spec.p_gamma())
}

/// Deviate under an average-case bias `gamma_prime`, returned together with
/// the trimmed mean reference probability it uses.
///
/// The average constraint fixes the probability budget `s * p_bar` over all
/// `s` pairs, with `p_bar = gamma_prime / (1 + gamma_prime)`. Attributing
/// `a` events removes pairs at the low extreme `p_min`, so the remaining
/// pairs carry mean `p_a = (s * p_bar - a * p_min) / (s - a)`.
pub fn deviate_average_case(
    summary: &DiscordantSummary,
    a: u64,
    gamma_prime: f64,
    p_min: f64,
) -> Result<(f64, f64)> {
    let spec = GammaSpec::average_case(gamma_prime)?;
    if !p_min.is_finite() || !(0.0..1.0).contains(&p_min) {
        return Err(Error::Domain(format!("p_min = {p_min} outside [0, 1)")));
    }
    let (s, t) = (summary.s(), summary.t());
    if a >= s {
        return Err(Error::DegenerateReference { a, s });
    }
    let p_a = (s as f64 * spec.p_gamma() - a as f64 * p_min) / (s - a) as f64;
    if p_a >= 1.0 {
        return Err(Error::DegenerateTrimmedMean { a, p: p_a });
    }
    if p_a <= 0.0 {
        return Err(Error::Domain(format!(
            "trimmed mean probability {p_a} not positive at a = {a}"
        )));
    }
    Ok((p_a, deviate_at(s, t, a, p_a)?))
}

/// Validated settings for [`attributable_interval`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AttributableConfig {
    alpha: f64,
    gamma: f64,
    calibration: Calibration,
    p_min: f64,
}

impl AttributableConfig {
    pub fn new(alpha: f64, gamma: f64, calibration: Calibration, p_min: f64) -> Result<Self> {
        if !alpha.is_finite() || alpha <= 0.0 || alpha >= 1.0 {
            return Err(Error::Domain(format!("alpha = {alpha} outside (0, 1)")));
        }
        let spec = GammaSpec::new(gamma, calibration)?;
        if !p_min.is_finite() || !(0.0..1.0).contains(&p_min) {
            return Err(Error::Domain(format!("p_min = {p_min} outside [0, 1)")));
        }
        if p_min >= spec.p_gamma() {
            return Err(Error::Domain(format!(
                "p_min = {p_min} must lie below the reference probability {}",
                spec.p_gamma()
            )));
        }
        Ok(Self {
            alpha,
            gamma,
            calibration,
            p_min,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn calibration(&self) -> Calibration {
        self.calibration
    }

    pub fn p_min(&self) -> f64 {
        self.p_min
    }
}

/// Why the candidate scan stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// The deviate fell below the critical value; this candidate is the
    /// first plausible count.
    DeviateBelowCritical,
    /// The trimmed mean reached 1, so every larger count is plausible too.
    DegenerateTrimmedMean,
    /// All testable candidates rejected; the bound sits past the last one.
    CapReached,
}

/// One scanned candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeviatePoint {
    pub a: u64,
    pub p_reference: f64,
    pub deviate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttributableResult {
    /// Smallest plausible count of attributable events (the one-sided lower
    /// confidence bound, inclusive).
    pub a_lower_inclusive: u64,
    /// Largest rejected count, `a_lower_inclusive - 1`; -1 when even 0 is
    /// plausible.
    pub a_star_exclusive: i64,
    /// For average-case runs that stopped on the deviate test: the
    /// worst-case bias whose reference probability equals the trimmed mean
    /// at the bound, `p_a / (1 - p_a)`.
    pub implied_worst_case_gamma: Option<f64>,
    pub critical_value: f64,
    pub stop: StopReason,
    pub deviate_trace: Vec<DeviatePoint>,
}

/// Scan candidate counts upward until one is plausible at level `alpha`.
///
/// Candidates run from 0 to `min(t, s - 1)`; a count above `t` can never be
/// attributed one-sidedly and `a = s` leaves no pairs to test against.
pub fn attributable_interval(
    summary: &DiscordantSummary,
    config: &AttributableConfig,
) -> Result<AttributableResult> {
    let (s, t) = (summary.s(), summary.t());
    if s == 0 {
        return Err(Error::NoDiscordantPairs);
    }
    let critical_value = dist::normal_quantile(1.0 - config.alpha)?;
    let cap = t.min(s - 1);

    let mut deviate_trace = Vec::new();
    let mut stop = StopReason::CapReached;
    let mut a_bound = cap + 1;

    for a in 0..=cap {
        let (p_reference, deviate) = match config.calibration {
            Calibration::WorstCase => {
                let spec = GammaSpec::worst_case(config.gamma)?;
                (spec.p_gamma(), deviate_worst_case(summary, a, config.gamma)?)
            }
            Calibration::AverageCase => {
                match deviate_average_case(summary, a, config.gamma, config.p_min) {
                    Ok(pair) => pair,
                    Err(Error::DegenerateTrimmedMean { .. }) => {
                        stop = StopReason::DegenerateTrimmedMean;
                        a_bound = a;
                        break;
                    }
                    Err(e) => return Err(e),
                }
            }
        };
        deviate_trace.push(DeviatePoint {
            a,
            p_reference,
            deviate,
        });
        if deviate < critical_value {
            stop = StopReason::DeviateBelowCritical;
            a_bound = a;
            break;
        }
    }

    let implied_worst_case_gamma = match (config.calibration, stop) {
        (Calibration::AverageCase, StopReason::DeviateBelowCritical) => {
            let p_a = deviate_trace.last().expect("stop pushes a point").p_reference;
            Some(p_a / (1.0 - p_a))
        }
        _ => None,
    };

    Ok(AttributableResult {
        a_lower_inclusive: a_bound,
        a_star_exclusive: a_bound as i64 - 1,
        implied_worst_case_gamma,
        critical_value,
        stop,
        deviate_trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn summary(s: u64, t: u64) -> DiscordantSummary {
        DiscordantSummary::new(s, t, 0).unwrap()
    }

    fn average_config(gamma: f64) -> AttributableConfig {
        AttributableConfig::new(0.05, gamma, Calibration::AverageCase, 0.0).unwrap()
    }

    #[test]
    fn frozen_deviates() {
        assert_abs_diff_eq!(
            deviate_no_bias(&summary(185, 164), 0).unwrap(),
            10.51356909594145,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            deviate_no_bias(&summary(4, 4), 2).unwrap(),
            std::f64::consts::SQRT_2,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            deviate_worst_case(&summary(185, 164), 31, 4.37).unwrap(),
            1.589323320347622,
            epsilon = 1e-12
        );
        let (p_a, dev) = deviate_average_case(&summary(185, 164), 31, 2.1, 0.0).unwrap();
        assert_abs_diff_eq!(p_a, 0.813782991202346, epsilon = 1e-12);
        assert_abs_diff_eq!(dev, 1.589245262271768, epsilon = 1e-12);

        let (p4, d4) = deviate_average_case(&summary(178, 135), 4, 2.1, 0.0).unwrap();
        assert_abs_diff_eq!(p4, 0.692992213570634, epsilon = 1e-12);
        assert_abs_diff_eq!(d4, 1.712487190882392, epsilon = 1e-12);
        let (p5, d5) = deviate_average_case(&summary(178, 135), 5, 2.1, 0.0).unwrap();
        assert_abs_diff_eq!(p5, 0.6969979489091926, epsilon = 1e-12);
        assert_abs_diff_eq!(d5, 1.558330503488212, epsilon = 1e-12);
    }

    #[test]
    fn worst_case_at_gamma_one_is_no_bias() {
        for (s, t) in [(10u64, 7u64), (181, 158), (50, 20)] {
            for a in [0u64, 1, 3, 7] {
                if a >= s {
                    continue;
                }
                assert_abs_diff_eq!(
                    deviate_worst_case(&summary(s, t), a, 1.0).unwrap(),
                    deviate_no_bias(&summary(s, t), a).unwrap(),
                    epsilon = 1e-14
                );
            }
        }
    }

    #[test]
    fn average_case_at_zero_attribution_matches_worst_case() {
        for gamma in [1.0, 1.7, 2.1, 4.2] {
            let (p_a, dev) = deviate_average_case(&summary(139, 119), 0, gamma, 0.0).unwrap();
            assert_abs_diff_eq!(
                dev,
                deviate_worst_case(&summary(139, 119), 0, gamma).unwrap(),
                epsilon = 1e-14
            );
            assert_abs_diff_eq!(p_a, gamma / (1.0 + gamma), epsilon = 1e-15);
        }
    }

    #[test]
    fn reference_interval_row() {
        let r = attributable_interval(&summary(178, 135), &average_config(2.1)).unwrap();
        assert_eq!(r.a_lower_inclusive, 5);
        assert_eq!(r.a_star_exclusive, 4);
        assert_eq!(r.stop, StopReason::DeviateBelowCritical);
        assert_abs_diff_eq!(
            r.implied_worst_case_gamma.unwrap(),
            2.30030769231,
            epsilon = 1e-9
        );
        // Trace covers 0..=5 and straddles the critical value at the end.
        assert_eq!(r.deviate_trace.len(), 6);
        let crit = r.critical_value;
        assert!(r.deviate_trace[4].deviate >= crit);
        assert!(r.deviate_trace[5].deviate < crit);
        assert_abs_diff_eq!(crit, 1.64485362695147271, epsilon = 1e-9);
    }

    #[test]
    fn bound_tightens_as_average_bias_grows() {
        let grid = [1.0, 1.5, 2.1, 3.0];
        let expect: [(u64, u64, [u64; 4]); 4] = [
            (181, 158, [60, 42, 28, 14]),
            (185, 164, [64, 46, 31, 18]),
            (139, 119, [43, 29, 18, 8]),
            (178, 135, [37, 19, 5, 0]),
        ];
        for (s, t, bounds) in expect {
            for (gamma, want) in grid.iter().zip(bounds) {
                let r = attributable_interval(&summary(s, t), &average_config(*gamma)).unwrap();
                assert_eq!(r.a_lower_inclusive, want, "s={s} gamma={gamma}");
            }
        }
    }

    #[test]
    fn worst_case_interval_rows() {
        for (gamma, bounds) in [(1.0, [123u64, 131, 88, 76]), (2.1, [87, 98, 56, 15])] {
            for ((s, t), want) in [(181u64, 158u64), (185, 164), (139, 119), (178, 135)]
                .into_iter()
                .zip(bounds)
            {
                let config =
                    AttributableConfig::new(0.05, gamma, Calibration::WorstCase, 0.0).unwrap();
                let r = attributable_interval(&summary(s, t), &config).unwrap();
                assert_eq!(r.a_lower_inclusive, want, "s={s} gamma={gamma}");
                assert_eq!(r.implied_worst_case_gamma, None);
            }
        }
    }

    #[test]
    fn implied_gamma_reproduces_the_stopping_deviate() {
        let r = attributable_interval(&summary(185, 164), &average_config(2.1)).unwrap();
        let a = r.a_lower_inclusive;
        let implied = r.implied_worst_case_gamma.unwrap();
        let (_, avg_dev) = deviate_average_case(&summary(185, 164), a, 2.1, 0.0).unwrap();
        let wc_dev = deviate_worst_case(&summary(185, 164), a, implied).unwrap();
        assert_abs_diff_eq!(avg_dev, wc_dev, epsilon = 1e-12);
        assert!(implied > 2.1);
    }

    #[test]
    fn implied_gamma_equals_gamma_when_bound_is_zero() {
        // Weak evidence: the bound lands at 0, where nothing was trimmed.
        let r = attributable_interval(&summary(20, 11), &average_config(1.2)).unwrap();
        assert_eq!(r.a_lower_inclusive, 0);
        assert_eq!(r.a_star_exclusive, -1);
        assert_abs_diff_eq!(r.implied_worst_case_gamma.unwrap(), 1.2, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_trimmed_mean_stops_the_scan() {
        // s * p_bar = 10 * 0.9 = 9, so the trimmed mean hits 1 exactly at
        // a = 1; with alpha = 0.2 the deviate at a = 0 is still above the
        // critical value, so the scan reaches the degeneracy.
        let config = AttributableConfig::new(0.2, 9.0, Calibration::AverageCase, 0.0).unwrap();
        let r = attributable_interval(&summary(10, 10), &config).unwrap();
        assert_eq!(r.stop, StopReason::DegenerateTrimmedMean);
        assert_eq!(r.a_lower_inclusive, 1);
        assert_eq!(r.implied_worst_case_gamma, None);
        assert_eq!(r.deviate_trace.len(), 1);
        assert!(matches!(
            deviate_average_case(&summary(10, 10), 1, 9.0, 0.0).unwrap_err(),
            Error::DegenerateTrimmedMean { a: 1, .. }
        ));
    }

    #[test]
    fn equal_p_denominator_dominates_unequal_ones() {
        // Among probability vectors with a fixed mean, the equal-probability
        // vector maximizes total Bernoulli variance, so the normal deviate's
        // denominator is conservative for the average-case reference.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            let m = rng.gen_range(2usize..=12);
            let p_a = rng.gen_range(0.05f64..0.95);
            let v: Vec<f64> = (0..m).map(|_| rng.gen::<f64>()).collect();
            let mean = v.iter().sum::<f64>() / m as f64;
            let centered: Vec<f64> = v.iter().map(|x| x - mean).collect();
            let max_up = centered.iter().cloned().fold(0.0f64, f64::max);
            let max_down = -centered.iter().cloned().fold(0.0f64, f64::min);
            let mut scale = 1.0f64;
            if max_up > 0.0 {
                scale = scale.min((1.0 - p_a) / max_up);
            }
            if max_down > 0.0 {
                scale = scale.min(p_a / max_down);
            }
            let w: Vec<f64> = centered.iter().map(|d| p_a + 0.9 * scale * d).collect();
            let var_sum: f64 = w.iter().map(|p| p * (1.0 - p)).sum();
            assert!(
                var_sum <= m as f64 * p_a * (1.0 - p_a) + 1e-12,
                "m={m} p_a={p_a}"
            );
        }
    }

    #[test]
    fn config_validation() {
        assert!(AttributableConfig::new(0.0, 2.1, Calibration::AverageCase, 0.0).is_err());
        assert!(AttributableConfig::new(0.05, 0.5, Calibration::AverageCase, 0.0).is_err());
        assert!(AttributableConfig::new(0.05, 2.1, Calibration::AverageCase, 1.0).is_err());
        // p_min at or above the reference probability starves the budget.
        assert!(AttributableConfig::new(0.05, 2.1, Calibration::AverageCase, 0.7).is_err());
        assert!(AttributableConfig::new(0.05, 2.1, Calibration::AverageCase, 0.6).is_ok());
    }

    #[test]
    fn deviate_domain_errors() {
        assert!(matches!(
            deviate_no_bias(&summary(5, 3), 5).unwrap_err(),
            Error::DegenerateReference { a: 5, s: 5 }
        ));
        assert!(deviate_worst_case(&summary(5, 3), 1, 0.9).is_err());
        assert!(deviate_average_case(&summary(5, 3), 1, 2.0, 1.0).is_err());
        assert!(attributable_interval(&summary(0, 0), &average_config(2.1)).is_err());
    }

    #[test]
    fn nonzero_p_min_raises_the_bound() {
        // Trimming pairs that still carry probability mass leaves less
        // budget to concentrate, so rejection continues longer.
        let base = attributable_interval(&summary(178, 135), &average_config(2.1)).unwrap();
        let cfg = AttributableConfig::new(0.05, 2.1, Calibration::AverageCase, 0.3).unwrap();
        let shifted = attributable_interval(&summary(178, 135), &cfg).unwrap();
        assert!(shifted.a_lower_inclusive >= base.a_lower_inclusive);
    }
}
