//! Input types: paired exposure counts, their discordant-pair summary, and
//! the bias specification the bounds are computed under.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported number of pairs in one study. Checked at construction so
/// downstream tail sums and casts to `f64` stay exact.
pub const MAX_TOTAL_PAIRS: u64 = 1 << 31;

#[derive(Debug, Clone, Copy, Deserialize)]
struct RawTable {
    n_both: u32,
    n_hazard_only: u32,
    n_control_only: u32,
    n_neither: u32,
}

/// Paired exposure counts from a matched-pair study.
///
/// Each pair contributes one count: exposed in both windows (`n_both`), only
/// in the hazard window (`n_hazard_only`), only in the control window
/// (`n_control_only`), or in neither (`n_neither`). Only the discordant
/// cells carry information about the treatment effect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawTable")]
pub struct ContingencyTable2x2 {
    n_both: u32,
    n_hazard_only: u32,
    n_control_only: u32,
    n_neither: u32,
}

impl ContingencyTable2x2 {
    pub fn new(
        n_both: u32,
        n_hazard_only: u32,
        n_control_only: u32,
        n_neither: u32,
    ) -> Result<Self> {
        let total = n_both as u64 + n_hazard_only as u64 + n_control_only as u64 + n_neither as u64;
        if total > MAX_TOTAL_PAIRS {
            return Err(Error::StudyTooLarge { total });
        }
        Ok(Self {
            n_both,
            n_hazard_only,
            n_control_only,
            n_neither,
        })
    }

    pub fn n_both(&self) -> u32 {
        self.n_both
    }

    pub fn n_hazard_only(&self) -> u32 {
        self.n_hazard_only
    }

    pub fn n_control_only(&self) -> u32 {
        self.n_control_only
    }

    pub fn n_neither(&self) -> u32 {
        self.n_neither
    }

    pub fn total(&self) -> u64 {
        self.n_both as u64 + self.n_hazard_only as u64 + self.n_control_only as u64
            + self.n_neither as u64
    }

    /// Reduce to the discordant-pair summary the test statistic depends on.
    pub fn summarize(&self) -> DiscordantSummary {
        DiscordantSummary {
            s: self.n_hazard_only as u64 + self.n_control_only as u64,
            t: self.n_hazard_only as u64,
            c_plus: self.n_both as u64,
        }
    }
}

impl TryFrom<RawTable> for ContingencyTable2x2 {
    type Error = Error;

    fn try_from(raw: RawTable) -> Result<Self> {
        Self::new(
            raw.n_both,
            raw.n_hazard_only,
            raw.n_control_only,
            raw.n_neither,
        )
    }
}

/// Discordant-pair summary: `s` discordant pairs, of which `t` are exposed in
/// the hazard window only. `c_plus` keeps the count of doubly exposed pairs
/// for reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DiscordantSummary {
    s: u64,
    t: u64,
    c_plus: u64,
}

impl DiscordantSummary {
    pub fn new(s: u64, t: u64, c_plus: u64) -> Result<Self> {
        if t > s {
            return Err(Error::Domain(format!(
                "t = {t} exceeds the number of discordant pairs s = {s}"
            )));
        }
        if s > MAX_TOTAL_PAIRS {
            return Err(Error::StudyTooLarge { total: s });
        }
        Ok(Self { s, t, c_plus })
    }

    pub fn s(&self) -> u64 {
        self.s
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn c_plus(&self) -> u64 {
        self.c_plus
    }
}

/// How a bias magnitude is to be read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Calibration {
    /// Every pair's treatment odds are bounded by gamma.
    WorstCase,
    /// The sample-average treatment probability corresponds to gamma.
    AverageCase,
}

/// A bias magnitude gamma >= 1 together with its calibration.
///
/// Under either calibration the reference success probability for the count
/// of hazard-only discordant pairs is `gamma / (1 + gamma)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaSpec {
    gamma: f64,
    calibration: Calibration,
}

impl GammaSpec {
    pub fn new(gamma: f64, calibration: Calibration) -> Result<Self> {
        if !gamma.is_finite() || gamma < 1.0 {
            return Err(Error::Domain(format!(
                "gamma = {gamma} must be a finite value >= 1"
            )));
        }
        Ok(Self { gamma, calibration })
    }

    pub fn worst_case(gamma: f64) -> Result<Self> {
        Self::new(gamma, Calibration::WorstCase)
    }

    pub fn average_case(gamma: f64) -> Result<Self> {
        Self::new(gamma, Calibration::AverageCase)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn calibration(&self) -> Calibration {
        self.calibration
    }

    /// Upper reference probability gamma / (1 + gamma), in [1/2, 1).
    pub fn p_gamma(&self) -> f64 {
        self.gamma / (1.0 + self.gamma)
    }

    /// Lower reference probability 1 / (1 + gamma), in (0, 1/2].
    pub fn p_gamma_lower(&self) -> f64 {
        1.0 / (1.0 + self.gamma)
    }
}

/// Lower and upper bounds on a one-sided p-value over the bias model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PValueBounds {
    pub lower: f64,
    pub upper: f64,
}

/// A vector of per-pair success probabilities, each in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        for (i, &p) in probs.iter().enumerate() {
            if !p.is_finite() || !(0.0..=1.0).contains(&p) {
                return Err(Error::Domain(format!(
                    "probability {p} at index {i} outside [0, 1]"
                )));
            }
        }
        Ok(Self(probs))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Mean entry; 0 for an empty vector.
    pub fn p_bar(&self) -> f64 {
        if self.0.is_empty() {
            return 0.0;
        }
        self.0.iter().sum::<f64>() / self.0.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summarize_splits_discordant_pairs() {
        let table = ContingencyTable2x2::new(12, 158, 23, 506).unwrap();
        let d = table.summarize();
        assert_eq!(d.s(), 181);
        assert_eq!(d.t(), 158);
        assert_eq!(d.c_plus(), 12);
        assert_eq!(table.total(), 699);
    }

    #[test]
    fn summarize_all_concordant() {
        let table = ContingencyTable2x2::new(5, 0, 0, 7).unwrap();
        let d = table.summarize();
        assert_eq!(d.s(), 0);
        assert_eq!(d.t(), 0);
        assert_eq!(d.c_plus(), 5);
    }

    #[test]
    fn table_rejects_oversized_study() {
        let quarter = (MAX_TOTAL_PAIRS / 4) as u32 + 1;
        let err = ContingencyTable2x2::new(quarter, quarter, quarter, quarter).unwrap_err();
        assert!(matches!(err, Error::StudyTooLarge { .. }));
    }

    #[test]
    fn summary_rejects_t_above_s() {
        let err = DiscordantSummary::new(10, 11, 0).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn table_deserialization_validates() {
        let ok: ContingencyTable2x2 =
            serde_json::from_str(r#"{"n_both":6,"n_hazard_only":164,"n_control_only":21,"n_neither":508}"#)
                .unwrap();
        assert_eq!(ok.summarize().s(), 185);

        let big = format!(
            r#"{{"n_both":{q},"n_hazard_only":{q},"n_control_only":{q},"n_neither":{q}}}"#,
            q = MAX_TOTAL_PAIRS / 4 + 1
        );
        assert!(serde_json::from_str::<ContingencyTable2x2>(&big).is_err());
    }

    #[test]
    fn gamma_spec_probabilities() {
        let spec = GammaSpec::worst_case(2.0).unwrap();
        assert!((spec.p_gamma() - 2.0 / 3.0).abs() < 1e-15);
        assert!((spec.p_gamma_lower() - 1.0 / 3.0).abs() < 1e-15);
        assert!((spec.p_gamma() + spec.p_gamma_lower() - 1.0).abs() < 1e-15);

        assert!(GammaSpec::worst_case(0.9).is_err());
        assert!(GammaSpec::worst_case(f64::NAN).is_err());
        assert!(GammaSpec::worst_case(f64::INFINITY).is_err());
    }

    #[test]
    fn probability_vector_validation() {
        let p = ProbabilityVector::new(vec![0.9, 0.6, 0.3]).unwrap();
        assert_eq!(p.len(), 3);
        assert!((p.p_bar() - 0.6).abs() < 1e-15);
        assert!(ProbabilityVector::new(vec![0.5, 1.2]).is_err());
        assert!(ProbabilityVector::new(vec![-0.1]).is_err());
        assert!(ProbabilityVector::new(vec![f64::NAN]).is_err());
        assert_eq!(ProbabilityVector::new(vec![]).unwrap().p_bar(), 0.0);
    }
}
