//! Sensitivity analysis for matched-pair studies with binary exposure and
//! outcome, such as case-crossover designs.
//!
//! When pairing is not randomized, an unobserved covariate can tilt which
//! member of a pair lands in the hazard window. This crate quantifies how
//! strong such a tilt would need to be to overturn a finding:
//!
//! * [`mcnemar`] bounds the one-sided McNemar p-value when the within-pair
//!   exposure odds are biased by at most `gamma`, and searches for the
//!   largest `gamma` at which significance survives, with an optional trim
//!   of suspect pairs;
//! * [`calibrate`] turns an intermittent-exposure rate into the equivalent
//!   average-case bias `gamma'`, which reuses the same binomial bound but is
//!   far less conservative for the same number;
//! * [`attrib`] computes one-sided sensitivity intervals for how many events
//!   are attributable to the exposure, under worst-case or average-case
//!   calibration;
//! * [`dist`] holds the exact binomial and Poisson-Binomial kernels and the
//!   normal cdf/quantile those routines use;
//! * [`verify`] independently checks the distributional facts behind the
//!   bounds (majorization, tail orderings, a variance bound) and includes a
//!   seeded, thread-invariant Monte Carlo cross-check.

// Coefficient tables and frozen reference values keep their published digit
// counts even where that exceeds f64 precision.
#![allow(clippy::excessive_precision)]

pub mod attrib;
pub mod calibrate;
pub mod dist;
pub mod error;
pub mod mcnemar;
pub mod study;
pub mod verify;

pub use attrib::{
    attributable_interval, deviate_average_case, deviate_no_bias, deviate_worst_case,
    AttributableConfig, AttributableResult, DeviatePoint, StopReason,
};
pub use calibrate::{gamma_prime_from_intermittency, IntermittencyCalibration};
pub use dist::{
    binom_pmf, binom_upper_tail, normal_cdf, normal_quantile, poisson_binomial_pmf,
    poisson_binomial_upper_tail, PmfVector,
};
pub use error::{Error, Result};
pub use mcnemar::{
    gamma_sens_search, pvalue_bounds, trimmed_gamma_search, CalibrationNote, GammaSens, Method,
    SensResult, DEFAULT_GAMMA_TOL, GAMMA_SEARCH_CAP,
};
pub use study::{
    Calibration, ContingencyTable2x2, DiscordantSummary, GammaSpec, PValueBounds,
    ProbabilityVector,
};
pub use verify::{
    check_mean_binomial_ordering, check_sandwich, check_variance_bound, majorizes, simulate_tails,
    simulate_tails_sequential, OrderingRecord, OrderingReport, SimulationConfig, SimulationReport,
    TailEstimate, VarianceCheck, SIMULATION_SE_MULTIPLIER,
};
