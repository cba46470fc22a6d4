//! Independent checks of the distributional facts the p-value bounds rest
//! on: majorization of probability vectors, tail ordering against the
//! matched-mean binomial, the two-sided binomial sandwich, the pooled
//! variance bound, and a seeded Monte Carlo cross-check of exact tails.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dist::{binom_upper_tail, poisson_binomial_pmf};
use crate::error::{Error, Result};
use crate::study::ProbabilityVector;

const ORDER_TOL: f64 = 1e-12;

/// Whether `x` majorizes `y`: equal totals, and every prefix of the
/// descending rearrangement of `x` carries at least as much mass.
pub fn majorizes(x: &[f64], y: &[f64]) -> Result<bool> {
    if x.len() != y.len() {
        return Err(Error::Domain(format!(
            "majorization needs equal lengths, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let desc = |v: &[f64]| {
        let mut s = v.to_vec();
        s.sort_by(|a, b| b.partial_cmp(a).expect("finite entries"));
        s
    };
    let xs = desc(x);
    let ys = desc(y);
    let mut px = 0.0;
    let mut py = 0.0;
    for i in 0..xs.len() {
        px += xs[i];
        py += ys[i];
        if i + 1 < xs.len() && px < py - ORDER_TOL {
            return Ok(false);
        }
    }
    Ok((px - py).abs() <= 1e-9)
}

/// One tail comparison; the claim under test is `lhs_tail <= rhs_tail`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrderingRecord {
    pub a: u64,
    pub lhs_tail: f64,
    pub rhs_tail: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderingReport {
    pub records: Vec<OrderingRecord>,
    /// First threshold from which the ordering is guaranteed; records below
    /// it are diagnostic only.
    pub guaranteed_from: u64,
    pub domain_note: String,
}

impl OrderingReport {
    pub fn all_hold(&self) -> bool {
        self.records.iter().all(|r| r.holds)
    }

    pub fn holds_on_guaranteed_domain(&self) -> bool {
        self.records
            .iter()
            .filter(|r| r.a >= self.guaranteed_from)
            .all(|r| r.holds)
    }
}

/// Compare Poisson-Binomial upper tails against the binomial with the same
/// mean. The ordering (exact tail <= binomial tail) is guaranteed only for
/// thresholds strictly above `ceil(s * p_bar)`; the report carries every
/// threshold so the boundary failure is visible.
pub fn check_mean_binomial_ordering(probs: &ProbabilityVector) -> Result<OrderingReport> {
    let s = probs.len() as u64;
    let p_bar = probs.p_bar();
    let pmf = poisson_binomial_pmf(probs);
    let guaranteed_from = ((s as f64 * p_bar).ceil() as u64).saturating_add(1).min(s + 1);
    let mut records = Vec::with_capacity(s as usize + 1);
    for a in 0..=s {
        let lhs = pmf.upper_tail(a)?;
        let rhs = binom_upper_tail(s, p_bar, a)?;
        records.push(OrderingRecord {
            a,
            lhs_tail: lhs,
            rhs_tail: rhs,
            holds: lhs <= rhs + ORDER_TOL,
        });
    }
    Ok(OrderingReport {
        records,
        guaranteed_from,
        domain_note: format!(
            "exact tail <= mean-matched binomial tail is guaranteed for a >= {guaranteed_from} \
             (strictly above ceil(s * p_bar) = {}); below that the ordering can reverse",
            guaranteed_from.saturating_sub(1)
        ),
    })
}

/// Check that the two extreme binomials bracket the exact tail at every
/// threshold, given that each probability respects the odds band of `gamma`.
/// Records come in pairs per threshold: lower binomial vs exact, then exact
/// vs upper binomial.
pub fn check_sandwich(probs: &ProbabilityVector, gamma: f64) -> Result<OrderingReport> {
    if !gamma.is_finite() || gamma < 1.0 {
        return Err(Error::Domain(format!("gamma = {gamma} must be >= 1")));
    }
    let p_lo = 1.0 / (1.0 + gamma);
    let p_hi = gamma / (1.0 + gamma);
    for (index, &p) in probs.as_slice().iter().enumerate() {
        if p < p_lo - ORDER_TOL || p > p_hi + ORDER_TOL {
            return Err(Error::OddsOutsideGamma {
                index,
                odds: p / (1.0 - p),
                gamma,
            });
        }
    }
    let s = probs.len() as u64;
    let pmf = poisson_binomial_pmf(probs);
    let mut records = Vec::with_capacity(2 * (s as usize + 1));
    for a in 0..=s {
        let exact = pmf.upper_tail(a)?;
        let lo = binom_upper_tail(s, p_lo, a)?;
        let hi = binom_upper_tail(s, p_hi, a)?;
        records.push(OrderingRecord {
            a,
            lhs_tail: lo,
            rhs_tail: exact,
            holds: lo <= exact + ORDER_TOL,
        });
        records.push(OrderingRecord {
            a,
            lhs_tail: exact,
            rhs_tail: hi,
            holds: exact <= hi + ORDER_TOL,
        });
    }
    Ok(OrderingReport {
        records,
        guaranteed_from: 0,
        domain_note: format!(
            "binomial({s}, {p_lo:.6}) <= exact <= binomial({s}, {p_hi:.6}) at every threshold"
        ),
    })
}

/// Total Bernoulli variance against the equal-probability binomial variance
/// with the same mean; the claim is `exact_variance <= binomial_variance`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarianceCheck {
    pub exact_variance: f64,
    pub binomial_variance: f64,
    pub holds: bool,
}

pub fn check_variance_bound(probs: &ProbabilityVector) -> VarianceCheck {
    let exact: f64 = probs.as_slice().iter().map(|p| p * (1.0 - p)).sum();
    let p_bar = probs.p_bar();
    let binomial = probs.len() as f64 * p_bar * (1.0 - p_bar);
    VarianceCheck {
        exact_variance: exact,
        binomial_variance: binomial,
        holds: exact <= binomial + ORDER_TOL,
    }
}

/// Acceptance band for the Monte Carlo cross-check, in standard errors.
pub const SIMULATION_SE_MULTIPLIER: f64 = 3.5;

/// Monte Carlo setup: each pair carries two latent scores in [0, 1]; the
/// chance the hazard-window unit is the exposed one follows a logistic in
/// `gamma_log` times their difference. `gamma_log` is ln(gamma), so 0 means
/// no bias.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationConfig {
    u_pairs: Vec<(f64, f64)>,
    gamma_log: f64,
    reps: u64,
    seed: u64,
}

impl SimulationConfig {
    pub fn new(u_pairs: Vec<(f64, f64)>, gamma_log: f64, reps: u64, seed: u64) -> Result<Self> {
        for (i, &(u1, u2)) in u_pairs.iter().enumerate() {
            for u in [u1, u2] {
                if !u.is_finite() || !(0.0..=1.0).contains(&u) {
                    return Err(Error::Domain(format!(
                        "latent score {u} at pair {i} outside [0, 1]"
                    )));
                }
            }
        }
        if !gamma_log.is_finite() || gamma_log < 0.0 {
            return Err(Error::Domain(format!(
                "gamma_log = {gamma_log} must be finite and >= 0"
            )));
        }
        if reps == 0 {
            return Err(Error::Domain("reps must be positive".into()));
        }
        Ok(Self {
            u_pairs,
            gamma_log,
            reps,
            seed,
        })
    }

    pub fn u_pairs(&self) -> &[(f64, f64)] {
        &self.u_pairs
    }

    pub fn gamma_log(&self) -> f64 {
        self.gamma_log
    }

    pub fn reps(&self) -> u64 {
        self.reps
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Per-pair success probabilities sigmoid(gamma_log * (u1 - u2)).
    pub fn success_probabilities(&self) -> ProbabilityVector {
        let probs = self
            .u_pairs
            .iter()
            .map(|&(u1, u2)| {
                let d = self.gamma_log * (u1 - u2);
                if d >= 0.0 {
                    1.0 / (1.0 + (-d).exp())
                } else {
                    let e = d.exp();
                    e / (1.0 + e)
                }
            })
            .collect();
        ProbabilityVector::new(probs).expect("sigmoid output is in [0, 1]")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailEstimate {
    pub threshold: u64,
    pub hits: u64,
    pub empirical: f64,
    pub std_error: f64,
    pub exact: f64,
}

impl TailEstimate {
    /// Whether the empirical tail sits within `se_multiplier` standard
    /// errors of the exact one (equality required when the error is zero).
    pub fn within(&self, se_multiplier: f64) -> bool {
        (self.empirical - self.exact).abs() <= se_multiplier * self.std_error
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub reps: u64,
    pub seed: u64,
    pub rows: Vec<TailEstimate>,
}

impl SimulationReport {
    pub fn all_within(&self, se_multiplier: f64) -> bool {
        self.rows.iter().all(|r| r.within(se_multiplier))
    }
}

/// Replications per RNG stream. Each shard draws from its own ChaCha stream,
/// so the merged histogram does not depend on how shards are scheduled.
const SHARD_SIZE: u64 = 8192;

fn shard_histogram(probs: &[f64], seed: u64, shard: u64, reps: u64) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(shard);
    let mut hist = vec![0u64; probs.len() + 1];
    for _ in 0..reps {
        let mut count = 0usize;
        for &p in probs {
            if rng.gen::<f64>() < p {
                count += 1;
            }
        }
        hist[count] += 1;
    }
    hist
}

fn merge_histograms(mut a: Vec<u64>, b: Vec<u64>) -> Vec<u64> {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
    a
}

fn shard_reps(total: u64, shard: u64) -> u64 {
    SHARD_SIZE.min(total - shard * SHARD_SIZE)
}

fn validate_thresholds(thresholds: &[u64], s: u64) -> Result<()> {
    for &t in thresholds {
        if t > s {
            return Err(Error::Domain(format!(
                "threshold {t} exceeds the number of pairs {s}"
            )));
        }
    }
    Ok(())
}

fn tally(config: &SimulationConfig, thresholds: &[u64], hist: Vec<u64>) -> Result<SimulationReport> {
    let pmf = poisson_binomial_pmf(&config.success_probabilities());
    let reps = config.reps as f64;
    let rows = thresholds
        .iter()
        .map(|&threshold| {
            let hits: u64 = hist[threshold as usize..].iter().sum();
            let empirical = hits as f64 / reps;
            let std_error = (empirical * (1.0 - empirical) / reps).sqrt();
            Ok(TailEstimate {
                threshold,
                hits,
                empirical,
                std_error,
                exact: pmf.upper_tail(threshold)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SimulationReport {
        reps: config.reps,
        seed: config.seed,
        rows,
    })
}

/// Estimate upper tails of the pair-count distribution by simulation,
/// sequentially, one RNG shard at a time. Byte-identical to the parallel
/// version for the same config.
pub fn simulate_tails_sequential(
    config: &SimulationConfig,
    thresholds: &[u64],
) -> Result<SimulationReport> {
    let probs = config.success_probabilities();
    validate_thresholds(thresholds, probs.len() as u64)?;
    let n_shards = config.reps.div_ceil(SHARD_SIZE);
    let mut hist = vec![0u64; probs.len() + 1];
    for shard in 0..n_shards {
        hist = merge_histograms(
            hist,
            shard_histogram(probs.as_slice(), config.seed, shard, shard_reps(config.reps, shard)),
        );
    }
    tally(config, thresholds, hist)
}

/// Estimate upper tails of the pair-count distribution by simulation,
/// fanning RNG shards out across threads. Scheduling cannot change the
/// result: streams are indexed by shard and merged by integer addition.
#[cfg(feature = "parallel")]
pub fn simulate_tails(config: &SimulationConfig, thresholds: &[u64]) -> Result<SimulationReport> {
    use rayon::prelude::*;

    let probs = config.success_probabilities();
    validate_thresholds(thresholds, probs.len() as u64)?;
    let n_shards = config.reps.div_ceil(SHARD_SIZE);
    let hist = (0..n_shards)
        .into_par_iter()
        .map(|shard| {
            shard_histogram(probs.as_slice(), config.seed, shard, shard_reps(config.reps, shard))
        })
        .reduce(|| vec![0u64; probs.len() + 1], merge_histograms);
    tally(config, thresholds, hist)
}

/// Sequential stand-in with the same signature when the `parallel` feature
/// is disabled.
#[cfg(not(feature = "parallel"))]
pub fn simulate_tails(config: &SimulationConfig, thresholds: &[u64]) -> Result<SimulationReport> {
    simulate_tails_sequential(config, thresholds)
}
