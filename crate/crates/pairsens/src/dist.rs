//! Distribution kernels: exact binomial tails, exact Poisson-Binomial pmf and
//! tails, and the standard normal cdf and quantile.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::study::ProbabilityVector;

/// Compensated (Neumaier) accumulator; keeps long sums accurate to a few ulp.
#[derive(Debug, Default, Clone, Copy)]
struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Probability mass function over counts `0..=s`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PmfVector(Vec<f64>);

impl PmfVector {
    /// Number of trials; the vector has `s() + 1` entries.
    pub fn s(&self) -> u64 {
        (self.0.len() - 1) as u64
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// P(count >= k), summed with compensation and clamped to [0, 1].
    pub fn upper_tail(&self, k: u64) -> Result<f64> {
        if k > self.s() {
            return Err(Error::Domain(format!(
                "threshold {k} exceeds the number of trials {}",
                self.s()
            )));
        }
        let mut sum = NeumaierSum::default();
        for &m in &self.0[k as usize..] {
            sum.add(m);
        }
        Ok(sum.value().clamp(0.0, 1.0))
    }
}

/// ln p with full relative accuracy on both ends of [0, 1].
fn ln_p(p: f64) -> f64 {
    if p >= 0.5 {
        (-(1.0 - p)).ln_1p()
    } else {
        p.ln()
    }
}

/// ln(1 - p), same idea.
fn ln_q(p: f64) -> f64 {
    if p <= 0.5 {
        (-p).ln_1p()
    } else {
        (1.0 - p).ln()
    }
}

/// ln C(n, k), summed over the shorter side of the coefficient.
fn ln_choose(n: u64, k: u64) -> f64 {
    let m = k.min(n - k);
    let mut sum = NeumaierSum::default();
    for j in 1..=m {
        sum.add(((n - m + j) as f64 / j as f64).ln());
    }
    sum.value()
}

/// Binomial(n, p) mass at k, evaluated in log space so that far-tail terms
/// keep relative accuracy instead of underflowing intermediate factors.
pub fn binom_pmf(n: u64, p: f64, k: u64) -> Result<f64> {
    if !p.is_finite() || !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("success probability {p} outside [0, 1]")));
    }
    if k > n {
        return Err(Error::Domain(format!("count {k} exceeds trial count {n}")));
    }
    if p == 0.0 {
        return Ok(if k == 0 { 1.0 } else { 0.0 });
    }
    if p == 1.0 {
        return Ok(if k == n { 1.0 } else { 0.0 });
    }
    Ok((ln_choose(n, k) + k as f64 * ln_p(p) + (n - k) as f64 * ln_q(p)).exp())
}

/// Sum of Binomial(n, p) masses for counts in lo..=hi, with 0 < p < 1.
///
/// Terms are generated by the pmf ratio recurrence from an anchor at the
/// in-range mode, so each term is reached by multiplying well-scaled factors.
fn sum_binom_pmf(n: u64, p: f64, lo: u64, hi: u64) -> f64 {
    debug_assert!(lo <= hi && hi <= n);
    let q = 1.0 - p;
    let mode = (((n + 1) as f64) * p).floor().min(n as f64).max(0.0) as u64;
    let anchor = mode.clamp(lo, hi);
    let t_anchor = binom_pmf(n, p, anchor).expect("validated arguments");

    let mut sum = NeumaierSum::default();
    sum.add(t_anchor);
    let mut t = t_anchor;
    for j in anchor..hi {
        t *= ((n - j) as f64 / (j + 1) as f64) * (p / q);
        sum.add(t);
    }
    t = t_anchor;
    for j in (lo + 1..=anchor).rev() {
        t *= (j as f64 / (n - j + 1) as f64) * (q / p);
        sum.add(t);
    }
    sum.value()
}

/// P(X >= k) for X ~ Binomial(n, p).
///
/// The smaller-mass side is summed directly (the requested tail when
/// k >= np, the complement otherwise), so small tail probabilities retain
/// relative accuracy rather than being computed as 1 minus something near 1.
pub fn binom_upper_tail(n: u64, p: f64, k: u64) -> Result<f64> {
    if !p.is_finite() || !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("success probability {p} outside [0, 1]")));
    }
    if k > n {
        return Err(Error::Domain(format!("threshold {k} exceeds trial count {n}")));
    }
    if k == 0 {
        return Ok(1.0);
    }
    if p == 0.0 {
        return Ok(0.0);
    }
    if p == 1.0 {
        return Ok(1.0);
    }
    if k as f64 >= n as f64 * p {
        Ok(sum_binom_pmf(n, p, k, n).min(1.0))
    } else {
        Ok((1.0 - sum_binom_pmf(n, p, 0, k - 1)).clamp(0.0, 1.0))
    }
}

/// Exact distribution of a sum of independent Bernoulli trials with the given
/// success probabilities, by direct convolution in O(s^2).
pub fn poisson_binomial_pmf(probs: &ProbabilityVector) -> PmfVector {
    let mut pmf = vec![0.0f64; probs.len() + 1];
    pmf[0] = 1.0;
    for (i, &p) in probs.as_slice().iter().enumerate() {
        let q = 1.0 - p;
        for j in (1..=i + 1).rev() {
            pmf[j] = pmf[j] * q + pmf[j - 1] * p;
        }
        pmf[0] *= q;
    }
    PmfVector(pmf)
}

/// P(sum >= k) for the Poisson-Binomial distribution of `probs`.
pub fn poisson_binomial_upper_tail(probs: &ProbabilityVector, k: u64) -> Result<f64> {
    poisson_binomial_pmf(probs).upper_tail(k)
}

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const INV_SQRT_PI: f64 = 5.641_895_835_477_562_9e-1;

const ERF_A: [f64; 5] = [
    3.161_123_743_870_565_6e0,
    1.138_641_541_510_501_6e2,
    3.774_852_376_853_020_2e2,
    3.209_377_589_138_469_5e3,
    1.857_777_061_846_031_5e-1,
];
const ERF_B: [f64; 4] = [
    2.360_129_095_234_412_1e1,
    2.440_246_379_344_441_7e2,
    1.282_616_526_077_372_3e3,
    2.844_236_833_439_170_6e3,
];
const ERFC_C: [f64; 9] = [
    5.641_884_969_886_700_9e-1,
    8.883_149_794_388_375_9e0,
    6.611_919_063_714_163e1,
    2.986_351_381_974_001_3e2,
    8.819_522_212_417_691e2,
    1.712_047_612_634_070_6e3,
    2.051_078_377_826_071_5e3,
    1.230_339_354_797_997_2e3,
    2.153_115_354_744_038_5e-8,
];
const ERFC_D: [f64; 8] = [
    1.574_492_611_070_983_5e1,
    1.176_939_508_913_125e2,
    5.371_811_018_620_098_6e2,
    1.621_389_574_566_690_2e3,
    3.290_799_235_733_459_6e3,
    4.362_619_090_143_247e3,
    3.439_367_674_143_721_6e3,
    1.230_339_354_803_749_4e3,
];
const ERFC_P: [f64; 6] = [
    3.053_266_349_612_323_4e-1,
    3.603_448_999_498_044_4e-1,
    1.257_817_261_112_292_5e-1,
    1.608_378_514_874_227_7e-2,
    6.587_491_615_298_378e-4,
    1.631_538_713_730_209_8e-2,
];
const ERFC_Q: [f64; 5] = [
    2.568_520_192_289_822_4e0,
    1.872_952_849_923_460_5e0,
    5.279_051_029_514_284_1e-1,
    6.051_834_131_244_131_9e-2,
    2.335_204_976_268_691_8e-3,
];

/// exp(-y^2) with the argument split so the large square is rounded once.
fn exp_neg_sq(y: f64) -> f64 {
    let ysq = (y * 16.0).trunc() / 16.0;
    let del = (y - ysq) * (y + ysq);
    (-ysq * ysq).exp() * (-del).exp()
}

fn erf_small(x: f64) -> f64 {
    let z = x * x;
    let mut num = ERF_A[4] * z;
    let mut den = z;
    for i in 0..3 {
        num = (num + ERF_A[i]) * z;
        den = (den + ERF_B[i]) * z;
    }
    x * (num + ERF_A[3]) / (den + ERF_B[3])
}

fn erfc_mid(y: f64) -> f64 {
    let mut num = ERFC_C[8] * y;
    let mut den = y;
    for i in 0..7 {
        num = (num + ERFC_C[i]) * y;
        den = (den + ERFC_D[i]) * y;
    }
    exp_neg_sq(y) * (num + ERFC_C[7]) / (den + ERFC_D[7])
}

fn erfc_large(y: f64) -> f64 {
    // erfc underflows to zero past here for f64.
    if y > 26.6 {
        return 0.0;
    }
    let z = 1.0 / (y * y);
    let mut num = ERFC_P[5] * z;
    let mut den = z;
    for i in 0..4 {
        num = (num + ERFC_P[i]) * z;
        den = (den + ERFC_Q[i]) * z;
    }
    let r = z * (num + ERFC_P[4]) / (den + ERFC_Q[4]);
    exp_neg_sq(y) * (INV_SQRT_PI - r) / y
}

/// Complementary error function, rational approximations after Cody.
/// Relative accuracy is near machine precision for positive arguments.
pub fn erfc(x: f64) -> f64 {
    let y = x.abs();
    let v = if y <= 0.46875 {
        1.0 - erf_small(x)
    } else if y <= 4.0 {
        erfc_mid(y)
    } else {
        erfc_large(y)
    };
    if x < -0.46875 {
        2.0 - v
    } else {
        v
    }
}

/// Standard normal cdf. Absolute accuracy ~1e-15; deep lower-tail values
/// keep relative accuracy because they go through erfc directly.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

const ACKLAM_A: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_690e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239e0,
];
const ACKLAM_B: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const ACKLAM_C: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838e0,
    -2.549_732_539_343_734e0,
    4.374_664_141_464_968e0,
    2.938_163_982_698_783e0,
];
const ACKLAM_D: [f64; 4] = [
    7.784_695_709_041_462e-3,
    3.224_671_290_700_398e-1,
    2.445_134_137_142_996e0,
    3.754_408_661_907_416e0,
];
const ACKLAM_LOW: f64 = 0.02425;

/// Rational initial quantile estimate (Acklam), for 0 < p <= 1/2.
fn quantile_estimate(p: f64) -> f64 {
    if p < ACKLAM_LOW {
        let u = (-2.0 * p.ln()).sqrt();
        (((((ACKLAM_C[0] * u + ACKLAM_C[1]) * u + ACKLAM_C[2]) * u + ACKLAM_C[3]) * u
            + ACKLAM_C[4])
            * u
            + ACKLAM_C[5])
            / ((((ACKLAM_D[0] * u + ACKLAM_D[1]) * u + ACKLAM_D[2]) * u + ACKLAM_D[3]) * u + 1.0)
    } else {
        let r = p - 0.5;
        let s = r * r;
        (((((ACKLAM_A[0] * s + ACKLAM_A[1]) * s + ACKLAM_A[2]) * s + ACKLAM_A[3]) * s
            + ACKLAM_A[4])
            * s
            + ACKLAM_A[5])
            * r
            / (((((ACKLAM_B[0] * s + ACKLAM_B[1]) * s + ACKLAM_B[2]) * s + ACKLAM_B[3]) * s
                + ACKLAM_B[4])
                * s
                + 1.0)
    }
}

/// One Halley refinement of the quantile estimate against `normal_cdf`.
fn quantile_polish(x: f64, p: f64) -> f64 {
    let half_x2 = 0.5 * x * x;
    if half_x2 >= 700.0 {
        return x;
    }
    let e = normal_cdf(x) - p;
    let u = e * (2.0 * std::f64::consts::PI).sqrt() * half_x2.exp();
    x - u / (1.0 + 0.5 * x * u)
}

/// Standard normal quantile. The argument is folded onto (0, 1/2], where the
/// complement 1 - q is exact in f64, so both tails resolve to ~1e-14.
pub fn normal_quantile(q: f64) -> Result<f64> {
    if !q.is_finite() || q <= 0.0 || q >= 1.0 {
        return Err(Error::Domain(format!("quantile argument {q} outside (0, 1)")));
    }
    if q == 0.5 {
        return Ok(0.0);
    }
    let (p, sign) = if q > 0.5 { (1.0 - q, -1.0) } else { (q, 1.0) };
    Ok(sign * quantile_polish(quantile_estimate(p), p))
}
