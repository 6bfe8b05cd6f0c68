//! Diebold-Mariano tests of equal predictive performance and the
//! Neyman-Pearson likelihood-ratio benchmark.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

use crate::dists::{std_normal_sf, ForecastDistribution};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::scores::ScoreSeries;

/// Lag-`j` sample autocovariance with divisor `n`.
pub fn autocovariance(d: &[f64], j: usize) -> Result<f64> {
    let n = d.len();
    if j >= n {
        return Err(Error::Domain(format!("lag {j} needs more than {n} observations")));
    }
    let mean = d.iter().sum::<f64>() / n as f64;
    Ok(autocov_centered(d, mean, j))
}

fn autocov_centered(d: &[f64], mean: f64, j: usize) -> f64 {
    let n = d.len();
    d[..n - j]
        .iter()
        .zip(&d[j..])
        .map(|(a, b)| (a - mean) * (b - mean))
        .sum::<f64>()
        / n as f64
}

/// Variance estimate for `(k-1)`-dependent score differences:
/// `γ0 + 2 Σ_{j<k} γj`. May come out nonpositive; [`dm_test`] rejects that.
pub fn var_kdep(d: &[f64], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::param("k", "forecast horizon must be at least 1"));
    }
    if d.len() <= k {
        return Err(Error::InsufficientData(format!("need more than k = {k} observations, have {}", d.len())));
    }
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    let mut v = autocov_centered(d, mean, 0);
    for j in 1..k {
        v += 2.0 * autocov_centered(d, mean, j);
    }
    Ok(v)
}

/// Largest integer `J` with `J^4 <= n`.
pub fn hac_bandwidth(n: usize) -> usize {
    let mut j = (n as f64).powf(0.25).floor() as usize;
    while (j + 1).pow(4) <= n {
        j += 1;
    }
    while j > 0 && j.pow(4) > n {
        j -= 1;
    }
    j
}

/// Bartlett-weighted HAC estimate `γ0 + 2 Σ_{j=1}^{J} (1 - j/J) γj`, `J = ⌊n^{1/4}⌋`.
pub fn var_hac(d: &[f64]) -> Result<f64> {
    let n = d.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!("HAC needs n >= 2, have {n}")));
    }
    let mean = d.iter().sum::<f64>() / n as f64;
    let big_j = hac_bandwidth(n);
    let mut v = autocov_centered(d, mean, 0);
    for j in 1..=big_j.min(n - 1) {
        let w = 1.0 - j as f64 / big_j as f64;
        if w > 0.0 {
            v += 2.0 * w * autocov_centered(d, mean, j);
        }
    }
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    /// `(k-1)`-dependence estimator for horizon `k`.
    Kdep(usize),
    Hac,
}

impl Estimator {
    pub fn estimate(&self, d: &[f64]) -> Result<f64> {
        match *self {
            Estimator::Kdep(k) => var_kdep(d, k),
            Estimator::Hac => var_hac(d),
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Estimator::Kdep(k) => write!(f, "kdep({k})"),
            Estimator::Hac => write!(f, "hac"),
        }
    }
}

impl Serialize for Estimator {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Estimator {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        if s == "hac" {
            return Ok(Estimator::Hac);
        }
        s.strip_prefix("kdep(")
            .and_then(|r| r.strip_suffix(')'))
            .and_then(|k| k.parse().ok())
            .map(Estimator::Kdep)
            .ok_or_else(|| serde::de::Error::custom(format!("unknown estimator `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Preferred {
    F,
    G,
    #[serde(rename = "none")]
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DmResult {
    pub statistic: f64,
    #[serde(rename = "variance")]
    pub variance_estimate: f64,
    pub n: usize,
    pub estimator: Estimator,
    #[serde(rename = "p_two")]
    pub p_two_sided: f64,
    #[serde(rename = "p_one")]
    pub p_one_sided: f64,
    pub preferred: Preferred,
    /// Identical performance on every case: no test was possible.
    #[serde(skip)]
    pub degenerate: bool,
}

/// Diebold-Mariano test on score series for forecasters F and G.
///
/// `t_n = √n (mean S_F - mean S_G) / σ̂_n`. Negative statistics favour F.
/// The one-sided p-value `1 - Φ(t_n)` tests against G being better.
pub fn dm_test(sf: &ScoreSeries, sg: &ScoreSeries, estimator: Estimator, alpha: f64) -> Result<DmResult> {
    for s in [sf, sg] {
        let count = s.values.iter().filter(|v| !v.is_finite()).count();
        if count > 0 {
            return Err(Error::NonFiniteScores {
                series: format!("{}/{}", s.forecaster_id, s.rule_id),
                count,
            });
        }
    }
    dm_test_values(&sf.values, &sg.values, estimator, alpha)
}

pub fn dm_test_values(sf: &[f64], sg: &[f64], estimator: Estimator, alpha: f64) -> Result<DmResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param("alpha", format!("must lie in (0,1), got {alpha}")));
    }
    if sf.len() != sg.len() {
        return Err(Error::LengthMismatch {
            left: sf.len(),
            right: sg.len(),
        });
    }
    let n = sf.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!("DM test needs n >= 2, have {n}")));
    }
    let bad = sf.iter().chain(sg).filter(|v| !v.is_finite()).count();
    if bad > 0 {
        return Err(Error::NonFiniteScores {
            series: "input".into(),
            count: bad,
        });
    }
    let d: Vec<f64> = sf.iter().zip(sg).map(|(a, b)| a - b).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    if d.iter().all(|x| *x == d[0]) {
        if d[0] == 0.0 {
            return Ok(DmResult {
                statistic: 0.0,
                variance_estimate: 0.0,
                n,
                estimator,
                p_two_sided: 1.0,
                p_one_sided: 0.5,
                preferred: Preferred::None,
                degenerate: true,
            });
        }
        return Err(Error::ZeroVarianceNonzeroMean { mean_diff: d[0] });
    }
    let var = estimator.estimate(&d)?;
    if !(var > 0.0) {
        return Err(Error::NonPositiveVariance(var));
    }
    let t = (n as f64).sqrt() * mean / var.sqrt();
    let p_two = (2.0 * std_normal_sf(t.abs())).min(1.0);
    let p_one = std_normal_sf(t);
    let preferred = if p_two < alpha {
        if t < 0.0 {
            Preferred::F
        } else {
            Preferred::G
        }
    } else {
        Preferred::None
    };
    Ok(DmResult {
        statistic: t,
        variance_estimate: var,
        n,
        estimator,
        p_two_sided: p_two,
        p_one_sided: p_one,
        preferred,
        degenerate: false,
    })
}

/// `Σ log f1(y) - Σ log f0(y)`.
pub fn log_likelihood_ratio(f0: &ForecastDistribution, f1: &ForecastDistribution, ys: &[f64]) -> f64 {
    ys.iter().map(|y| f1.ln_pdf(*y) - f0.ln_pdf(*y)).sum()
}

pub const MIN_LRT_REPS: usize = 1000;

fn lrt_null_statistics(
    sampler: &ForecastDistribution,
    f0: &ForecastDistribution,
    f1: &ForecastDistribution,
    n: usize,
    reps: usize,
    stream: &RngStream,
) -> Vec<f64> {
    (0..reps)
        .into_par_iter()
        .map(|i| {
            let ys = sampler.sample(&stream.derive(i as u64), n);
            log_likelihood_ratio(f0, f1, &ys)
        })
        .collect()
}

fn check_lrt_args(n: usize, alpha: f64, reps: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::param("n", "sample size must be positive"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param("alpha", format!("must lie in (0,1), got {alpha}")));
    }
    if reps < MIN_LRT_REPS {
        return Err(Error::param("reps", format!("need at least {MIN_LRT_REPS} replications, got {reps}")));
    }
    Ok(())
}

/// Monte Carlo critical value of the log likelihood ratio under `f0`.
///
/// Returns the smallest simulated statistic `c` such that at most a fraction
/// `alpha` of the simulated statistics is strictly greater than `c`.
pub fn lrt_calibrate(
    f0: &ForecastDistribution,
    f1: &ForecastDistribution,
    n: usize,
    alpha: f64,
    reps: usize,
    stream: &RngStream,
) -> Result<f64> {
    check_lrt_args(n, alpha, reps)?;
    let mut stats = lrt_null_statistics(f0, f0, f1, n, reps, stream);
    stats.sort_by(f64::total_cmp);
    let k = ((1.0 - alpha) * reps as f64).ceil() as usize;
    Ok(stats[k.clamp(1, reps) - 1])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrtResult {
    pub critical_value: f64,
    pub power: f64,
    pub level_realized: f64,
    pub n: usize,
    pub alpha: f64,
    pub reps: usize,
}

/// Power of the most powerful test of `f0` against `f1` at a calibrated
/// critical value; the realised level is re-estimated on fresh `f0` samples.
/// Rejection requires the statistic to be strictly above the critical value.
pub fn lrt_power(
    f0: &ForecastDistribution,
    f1: &ForecastDistribution,
    n: usize,
    alpha: f64,
    reps: usize,
    stream: &RngStream,
) -> Result<LrtResult> {
    let critical_value = lrt_calibrate(f0, f1, n, alpha, reps, &stream.derive(0))?;
    let level_stats = lrt_null_statistics(f0, f0, f1, n, reps, &stream.derive(1));
    let power_stats = lrt_null_statistics(f1, f0, f1, n, reps, &stream.derive(2));
    let frac = |s: &[f64]| s.iter().filter(|v| **v > critical_value).count() as f64 / reps as f64;
    Ok(LrtResult {
        critical_value,
        power: frac(&power_stats),
        level_realized: frac(&level_stats),
        n,
        alpha,
        reps,
    })
}
