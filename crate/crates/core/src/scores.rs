//! Unweighted proper scoring rules, consistent scoring functions for point
//! forecasts, restricted (outcome-conditioned) means, and PIT diagnostics.

use std::f64::consts::PI;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::dists::{std_normal_cdf, std_normal_pdf, ForecastDistribution};
use crate::error::{Error, Result};
use crate::quad;
use crate::wscores::WeightFunction;

/// Per-case scores of one forecaster under one rule, aligned with the observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSeries {
    pub rule_id: String,
    pub forecaster_id: String,
    pub observations: Vec<f64>,
    pub values: Vec<f64>,
}

/// Mean of a score series together with the number of infinite entries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub mean: f64,
    pub infinite_count: usize,
    pub n: usize,
}

impl ScoreSeries {
    pub fn new(
        rule_id: impl Into<String>,
        forecaster_id: impl Into<String>,
        observations: Vec<f64>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if observations.len() != values.len() {
            return Err(Error::LengthMismatch {
                left: observations.len(),
                right: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| v.is_nan()) {
            return Err(Error::Domain(format!("score at case {i} is NaN")));
        }
        Ok(Self {
            rule_id: rule_id.into(),
            forecaster_id: forecaster_id.into(),
            observations,
            values,
        })
    }

    /// Score every `(forecast, observation)` pair with `rule`.
    pub fn score<F>(
        rule_id: impl Into<String>,
        forecaster_id: impl Into<String>,
        forecasts: &[ForecastDistribution],
        observations: &[f64],
        rule: F,
    ) -> Result<Self>
    where
        F: Fn(&ForecastDistribution, f64) -> Result<f64>,
    {
        if forecasts.len() != observations.len() {
            return Err(Error::LengthMismatch {
                left: forecasts.len(),
                right: observations.len(),
            });
        }
        let values = forecasts
            .iter()
            .zip(observations)
            .map(|(f, y)| rule(f, *y))
            .collect::<Result<Vec<_>>>()?;
        Self::new(rule_id, forecaster_id, observations.to_vec(), values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Infinite values propagate: the mean is `+inf` if any case is.
    pub fn summary(&self) -> ScoreSummary {
        let infinite_count = self.values.iter().filter(|v| v.is_infinite()).count();
        let mean = if self.values.is_empty() {
            f64::NAN
        } else {
            self.values.iter().sum::<f64>() / self.values.len() as f64
        };
        ScoreSummary {
            mean,
            infinite_count,
            n: self.values.len(),
        }
    }

    pub fn mean(&self) -> f64 {
        self.summary().mean
    }

    /// CSV with the fixed header `case_index,observation,score`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["case_index", "observation", "score"])?;
        for (i, (y, s)) in self.observations.iter().zip(&self.values).enumerate() {
            w.write_record([i.to_string(), y.to_string(), s.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R, rule_id: &str, forecaster_id: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let headers = r.headers()?.clone();
        let expected = ["case_index", "observation", "score"];
        if headers.len() != 3 || headers.iter().zip(expected).any(|(h, e)| h.trim() != e) {
            return Err(Error::Parse {
                row: 0,
                reason: format!("expected header case_index,observation,score, found {:?}", headers),
            });
        }
        let mut observations = Vec::new();
        let mut values = Vec::new();
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            let parse = |k: usize| -> Result<f64> {
                rec[k].trim().parse::<f64>().map_err(|e| Error::Parse {
                    row: row + 1,
                    reason: format!("column {}: {e}", expected[k]),
                })
            };
            let idx: usize = rec[0].trim().parse().map_err(|e| Error::Parse {
                row: row + 1,
                reason: format!("case_index: {e}"),
            })?;
            if idx != row {
                return Err(Error::Parse {
                    row: row + 1,
                    reason: format!("case_index {idx} out of sequence"),
                });
            }
            observations.push(parse(1)?);
            values.push(parse(2)?);
        }
        Self::new(rule_id, forecaster_id, observations, values)
    }
}

/// Observations from a CSV file: the `observation` column when a header
/// names one, otherwise the first column. A non-numeric first row is taken
/// as the header.
pub fn read_observations<R: Read>(input: R) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(input);
    let mut col = 0;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let first = rec.get(0).unwrap_or("").trim();
        if i == 0 && first.parse::<f64>().is_err() {
            col = rec.iter().position(|h| h.trim() == "observation").unwrap_or(0);
            continue;
        }
        let cell = rec.get(col).unwrap_or("").trim();
        let v = cell.parse::<f64>().map_err(|_| Error::Parse {
            row: i + 1,
            reason: format!("`{cell}` is not a number"),
        })?;
        out.push(v);
    }
    Ok(out)
}

/// Logarithmic score `-log f(y)`; `+inf` where the density vanishes.
pub fn logs(f: &ForecastDistribution, y: f64) -> f64 {
    let v = -f.ln_pdf(y);
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// Closed-form CRPS of `N(mu, sigma^2)`.
pub fn crps_gaussian(mu: f64, sigma: f64, y: f64) -> f64 {
    let z = (y - mu) / sigma;
    sigma * (z * (2.0 * std_normal_cdf(z) - 1.0) + 2.0 * std_normal_pdf(z) - 1.0 / PI.sqrt())
}

/// Closed-form CRPS of a Student t with `nu > 1` degrees of freedom and
/// scale `scale`, centred at zero.
pub fn crps_student_t(nu: u32, scale: f64, y: f64) -> f64 {
    use statrs::function::gamma::ln_gamma;
    let nuf = nu as f64;
    let z = y / scale;
    let ln_beta = |a: f64, b: f64| ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b);
    let ln_c = ln_gamma((nuf + 1.0) / 2.0) - ln_gamma(nuf / 2.0) - 0.5 * (nuf * PI).ln();
    let pdf = (ln_c - (nuf + 1.0) / 2.0 * (z * z / nuf).ln_1p()).exp();
    let tail = 2.0 * nuf.sqrt() * (ln_beta(0.5, nuf - 0.5) - 2.0 * ln_beta(0.5, nuf / 2.0)).exp() / (nuf - 1.0);
    let cdf = crate::dists::student_t_cdf(z, nu);
    scale * (z * (2.0 * cdf - 1.0) + 2.0 * pdf * (nuf + z * z) / (nuf - 1.0) - tail)
}

/// Continuous ranked probability score. Gaussian and Student t forecasts
/// use closed forms; all other families integrate `(F(z) - 1{y <= z})^2`
/// numerically.
pub fn crps(f: &ForecastDistribution, y: f64) -> f64 {
    if let Some(g) = f.is_gaussian() {
        return crps_gaussian(g.mu, g.sigma, y);
    }
    match f {
        ForecastDistribution::StudentT(t) => crps_student_t(t.nu, t.scale(), y),
        _ => crps_quadrature(f, y),
    }
}

/// CRPS by quadrature regardless of family.
pub fn crps_quadrature(f: &ForecastDistribution, y: f64) -> f64 {
    weighted_cdf_integral(f, y, &WeightFunction::ConstantOne, |cdf_below, sf_above, y_le_z| {
        if y_le_z {
            sf_above * sf_above
        } else {
            cdf_below * cdf_below
        }
    })
    .value
}

/// `∫ w(z) h(z) dz` where `h` is built from the forecast CDF and the
/// observation indicator. The callback receives `(F(z), 1 - F(z), y <= z)`;
/// only the argument relevant to the branch is computed accurately.
pub(crate) fn weighted_cdf_integral<H>(
    f: &ForecastDistribution,
    y: f64,
    w: &WeightFunction,
    h: H,
) -> quad::Quadrature
where
    H: Fn(f64, f64, bool) -> f64,
{
    let (lo, hi) = w.support();
    let mut pts: Vec<f64> = f.grid();
    pts.extend(w.breakpoints());
    pts.push(y);
    pts.retain(|x| x.is_finite() && *x > lo && *x < hi);
    crate::dists::sort_dedup(&mut pts);
    pts.insert(0, lo);
    pts.push(hi);
    let integrand = |z: f64| {
        let wz = w.eval(z);
        if wz == 0.0 {
            return 0.0;
        }
        let v = if y <= z {
            h(f64::NAN, f.sf(z), true)
        } else {
            h(f.cdf(z), f64::NAN, false)
        };
        wz * v
    };
    quad::integrate_pieces(integrand, &pts, quad::DEFAULT_TOL)
}

/// Brier score for the binary event `{Y <= z}`.
pub fn brier(f: &ForecastDistribution, y: f64, z: f64) -> f64 {
    let p = f.cdf(z);
    let o = if y <= z { 1.0 } else { 0.0 };
    (p - o) * (p - o)
}

/// Discrete logarithmic score for the binary event `{Y <= z}`.
pub fn discrete_ls(f: &ForecastDistribution, y: f64, z: f64) -> f64 {
    if y <= z {
        -f.cdf(z).ln()
    } else {
        -f.sf(z).ln()
    }
}

/// Dawid-Sebastiani score `2 log sd + (y - mean)^2 / var`.
pub fn dss(f: &ForecastDistribution, y: f64) -> Result<f64> {
    let (mean, var) = f.moments();
    dss_from_moments(mean, var, y)
}

pub fn dss_from_moments(mean: f64, var: f64, y: f64) -> Result<f64> {
    if !(var > 0.0) {
        return Err(Error::Domain(format!("DSS needs positive variance, got {var}")));
    }
    Ok(var.ln() + (y - mean).powi(2) / var)
}

/// Squared and absolute error of a point forecast.
pub fn point_scores(x: f64, y: f64) -> (f64, f64) {
    let e = x - y;
    (e * e, e.abs())
}

/// Outcome predicate used for restricted evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Restriction {
    /// Keep cases with observation strictly above the threshold.
    Above(f64),
    /// Keep cases with observation strictly below the threshold.
    Below(f64),
    All,
}

impl Restriction {
    pub fn admits(&self, y: f64) -> bool {
        match *self {
            Restriction::Above(r) => y > r,
            Restriction::Below(r) => y < r,
            Restriction::All => true,
        }
    }

    pub fn threshold(&self) -> Option<f64> {
        match *self {
            Restriction::Above(r) | Restriction::Below(r) => Some(r),
            Restriction::All => None,
        }
    }
}

/// Mean and Monte Carlo standard error over the cases whose observation
/// satisfies `predicate`. This is the improper, outcome-conditioned evaluation.
pub fn restricted_stats(values: &[f64], observations: &[f64], predicate: Restriction) -> Result<(f64, f64, usize)> {
    if values.len() != observations.len() {
        return Err(Error::LengthMismatch {
            left: values.len(),
            right: observations.len(),
        });
    }
    let kept: Vec<f64> = values
        .iter()
        .zip(observations)
        .filter(|(_, y)| predicate.admits(**y))
        .map(|(v, _)| *v)
        .collect();
    if kept.is_empty() {
        return Err(Error::NoQualifyingCases);
    }
    let (mean, se) = crate::stats::mean_se(&kept);
    Ok((mean, se, kept.len()))
}

pub fn restricted_mean(scores: &ScoreSeries, observations: &[f64], predicate: Restriction) -> Result<f64> {
    restricted_stats(&scores.values, observations, predicate).map(|(m, _, _)| m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PitReport {
    pub pit_values: Vec<f64>,
    pub ks_statistic: f64,
    pub bin_counts: Vec<usize>,
}

impl PitReport {
    /// Asymptotic Kolmogorov-Smirnov critical value `c / sqrt(n)`
    /// (c = 1.358 at 5%, 1.628 at 1%).
    pub fn ks_critical(&self, c: f64) -> f64 {
        c / (self.pit_values.len() as f64).sqrt()
    }
}

pub const PIT_BINS: usize = 10;

pub fn pit_check(forecasts: &[ForecastDistribution], observations: &[f64]) -> Result<PitReport> {
    if forecasts.len() != observations.len() {
        return Err(Error::LengthMismatch {
            left: forecasts.len(),
            right: observations.len(),
        });
    }
    if forecasts.is_empty() {
        return Err(Error::InsufficientData("PIT check needs at least one case".into()));
    }
    let pit_values: Vec<f64> = forecasts
        .iter()
        .zip(observations)
        .map(|(f, y)| f.cdf(*y).clamp(0.0, 1.0))
        .collect();
    let ks_statistic = crate::stats::ks_uniform(&pit_values);
    let mut bin_counts = vec![0usize; PIT_BINS];
    for u in &pit_values {
        let b = ((u * PIT_BINS as f64) as usize).min(PIT_BINS - 1);
        bin_counts[b] += 1;
    }
    Ok(PitReport {
        pit_values,
        ks_statistic,
        bin_counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use approx::assert_abs_diff_eq;

    fn n01() -> ForecastDistribution {
        ForecastDistribution::standard_normal()
    }

    #[test]
    fn logs_examples() {
        assert_abs_diff_eq!(logs(&n01(), 0.0), 0.918_938_533_204_672_7, epsilon = 1e-12);
        let u = ForecastDistribution::uniform(0.0, 1.0).unwrap();
        assert_eq!(logs(&u, 2.0), f64::INFINITY);
    }

    #[test]
    fn crps_examples() {
        // sigma * (2 phi(0) - 1/sqrt(pi)) = 2/sqrt(2 pi) - 1/sqrt(pi)
        let exact = 2.0 / (2.0 * PI).sqrt() - 1.0 / PI.sqrt();
        assert_abs_diff_eq!(crps(&n01(), 0.0), exact, epsilon = 1e-15);
        assert_abs_diff_eq!(crps(&n01(), 0.0), 0.233_695, epsilon = 1e-6);
        let point = ForecastDistribution::gaussian(1.5, 1e-9).unwrap();
        assert!(crps(&point, 1.5).abs() < 1e-8);
    }

    #[test]
    fn crps_quadrature_matches_closed_form() {
        let fs = [n01(), ForecastDistribution::gaussian(0.7, 0.4).unwrap(), ForecastDistribution::gaussian(-1.0, 2.5).unwrap()];
        for f in &fs {
            for i in 0..=40 {
                let y = -5.0 + 0.25 * i as f64;
                let g = f.is_gaussian().unwrap();
                assert_abs_diff_eq!(crps_quadrature(f, y), crps_gaussian(g.mu, g.sigma, y), epsilon = 1e-5);
            }
        }
    }

    #[test]
    fn student_t_crps_closed_form_matches_quadrature() {
        for nu in [3, 4, 5, 10, 30] {
            let f = ForecastDistribution::standardized_t(nu).unwrap();
            for y in [-40.0, -3.0, -0.7, 0.0, 0.2, 1.5, 6.0, 100.0] {
                assert_abs_diff_eq!(crps(&f, y), crps_quadrature(&f, y), epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn observation_files() {
        assert_eq!(read_observations("observation\n1.5\n-2\n".as_bytes()).unwrap(), vec![1.5, -2.0]);
        assert_eq!(read_observations("0.5\n0.25\n".as_bytes()).unwrap(), vec![0.5, 0.25]);
        assert_eq!(read_observations("id,observation\n1,3.0\n2,4.0\n".as_bytes()).unwrap(), vec![3.0, 4.0]);
        assert!(matches!(read_observations("x\n1\nfoo\n".as_bytes()), Err(Error::Parse { row: 3, .. })));
    }

    #[test]
    fn crps_is_integral_of_brier() {
        let fs = [n01(), ForecastDistribution::heavy_tail(), ForecastDistribution::standardized_t(5).unwrap()];
        for f in &fs {
            for &y in &[-1.3, 0.0, 0.4, 2.2] {
                // Brier integral split at the kink y, tails mapped
                let q = quad::integrate_pieces(|z| brier(f, y, z), &[f64::NEG_INFINITY, -5.0, y, 5.0, f64::INFINITY], 1e-12);
                assert_abs_diff_eq!(crps(f, y), q.value, epsilon = 1e-5);
            }
        }
    }

    #[test]
    fn brier_and_discrete_ls_examples() {
        assert_eq!(brier(&n01(), 2.0, 0.0), 0.25);
        assert_eq!(brier(&n01(), -2.0, 0.0), 0.25);
        let degenerate = ForecastDistribution::uniform(-1.0, 0.0).unwrap();
        assert_eq!(brier(&degenerate, -0.5, 0.5), 0.0);
        assert_abs_diff_eq!(discrete_ls(&n01(), -1.0, 0.0), 2f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(discrete_ls(&n01(), 1.0, 0.0), 2f64.ln(), epsilon = 1e-15);
        assert_eq!(discrete_ls(&degenerate, -0.5, 0.5), 0.0);
        assert_eq!(discrete_ls(&degenerate, 0.7, 0.5), f64::INFINITY);
    }

    #[test]
    fn dss_examples() {
        assert_eq!(dss(&n01(), 0.0).unwrap(), 0.0);
        let g = ForecastDistribution::gaussian(0.0, 2.0).unwrap();
        assert_abs_diff_eq!(dss(&g, 0.0).unwrap(), 2.0 * 2f64.ln(), epsilon = 1e-15);
        let g = ForecastDistribution::gaussian(1.0, 1.0).unwrap();
        assert_eq!(dss(&g, 0.0).unwrap(), 1.0);
        assert!(dss_from_moments(0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn point_score_examples() {
        assert_eq!(point_scores(2.0, 0.0), (4.0, 2.0));
        assert_eq!(point_scores(0.3, 0.3), (0.0, 0.0));
    }

    #[test]
    fn restricted_mean_behaviour() {
        let obs = vec![0.0, 2.0, 3.0, -1.0];
        let s = ScoreSeries::new("x", "f", obs.clone(), vec![1.0, 2.0, 4.0, 5.0]).unwrap();
        assert_eq!(restricted_mean(&s, &obs, Restriction::All).unwrap(), s.mean());
        assert_eq!(restricted_mean(&s, &obs, Restriction::Above(1.64)).unwrap(), 3.0);
        assert_eq!(restricted_mean(&s, &obs, Restriction::Above(10.0)), Err(Error::NoQualifyingCases));
    }

    #[test]
    fn infinite_scores_propagate() {
        let s = ScoreSeries::new("logs", "f", vec![0.0, 1.0], vec![1.0, f64::INFINITY]).unwrap();
        let sum = s.summary();
        assert_eq!(sum.mean, f64::INFINITY);
        assert_eq!(sum.infinite_count, 1);
        assert!(ScoreSeries::new("logs", "f", vec![0.0], vec![f64::NAN]).is_err());
    }

    #[test]
    fn csv_roundtrip_and_header() {
        let s = ScoreSeries::new("crps", "f", vec![0.5, -1.25], vec![0.1, f64::INFINITY]).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("case_index,observation,score\n0,0.5,0.1\n1,-1.25,inf\n"));
        let back = ScoreSeries::read_csv(&buf[..], "crps", "f").unwrap();
        assert_eq!(back, s);
        assert!(ScoreSeries::read_csv("a,b,c\n".as_bytes(), "x", "y").is_err());
    }

    #[test]
    fn pit_uniform_for_identity_forecast() {
        let u = ForecastDistribution::uniform(0.0, 1.0).unwrap();
        let n = 1000;
        let ys: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let fs = vec![u; n];
        let r = pit_check(&fs, &ys).unwrap();
        assert_eq!(r.pit_values, ys);
        assert!(r.ks_statistic <= 0.5 / n as f64 + 1e-12);
        assert_eq!(r.bin_counts, vec![100; 10]);
    }

    #[test]
    fn pit_detects_biased_forecast() {
        let ys = n01().sample(&RngStream::new(3, 0), 5000);
        let ideal = vec![n01(); ys.len()];
        let biased = vec![ForecastDistribution::gaussian(2.5, 1.0).unwrap(); ys.len()];
        let good = pit_check(&ideal, &ys).unwrap();
        let bad = pit_check(&biased, &ys).unwrap();
        assert!(good.ks_statistic < good.ks_critical(1.358));
        assert!(bad.ks_statistic > 10.0 * bad.ks_critical(1.358));
        assert_eq!(bad.bin_counts.iter().sum::<usize>(), ys.len());
    }
}
