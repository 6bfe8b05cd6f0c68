//! Quarterly case-study pipeline: series ingestion, a conjugate Bayesian
//! AR(p) baseline with Gaussian-mixture predictive distributions, and
//! rolling-origin evaluation with unweighted, restricted and weighted scores.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dists::Gaussian;
use crate::error::{Error, Result};
use crate::evaltests::{dm_test_values, Estimator};
use crate::report::ExperimentReport;
use crate::rng::RngStream;
use crate::scores::{self, Restriction};
use crate::stats::mean_se;
use crate::wscores::{self, WeightFunction};
use crate::ForecastDistribution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Quarter {
    pub year: i32,
    /// 1 to 4.
    pub q: u8,
}

impl Quarter {
    pub fn new(year: i32, q: u8) -> Result<Self> {
        if !(1..=4).contains(&q) {
            return Err(Error::Domain(format!("quarter must be 1..=4, got {q}")));
        }
        Ok(Self { year, q })
    }

    pub fn next(self) -> Self {
        if self.q == 4 {
            Self { year: self.year + 1, q: 1 }
        } else {
            Self { year: self.year, q: self.q + 1 }
        }
    }
}

impl fmt::Display for Quarter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}Q{}", self.year, self.q)
    }
}

impl FromStr for Quarter {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        let (y, q) = s.split_once(['Q', 'q']).ok_or_else(|| format!("`{s}` is not of the form YYYYQn"))?;
        let year: i32 = y.parse().map_err(|_| format!("bad year in `{s}`"))?;
        let q: u8 = q.parse().map_err(|_| format!("bad quarter in `{s}`"))?;
        if y.len() != 4 || !(1..=4).contains(&q) {
            return Err(format!("`{s}` is not of the form YYYYQn"));
        }
        Ok(Quarter { year, q })
    }
}

/// Consecutive quarters with one value each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuarterlySeries {
    pub timestamps: Vec<Quarter>,
    pub values: Vec<f64>,
}

impl QuarterlySeries {
    pub fn new(timestamps: Vec<Quarter>, values: Vec<f64>) -> Result<Self> {
        if timestamps.len() != values.len() {
            return Err(Error::LengthMismatch {
                left: timestamps.len(),
                right: values.len(),
            });
        }
        for (i, w) in timestamps.windows(2).enumerate() {
            if w[1] != w[0].next() {
                return Err(Error::Parse {
                    row: i + 2,
                    reason: format!("quarter {} does not follow {}", w[1], w[0]),
                });
            }
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Parse {
                row: i + 1,
                reason: "value is not finite".into(),
            });
        }
        Ok(Self { timestamps, values })
    }

    /// Consecutive quarters starting at `start`.
    pub fn from_values(start: Quarter, values: Vec<f64>) -> Result<Self> {
        let mut ts = Vec::with_capacity(values.len());
        let mut q = start;
        for _ in 0..values.len() {
            ts.push(q);
            q = q.next();
        }
        Self::new(ts, values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `quarter,value` CSV; values use shortest round-trip formatting.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["quarter", "value"])?;
        for (t, v) in self.timestamps.iter().zip(&self.values) {
            w.write_record([t.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Reads a CSV with a `quarter` column and the value column `column`.
/// Row numbers in errors count data rows from 1.
pub fn read_series<R: Read>(input: R, column: &str) -> Result<QuarterlySeries> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Parse {
                row: 0,
                reason: format!("missing column `{name}`"),
            })
    };
    let qi = find("quarter")?;
    let vi = find(column)?;
    let mut ts = Vec::new();
    let mut vs = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::Parse { row, reason: e.to_string() })?;
        let q: Quarter = rec
            .get(qi)
            .unwrap_or("")
            .parse()
            .map_err(|reason| Error::Parse { row, reason })?;
        let cell = rec.get(vi).unwrap_or("").trim();
        if cell.is_empty() {
            return Err(Error::Parse {
                row,
                reason: format!("missing value for {q}"),
            });
        }
        let v: f64 = cell.parse().map_err(|_| Error::Parse {
            row,
            reason: format!("`{cell}` is not a number"),
        })?;
        if let Some(prev) = ts.last() {
            if q == *prev {
                return Err(Error::Parse {
                    row,
                    reason: format!("duplicated quarter {q}"),
                });
            }
            if q < *prev {
                return Err(Error::Parse {
                    row,
                    reason: format!("quarter {q} out of order after {prev}"),
                });
            }
            if q != prev.next() {
                return Err(Error::Parse {
                    row,
                    reason: format!("gap between {prev} and {q}"),
                });
            }
        }
        ts.push(q);
        vs.push(v);
    }
    QuarterlySeries::new(ts, vs)
}

pub fn load_series(path: impl AsRef<Path>, column: &str) -> Result<QuarterlySeries> {
    let f = std::fs::File::open(path.as_ref()).map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    read_series(f, column)
}

/// Normal-inverse-gamma prior: `b | σ² ~ N(0, coef_var σ² I)`,
/// `σ² ~ IG(shape, scale)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArPrior {
    pub coef_var: f64,
    pub shape: f64,
    pub scale: f64,
}

impl Default for ArPrior {
    fn default() -> Self {
        Self {
            coef_var: 100.0,
            shape: 2.0,
            scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArDraw {
    /// `b_0, b_1, ..., b_p`.
    pub coefs: Vec<f64>,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArPosterior {
    pub p: usize,
    pub draws: Vec<ArDraw>,
    /// Posterior mean of the coefficients.
    pub coef_mean: Vec<f64>,
    /// Marginal posterior variances of the coefficients.
    pub coef_var: Vec<f64>,
    pub shape: f64,
    pub scale: f64,
}

impl ArPosterior {
    pub fn m(&self) -> usize {
        self.draws.len()
    }
}

fn design(values: &[f64], p: usize) -> (DMatrix<f64>, DVector<f64>) {
    let rows = values.len() - p;
    let x = DMatrix::from_fn(rows, p + 1, |r, c| if c == 0 { 1.0 } else { values[p + r - c] });
    let y = DVector::from_fn(rows, |r, _| values[p + r]);
    (x, y)
}

/// Exact draws from the conjugate posterior of `y_t = b_0 + Σ b_i y_{t-i} + σ ε_t`.
pub fn fit_ar(values: &[f64], p: usize, m: usize, prior: &ArPrior, stream: &RngStream) -> Result<ArPosterior> {
    if p == 0 {
        return Err(Error::Domain("lag order p must be at least 1".into()));
    }
    if m == 0 {
        return Err(Error::param("m", "need at least one posterior draw"));
    }
    if values.len() <= p + 10 {
        return Err(Error::InsufficientData(format!(
            "AR({p}) needs more than {} observations, have {}",
            p + 10,
            values.len()
        )));
    }
    if !(prior.coef_var > 0.0 && prior.shape > 0.0 && prior.scale > 0.0) {
        return Err(Error::param("prior", "hyperparameters must be positive"));
    }
    let (x, y) = design(values, p);
    let xtx = x.transpose() * &x;
    let eig = xtx.clone().symmetric_eigen();
    let max_eig = eig.eigenvalues.max();
    if !(eig.eigenvalues.min() > 1e-10 * max_eig.max(1e-300)) {
        return Err(Error::RankDeficient);
    }
    let k = p + 1;
    let precision = &xtx + DMatrix::identity(k, k) / prior.coef_var;
    let chol = precision.clone().cholesky().ok_or(Error::RankDeficient)?;
    let vn = chol.inverse();
    let bn = &vn * (x.transpose() * &y);
    let n = y.len() as f64;
    let shape = prior.shape + n / 2.0;
    let quad = y.dot(&y) - bn.dot(&(&precision * &bn));
    let scale = prior.scale + 0.5 * quad.max(0.0);
    let l = vn.clone().cholesky().ok_or(Error::RankDeficient)?.l();
    let gamma = Gamma::new(shape, 1.0 / scale).map_err(|e| Error::param("prior", e.to_string()))?;
    let draws: Vec<ArDraw> = (0..m)
        .into_par_iter()
        .map(|j| {
            let mut rng = stream.derive(j as u64).rng();
            let sigma2 = 1.0 / gamma.sample(&mut rng);
            let sigma = sigma2.sqrt();
            let z = DVector::from_fn(k, |_, _| StandardNormal.sample(&mut rng));
            let b = &bn + (&l * z) * sigma;
            ArDraw {
                coefs: b.iter().copied().collect(),
                sigma,
            }
        })
        .collect();
    // b marginally multivariate t with covariance scale/(shape-1) Vn
    let coef_var = if shape > 1.0 {
        (0..k).map(|i| vn[(i, i)] * scale / (shape - 1.0)).collect()
    } else {
        vec![f64::INFINITY; k]
    };
    Ok(ArPosterior {
        p,
        draws,
        coef_mean: bn.iter().copied().collect(),
        coef_var,
        shape,
        scale,
    })
}

/// Equally weighted Gaussian mixture, one component per posterior draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixturePredictive {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

impl MixturePredictive {
    pub fn m(&self) -> usize {
        self.means.len()
    }

    pub fn distribution(&self) -> Result<ForecastDistribution> {
        if self.m() == 1 {
            return ForecastDistribution::gaussian(self.means[0], self.sds[0]);
        }
        let comps = self
            .means
            .iter()
            .zip(&self.sds)
            .map(|(mu, sigma)| ForecastDistribution::gaussian(*mu, *sigma))
            .collect::<Result<Vec<_>>>()?;
        ForecastDistribution::equal_mixture(comps)
    }

    pub fn mean(&self) -> f64 {
        self.means.iter().sum::<f64>() / self.m() as f64
    }

    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        self.means
            .iter()
            .zip(&self.sds)
            .map(|(m, s)| s * s + (m - mu).powi(2))
            .sum::<f64>()
            / self.m() as f64
    }

    /// One random draw from each component.
    pub fn component_draws(&self, stream: &RngStream) -> Vec<f64> {
        let mut rng = stream.rng();
        self.means
            .iter()
            .zip(&self.sds)
            .map(|(m, s)| {
                let z: f64 = StandardNormal.sample(&mut rng);
                m + s * z
            })
            .collect()
    }
}

/// Predictive distribution `k` steps after the end of `recent` (oldest
/// first, at least `p` values). `k = 1` is exact; longer horizons simulate
/// `paths_per_draw` paths per posterior draw and summarise each draw's
/// terminal values by a Gaussian.
pub fn predict(
    post: &ArPosterior,
    recent: &[f64],
    k: usize,
    paths_per_draw: usize,
    stream: &RngStream,
) -> Result<MixturePredictive> {
    let p = post.p;
    if k == 0 {
        return Err(Error::param("k", "horizon must be at least 1"));
    }
    if recent.len() < p {
        return Err(Error::InsufficientData(format!("need the last {p} values, have {}", recent.len())));
    }
    let lags = &recent[recent.len() - p..];
    let one_step = |d: &ArDraw, hist: &[f64]| -> f64 {
        let h = hist.len();
        d.coefs[0] + (1..=p).map(|i| d.coefs[i] * hist[h - i]).sum::<f64>()
    };
    if k == 1 {
        let means = post.draws.iter().map(|d| one_step(d, lags)).collect();
        let sds = post.draws.iter().map(|d| d.sigma).collect();
        return Ok(MixturePredictive { means, sds });
    }
    if paths_per_draw < 2 {
        return Err(Error::param("paths_per_draw", "multi-step prediction needs at least 2 paths per draw"));
    }
    let summaries: Vec<(f64, f64)> = post
        .draws
        .par_iter()
        .enumerate()
        .map(|(j, d)| {
            let mut rng = stream.derive(j as u64).rng();
            let mut hist = Vec::with_capacity(p + k);
            let terminal: Vec<f64> = (0..paths_per_draw)
                .map(|_| {
                    hist.clear();
                    hist.extend_from_slice(lags);
                    for _ in 0..k {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        let next = one_step(d, &hist) + d.sigma * z;
                        hist.push(next);
                    }
                    *hist.last().unwrap()
                })
                .collect();
            let (m, _) = mean_se(&terminal);
            let var = terminal.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (terminal.len() - 1) as f64;
            (m, var.sqrt().max(f64::MIN_POSITIVE))
        })
        .collect();
    Ok(MixturePredictive {
        means: summaries.iter().map(|s| s.0).collect(),
        sds: summaries.iter().map(|s| s.1).collect(),
    })
}

/// `-log` of the normal density with the sample's mean and variance
/// (divisor `n - 1`), evaluated at `y`.
pub fn quadratic_logs(sample: &[f64], y: f64) -> Result<f64> {
    let (mean, var) = sample_moments(sample)?;
    Ok(0.5 * (2.0 * std::f64::consts::PI * var).ln() + (y - mean).powi(2) / (2.0 * var))
}

fn sample_moments(sample: &[f64]) -> Result<(f64, f64)> {
    if sample.len() < 2 {
        return Err(Error::InsufficientData("need at least two draws".into()));
    }
    let (mean, _) = mean_se(sample);
    let var = sample.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (sample.len() - 1) as f64;
    if !(var > 0.0) {
        return Err(Error::Domain("sample variance is zero".into()));
    }
    Ok((mean, var))
}

/// Likelihood-type rules that may be evaluated from a predictive sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleRule {
    Logs,
    Cl,
    Csl,
}

/// Scores a predictive sample through its normal approximation. Only the
/// LogS is allowed: plugging the approximation into CL or CSL gives an
/// improper rule.
pub fn quadratic_score(rule: SampleRule, sample: &[f64], y: f64) -> Result<f64> {
    match rule {
        SampleRule::Logs => quadratic_logs(sample, y),
        SampleRule::Cl | SampleRule::Csl => Err(Error::ImproperApproximation(format!(
            "the normal approximation inside {rule:?} is not a proper scoring rule"
        ))),
    }
}

/// Simulates `y_t = b_0 + Σ b_i y_{t-i} + σ ε_t` after `burn` warm-up steps.
pub fn simulate_ar(coefs: &[f64], sigma: f64, n: usize, burn: usize, stream: &RngStream) -> Result<Vec<f64>> {
    if coefs.len() < 2 || !(sigma > 0.0) {
        return Err(Error::param("coefs", "need b_0 and at least one lag coefficient, and sigma > 0"));
    }
    let p = coefs.len() - 1;
    let mut rng = stream.rng();
    let mut y = vec![0.0; p];
    for _ in 0..burn + n {
        let h = y.len();
        let z: f64 = StandardNormal.sample(&mut rng);
        let next = coefs[0] + (1..=p).map(|i| coefs[i] * y[h - i]).sum::<f64>() + sigma * z;
        y.push(next);
    }
    Ok(y.split_off(p + burn))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollingConfig {
    pub p: usize,
    pub m: usize,
    pub horizons: Vec<usize>,
    /// First forecast origin; the fit at origin `t` uses `y_0 .. y_{t-1}`.
    pub start_index: usize,
    pub weights: Vec<WeightFunction>,
    pub restrictions: Vec<Restriction>,
    pub prior: ArPrior,
    pub paths_per_draw: usize,
}

impl Default for RollingConfig {
    fn default() -> Self {
        Self {
            p: 2,
            m: 5000,
            horizons: vec![1],
            start_index: 40,
            weights: vec![WeightFunction::indicator_left(0.1), WeightFunction::indicator_right(0.98)],
            restrictions: vec![Restriction::Below(0.1), Restriction::Above(0.98)],
            prior: ArPrior::default(),
            paths_per_draw: 20,
        }
    }
}

pub const AR_NAME: &str = "ar";
pub const CLIMATOLOGY_NAME: &str = "climatology";
/// Rows holding the paired mean difference AR minus climatology.
pub const DIFF_NAME: &str = "ar-minus-climatology";

struct OriginScores {
    target: f64,
    // [model][rule] with rules crps, logs, then one twcrps per weight
    values: [Vec<f64>; 2],
}

fn restriction_label(r: &Restriction) -> &'static str {
    match r {
        Restriction::Above(_) => "above",
        Restriction::Below(_) => "below",
        Restriction::All => "all",
    }
}

/// Expanding-window evaluation of the AR(p) mixture forecast against a
/// Gaussian climatology fitted to the same training data.
///
/// Rows per horizon (`ar-eval/k=K`): mean `crps`, `logs` (normal
/// approximation from one draw per mixture component for the AR model),
/// `twcrps:<weight>`, and restricted `rcrps_*` / `rlogs_*`. Forecaster
/// `ar-minus-climatology` holds paired mean differences with their standard
/// errors and `ar-vs-climatology` the two-sided DM p-values `dm_p_<rule>`.
pub fn rolling_eval(series: &QuarterlySeries, cfg: &RollingConfig, stream: &RngStream) -> Result<ExperimentReport> {
    let values = &series.values;
    let t_end = values.len();
    if cfg.horizons.is_empty() || cfg.horizons.contains(&0) {
        return Err(Error::param("horizons", "need at least one horizon, each >= 1"));
    }
    if cfg.start_index <= cfg.p + 10 {
        return Err(Error::InsufficientData(format!(
            "start index {} leaves fewer than {} training points",
            cfg.start_index,
            cfg.p + 11
        )));
    }
    let k_min = *cfg.horizons.iter().min().unwrap();
    if cfg.start_index + k_min > t_end {
        return Err(Error::InsufficientData(format!(
            "series of length {t_end} has no evaluation targets after start index {}",
            cfg.start_index
        )));
    }
    let origins: Vec<usize> = (cfg.start_index..t_end).collect();
    // per origin: per horizon Option<OriginScores>
    let per_origin: Vec<Vec<Option<OriginScores>>> = origins
        .par_iter()
        .map(|&t| {
            let os = stream.derive(t as u64);
            let train = &values[..t];
            let post = fit_ar(train, cfg.p, cfg.m, &cfg.prior, &os.derive(0))?;
            let (cm, cv) = sample_moments(train)?;
            let clim = ForecastDistribution::Gaussian(Gaussian { mu: cm, sigma: cv.sqrt() });
            cfg.horizons
                .iter()
                .enumerate()
                .map(|(hi, &k)| {
                    let target_idx = t + k - 1;
                    if target_idx >= t_end {
                        return Ok(None);
                    }
                    let y = values[target_idx];
                    let hs = os.derive(1 + hi as u64);
                    let mix = predict(&post, train, k, cfg.paths_per_draw, &hs.derive(0))?;
                    let f = mix.distribution()?;
                    let draws = mix.component_draws(&hs.derive(1));
                    let mut ar = vec![scores::crps(&f, y), quadratic_logs(&draws, y)?];
                    let mut cl = vec![scores::crps(&clim, y), scores::logs(&clim, y)];
                    for w in &cfg.weights {
                        ar.push(wscores::twcrps(&f, y, w));
                        cl.push(wscores::twcrps(&clim, y, w));
                    }
                    Ok(Some(OriginScores { target: y, values: [ar, cl] }))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let mut rep = ExperimentReport::new("ar-eval", stream.master_seed, cfg.m);
    let mut rule_names = vec!["crps".to_string(), "logs".to_string()];
    rule_names.extend(cfg.weights.iter().map(|w| format!("twcrps:{w}")));
    let models = [format!("{AR_NAME}({})", cfg.p), CLIMATOLOGY_NAME.to_string()];
    for (hi, &k) in cfg.horizons.iter().enumerate() {
        let exp = format!("ar-eval/k={k}");
        let rows: Vec<&OriginScores> = per_origin.iter().filter_map(|o| o[hi].as_ref()).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.target).collect();
        let col = |mi: usize, ri: usize| -> Vec<f64> { rows.iter().map(|r| r.values[mi][ri]).collect() };
        for (ri, rule) in rule_names.iter().enumerate() {
            let th = if ri >= 2 { cfg.weights[ri - 2].threshold() } else { None };
            for (mi, model) in models.iter().enumerate() {
                rep.push_mean(&exp, model, rule, th, &col(mi, ri));
            }
            let diff: Vec<f64> = col(0, ri).iter().zip(col(1, ri)).map(|(a, b)| a - b).collect();
            rep.push_mean(&exp, DIFF_NAME, rule, th, &diff);
            let p = match dm_test_values(&col(0, ri), &col(1, ri), Estimator::Kdep(k), 0.05) {
                Ok(r) => r.p_two_sided,
                Err(Error::ZeroVarianceNonzeroMean { .. }) => 0.0,
                Err(e) => {
                    rep.diagnose(format!("dm_failed/{exp}/{rule}"), false, e.to_string());
                    f64::NAN
                }
            };
            rep.push(&exp, "ar-vs-climatology", &format!("dm_p_{rule}"), th, p, 0.0);
        }
        for restriction in &cfg.restrictions {
            let label = restriction_label(restriction);
            for (ri, base) in ["crps", "logs"].iter().enumerate() {
                let rule = format!("r{base}_{label}");
                let mut means = Vec::new();
                for (mi, model) in models.iter().enumerate() {
                    match scores::restricted_stats(&col(mi, ri), &ys, *restriction) {
                        Ok((m, se, _)) => {
                            rep.push(&exp, model, &rule, restriction.threshold(), m, se);
                            means.push(m);
                        }
                        Err(e) => rep.diagnose(format!("restricted_empty/{exp}/{rule}"), false, e.to_string()),
                    }
                }
                if means.len() == 2 {
                    let full_ar = rep.find(&exp, &models[0], base, None).unwrap().value;
                    let full_cl = rep.find(&exp, &models[1], base, None).unwrap().value;
                    let reversed = (full_ar < full_cl) != (means[0] < means[1]);
                    rep.diagnose(
                        format!("rank_agreement/{exp}/{rule}"),
                        !reversed,
                        if reversed {
                            format!("restricted {rule} ranking reverses the unweighted {base} ranking")
                        } else {
                            format!("restricted {rule} ranking agrees with {base}")
                        },
                    );
                }
            }
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn quarter_parsing() {
        assert_eq!("1999Q4".parse::<Quarter>().unwrap(), Quarter { year: 1999, q: 4 });
        assert_eq!(Quarter { year: 1999, q: 4 }.next(), Quarter { year: 2000, q: 1 });
        for bad in ["1999Q5", "99Q1", "1999-1", "Q1"] {
            assert!(bad.parse::<Quarter>().is_err(), "{bad}");
        }
    }

    #[test]
    fn series_roundtrip() {
        let vals = simulate_ar(&[0.3, 0.5], 1.0, 60, 50, &RngStream::new(1, 0)).unwrap();
        let s = QuarterlySeries::from_values(Quarter::new(1970, 2).unwrap(), vals).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert_eq!(read_series(&buf[..], "value").unwrap(), s);
    }

    #[test]
    fn series_errors_name_rows() {
        let dup = "quarter,value\n2000Q1,1.0\n2000Q2,0.5\n2000Q2,0.7\n";
        match read_series(dup.as_bytes(), "value") {
            Err(Error::Parse { row, reason }) => {
                assert_eq!(row, 3);
                assert!(reason.contains("duplicated"));
            }
            other => panic!("{other:?}"),
        }
        let order = "quarter,value\n2000Q2,1.0\n2000Q1,0.5\n";
        assert!(matches!(read_series(order.as_bytes(), "value"), Err(Error::Parse { row: 2, .. })));
        let gap = "quarter,value\n2000Q1,1.0\n2000Q3,0.5\n";
        assert!(matches!(read_series(gap.as_bytes(), "value"), Err(Error::Parse { row: 2, .. })));
        let missing = "quarter,value\n2000Q1,1.0\n2000Q2,\n";
        assert!(matches!(read_series(missing.as_bytes(), "value"), Err(Error::Parse { row: 2, .. })));
        let bad = "quarter,value\n2000Q1,abc\n";
        assert!(matches!(read_series(bad.as_bytes(), "value"), Err(Error::Parse { row: 1, .. })));
        assert!(read_series("quarter,gdp\n2000Q1,1\n".as_bytes(), "value").is_err());
        let other = "quarter,gdp,cpi\n2000Q1,1.5,2.0\n2000Q2,0.5,2.1\n";
        assert_eq!(read_series(other.as_bytes(), "cpi").unwrap().values, vec![2.0, 2.1]);
    }

    #[test]
    fn fit_recovers_ar1() {
        let vals = simulate_ar(&[0.0, 0.5], 1.0, 500, 100, &RngStream::new(2, 0)).unwrap();
        let post = fit_ar(&vals, 1, 2000, &ArPrior::default(), &RngStream::new(3, 0)).unwrap();
        let b1: Vec<f64> = post.draws.iter().map(|d| d.coefs[1]).collect();
        let (m, _) = mean_se(&b1);
        assert!((0.4..=0.6).contains(&m), "{m}");
        assert!(post.draws.iter().all(|d| d.sigma > 0.0));
    }

    #[test]
    fn fit_errors() {
        let vals = simulate_ar(&[0.0, 0.5], 1.0, 100, 10, &RngStream::new(2, 0)).unwrap();
        let prior = ArPrior::default();
        let s = RngStream::new(1, 0);
        assert!(matches!(fit_ar(&vals, 0, 10, &prior, &s), Err(Error::Domain(_))));
        assert!(matches!(fit_ar(&vals[..12], 2, 10, &prior, &s), Err(Error::InsufficientData(_))));
        assert!(matches!(fit_ar(&[1.0; 40], 1, 10, &prior, &s), Err(Error::RankDeficient)));
    }

    #[test]
    fn posterior_mean_matches_draws() {
        let vals = simulate_ar(&[0.4, 0.6, -0.2], 0.8, 300, 100, &RngStream::new(5, 0)).unwrap();
        let m = 10_000;
        let post = fit_ar(&vals, 2, m, &ArPrior::default(), &RngStream::new(6, 0)).unwrap();
        for i in 0..3 {
            let xs: Vec<f64> = post.draws.iter().map(|d| d.coefs[i]).collect();
            let (avg, _) = mean_se(&xs);
            let se = (post.coef_var[i] / m as f64).sqrt();
            assert!((avg - post.coef_mean[i]).abs() < 3.0 * se, "coef {i}: {avg} vs {}", post.coef_mean[i]);
        }
    }

    #[test]
    fn one_step_prediction_formula() {
        let post = ArPosterior {
            p: 2,
            draws: vec![ArDraw {
                coefs: vec![0.5, 0.3, -0.1],
                sigma: 0.7,
            }],
            coef_mean: vec![0.5, 0.3, -0.1],
            coef_var: vec![0.0; 3],
            shape: 3.0,
            scale: 1.0,
        };
        let mix = predict(&post, &[9.0, 2.0, 1.0], 1, 0, &RngStream::new(1, 0)).unwrap();
        let g = mix.distribution().unwrap().is_gaussian().unwrap();
        assert_abs_diff_eq!(g.mu, 0.5 + 0.3 * 1.0 - 0.1 * 2.0, epsilon = 1e-15);
        assert_eq!(g.sigma, 0.7);
    }

    #[test]
    fn mixture_mean_and_horizon_variance() {
        let vals = simulate_ar(&[0.2, 0.7], 1.0, 200, 50, &RngStream::new(8, 0)).unwrap();
        let post = fit_ar(&vals, 1, 300, &ArPrior::default(), &RngStream::new(9, 0)).unwrap();
        let m1 = predict(&post, &vals, 1, 0, &RngStream::new(1, 0)).unwrap();
        let (avg, _) = mean_se(&m1.means);
        assert_abs_diff_eq!(m1.mean(), avg, epsilon = 1e-12);
        assert_abs_diff_eq!(m1.distribution().unwrap().moments().0, avg, epsilon = 1e-10);
        let m4 = predict(&post, &vals, 4, 50, &RngStream::new(1, 0)).unwrap();
        assert!(m4.variance() >= m1.variance(), "{} < {}", m4.variance(), m1.variance());
        assert!(predict(&post, &vals, 4, 1, &RngStream::new(1, 0)).is_err());
    }

    #[test]
    fn quadratic_logs_examples() {
        assert_abs_diff_eq!(quadratic_logs(&[-1.0, 0.0, 1.0], 0.0).unwrap(), 0.918_938_533, epsilon = 1e-9);
        assert!(matches!(quadratic_logs(&[2.0, 2.0], 1.0), Err(Error::Domain(_))));
        assert!(matches!(
            quadratic_score(SampleRule::Cl, &[0.0, 1.0], 0.5),
            Err(Error::ImproperApproximation(_))
        ));
        assert!(matches!(
            quadratic_score(SampleRule::Csl, &[0.0, 1.0], 0.5),
            Err(Error::ImproperApproximation(_))
        ));
        assert!(quadratic_score(SampleRule::Logs, &[0.0, 1.0], 0.5).is_ok());
    }

    #[test]
    fn rolling_eval_shape_and_determinism() {
        let vals = simulate_ar(&[0.3, 0.5, 0.2], 1.0, 80, 50, &RngStream::new(3, 0)).unwrap();
        let s = QuarterlySeries::from_values(Quarter::new(1990, 1).unwrap(), vals).unwrap();
        let cfg = RollingConfig {
            m: 50,
            horizons: vec![1, 4],
            start_index: 50,
            ..RollingConfig::default()
        };
        let a = rolling_eval(&s, &cfg, &RngStream::new(4, 0)).unwrap();
        let b = rolling_eval(&s, &cfg, &RngStream::new(4, 0)).unwrap();
        assert_eq!(a, b);
        for k in [1, 4] {
            for model in ["ar(2)", "climatology"] {
                for rule in ["crps", "logs"] {
                    assert!(a.find(&format!("ar-eval/k={k}"), model, rule, None).is_some());
                }
            }
        }
        let bad = RollingConfig { start_index: 5, ..cfg };
        assert!(rolling_eval(&s, &bad, &RngStream::new(4, 0)).is_err());
    }
}
