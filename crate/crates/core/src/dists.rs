//! Univariate predictive distributions used throughout scoring and simulation.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::quad;
use crate::rng::RngStream;
use crate::wscores::WeightFunction;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Standard normal density.
#[inline]
pub fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// Standard normal CDF, accurate in both tails.
#[inline]
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

#[inline]
pub fn std_normal_sf(z: f64) -> f64 {
    0.5 * erfc(z * FRAC_1_SQRT_2)
}

pub fn std_normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// CDF of Student's t with integer degrees of freedom, by the closed-form
/// trigonometric series (Abramowitz & Stegun 26.7.3-4).
pub fn student_t_cdf(t: f64, nu: u32) -> f64 {
    if t == 0.0 {
        return 0.5;
    }
    if t.is_infinite() {
        return if t > 0.0 { 1.0 } else { 0.0 };
    }
    let nuf = nu as f64;
    let theta = (t.abs() / nuf.sqrt()).atan();
    let (s, c) = theta.sin_cos();
    let c2 = c * c;
    let a = if nu % 2 == 1 {
        if nu == 1 {
            2.0 * theta / PI
        } else {
            let mut term = c;
            let mut sum = c;
            let mut k = 3;
            while k <= nu - 2 {
                term *= c2 * (k as f64 - 1.0) / k as f64;
                sum += term;
                k += 2;
            }
            2.0 / PI * (theta + s * sum)
        }
    } else {
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 2;
        while k <= nu - 2 {
            term *= c2 * (k as f64 - 1.0) / k as f64;
            sum += term;
            k += 2;
        }
        s * sum
    };
    // upper-tail mass computed as (1 - a) / 2 keeps the left tail usable down to ~1e-16
    let tail = 0.5 * (1.0 - a);
    if t > 0.0 { 1.0 - tail } else { tail }
}

fn student_t_ln_norm(nu: u32) -> f64 {
    let nuf = nu as f64;
    ln_gamma(0.5 * (nuf + 1.0)) - ln_gamma(0.5 * nuf) - 0.5 * (nuf * PI).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gaussian {
    pub mu: f64,
    pub sigma: f64,
}

/// Student t with `nu` degrees of freedom rescaled to unit variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StandardizedStudentT {
    pub nu: u32,
    scale: f64,
    ln_norm: f64,
}

impl StandardizedStudentT {
    pub fn scale(&self) -> f64 {
        self.scale
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Uniform {
    pub a: f64,
    pub b: f64,
}

/// Standard normal on the negative half-axis glued to a t(4) density on the
/// positive half-axis; both halves carry mass 1/2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeavyTailH;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mixture {
    weights: Vec<f64>,
    components: Vec<ForecastDistribution>,
}

impl Mixture {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn components(&self) -> &[ForecastDistribution] {
        &self.components
    }
}

/// Density proportional to `w(x) g(x)`, normalised numerically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reweighted {
    base: Box<ForecastDistribution>,
    weight: WeightFunction,
    norm: f64,
}

impl Reweighted {
    pub fn base(&self) -> &ForecastDistribution {
        &self.base
    }
    pub fn weight(&self) -> &WeightFunction {
        &self.weight
    }
    pub fn normalizer(&self) -> f64 {
        self.norm
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ForecastDistribution {
    Gaussian(Gaussian),
    StudentT(StandardizedStudentT),
    Uniform(Uniform),
    HeavyTail(HeavyTailH),
    Mixture(Mixture),
    Reweighted(Reweighted),
}

impl ForecastDistribution {
    pub fn gaussian(mu: f64, sigma: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::param("mu", format!("must be finite, got {mu}")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::param("sigma", format!("must be positive, got {sigma}")));
        }
        Ok(Self::Gaussian(Gaussian { mu, sigma }))
    }

    pub fn standard_normal() -> Self {
        Self::Gaussian(Gaussian { mu: 0.0, sigma: 1.0 })
    }

    pub fn standardized_t(nu: u32) -> Result<Self> {
        if nu < 3 {
            return Err(Error::param("nu", format!("needs nu >= 3 for finite variance, got {nu}")));
        }
        let nuf = nu as f64;
        Ok(Self::StudentT(StandardizedStudentT {
            nu,
            scale: ((nuf - 2.0) / nuf).sqrt(),
            ln_norm: student_t_ln_norm(nu),
        }))
    }

    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && b > a) {
            return Err(Error::param("b", format!("need finite a < b, got [{a}, {b}]")));
        }
        Ok(Self::Uniform(Uniform { a, b }))
    }

    pub fn heavy_tail() -> Self {
        Self::HeavyTail(HeavyTailH)
    }

    pub fn mixture(weights: Vec<f64>, components: Vec<ForecastDistribution>) -> Result<Self> {
        if weights.is_empty() || weights.len() != components.len() {
            return Err(Error::param(
                "weights",
                format!("{} weights for {} components", weights.len(), components.len()),
            ));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::param("weights", "weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::param("weights", format!("must sum to 1, sum is {total}")));
        }
        Ok(Self::Mixture(Mixture { weights, components }))
    }

    /// Equally weighted mixture.
    pub fn equal_mixture(components: Vec<ForecastDistribution>) -> Result<Self> {
        let m = components.len();
        if m == 0 {
            return Err(Error::param("components", "empty mixture"));
        }
        let w = 1.0 / m as f64;
        // the equal split need not sum to 1 exactly in floating point
        let mut weights = vec![w; m];
        let drift = 1.0 - weights.iter().sum::<f64>();
        weights[m - 1] += drift;
        Self::mixture(weights, components)
    }

    /// Density `w(x) g(x) / ∫ w g`. Fails when the normaliser vanishes.
    pub fn reweighted(base: ForecastDistribution, weight: WeightFunction) -> Result<Self> {
        let norm = crate::wscores::weighted_mass(&base, &weight);
        if !(norm > 0.0) {
            return Err(Error::Domain("weighted mass of the base density is zero".into()));
        }
        if weight.is_constant_one() {
            return Ok(base);
        }
        Ok(Self::Reweighted(Reweighted {
            base: Box::new(base),
            weight,
            norm,
        }))
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match self {
            Self::Gaussian(g) => std_normal_pdf((x - g.mu) / g.sigma) / g.sigma,
            Self::StudentT(_) => self.ln_pdf(x).exp(),
            Self::Uniform(u) => {
                if x >= u.a && x <= u.b {
                    1.0 / (u.b - u.a)
                } else {
                    0.0
                }
            }
            Self::HeavyTail(_) => {
                if x <= 0.0 {
                    std_normal_pdf(x)
                } else {
                    0.375 * (1.0 + 0.25 * x * x).powf(-2.5)
                }
            }
            Self::Mixture(m) => m
                .weights
                .iter()
                .zip(&m.components)
                .map(|(w, c)| w * c.pdf(x))
                .sum(),
            Self::Reweighted(r) => r.weight.eval(x) * r.base.pdf(x) / r.norm,
        }
    }

    /// Log density; `-inf` where the density vanishes.
    pub fn ln_pdf(&self, x: f64) -> f64 {
        match self {
            Self::Gaussian(g) => {
                let z = (x - g.mu) / g.sigma;
                -0.5 * z * z - LN_SQRT_2PI - g.sigma.ln()
            }
            Self::StudentT(t) => {
                let z = x / t.scale;
                let nuf = t.nu as f64;
                t.ln_norm - 0.5 * (nuf + 1.0) * (z * z / nuf).ln_1p() - t.scale.ln()
            }
            Self::HeavyTail(_) => {
                if x <= 0.0 {
                    -0.5 * x * x - LN_SQRT_2PI
                } else {
                    0.375f64.ln() - 2.5 * (0.25 * x * x).ln_1p()
                }
            }
            _ => self.pdf(x).ln(),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Self::Gaussian(g) => std_normal_cdf((x - g.mu) / g.sigma),
            Self::StudentT(t) => student_t_cdf(x / t.scale, t.nu),
            Self::Uniform(u) => ((x - u.a) / (u.b - u.a)).clamp(0.0, 1.0),
            Self::HeavyTail(_) => {
                if x <= 0.0 {
                    std_normal_cdf(x)
                } else {
                    student_t_cdf(x, 4)
                }
            }
            Self::Mixture(m) => m
                .weights
                .iter()
                .zip(&m.components)
                .map(|(w, c)| w * c.cdf(x))
                .sum::<f64>()
                .min(1.0),
            Self::Reweighted(r) => r.partial_mass(f64::NEG_INFINITY, x).min(1.0),
        }
    }

    /// Survival function `1 - F(x)`, computed without cancellation where possible.
    pub fn sf(&self, x: f64) -> f64 {
        match self {
            Self::Gaussian(g) => std_normal_sf((x - g.mu) / g.sigma),
            Self::StudentT(t) => student_t_cdf(-x / t.scale, t.nu),
            Self::Uniform(u) => ((u.b - x) / (u.b - u.a)).clamp(0.0, 1.0),
            Self::HeavyTail(_) => {
                if x <= 0.0 {
                    1.0 - std_normal_cdf(x)
                } else {
                    student_t_cdf(-x, 4)
                }
            }
            Self::Mixture(m) => m
                .weights
                .iter()
                .zip(&m.components)
                .map(|(w, c)| w * c.sf(x))
                .sum::<f64>()
                .min(1.0),
            Self::Reweighted(r) => r.partial_mass(x, f64::INFINITY).min(1.0),
        }
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain(format!("quantile level must lie in (0,1), got {p}")));
        }
        Ok(match self {
            Self::Gaussian(g) => g.mu + g.sigma * std_normal_quantile(p),
            Self::Uniform(u) => u.a + p * (u.b - u.a),
            Self::HeavyTail(_) if p <= 0.5 => std_normal_quantile(p),
            _ => {
                let (mean, var) = self.moments();
                bisect_quantile(|x| self.cdf(x), p, mean, var.sqrt())
            }
        })
    }

    /// Mean and variance.
    pub fn moments(&self) -> (f64, f64) {
        match self {
            Self::Gaussian(g) => (g.mu, g.sigma * g.sigma),
            Self::StudentT(_) => (0.0, 1.0),
            Self::Uniform(u) => (0.5 * (u.a + u.b), (u.b - u.a).powi(2) / 12.0),
            Self::HeavyTail(_) => {
                // left: -phi(0) and 1/2; right: E[T;T>0] = 1/2 and E[T^2;T>0] = 1 for t(4)
                let mean = 0.5 - 1.0 / (2.0 * PI).sqrt();
                (mean, 1.5 - mean * mean)
            }
            Self::Mixture(m) => {
                let mut mean = 0.0;
                let mut second = 0.0;
                for (w, c) in m.weights.iter().zip(&m.components) {
                    let (cm, cv) = c.moments();
                    mean += w * cm;
                    second += w * (cv + cm * cm);
                }
                (mean, (second - mean * mean).max(0.0))
            }
            Self::Reweighted(r) => {
                let pts = r.grid();
                let f = |x: f64| r.weight.eval(x) * r.base.pdf(x) / r.norm;
                let m1 = quad::integrate_pieces(|x| x * f(x), &pts, 1e-11).value;
                let m2 = quad::integrate_pieces(|x| x * x * f(x), &pts, 1e-11).value;
                (m1, (m2 - m1 * m1).max(0.0))
            }
        }
    }

    /// Finite breakpoints covering the bulk of the distribution; quadrature
    /// routines add `±inf` tails around them.
    pub fn grid(&self) -> Vec<f64> {
        match self {
            Self::Gaussian(g) => [-8.0, -3.0, 0.0, 3.0, 8.0].iter().map(|k| g.mu + k * g.sigma).collect(),
            Self::StudentT(t) => [-30.0, -8.0, -3.0, 0.0, 3.0, 8.0, 30.0].iter().map(|k| k * t.scale).collect(),
            Self::Uniform(u) => vec![u.a, u.b],
            Self::HeavyTail(_) => vec![-8.0, -3.0, 0.0, 3.0, 8.0, 30.0],
            Self::Mixture(m) => {
                if m.components.len() <= 4 {
                    let mut pts: Vec<f64> = m.components.iter().flat_map(|c| c.grid()).collect();
                    sort_dedup(&mut pts);
                    pts
                } else {
                    let (mean, var) = self.moments();
                    let sd = var.sqrt();
                    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                    for c in &m.components {
                        let g = c.grid();
                        lo = lo.min(g[0]);
                        hi = hi.max(g[g.len() - 1]);
                    }
                    let mut pts = vec![lo, mean - 3.0 * sd, mean, mean + 3.0 * sd, hi];
                    pts.retain(|x| *x >= lo && *x <= hi);
                    sort_dedup(&mut pts);
                    pts
                }
            }
            Self::Reweighted(r) => r.grid().into_iter().filter(|x| x.is_finite()).collect(),
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Gaussian(g) => {
                let z: f64 = rng.sample(StandardNormal);
                g.mu + g.sigma * z
            }
            Self::StudentT(t) => {
                let d = StudentT::new(t.nu as f64).expect("nu >= 3");
                t.scale * d.sample(rng)
            }
            Self::Uniform(u) => u.a + (u.b - u.a) * rng.random::<f64>(),
            Self::HeavyTail(_) => {
                if rng.random::<bool>() {
                    let z: f64 = rng.sample(StandardNormal);
                    -z.abs()
                } else {
                    let d = StudentT::new(4.0).expect("valid");
                    let t: f64 = d.sample(rng);
                    t.abs()
                }
            }
            Self::Mixture(m) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut idx = m.components.len() - 1;
                for (i, w) in m.weights.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        idx = i;
                        break;
                    }
                }
                m.components[idx].draw(rng)
            }
            Self::Reweighted(r) => loop {
                // accept-reject against the base: the acceptance probability is w(x) <= 1
                let x = r.base.draw(rng);
                if rng.random::<f64>() < r.weight.eval(x) {
                    break x;
                }
            },
        }
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.draw(rng)).collect()
    }

    pub fn sample(&self, stream: &RngStream, n: usize) -> Vec<f64> {
        let mut rng = stream.rng();
        self.sample_with(&mut rng, n)
    }

    pub fn is_gaussian(&self) -> Option<Gaussian> {
        match self {
            Self::Gaussian(g) => Some(*g),
            _ => None,
        }
    }
}

impl Reweighted {
    fn grid(&self) -> Vec<f64> {
        let mut pts = self.base.grid();
        pts.extend(self.weight.breakpoints());
        sort_dedup(&mut pts);
        let (lo, hi) = self.weight.support();
        pts.retain(|x| *x >= lo && *x <= hi);
        let mut out = vec![lo];
        out.extend(pts);
        out.push(hi);
        sort_dedup(&mut out);
        out
    }

    /// `∫_a^b w g / norm`.
    fn partial_mass(&self, a: f64, b: f64) -> f64 {
        let (lo, hi) = self.weight.support();
        let (a, b) = (a.max(lo), b.min(hi));
        if !(b > a) {
            return 0.0;
        }
        let mut pts: Vec<f64> = self.grid().into_iter().filter(|x| *x > a && *x < b).collect();
        pts.insert(0, a);
        pts.push(b);
        quad::integrate_pieces(|x| self.weight.eval(x) * self.base.pdf(x), &pts, 1e-13).value / self.norm
    }
}

pub(crate) fn sort_dedup(v: &mut Vec<f64>) {
    v.sort_by(f64::total_cmp);
    v.dedup();
}

/// Root of `cdf(x) = p` by bisection on a bracket grown geometrically from `center`.
pub fn bisect_quantile<F: Fn(f64) -> f64>(cdf: F, p: f64, center: f64, scale: f64) -> f64 {
    let mut step = if scale > 0.0 && scale.is_finite() { scale } else { 1.0 };
    let mut lo = center - step;
    let mut hi = center + step;
    while cdf(lo) >= p {
        step *= 2.0;
        lo = center - step;
        if !lo.is_finite() {
            return f64::NEG_INFINITY;
        }
    }
    step = if scale > 0.0 && scale.is_finite() { scale } else { 1.0 };
    while cdf(hi) < p {
        step *= 2.0;
        hi = center + step;
        if !hi.is_finite() {
            return f64::INFINITY;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-13 * mid.abs().max(1.0) || mid <= lo || mid >= hi {
            break;
        }
        if cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use statrs::distribution::StudentsT;

    fn families() -> Vec<ForecastDistribution> {
        vec![
            ForecastDistribution::gaussian(0.3, 1.7).unwrap(),
            ForecastDistribution::standardized_t(5).unwrap(),
            ForecastDistribution::standardized_t(4).unwrap(),
            ForecastDistribution::uniform(-3f64.sqrt(), 3f64.sqrt()).unwrap(),
            ForecastDistribution::heavy_tail(),
            ForecastDistribution::mixture(
                vec![0.5, 0.5],
                vec![ForecastDistribution::standard_normal(), ForecastDistribution::heavy_tail()],
            )
            .unwrap(),
        ]
    }

    #[test]
    fn pdf_examples() {
        assert_abs_diff_eq!(ForecastDistribution::standard_normal().pdf(0.0), 0.398_942_280_401_432_7, epsilon = 1e-15);
        assert_abs_diff_eq!(ForecastDistribution::heavy_tail().pdf(1.0), 0.375 * 1.25f64.powf(-2.5), epsilon = 1e-15);
        assert_abs_diff_eq!(ForecastDistribution::heavy_tail().pdf(1.0), 0.214_662_5, epsilon = 1e-7);
        let u = ForecastDistribution::uniform(-3f64.sqrt(), 3f64.sqrt()).unwrap();
        assert_eq!(u.pdf(2.0), 0.0);
    }

    #[test]
    fn heavy_tail_is_discontinuous_at_zero() {
        let h = ForecastDistribution::heavy_tail();
        assert_abs_diff_eq!(h.pdf(0.0), 0.398_942_280_401_432_7, epsilon = 1e-15);
        assert_abs_diff_eq!(h.pdf(1e-300), 0.375, epsilon = 1e-15);
        assert_eq!(h.cdf(0.0), 0.5);
    }

    #[test]
    fn densities_integrate_to_one() {
        for d in families() {
            let mut pts = vec![f64::NEG_INFINITY];
            pts.extend(d.grid());
            pts.push(f64::INFINITY);
            let q = quad::integrate_pieces(|x| d.pdf(x), &pts, 1e-12);
            assert!((q.value - 1.0).abs() < 1e-6, "{d:?}: {}", q.value);
        }
    }

    #[test]
    fn student_cdf_matches_statrs() {
        for nu in [1u32, 2, 3, 4, 5, 7, 10] {
            let reference = StudentsT::new(0.0, 1.0, nu as f64).unwrap();
            for &x in &[-12.0, -3.5, -1.0, -0.2, 0.0, 0.4, 1.7, 6.0, 40.0] {
                assert_abs_diff_eq!(student_t_cdf(x, nu), reference.cdf(x), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn heavy_tail_right_half_is_t4() {
        let h = ForecastDistribution::heavy_tail();
        let t4 = StudentsT::new(0.0, 1.0, 4.0).unwrap();
        for &x in &[0.1, 0.7, 2.0, 5.0] {
            // numeric integral of the right-half density from 0 plus the left half mass
            let q = quad::integrate(|z| h.pdf(z), 0.0, x, 1e-13).value + 0.5;
            assert_abs_diff_eq!(q, t4.cdf(x), epsilon = 1e-10);
            assert_abs_diff_eq!(h.cdf(x), t4.cdf(x), epsilon = 1e-12);
        }
    }

    #[test]
    fn quantile_cdf_roundtrip() {
        for d in families() {
            for i in 1..100 {
                let p = i as f64 / 100.0;
                let x = d.quantile(p).unwrap();
                assert!((d.cdf(x) - p).abs() < 1e-8, "{d:?} p={p}");
                // quantile(cdf(x)) = x at interior points
                assert!((d.quantile(d.cdf(x)).unwrap() - x).abs() < 1e-8, "{d:?} x={x}");
            }
        }
    }

    #[test]
    fn quantile_examples() {
        let n = ForecastDistribution::standard_normal();
        assert_abs_diff_eq!(n.quantile(0.95).unwrap(), 1.6449, epsilon = 1e-4);
        assert_abs_diff_eq!(n.quantile(0.5).unwrap(), 0.0, epsilon = 1e-12);
        assert!(n.quantile(0.0).is_err());
        assert!(n.quantile(1.2).is_err());
    }

    #[test]
    fn mixture_quantile_against_plain_bisection() {
        let m = ForecastDistribution::mixture(
            vec![0.3, 0.7],
            vec![ForecastDistribution::gaussian(-1.0, 0.5).unwrap(), ForecastDistribution::gaussian(2.0, 1.0).unwrap()],
        )
        .unwrap();
        for &p in &[0.05, 0.3, 0.5, 0.9] {
            // oracle: fixed bracket bisection
            let (mut lo, mut hi) = (-20.0, 20.0);
            while hi - lo > 1e-12 {
                let mid = 0.5 * (lo + hi);
                if m.cdf(mid) < p { lo = mid } else { hi = mid }
            }
            assert_abs_diff_eq!(m.quantile(p).unwrap(), 0.5 * (lo + hi), epsilon = 1e-10);
        }
    }

    #[test]
    fn mixture_cdf_is_weighted_sum() {
        let comps = vec![ForecastDistribution::standard_normal(), ForecastDistribution::heavy_tail()];
        let m = ForecastDistribution::mixture(vec![0.25, 0.75], comps.clone()).unwrap();
        for &x in &[-2.0, -0.1, 0.0, 0.3, 3.0] {
            assert_eq!(m.cdf(x), 0.25 * comps[0].cdf(x) + 0.75 * comps[1].cdf(x));
        }
    }

    #[test]
    fn moments_examples() {
        assert_eq!(ForecastDistribution::gaussian(2.0, 3.0).unwrap().moments(), (2.0, 9.0));
        let (m, v) = ForecastDistribution::uniform(-3f64.sqrt(), 3f64.sqrt()).unwrap().moments();
        assert_abs_diff_eq!(m, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-15);
        let mix = ForecastDistribution::mixture(
            vec![0.5, 0.5],
            vec![ForecastDistribution::standard_normal(), ForecastDistribution::gaussian(2.0, 1.0).unwrap()],
        )
        .unwrap();
        let (m, v) = mix.moments();
        assert_abs_diff_eq!(m, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn analytic_moments_match_quadrature() {
        for d in families() {
            let (m, v) = d.moments();
            let mut pts = vec![f64::NEG_INFINITY];
            pts.extend(d.grid());
            pts.push(f64::INFINITY);
            let m1 = quad::integrate_pieces(|x| x * d.pdf(x), &pts, 1e-12).value;
            let m2 = quad::integrate_pieces(|x| x * x * d.pdf(x), &pts, 1e-12).value;
            assert!((m - m1).abs() < 1e-7, "{d:?}");
            // t(4)-type tails converge slowly in the second moment
            assert!((v - (m2 - m1 * m1)).abs() < 1e-5, "{d:?}: {v} vs {}", m2 - m1 * m1);
        }
    }

    #[test]
    fn sampling_moments() {
        let s = RngStream::new(11, 0);
        let n = 1_000_000;
        let x = ForecastDistribution::standard_normal().sample(&s, n);
        let mean = x.iter().sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.005);

        let t = ForecastDistribution::standardized_t(5).unwrap().sample(&s.derive(1), n);
        let m = t.iter().sum::<f64>() / n as f64;
        let var = t.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64;
        assert!((var - 1.0).abs() < 0.02, "{var}");

        let h = ForecastDistribution::heavy_tail().sample(&s.derive(2), n);
        let frac = h.iter().filter(|v| **v <= 0.0).count() as f64 / n as f64;
        assert!((frac - 0.5).abs() < 0.002);
    }

    fn ks_stat(d: &ForecastDistribution, xs: &mut [f64]) -> f64 {
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        xs.iter()
            .enumerate()
            .map(|(i, x)| {
                let f = d.cdf(*x);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn samples_follow_cdf() {
        let n = 20_000;
        let crit = 1.628 / (n as f64).sqrt(); // 1% level
        for (i, d) in families().into_iter().enumerate() {
            let mut xs = d.sample(&RngStream::new(5, i as u64), n);
            let ks = ks_stat(&d, &mut xs);
            assert!(ks < crit, "{d:?}: {ks}");
        }
    }

    #[test]
    fn constructor_validation() {
        assert!(ForecastDistribution::gaussian(0.0, 0.0).is_err());
        assert!(ForecastDistribution::standardized_t(2).is_err());
        assert!(ForecastDistribution::uniform(1.0, 1.0).is_err());
        assert!(ForecastDistribution::mixture(vec![0.5, 0.4], vec![ForecastDistribution::standard_normal(); 2]).is_err());
        assert!(ForecastDistribution::mixture(vec![0.5, 0.5 + 1e-13], vec![ForecastDistribution::standard_normal(); 2]).is_ok());
    }

    #[test]
    fn equal_mixture_sums_to_one() {
        let m = ForecastDistribution::equal_mixture(vec![ForecastDistribution::standard_normal(); 7]).unwrap();
        if let ForecastDistribution::Mixture(m) = m {
            assert!((m.weights().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }
}
