//! Weight functions and weighted scoring rules.
//!
//! The proper rules here (twCRPS, CL, CSL, twCRLS) emphasise a region of the
//! outcome axis without rewarding hedging. [`improper_product`] is the
//! counter-example: multiplying a proper score by `w(y)` makes it improper,
//! and [`hedge_density`] is the forecast that exploits it.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dists::{std_normal_cdf, std_normal_sf, ForecastDistribution};
use crate::error::{Error, Result};
use crate::quad;
use crate::scores::{self, weighted_cdf_integral};

/// A `[0, 1]`-valued weight over the outcome axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightFunction {
    ConstantOne,
    /// `1{z >= r}`
    IndicatorRight { r: f64 },
    /// `1{z <= r}`
    IndicatorLeft { r: f64 },
    /// `Φ((z - r) / s)`
    GaussianRight { r: f64, s: f64 },
    /// `1 - Φ((z - r) / s)`
    GaussianLeft { r: f64, s: f64 },
}

impl WeightFunction {
    pub fn indicator_right(r: f64) -> Self {
        Self::IndicatorRight { r }
    }

    pub fn indicator_left(r: f64) -> Self {
        Self::IndicatorLeft { r }
    }

    pub fn gaussian_right(r: f64, s: f64) -> Result<Self> {
        check_scale(s)?;
        Ok(Self::GaussianRight { r, s })
    }

    pub fn gaussian_left(r: f64, s: f64) -> Result<Self> {
        check_scale(s)?;
        Ok(Self::GaussianLeft { r, s })
    }

    pub fn eval(&self, z: f64) -> f64 {
        match *self {
            Self::ConstantOne => 1.0,
            Self::IndicatorRight { r } => f64::from(z >= r),
            Self::IndicatorLeft { r } => f64::from(z <= r),
            Self::GaussianRight { r, s } => std_normal_cdf((z - r) / s),
            Self::GaussianLeft { r, s } => std_normal_sf((z - r) / s),
        }
    }

    pub fn is_constant_one(&self) -> bool {
        matches!(self, Self::ConstantOne)
    }

    /// Closure of `{w > 0}` as an interval.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Self::IndicatorRight { r } => (r, f64::INFINITY),
            Self::IndicatorLeft { r } => (f64::NEG_INFINITY, r),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        match *self {
            Self::ConstantOne => vec![],
            Self::IndicatorRight { r } | Self::IndicatorLeft { r } => vec![r],
            Self::GaussianRight { r, s } | Self::GaussianLeft { r, s } => vec![r - 4.0 * s, r, r + 4.0 * s],
        }
    }

    pub fn threshold(&self) -> Option<f64> {
        match *self {
            Self::ConstantOne => None,
            Self::IndicatorRight { r }
            | Self::IndicatorLeft { r }
            | Self::GaussianRight { r, .. }
            | Self::GaussianLeft { r, .. } => Some(r),
        }
    }

    /// `1 - w`, when that is itself one of the supported kinds.
    fn complement(&self) -> Option<Self> {
        match *self {
            Self::GaussianRight { r, s } => Some(Self::GaussianLeft { r, s }),
            Self::GaussianLeft { r, s } => Some(Self::GaussianRight { r, s }),
            _ => None,
        }
    }
}

impl fmt::Display for WeightFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::ConstantOne => write!(f, "one"),
            Self::IndicatorRight { r } => write!(f, "indicator-right:{r}"),
            Self::IndicatorLeft { r } => write!(f, "indicator-left:{r}"),
            Self::GaussianRight { r, s } => write!(f, "gaussian-right:{r}:{s}"),
            Self::GaussianLeft { r, s } => write!(f, "gaussian-left:{r}:{s}"),
        }
    }
}

impl std::str::FromStr for WeightFunction {
    type Err = Error;

    /// Parses `one`, `indicator-right:R`, `indicator-left:R`,
    /// `gaussian-right:R:S`, `gaussian-left:R:S`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |i: usize| -> Result<f64> {
            parts
                .get(i)
                .ok_or_else(|| Error::param("weight", format!("missing field {i} in `{s}`")))?
                .parse::<f64>()
                .map_err(|e| Error::param("weight", format!("`{s}`: {e}")))
        };
        let w = match parts[0] {
            "one" | "constant" if parts.len() == 1 => Self::ConstantOne,
            "indicator-right" if parts.len() == 2 => Self::indicator_right(num(1)?),
            "indicator-left" if parts.len() == 2 => Self::indicator_left(num(1)?),
            "gaussian-right" if parts.len() == 3 => Self::gaussian_right(num(1)?, num(2)?)?,
            "gaussian-left" if parts.len() == 3 => Self::gaussian_left(num(1)?, num(2)?)?,
            _ => return Err(Error::param("weight", format!("unrecognised weight `{s}`"))),
        };
        Ok(w)
    }
}

fn check_scale(s: f64) -> Result<()> {
    if s > 0.0 && s.is_finite() {
        Ok(())
    } else {
        Err(Error::param("s", format!("weight scale must be positive, got {s}")))
    }
}

/// `∫ w(z) f(z) dz`.
pub fn weighted_mass(f: &ForecastDistribution, w: &WeightFunction) -> f64 {
    match *w {
        WeightFunction::ConstantOne => 1.0,
        WeightFunction::IndicatorRight { r } => f.sf(r),
        WeightFunction::IndicatorLeft { r } => f.cdf(r),
        WeightFunction::GaussianRight { r, s } | WeightFunction::GaussianLeft { r, s } => match f {
            // P(Z <= X) for independent Z ~ N(r, s^2), X ~ N(mu, sigma^2)
            ForecastDistribution::Gaussian(g) => {
                let z = (g.mu - r) / (g.sigma * g.sigma + s * s).sqrt();
                if matches!(w, WeightFunction::GaussianRight { .. }) {
                    std_normal_cdf(z)
                } else {
                    std_normal_sf(z)
                }
            }
            ForecastDistribution::Mixture(m) => m
                .weights()
                .iter()
                .zip(m.components())
                .map(|(p, c)| p * weighted_mass(c, w))
                .sum(),
            _ => {
                let mut pts = vec![f64::NEG_INFINITY];
                pts.extend(f.grid());
                pts.extend(w.breakpoints());
                pts.push(f64::INFINITY);
                crate::dists::sort_dedup(&mut pts);
                quad::integrate_pieces(|z| w.eval(z) * f.pdf(z), &pts, 1e-12).value
            }
        },
    }
}

/// `∫ (1 - w(z)) f(z) dz`, evaluated without cancellation where possible.
pub fn complementary_mass(f: &ForecastDistribution, w: &WeightFunction) -> f64 {
    match *w {
        WeightFunction::ConstantOne => 0.0,
        WeightFunction::IndicatorRight { r } => f.cdf(r),
        WeightFunction::IndicatorLeft { r } => f.sf(r),
        _ => weighted_mass(f, &w.complement().expect("gaussian weights have complements")),
    }
}

/// Threshold-weighted CRPS `∫ w(z) (F(z) - 1{y <= z})^2 dz`.
///
/// For indicator weights the integration domain is clipped exactly at the
/// threshold, so when `y` lies outside the weighted region the value depends
/// on the forecast tail alone.
pub fn twcrps(f: &ForecastDistribution, y: f64, w: &WeightFunction) -> f64 {
    weighted_cdf_integral(f, y, w, |cdf, sf, above| if above { sf * sf } else { cdf * cdf }).value
}

/// Conditional likelihood score.
pub fn cl(f: &ForecastDistribution, y: f64, w: &WeightFunction) -> Result<f64> {
    let mass = weighted_mass(f, w);
    if !(mass > 0.0) {
        return Err(Error::Domain(format!("CL needs positive weighted mass, got {mass}")));
    }
    let wy = w.eval(y);
    if wy == 0.0 {
        return Ok(0.0);
    }
    Ok(-wy * (f.ln_pdf(y) - mass.ln()))
}

/// Censored likelihood score.
pub fn csl(f: &ForecastDistribution, y: f64, w: &WeightFunction) -> Result<f64> {
    let wy = w.eval(y);
    let mut score = 0.0;
    if wy > 0.0 {
        score -= wy * f.ln_pdf(y);
    }
    if wy < 1.0 {
        score -= (1.0 - wy) * complementary_mass(f, w).ln();
    }
    Ok(score)
}

/// Threshold-weighted continuous ranked logarithmic score
/// `-∫ w(z) log|F(z) - 1{y > z}| dz`.
pub fn twcrls(f: &ForecastDistribution, y: f64, w: &WeightFunction) -> f64 {
    twcrls_quadrature(f, y, w).value
}

/// As [`twcrls`], returning the quadrature error bound alongside the value.
/// The value is `+inf` when the integrand diverges on a set of positive length.
pub fn twcrls_quadrature(f: &ForecastDistribution, y: f64, w: &WeightFunction) -> quad::Quadrature {
    weighted_cdf_integral(f, y, w, |cdf, sf, above| {
        if above {
            -(-sf).ln_1p()
        } else {
            -(-cdf).ln_1p()
        }
    })
}

/// The unweighted bases accepted by [`improper_product`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BaseRule {
    Logs,
    Crps,
}

/// `w(y) S0(F, y)`. Improper for non-constant `w`; kept to exhibit hedging.
pub fn improper_product(base: BaseRule, f: &ForecastDistribution, y: f64, w: &WeightFunction) -> f64 {
    let wy = w.eval(y);
    if wy == 0.0 {
        return 0.0;
    }
    wy * match base {
        BaseRule::Logs => scores::logs(f, y),
        BaseRule::Crps => scores::crps(f, y),
    }
}

/// Density proportional to `w g`, the minimiser of the expected improper product score.
pub fn hedge_density(g: &ForecastDistribution, w: &WeightFunction) -> Result<ForecastDistribution> {
    ForecastDistribution::reweighted(g.clone(), *w)
}

/// CL with the density replaced by a normal density of matching mean and sd.
pub fn cl_quadratic(mean: f64, sd: f64, y: f64, w: &WeightFunction) -> Result<f64> {
    cl(&ForecastDistribution::gaussian(mean, sd)?, y, w)
}

/// CSL with the density replaced by a normal density of matching mean and sd.
pub fn csl_quadratic(mean: f64, sd: f64, y: f64, w: &WeightFunction) -> Result<f64> {
    csl(&ForecastDistribution::gaussian(mean, sd)?, y, w)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QuadraticRule {
    ClQ,
    CslQ,
}

/// Closed-form expected score difference of a quadratic-approximated weighted
/// likelihood score, for truth `G = U[-√3, √3]` and `w = 1{y >= 1}`, at a
/// normal approximation with mean `mean` and sd `sd`.
///
/// For [`QuadraticRule::ClQ`] the value is the bracketed Kullback-Leibler
/// difference; multiply by [`quadratic_diff_factor`] to get
/// `E_G[CL^q(F,Y) - CL^q(G,Y)]`. For [`QuadraticRule::CslQ`] the factor is one.
pub fn quadratic_expected_diff(rule: QuadraticRule, mean: f64, sd: f64) -> Result<f64> {
    if !(sd > 0.0) {
        return Err(Error::Domain(format!("sd must be positive, got {sd}")));
    }
    let r3 = 3f64.sqrt();
    let quad_num = 3.0 * (r3 - 1.0) * mean * mean - 6.0 * mean + (3.0 * r3 - 1.0) * (1.0 - sd * sd);
    let z = (1.0 - mean) / sd;
    Ok(match rule {
        QuadraticRule::ClQ => {
            (sd * std_normal_sf(z) / std_normal_sf(1.0)).ln() + quad_num / (6.0 * (r3 - 1.0) * sd * sd)
        }
        QuadraticRule::CslQ => {
            (r3 - 1.0) / (2.0 * r3) * sd.ln() - (r3 + 1.0) / (2.0 * r3) * (std_normal_cdf(z) / std_normal_cdf(1.0)).ln()
                + quad_num / (12.0 * r3 * sd * sd)
        }
    })
}

/// Positive factor turning [`quadratic_expected_diff`] into the expectation:
/// `P_G(Y >= 1) = (√3 - 1) / (2√3)` for CL^q, one for CSL^q.
pub fn quadratic_diff_factor(rule: QuadraticRule) -> f64 {
    match rule {
        QuadraticRule::ClQ => {
            let r3 = 3f64.sqrt();
            (r3 - 1.0) / (2.0 * r3)
        }
        QuadraticRule::CslQ => 1.0,
    }
}
