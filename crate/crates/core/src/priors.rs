//! Prior log densities, normalizing constants included.

use std::collections::BTreeMap;
use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};
use statrs::function::beta::ln_beta;
use statrs::function::gamma::ln_gamma;

use crate::ad::Real;
use crate::data::{CensoringStatus, Dataset};
use crate::error::{Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ScalarPrior {
    Normal { location: f64, scale: f64 },
    StudentT { df: f64, location: f64, scale: f64 },
    Cauchy { location: f64, scale: f64 },
    Exponential { rate: f64 },
    HalfNormal { scale: f64 },
    HalfStudentT { df: f64, scale: f64 },
    HalfCauchy { scale: f64 },
    Flat,
}

impl ScalarPrior {
    pub fn normal(location: f64, scale: f64) -> Self {
        ScalarPrior::Normal { location, scale }
    }

    /// True for families supported on the positive half-line.
    pub fn is_positive(&self) -> bool {
        matches!(
            self,
            ScalarPrior::Exponential { .. }
                | ScalarPrior::HalfNormal { .. }
                | ScalarPrior::HalfStudentT { .. }
                | ScalarPrior::HalfCauchy { .. }
        )
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64, what: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("prior {what} must be positive, got {v}")))
            }
        };
        match *self {
            ScalarPrior::Normal { scale, .. } | ScalarPrior::Cauchy { scale, .. } => pos(scale, "scale"),
            ScalarPrior::StudentT { df, scale, .. } | ScalarPrior::HalfStudentT { df, scale } => {
                pos(df, "df")?;
                pos(scale, "scale")
            }
            ScalarPrior::Exponential { rate } => pos(rate, "rate"),
            ScalarPrior::HalfNormal { scale } | ScalarPrior::HalfCauchy { scale } => pos(scale, "scale"),
            ScalarPrior::Flat => Ok(()),
        }
    }

    /// Log density and its derivative; `-∞` outside the support.
    pub fn log_density_grad(&self, x: f64) -> (f64, f64) {
        if self.is_positive() && x < 0.0 {
            return (f64::NEG_INFINITY, 0.0);
        }
        match *self {
            ScalarPrior::Normal { location, scale } => {
                let z = (x - location) / scale;
                (-LN_SQRT_2PI - scale.ln() - 0.5 * z * z, -z / scale)
            }
            ScalarPrior::HalfNormal { scale } => {
                let z = x / scale;
                (LN_2 - LN_SQRT_2PI - scale.ln() - 0.5 * z * z, -z / scale)
            }
            ScalarPrior::StudentT { df, location, scale } => student_t(df, (x - location) / scale, scale, 0.0),
            ScalarPrior::HalfStudentT { df, scale } => student_t(df, x / scale, scale, LN_2),
            ScalarPrior::Cauchy { location, scale } => {
                let z = (x - location) / scale;
                (-(PI * scale).ln() - z.mul_add(z, 1.0).ln(), -2.0 * z / (scale * (1.0 + z * z)))
            }
            ScalarPrior::HalfCauchy { scale } => {
                let z = x / scale;
                (LN_2 - (PI * scale).ln() - z.mul_add(z, 1.0).ln(), -2.0 * z / (scale * (1.0 + z * z)))
            }
            ScalarPrior::Exponential { rate } => (rate.ln() - rate * x, -rate),
            ScalarPrior::Flat => (0.0, 0.0),
        }
    }

    /// Analytic mean and variance where they exist.
    pub fn moments(&self) -> Option<(f64, f64)> {
        match *self {
            ScalarPrior::Normal { location, scale } => Some((location, scale * scale)),
            ScalarPrior::HalfNormal { scale } => {
                let m = scale * (2.0 / PI).sqrt();
                Some((m, scale * scale * (1.0 - 2.0 / PI)))
            }
            ScalarPrior::Exponential { rate } => Some((1.0 / rate, 1.0 / (rate * rate))),
            ScalarPrior::StudentT { df, location, scale } if df > 2.0 => {
                Some((location, scale * scale * df / (df - 2.0)))
            }
            _ => None,
        }
    }
}

fn student_t(df: f64, z: f64, scale: f64, offset: f64) -> (f64, f64) {
    let c = ln_gamma(0.5 * (df + 1.0)) - ln_gamma(0.5 * df) - 0.5 * (df * PI).ln() - scale.ln();
    let v = offset + c - 0.5 * (df + 1.0) * (z * z / df).ln_1p();
    (v, -(df + 1.0) * z / (scale * (df + z * z)))
}

pub fn log_prior_scalar(prior: &ScalarPrior, value: f64) -> Result<f64> {
    let (v, _) = prior.log_density_grad(value);
    if v == f64::NEG_INFINITY || value.is_nan() {
        return Err(Error::PriorOutOfSupport(value));
    }
    Ok(v)
}

/// `θ_1 ~ N(0, 1)`, `θ_m ~ N(θ_{m-1}, τ)`.
pub fn log_prior_random_walk(theta: &[f64], tau: f64) -> f64 {
    random_walk_grad(theta, tau).0
}

/// Value, gradient with respect to θ, and derivative with respect to τ.
pub fn random_walk_grad(theta: &[f64], tau: f64) -> (f64, Vec<f64>, f64) {
    let mut g = vec![0.0; theta.len()];
    if theta.is_empty() {
        return (0.0, g, 0.0);
    }
    let mut v = -LN_SQRT_2PI - 0.5 * theta[0] * theta[0];
    g[0] = -theta[0];
    let mut dtau = 0.0;
    for m in 1..theta.len() {
        let d = theta[m] - theta[m - 1];
        let z = d / tau;
        v += -LN_SQRT_2PI - tau.ln() - 0.5 * z * z;
        g[m] -= d / (tau * tau);
        g[m - 1] += d / (tau * tau);
        dtau += -1.0 / tau + d * d / (tau * tau * tau);
    }
    (v, g, dtau)
}

pub fn log_dirichlet<R: Real>(x: &[R], alpha: &[f64]) -> R {
    let a0: f64 = alpha.iter().sum();
    let mut v = R::cst(ln_gamma(a0) - alpha.iter().map(|&a| ln_gamma(a)).sum::<f64>());
    for (&xi, &a) in x.iter().zip(alpha) {
        if a != 1.0 {
            v = v + xi.ln() * (a - 1.0);
        }
    }
    v
}

/// Gamma with shape `k` and scale `θ`.
pub fn log_gamma_density<R: Real>(x: R, shape: f64, scale: f64) -> R {
    x.ln() * (shape - 1.0) - x / scale + (-ln_gamma(shape) - shape * scale.ln())
}

/// `log c_K(η)`, the integral of `det(Ω)^(η-1)` over `K × K` correlation matrices.
pub fn lkj_log_normalizer(eta: f64, k: usize) -> f64 {
    let mut v = 0.0;
    for i in 1..k {
        let km = (k - i) as f64;
        v += (2.0 * eta - 2.0 + km) * km * LN_2;
        let a = eta + (km - 1.0) / 2.0;
        v += km * ln_beta(a, a);
    }
    v
}

/// LKJ(η) density of Ω expressed on its Cholesky factor.
pub fn lkj_corr_cholesky_log_density<R: Real>(l: &[Vec<R>], eta: f64) -> R {
    let k = l.len();
    let mut v = R::cst(-lkj_log_normalizer(eta, k));
    for (i, row) in l.iter().enumerate().skip(1) {
        let c = (k - i - 1) as f64 + 2.0 * eta - 2.0;
        if c != 0.0 {
            v = v + row[i].ln() * c;
        }
    }
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovariancePriorSpec {
    /// LKJ shape ζ.
    pub regularization: f64,
    /// Symmetric Dirichlet concentration φ for the variance simplex.
    pub concentration: f64,
    pub shape: f64,
    pub scale: f64,
}

impl Default for CovariancePriorSpec {
    fn default() -> Self {
        CovariancePriorSpec {
            regularization: 1.0,
            concentration: 1.0,
            shape: 1.0,
            scale: 1.0,
        }
    }
}

/// Standard deviations `σ_d = τ·sqrt(D·π_d)`.
pub fn covariance_scales<R: Real>(simplex: &[R], tau: R) -> Vec<R> {
    let d = simplex.len() as f64;
    simplex.iter().map(|&p| tau * (p * d).sqrt()).collect()
}

/// `diag(σ)·Ω·diag(σ)` with `Ω = L Lᵀ`.
pub fn covariance_matrix(corr_chol: &[Vec<f64>], simplex: &[f64], tau: f64) -> Vec<Vec<f64>> {
    let s = covariance_scales(simplex, tau);
    let d = simplex.len();
    let mut out = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..d {
            let omega: f64 = (0..d).map(|k| corr_chol[i][k] * corr_chol[j][k]).sum();
            out[i][j] = s[i] * omega * s[j];
        }
    }
    out
}

/// Recover `(π, τ)` from a covariance matrix: the trace is `D·τ²`.
pub fn decompose_covariance(sigma: &[Vec<f64>]) -> (Vec<f64>, f64) {
    let d = sigma.len() as f64;
    let trace: f64 = (0..sigma.len()).map(|i| sigma[i][i]).sum();
    let tau = (trace / d).sqrt();
    let pi = (0..sigma.len()).map(|i| sigma[i][i] / trace).collect();
    (pi, tau)
}

pub fn log_prior_covariance(
    corr_chol: &[Vec<f64>],
    simplex: &[f64],
    tau: f64,
    spec: &CovariancePriorSpec,
    order: usize,
) -> Result<f64> {
    if simplex.len() != order
        || simplex.iter().any(|&p| !(p >= 0.0))
        || (simplex.iter().sum::<f64>() - 1.0).abs() > 1e-10
    {
        return Err(Error::InvalidSimplex);
    }
    if !(tau > 0.0) {
        return Err(Error::PriorOutOfSupport(tau));
    }
    let valid = corr_chol.len() == order
        && corr_chol.iter().enumerate().all(|(i, row)| {
            row.len() == order
                && row[i] > 0.0
                && row[i + 1..].iter().all(|&v| v == 0.0)
                && (row.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-10
        });
    if !valid {
        return Err(Error::InvalidCholesky);
    }
    let dir = log_dirichlet(simplex, &vec![spec.concentration; order]);
    Ok(lkj_corr_cholesky_log_density(corr_chol, spec.regularization)
        + dir
        + log_gamma_density(tau, spec.shape, spec.scale))
}

/// Default prior assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PriorConfig {
    /// On the internally shifted intercept.
    pub intercept: ScalarPrior,
    pub coefficients: ScalarPrior,
    #[serde(default)]
    pub coefficient_overrides: BTreeMap<String, ScalarPrior>,
    /// Weibull shape or Gompertz scale.
    pub aux: ScalarPrior,
    pub bspline_coefficients: ScalarPrior,
    pub mspline_concentration: f64,
    pub smooth: ScalarPrior,
    pub covariance: CovariancePriorSpec,
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig {
            intercept: ScalarPrior::normal(0.0, 20.0),
            coefficients: ScalarPrior::normal(0.0, 2.5),
            coefficient_overrides: BTreeMap::new(),
            aux: ScalarPrior::HalfNormal { scale: 2.0 },
            bspline_coefficients: ScalarPrior::normal(0.0, 20.0),
            mspline_concentration: 1.0,
            smooth: ScalarPrior::Exponential { rate: 1.0 },
            covariance: CovariancePriorSpec::default(),
        }
    }
}

impl PriorConfig {
    pub fn coefficient(&self, name: &str) -> ScalarPrior {
        self.coefficient_overrides
            .get(name)
            .copied()
            .unwrap_or(self.coefficients)
    }

    pub fn validate(&self) -> Result<()> {
        for p in [self.intercept, self.coefficients, self.aux, self.bspline_coefficients, self.smooth]
            .iter()
            .chain(self.coefficient_overrides.values())
        {
            p.validate()?;
        }
        if !self.aux.is_positive() && self.aux != ScalarPrior::Flat {
            return Err(Error::Config("the shape/scale prior needs positive support".into()));
        }
        if !self.smooth.is_positive() && self.smooth != ScalarPrior::Flat {
            return Err(Error::Config("the smoothing sd prior needs positive support".into()));
        }
        let c = &self.covariance;
        if [self.mspline_concentration, c.regularization, c.concentration, c.shape, c.scale]
            .iter()
            .any(|v| !(*v > 0.0 && v.is_finite()))
        {
            return Err(Error::Config("concentration, regularization, shape and scale must be positive".into()));
        }
        Ok(())
    }
}

/// Events `E` (any observed event, exact or censored into an interval) and
/// follow-up `T = Σ (T_i - T_i^E)`.
pub fn crude_event_rate(data: &Dataset) -> (usize, f64) {
    let events = data
        .records
        .iter()
        .filter(|r| r.status != CensoringStatus::RightCensored)
        .count();
    let time = data.records.iter().map(|r| r.time - r.entry_time).sum();
    (events, time)
}

/// Internal intercept shift `log(E/T)`, negated for AFT models; zero without events.
pub fn intercept_shift(events: usize, follow_up: f64, aft: bool) -> f64 {
    if events == 0 || !(follow_up > 0.0) {
        return 0.0;
    }
    let s = (events as f64 / follow_up).ln();
    if aft {
        -s
    } else {
        s
    }
}
