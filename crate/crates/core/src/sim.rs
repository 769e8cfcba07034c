//! Event-time simulation by inverting the cumulative hazard.
//!
//! Each subject `i` owns a ChaCha8 generator seeded with the design seed on
//! stream `i`; it draws the subject's covariates and then `u ~ U(0, 1)`.
//! Cluster effects use a second generator (seed mixed with a constant) on
//! stream `j` for cluster `j`. Output is therefore independent of how subjects
//! are scheduled.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, Normal, Open01, Uniform};
use serde::{Deserialize, Serialize};

use crate::data::{CensoringStatus, Dataset, SurvivalRecord};
use crate::error::{Error, Result};
use crate::quadrature::{make_rule, NodePlan, QuadratureRule};
use crate::spline::{SplineBasis, SplineConfig};

const TIME_TOL: f64 = 1e-10;
const HORIZON_FACTOR: f64 = 1000.0;
const CLUSTER_SEED_MIX: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case")]
pub enum SimBaseline {
    /// `h0 = λ`
    Exponential { lambda: f64 },
    /// `h0 = λγt^(γ-1)`
    Weibull { lambda: f64, gamma: f64 },
    /// `h0 = λ·exp(γt)`
    Gompertz { lambda: f64, gamma: f64 },
    /// `h0 = λ·Σ c_l M_l(t)`, zero beyond the upper boundary knot.
    MSpline {
        lambda: f64,
        spline: SplineConfig,
        coefs: Vec<f64>,
    },
}

impl SimBaseline {
    fn lambda(&self) -> f64 {
        match self {
            SimBaseline::Exponential { lambda }
            | SimBaseline::Weibull { lambda, .. }
            | SimBaseline::Gompertz { lambda, .. }
            | SimBaseline::MSpline { lambda, .. } => *lambda,
        }
    }

    fn validate(&self) -> Result<Option<SplineBasis>> {
        let lambda = self.lambda();
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Config("lambda must be positive".into()));
        }
        match self {
            SimBaseline::Weibull { gamma, .. } | SimBaseline::Gompertz { gamma, .. } if !(*gamma > 0.0 && gamma.is_finite()) => {
                Err(Error::Config("gamma must be positive".into()))
            }
            SimBaseline::MSpline { spline, coefs, .. } => {
                let basis = SplineBasis::from_config(spline)?;
                if coefs.len() != basis.n_basis() || coefs.iter().any(|&c| !(c >= 0.0)) {
                    return Err(Error::Config(format!(
                        "need {} non-negative M-spline coefficients",
                        basis.n_basis()
                    )));
                }
                if basis.lower() != 0.0 {
                    return Err(Error::Config("M-spline truth must start at time 0".into()));
                }
                Ok(Some(basis))
            }
            _ => Ok(None),
        }
    }
}

/// Shape of a time-dependent coefficient increment `δ·g(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TdeFn {
    /// `g(t) = t`
    #[default]
    Linear,
    /// `g(t) = 1{t > threshold}`
    Step { threshold: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case")]
pub enum CovariateGen {
    Bernoulli { p: f64 },
    Normal { mean: f64, sd: f64 },
    Uniform { lower: f64, upper: f64 },
    Constant { value: f64 },
}

impl CovariateGen {
    fn draw(&self, rng: &mut ChaCha8Rng) -> Result<f64> {
        let bad = |e: String| Error::Config(e);
        Ok(match *self {
            CovariateGen::Bernoulli { p } => f64::from(u8::from(Bernoulli::new(p).map_err(|e| bad(e.to_string()))?.sample(rng))),
            CovariateGen::Normal { mean, sd } => Normal::new(mean, sd).map_err(|e| bad(e.to_string()))?.sample(rng),
            CovariateGen::Uniform { lower, upper } => Uniform::new(lower, upper).map_err(|e| bad(e.to_string()))?.sample(rng),
            CovariateGen::Constant { value } => value,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimCovariate {
    pub name: String,
    pub generator: CovariateGen,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrailtyDesign {
    pub factor: String,
    /// Standard deviation of the cluster log-hazard shift.
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimDesign {
    pub baseline: SimBaseline,
    #[serde(default)]
    pub covariates: Vec<SimCovariate>,
    #[serde(default)]
    pub betas: BTreeMap<String, f64>,
    #[serde(default)]
    pub tde: BTreeMap<String, f64>,
    #[serde(default)]
    pub tde_fn: TdeFn,
    pub max_time: f64,
    #[serde(default)]
    pub frailty: Option<FrailtyDesign>,
}

/// Cumulative hazard of one subject.
struct SubjectHazard<'a> {
    base: &'a SimBaseline,
    basis: Option<&'a SplineBasis>,
    eta: f64,
    tde: f64,
    tde_fn: TdeFn,
    rule: &'a QuadratureRule,
}

impl SubjectHazard<'_> {
    fn h0(&self, t: f64) -> f64 {
        match self.base {
            SimBaseline::Exponential { lambda } => *lambda,
            SimBaseline::Weibull { lambda, gamma } => lambda * gamma * t.powf(gamma - 1.0),
            SimBaseline::Gompertz { lambda, gamma } => lambda * (gamma * t).exp(),
            SimBaseline::MSpline { lambda, coefs, .. } => {
                let b = self.basis.expect("validated");
                if t > b.upper() {
                    return 0.0;
                }
                let m = b.mspline(t).unwrap_or_default();
                lambda * coefs.iter().zip(&m).map(|(c, m)| c * m).sum::<f64>()
            }
        }
    }

    fn cum_h0(&self, t: f64) -> f64 {
        match self.base {
            SimBaseline::Exponential { lambda } => lambda * t,
            SimBaseline::Weibull { lambda, gamma } => lambda * t.powf(*gamma),
            SimBaseline::Gompertz { lambda, gamma } => lambda * (gamma * t).exp_m1() / gamma,
            SimBaseline::MSpline { lambda, coefs, .. } => {
                let b = self.basis.expect("validated");
                let i = b.ispline(t.min(b.upper())).unwrap_or_default();
                lambda * coefs.iter().zip(&i).map(|(c, m)| c * m).sum::<f64>()
            }
        }
    }

    fn cum_hazard(&self, t: f64) -> f64 {
        if self.tde == 0.0 {
            return self.eta.exp() * self.cum_h0(t);
        }
        match self.tde_fn {
            TdeFn::Step { threshold } => {
                let before = self.cum_h0(t.min(threshold));
                let after = if t > threshold {
                    self.cum_h0(t) - self.cum_h0(threshold)
                } else {
                    0.0
                };
                self.eta.exp() * (before + self.tde.exp() * after)
            }
            TdeFn::Linear => {
                let singular = matches!(self.base, SimBaseline::Weibull { gamma, .. } if *gamma != 1.0);
                let breaks: Vec<f64> = self
                    .basis
                    .map(|b| b.knots().all())
                    .unwrap_or_default();
                let plan = NodePlan::new(self.rule, t, &breaks, singular);
                plan.apply(|s| self.h0(s) * (self.eta + self.tde * s).exp())
            }
        }
    }

    /// Smallest `t` in `[0, horizon]` with `H(t) ≥ target`, or `None` when the
    /// hazard never accumulates that far.
    fn invert(&self, target: f64, horizon: f64) -> Option<f64> {
        if !(self.cum_hazard(horizon) >= target) {
            return None;
        }
        let (mut lo, mut hi) = (0.0, horizon);
        while hi - lo > TIME_TOL {
            let mid = 0.5 * (lo + hi);
            if self.cum_hazard(mid) >= target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(0.5 * (lo + hi))
    }
}

fn check_design(d: &SimDesign) -> Result<Option<SplineBasis>> {
    if !(d.max_time > 0.0 && d.max_time.is_finite()) {
        return Err(Error::Config("max_time must be positive".into()));
    }
    let names: Vec<&str> = d.covariates.iter().map(|c| c.name.as_str()).collect();
    for k in d.betas.keys().chain(d.tde.keys()) {
        if !names.contains(&k.as_str()) {
            return Err(Error::Config(format!("coefficient for unknown covariate `{k}`")));
        }
    }
    if let Some(f) = &d.frailty {
        if !(f.sd >= 0.0) {
            return Err(Error::Config("frailty sd must be non-negative".into()));
        }
    }
    d.baseline.validate()
}

fn subject_rng(seed: u64, i: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i as u64);
    rng
}

/// Draw the covariate table from the design's generators.
pub fn covariate_table(design: &SimDesign, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    (0..n)
        .map(|i| {
            let mut rng = subject_rng(seed, i);
            design.covariates.iter().map(|c| c.generator.draw(&mut rng)).collect()
        })
        .collect()
}

/// Cluster effects `b_j = σ·z_j`.
pub fn cluster_effects(sd: f64, n_clusters: usize, seed: u64) -> Vec<f64> {
    (0..n_clusters)
        .map(|j| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ CLUSTER_SEED_MIX);
            rng.set_stream(j as u64);
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            sd * z
        })
        .collect()
}

/// Simulate one subject per covariate row. `clusters` optionally assigns each
/// subject a cluster index into `effects`.
fn simulate_rows(
    design: &SimDesign,
    covariates: &[Vec<f64>],
    clusters: Option<(&[usize], &[f64])>,
    seed: u64,
) -> Result<Dataset> {
    let basis = check_design(design)?;
    let rule = make_rule(15)?;
    let p = design.covariates.len();
    let coef = |m: &BTreeMap<String, f64>| -> Vec<f64> {
        design
            .covariates
            .iter()
            .map(|c| m.get(&c.name).copied().unwrap_or(0.0))
            .collect()
    };
    let beta = coef(&design.betas);
    let delta = coef(&design.tde);
    let horizon = design.max_time * HORIZON_FACTOR;
    let mut records = Vec::with_capacity(covariates.len());
    for (i, x) in covariates.iter().enumerate() {
        if x.len() != p {
            return Err(Error::DimensionMismatch(format!("row {i} has {} covariates, expected {p}", x.len())));
        }
        let mut rng = subject_rng(seed, i);
        // keep the stream aligned with `covariate_table`
        for c in &design.covariates {
            c.generator.draw(&mut rng)?;
        }
        let u: f64 = rng.sample(Open01);
        let mut eta: f64 = beta.iter().zip(x).map(|(b, x)| b * x).sum();
        let mut labels = Vec::new();
        if let Some((ids, effects)) = clusters {
            eta += effects[ids[i]];
            labels.push(Some(format!("{}", ids[i] + 1)));
        }
        let hz = SubjectHazard {
            base: &design.baseline,
            basis: basis.as_ref(),
            eta,
            tde: delta.iter().zip(x).map(|(d, x)| d * x).sum(),
            tde_fn: design.tde_fn,
            rule: &rule,
        };
        let (time, status) = match hz.invert(-u.ln(), horizon) {
            Some(t) if t <= design.max_time && t > 0.0 => (t, CensoringStatus::Event),
            Some(t) if t <= 0.0 => return Err(Error::RootNotBracketed(i)),
            _ => (design.max_time, CensoringStatus::RightCensored),
        };
        records.push(SurvivalRecord {
            entry_time: 0.0,
            time,
            upper_time: None,
            status,
            covariates: x.clone(),
            cluster_labels: labels,
            id: Some(format!("{}", i + 1)),
        });
    }
    let factors = match (clusters, &design.frailty) {
        (Some(_), Some(f)) => vec![f.factor.clone()],
        (Some(_), None) => vec!["cluster".to_string()],
        _ => Vec::new(),
    };
    let names = design.covariates.iter().map(|c| c.name.clone()).collect();
    Dataset::new(records, names, factors)
}

/// Simulate with a supplied covariate table (columns in design order).
pub fn simulate_with(design: &SimDesign, covariates: &[Vec<f64>], seed: u64) -> Result<Dataset> {
    simulate_rows(design, covariates, None, seed)
}

/// Simulate `n` subjects with covariates drawn from the design's generators.
pub fn simulate(design: &SimDesign, n: usize, seed: u64) -> Result<Dataset> {
    let x = covariate_table(design, n, seed)?;
    simulate_rows(design, &x, None, seed)
}

/// Simulate `n_clusters × n_per_cluster` subjects; subject `i` belongs to
/// cluster `i / n_per_cluster`, labelled from 1.
pub fn simulate_frailty(design: &SimDesign, n_per_cluster: usize, n_clusters: usize, seed: u64) -> Result<Dataset> {
    let f = design
        .frailty
        .as_ref()
        .ok_or_else(|| Error::Config("design has no frailty block".into()))?;
    let n = n_per_cluster * n_clusters;
    let x = covariate_table(design, n, seed)?;
    let effects = cluster_effects(f.sd, n_clusters, seed);
    let ids: Vec<usize> = (0..n).map(|i| i / n_per_cluster.max(1)).collect();
    simulate_rows(design, &x, Some((&ids, &effects)), seed)
}

/// Survival probability of a subject under the design, for round-trip checks.
pub fn design_survival(design: &SimDesign, x: &[f64], cluster_effect: f64, t: f64) -> Result<f64> {
    let basis = check_design(design)?;
    let rule = make_rule(15)?;
    let get = |m: &BTreeMap<String, f64>| -> f64 {
        design
            .covariates
            .iter()
            .zip(x)
            .map(|(c, x)| m.get(&c.name).copied().unwrap_or(0.0) * x)
            .sum()
    };
    let hz = SubjectHazard {
        base: &design.baseline,
        basis: basis.as_ref(),
        eta: get(&design.betas) + cluster_effect,
        tde: get(&design.tde),
        tde_fn: design.tde_fn,
        rule: &rule,
    };
    Ok((-hz.cum_hazard(t)).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spline::{BasisKind, KnotVector};

    fn exp_design(lambda: f64) -> SimDesign {
        SimDesign {
            baseline: SimBaseline::Exponential { lambda },
            covariates: vec![],
            betas: BTreeMap::new(),
            tde: BTreeMap::new(),
            tde_fn: TdeFn::Linear,
            max_time: 1e6,
            frailty: None,
        }
    }

    #[test]
    fn exponential_inverts_analytically() {
        let d = exp_design(0.3);
        let ds = simulate(&d, 50, 11).unwrap();
        for (i, r) in ds.records.iter().enumerate() {
            let mut rng = subject_rng(11, i);
            let u: f64 = rng.sample(Open01);
            assert!((r.time - (-u.ln() / 0.3)).abs() < 1e-9);
        }
    }

    #[test]
    fn exponential_passes_ks() {
        let n = 10_000;
        let ds = simulate(&exp_design(0.5), n, 2024).unwrap();
        let mut t: Vec<f64> = ds.records.iter().map(|r| r.time).collect();
        t.sort_by(f64::total_cmp);
        let d = t
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = 1.0 - (-0.5 * x).exp();
                (f - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - f).abs())
            })
            .fold(0.0, f64::max);
        assert!(d < 1.628 / (n as f64).sqrt(), "KS D = {d}");
    }

    fn tde_design() -> SimDesign {
        SimDesign {
            baseline: SimBaseline::Weibull { lambda: 0.1, gamma: 1.5 },
            covariates: vec![SimCovariate {
                name: "trt".into(),
                generator: CovariateGen::Bernoulli { p: 0.5 },
            }],
            betas: [("trt".to_string(), -0.5)].into(),
            tde: [("trt".to_string(), 0.2)].into(),
            tde_fn: TdeFn::Linear,
            max_time: 5.0,
            frailty: None,
        }
    }

    #[test]
    fn round_trip_recovers_uniform() {
        for design in [tde_design(), {
            let mut d = tde_design();
            d.tde_fn = TdeFn::Step { threshold: 2.0 };
            d
        }] {
            let ds = simulate(&design, 200, 5).unwrap();
            for (i, r) in ds.records.iter().enumerate() {
                if r.status != CensoringStatus::Event {
                    continue;
                }
                let mut rng = subject_rng(5, i);
                design.covariates[0].generator.draw(&mut rng).unwrap();
                let u: f64 = rng.sample(Open01);
                let s = design_survival(&design, &r.covariates, 0.0, r.time).unwrap();
                assert!((s - u).abs() < 1e-8, "{s} vs {u}");
            }
        }
    }

    #[test]
    fn linear_tde_design_event_fraction() {
        let ds = simulate(&tde_design(), 500, 99).unwrap();
        let frac = ds.summary().events as f64 / 500.0;
        assert!((0.6..0.8).contains(&frac), "{frac}");
    }

    #[test]
    fn zero_frailty_matches_plain_simulation() {
        let mut d = tde_design();
        let plain = simulate(&d, 40, 8).unwrap();
        d.frailty = Some(FrailtyDesign {
            factor: "site".into(),
            sd: 0.0,
        });
        let fr = simulate_frailty(&d, 4, 10, 8).unwrap();
        for (a, b) in plain.records.iter().zip(&fr.records) {
            assert_eq!(a.time, b.time);
            assert_eq!(a.status, b.status);
        }
        assert_eq!(fr.factor_levels[0].len(), 10);
    }

    #[test]
    fn cluster_effect_sd() {
        let b = cluster_effects(1.3, 1000, 4);
        let m = b.iter().sum::<f64>() / 1000.0;
        let sd = (b.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 999.0).sqrt();
        assert!((sd / 1.3 - 1.0).abs() < 0.1, "{sd}");
    }

    #[test]
    fn mspline_truth_censors_past_support() {
        let spline = SplineConfig {
            degree: 3,
            knots: KnotVector::new(0.0, vec![2.0, 4.0], 6.0).unwrap(),
            basis_kind: BasisKind::MSpline,
        };
        let d = SimDesign {
            baseline: SimBaseline::MSpline {
                lambda: 0.5,
                spline,
                coefs: vec![0.1, 0.3, 0.05, 0.05, 0.3, 0.2],
            },
            max_time: 6.0,
            ..exp_design(1.0)
        };
        let ds = simulate(&d, 300, 1).unwrap();
        assert!(ds.records.iter().all(|r| r.time <= 6.0));
        // H(6) = 0.5, so about 39% have an event
        let frac = ds.summary().events as f64 / 300.0;
        assert!((0.3..0.5).contains(&frac), "{frac}");
    }

    #[test]
    fn rejects_bad_designs() {
        let mut d = exp_design(0.1);
        d.max_time = 0.0;
        assert!(simulate(&d, 1, 0).is_err());
        let mut d = exp_design(0.1);
        d.betas.insert("ghost".into(), 1.0);
        assert!(simulate(&d, 1, 0).is_err());
    }
}
