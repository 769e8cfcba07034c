//! Pointwise log likelihood, information criteria, model comparison and MCMC diagnostics.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::Dataset;
use crate::draws::PosteriorDraws;
use crate::error::{Error, Result};
use crate::model::{params_from_draw, Centering, LevelPolicy, Likelihood, ModelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UnitDefinition {
    PerRow,
    /// Rows sharing a record id form one unit.
    PerGroup,
}

/// `matrix[s][u]`: log likelihood of unit `u` under draw `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointwiseLogLik {
    pub matrix: Vec<Vec<f64>>,
    pub units: Vec<String>,
}

impl PointwiseLogLik {
    pub fn n_draws(&self) -> usize {
        self.matrix.len()
    }

    pub fn n_units(&self) -> usize {
        self.units.len()
    }

    fn column(&self, u: usize) -> Vec<f64> {
        self.matrix.iter().map(|r| r[u]).collect()
    }
}

pub fn log_lik_matrix(
    spec: &ModelSpec,
    draws: &PosteriorDraws,
    data: &Dataset,
    unit: UnitDefinition,
) -> Result<PointwiseLogLik> {
    let lik = Likelihood::new(spec, data, &Centering::none(spec.n_covariates()), LevelPolicy::Reject)?;
    let (units, map): (Vec<String>, Vec<usize>) = match unit {
        UnitDefinition::PerRow => ((1..=data.len()).map(|i| i.to_string()).collect(), (0..data.len()).collect()),
        UnitDefinition::PerGroup => {
            let mut index: HashMap<String, usize> = HashMap::new();
            let mut units = Vec::new();
            let mut map = Vec::with_capacity(data.len());
            for (i, r) in data.records.iter().enumerate() {
                let key = r.id.clone().unwrap_or_else(|| format!("row{}", i + 1));
                let k = *index.entry(key.clone()).or_insert_with(|| {
                    units.push(key);
                    units.len() - 1
                });
                map.push(k);
            }
            (units, map)
        }
    };
    let mut matrix = Vec::with_capacity(draws.n_draws());
    for row in &draws.values {
        let ll = lik.pointwise(&params_from_draw(spec, row, None))?;
        let mut out = vec![0.0; units.len()];
        for (i, v) in ll.into_iter().enumerate() {
            out[map[i]] += v;
        }
        matrix.push(out);
    }
    Ok(PointwiseLogLik { matrix, units })
}

/// Expected log pointwise predictive density with its effective number of
/// parameters and standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Elpd {
    pub elpd: f64,
    pub p_eff: f64,
    pub se: f64,
    pub pointwise: Vec<f64>,
    pub units: Vec<String>,
}

fn log_mean_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + (v.iter().map(|x| (x - m).exp()).sum::<f64>() / v.len() as f64).ln()
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (m, var)
}

fn assemble(pointwise: Vec<f64>, p_eff: f64, units: Vec<String>) -> Elpd {
    let n = pointwise.len() as f64;
    let (_, var) = mean_var(&pointwise);
    Elpd {
        elpd: pointwise.iter().sum(),
        p_eff,
        se: (n * var).sqrt(),
        pointwise,
        units,
    }
}

/// WAIC with the variance-based penalty.
pub fn waic(ll: &PointwiseLogLik) -> Result<Elpd> {
    if ll.n_draws() < 2 {
        return Err(Error::DegenerateDraws);
    }
    let mut pointwise = Vec::with_capacity(ll.n_units());
    let mut p_eff = 0.0;
    for u in 0..ll.n_units() {
        let c = ll.column(u);
        let (_, v) = mean_var(&c);
        p_eff += v;
        pointwise.push(log_mean_exp(&c) - v);
    }
    Ok(assemble(pointwise, p_eff, ll.units.clone()))
}

/// Leave-one-out by raw importance sampling (no smoothing; weights can be
/// heavy-tailed, so treat the result with caution).
pub fn loo_raw(ll: &PointwiseLogLik) -> Result<Elpd> {
    if ll.n_draws() < 2 {
        return Err(Error::DegenerateDraws);
    }
    let mut pointwise = Vec::with_capacity(ll.n_units());
    let mut p_eff = 0.0;
    for u in 0..ll.n_units() {
        let c = ll.column(u);
        let neg: Vec<f64> = c.iter().map(|v| -v).collect();
        let e = -log_mean_exp(&neg);
        p_eff += log_mean_exp(&c) - e;
        pointwise.push(e);
    }
    Ok(assemble(pointwise, p_eff, ll.units.clone()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub model: String,
    pub elpd: f64,
    pub elpd_diff: f64,
    pub se_diff: f64,
}

/// Rank models by elpd, best first; differences are relative to the best.
pub fn compare(models: &[(String, Elpd)]) -> Result<Vec<ComparisonRow>> {
    let Some((_, first)) = models.first() else {
        return Ok(Vec::new());
    };
    if models.iter().any(|(_, m)| m.units != first.units) {
        return Err(Error::UnitMismatch);
    }
    let best = models
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.elpd.total_cmp(&b.1 .1.elpd))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let b = &models[best].1;
    let mut rows: Vec<ComparisonRow> = models
        .iter()
        .map(|(name, m)| {
            let d: Vec<f64> = m.pointwise.iter().zip(&b.pointwise).map(|(x, y)| x - y).collect();
            let (_, var) = mean_var(&d);
            ComparisonRow {
                model: name.clone(),
                elpd: m.elpd,
                elpd_diff: d.iter().sum(),
                se_diff: (d.len() as f64 * var).sqrt(),
            }
        })
        .collect();
    rows.sort_by(|a, b| b.elpd_diff.total_cmp(&a.elpd_diff));
    Ok(rows)
}

/// Paired difference `a − b` with its standard error.
pub fn elpd_difference(a: &Elpd, b: &Elpd) -> Result<(f64, f64)> {
    if a.units != b.units {
        return Err(Error::UnitMismatch);
    }
    let d: Vec<f64> = a.pointwise.iter().zip(&b.pointwise).map(|(x, y)| x - y).collect();
    let (_, var) = mean_var(&d);
    Ok((d.iter().sum(), (d.len() as f64 * var).sqrt()))
}

fn split(chains: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    if chains.len() < 2 || chains.iter().any(|c| c.len() < 4) {
        return Err(Error::InsufficientDraws);
    }
    let n = chains.iter().map(Vec::len).min().unwrap_or(0);
    let half = n / 2;
    Ok(chains
        .iter()
        .flat_map(|c| [c[..half].to_vec(), c[n - half..n].to_vec()])
        .collect())
}

fn rank_normalize(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut all: Vec<(f64, usize, usize)> = chains
        .iter()
        .enumerate()
        .flat_map(|(c, v)| v.iter().enumerate().map(move |(i, &x)| (x, c, i)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let s = all.len() as f64;
    let std = Normal::new(0.0, 1.0).expect("standard normal");
    let mut out: Vec<Vec<f64>> = chains.iter().map(|c| vec![0.0; c.len()]).collect();
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j + 1 < all.len() && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        // average rank for ties, 1-based
        let r = 0.5 * ((i + 1) + (j + 1)) as f64;
        let z = std.inverse_cdf((r - 0.375) / (s + 0.25));
        for &(_, c, k) in &all[i..=j] {
            out[c][k] = z;
        }
        i = j + 1;
    }
    out
}

fn basic_rhat(chains: &[Vec<f64>]) -> f64 {
    let n = chains[0].len() as f64;
    let stats: Vec<(f64, f64)> = chains.iter().map(|c| mean_var(c)).collect();
    let means: Vec<f64> = stats.iter().map(|s| s.0).collect();
    let w = stats.iter().map(|s| s.1).sum::<f64>() / stats.len() as f64;
    let (_, b_over_n) = mean_var(&means);
    let var_plus = (n - 1.0) / n * w + b_over_n;
    if w == 0.0 {
        return if b_over_n == 0.0 { f64::NAN } else { f64::INFINITY };
    }
    (var_plus / w).sqrt()
}

fn autocov(c: &[f64], mean: f64, lag: usize) -> f64 {
    let n = c.len();
    (0..n - lag).map(|i| (c[i] - mean) * (c[i + lag] - mean)).sum::<f64>() / n as f64
}

/// Effective sample size by Geyer's initial monotone sequence over chains.
fn basic_ess(chains: &[Vec<f64>]) -> f64 {
    let m = chains.len();
    let n = chains[0].len();
    let nf = n as f64;
    let means: Vec<f64> = chains.iter().map(|c| c.iter().sum::<f64>() / nf).collect();
    let acov = |lag: usize| -> f64 { chains.iter().zip(&means).map(|(c, &mu)| autocov(c, mu, lag)).sum::<f64>() / m as f64 };
    let mean_var = acov(0) * nf / (nf - 1.0);
    let mut var_plus = mean_var * (nf - 1.0) / nf;
    if m > 1 {
        var_plus += self::mean_var(&means).1;
    }
    if !(var_plus > 0.0) {
        return f64::NAN;
    }
    let rho = |lag: usize| 1.0 - (mean_var - acov(lag)) / var_plus;
    let mut rho_s = vec![0.0; n + 2];
    rho_s[0] = 1.0;
    let mut even = 1.0;
    let mut odd = rho(1);
    rho_s[1] = odd;
    let mut t = 1;
    while t + 5 < n && even + odd > 0.0 {
        even = rho(t + 1);
        odd = rho(t + 2);
        if even + odd >= 0.0 {
            rho_s[t + 1] = even;
            rho_s[t + 2] = odd;
        }
        t += 2;
    }
    let max_t = t;
    if even > 0.0 {
        rho_s[max_t + 1] = even;
    }
    let mut t = 1;
    while t + 3 <= max_t {
        if rho_s[t + 1] + rho_s[t + 2] > rho_s[t - 1] + rho_s[t] {
            let v = 0.5 * (rho_s[t - 1] + rho_s[t]);
            rho_s[t + 1] = v;
            rho_s[t + 2] = v;
        }
        t += 2;
    }
    let total = (m * n) as f64;
    let tau = (-1.0 + 2.0 * rho_s[..max_t].iter().sum::<f64>() + rho_s[max_t + 1]).max(1.0 / total.log10());
    total / tau
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    /// Rank-normalized split Rhat, the larger of its bulk and folded versions.
    pub rhat: f64,
    /// Bulk effective sample size on rank-normalized split chains.
    pub ess: f64,
}

pub fn rhat_ess(chains: &[Vec<f64>]) -> Result<Convergence> {
    let sp = split(chains)?;
    let z = rank_normalize(&sp);
    let med = crate::summary::median(&sp.concat());
    let folded: Vec<Vec<f64>> = sp.iter().map(|c| c.iter().map(|x| (x - med).abs()).collect()).collect();
    let zf = rank_normalize(&folded);
    let rhat = basic_rhat(&z).max(basic_rhat(&zf));
    Ok(Convergence { rhat, ess: basic_ess(&z) })
}

/// Effective sample size for the mean on the original scale (split chains).
pub fn ess_mean(chains: &[Vec<f64>]) -> Result<f64> {
    Ok(basic_ess(&split(chains)?))
}

/// Monte Carlo standard error of the posterior mean.
pub fn mcse_mean(chains: &[Vec<f64>]) -> Result<f64> {
    let all = chains.concat();
    let (_, var) = mean_var(&all);
    Ok((var / ess_mean(chains)?).sqrt())
}

/// JSON has no NaN or infinity; such values are stored as `null` and read back as NaN.
mod nullable_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterDiagnostics {
    pub name: String,
    #[serde(with = "nullable_f64")]
    pub rhat: f64,
    #[serde(with = "nullable_f64")]
    pub ess: f64,
}

pub fn diagnose(draws: &PosteriorDraws) -> Result<Vec<ParameterDiagnostics>> {
    draws
        .names
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let c = rhat_ess(&draws.by_chain(k))?;
            Ok(ParameterDiagnostics {
                name: name.clone(),
                rhat: c.rhat,
                ess: c.ess,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn ll(matrix: Vec<Vec<f64>>) -> PointwiseLogLik {
        let n = matrix[0].len();
        PointwiseLogLik {
            matrix,
            units: (1..=n).map(|i| i.to_string()).collect(),
        }
    }

    #[test]
    fn waic_constant_matrix() {
        let w = waic(&ll(vec![vec![-1.5; 4]; 10])).unwrap();
        assert!((w.elpd + 6.0).abs() < 1e-12);
        assert_eq!(w.p_eff, 0.0);
        let w = waic(&ll(vec![vec![0.5f64.ln()]; 2])).unwrap();
        assert!((w.elpd - 0.5f64.ln()).abs() < 1e-15);
        assert!(matches!(waic(&ll(vec![vec![0.0]])), Err(Error::DegenerateDraws)));
    }

    #[test]
    fn waic_noise_lowers_elpd_and_is_order_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let base = vec![vec![-1.0; 5]; 200];
        let noisy: Vec<Vec<f64>> = base
            .iter()
            .map(|r| {
                r.iter()
                    .map(|v| {
                        let e: f64 = StandardNormal.sample(&mut rng);
                        v + 0.1 * e
                    })
                    .collect()
            })
            .collect();
        let w0 = waic(&ll(base)).unwrap();
        let w1 = waic(&ll(noisy.clone())).unwrap();
        assert!(w1.p_eff > 0.0 && w1.elpd < w0.elpd);
        let mut rev = noisy.clone();
        rev.reverse();
        for r in &mut rev {
            r.reverse();
        }
        let w2 = waic(&ll(rev)).unwrap();
        assert!((w2.elpd - w1.elpd).abs() < 1e-10);
    }

    #[test]
    fn compare_signs_and_antisymmetry() {
        let a = waic(&ll(vec![vec![-1.0, -2.0, -1.5]; 3])).unwrap();
        let b = waic(&ll(vec![vec![-1.2, -2.5, -1.6]; 3])).unwrap();
        let rows = compare(&[("a".into(), a.clone()), ("b".into(), b.clone())]).unwrap();
        assert_eq!(rows[0].model, "a");
        assert_eq!(rows[0].elpd_diff, 0.0);
        assert!(rows[1].elpd_diff < 0.0);
        let (d1, s1) = elpd_difference(&a, &b).unwrap();
        let (d2, s2) = elpd_difference(&b, &a).unwrap();
        assert!((d1 + d2).abs() < 1e-15 && (s1 - s2).abs() < 1e-15);
        let same = compare(&[("a".into(), a.clone()), ("a2".into(), a.clone())]).unwrap();
        assert!(same.iter().all(|r| r.elpd_diff == 0.0 && r.se_diff == 0.0));
        let mut c = a.clone();
        c.units[0] = "x".into();
        assert!(matches!(compare(&[("a".into(), a), ("c".into(), c)]), Err(Error::UnitMismatch)));
    }

    #[test]
    fn loo_of_constant_matrix_equals_waic() {
        let m = ll(vec![vec![-0.7, -1.1]; 5]);
        assert!((loo_raw(&m).unwrap().elpd - waic(&m).unwrap().elpd).abs() < 1e-12);
    }

    fn iid(seed: u64, m: usize, n: usize) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..m).map(|_| (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()).collect()
    }

    #[test]
    fn diagnostics_on_iid_draws() {
        let chains = iid(3, 4, 1000);
        let c = rhat_ess(&chains).unwrap();
        assert!((c.rhat - 1.0).abs() < 0.01, "{}", c.rhat);
        assert!((c.ess / 4000.0 - 1.0).abs() < 0.2, "{}", c.ess);
        let same = vec![chains[0].clone(), chains[0].clone()];
        assert!((rhat_ess(&same).unwrap().rhat - 1.0).abs() < 0.01);
    }

    #[test]
    fn diagnostics_detect_non_mixing() {
        let c = rhat_ess(&[vec![0.0; 50], vec![1.0; 50]]).unwrap();
        assert!(c.rhat > 10.0);
        assert!(matches!(rhat_ess(&[vec![0.0; 50]]), Err(Error::InsufficientDraws)));
        assert!(matches!(rhat_ess(&[vec![0.0; 3], vec![1.0; 3]]), Err(Error::InsufficientDraws)));
    }

    #[test]
    fn autocorrelated_chain_has_lower_ess() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let chains: Vec<Vec<f64>> = (0..4)
            .map(|_| {
                let mut x = 0.0;
                (0..1000)
                    .map(|_| {
                        let e: f64 = StandardNormal.sample(&mut rng);
                        x = 0.9 * x + e;
                        x
                    })
                    .collect()
            })
            .collect();
        // AR(1) with φ = 0.9: ESS ≈ S·(1−φ)/(1+φ) ≈ 210
        let e = ess_mean(&chains).unwrap();
        assert!((100.0..400.0).contains(&e), "{e}");
    }
}
