//! Log posterior on the unconstrained scale.
//!
//! Layout of the unconstrained vector:
//! `α̃ | β (P) | per TVE: θ (L_k), log τ_k | aux | per random-effect term:
//! z (J·D), log τ, simplex (D-1), partial correlations (D(D-1)/2)`.
//! Positive scalars use a log transform, simplexes stick-breaking, correlation
//! factors canonical partial correlations, and random effects are non-centered:
//! `b_j = diag(σ)·L·z_j`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::ad::{cholesky_corr_constrain, cholesky_corr_unconstrain, simplex_constrain, simplex_unconstrain, Dual, Real};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::likelihood::{Centering, LevelPolicy, Likelihood, ModelGrad, ModelParams};
use crate::model::spec::{BaselineSpec, ModelSpec};
use crate::predictor::CoefficientBlock;
use crate::sampler::LogDensity;
use crate::priors::{
    covariance_scales, log_dirichlet, log_gamma_density, lkj_corr_cholesky_log_density,
    CovariancePriorSpec, ScalarPrior,
};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, PartialEq)]
pub struct ReLayout {
    pub z: usize,
    pub levels: usize,
    pub dim: usize,
    pub tau: usize,
    pub simplex: usize,
    pub cpc: usize,
}

impl ReLayout {
    fn n_cov(&self) -> usize {
        1 + (self.dim - 1) + self.dim * (self.dim - 1) / 2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub p: usize,
    /// `(θ offset, length, log τ offset)` per TVE term.
    pub tve: Vec<(usize, usize, usize)>,
    pub aux: usize,
    pub n_aux: usize,
    pub re: Vec<ReLayout>,
    pub dim: usize,
}

impl Layout {
    pub fn new(spec: &ModelSpec) -> Self {
        let p = spec.n_covariates();
        let mut off = 1 + p;
        let mut tve = Vec::new();
        for t in &spec.tve {
            let l = t.n_coefs();
            tve.push((off, l, off + l));
            off += l + 1;
        }
        let n_aux = match &spec.baseline {
            BaselineSpec::Exponential | BaselineSpec::ExponentialAft => 0,
            BaselineSpec::Weibull | BaselineSpec::WeibullAft | BaselineSpec::Gompertz => 1,
            BaselineSpec::MSpline { spline } | BaselineSpec::BSpline { spline } => spline.n_basis() - 1,
        };
        let aux = off;
        off += n_aux;
        let mut re = Vec::new();
        for r in &spec.random_effects {
            let (j, d) = (r.levels.len(), r.dim());
            let z = off;
            let tau = z + j * d;
            let simplex = tau + 1;
            let cpc = simplex + d - 1;
            off = cpc + d * (d - 1) / 2;
            re.push(ReLayout {
                z,
                levels: j,
                dim: d,
                tau,
                simplex,
                cpc,
            });
        }
        Layout {
            p,
            tve,
            aux,
            n_aux,
            re,
            dim: off,
        }
    }
}

/// Non-centred random walk: `θ_1 = z_1`, `θ_m = θ_{m-1} + τ z_m`.
fn walk(z: &[f64], tau: f64) -> Vec<f64> {
    let mut acc = 0.0;
    z.iter()
        .enumerate()
        .map(|(m, v)| {
            acc += if m == 0 { *v } else { tau * v };
            acc
        })
        .collect()
}

/// `diag(σ)·L` and the covariance log prior (with Jacobian when requested)
/// from `(log τ, simplex, partial correlations)`.
fn re_block<R: Real>(v: &[R], d: usize, spec: &CovariancePriorSpec, jacobian: bool) -> (Vec<Vec<R>>, R) {
    let tau = v[0].exp();
    let (pi, lj_s) = simplex_constrain(&v[1..d]);
    let (l, lj_c) = cholesky_corr_constrain(&v[d..], d);
    let sigma = covariance_scales(&pi, tau);
    let m = (0..d)
        .map(|i| (0..d).map(|j| sigma[i] * l[i][j]).collect())
        .collect();
    let mut lp = log_gamma_density(tau, spec.shape, spec.scale)
        + log_dirichlet(&pi, &vec![spec.concentration; d])
        + lkj_corr_cholesky_log_density(&l, spec.regularization);
    if jacobian {
        lp = lp + v[0] + lj_s + lj_c;
    }
    (m, lp)
}

fn ms_block<R: Real>(y: &[R], concentration: f64, jacobian: bool) -> (Vec<R>, R) {
    let (c, lj) = simplex_constrain(y);
    let mut lp = log_dirichlet(&c, &vec![concentration; c.len()]);
    if jacobian {
        lp = lp + lj;
    }
    (c, lp)
}

fn seeded(v: &[f64], k: usize) -> Vec<Dual> {
    v.iter()
        .enumerate()
        .map(|(i, &x)| if i == k { Dual::var(x) } else { Dual::cst(x) })
        .collect()
}

fn scalar_prior(prior: &ScalarPrior, x: f64) -> (f64, f64) {
    prior.log_density_grad(x)
}

#[derive(Debug, Clone)]
pub struct Posterior {
    pub spec: ModelSpec,
    pub centering: Centering,
    pub layout: Layout,
    /// Include log-Jacobian terms of the constraining transforms (false for MAP).
    pub jacobian: bool,
    lik: Likelihood,
}

impl Posterior {
    pub fn new(spec: &ModelSpec, data: &Dataset) -> Result<Self> {
        let centering = Centering::from_data(spec, data);
        let lik = Likelihood::new(spec, data, &centering, LevelPolicy::Reject)?;
        Ok(Posterior {
            spec: spec.clone(),
            centering,
            layout: Layout::new(spec),
            jacobian: true,
            lik,
        })
    }

    pub fn dim(&self) -> usize {
        self.layout.dim
    }

    pub fn likelihood(&self) -> &Likelihood {
        &self.lik
    }

    pub fn log_density(&self, u: &[f64]) -> f64 {
        self.eval(u, None)
    }

    /// Log density with gradient; `-∞` (and an unspecified gradient) outside the support.
    pub fn log_density_grad(&self, u: &[f64], grad: &mut [f64]) -> f64 {
        self.eval(u, Some(grad))
    }

    fn re_matrices(&self, u: &[f64]) -> Vec<Vec<Vec<f64>>> {
        self.layout
            .re
            .iter()
            .map(|r| re_block(&u[r.tau..r.tau + r.n_cov()], r.dim, &self.spec.priors.covariance, false).0)
            .collect()
    }

    fn aux_natural(&self, u: &[f64]) -> Vec<f64> {
        let y = &u[self.layout.aux..self.layout.aux + self.layout.n_aux];
        match &self.spec.baseline {
            BaselineSpec::MSpline { .. } => simplex_constrain(y).0,
            BaselineSpec::BSpline { .. } => y.to_vec(),
            _ => y.iter().map(|v| v.exp()).collect(),
        }
    }

    /// Parameters on the internally centered scale used by the likelihood.
    pub fn model_params(&self, u: &[f64]) -> ModelParams {
        let lay = &self.layout;
        let ms = self.re_matrices(u);
        let random_effects = lay
            .re
            .iter()
            .zip(&ms)
            .map(|(r, m)| {
                (0..r.levels)
                    .map(|j| {
                        let z = &u[r.z + j * r.dim..r.z + (j + 1) * r.dim];
                        (0..r.dim).map(|a| (0..=a).map(|b| m[a][b] * z[b]).sum()).collect()
                    })
                    .collect()
            })
            .collect();
        ModelParams {
            coefs: CoefficientBlock {
                intercept: u[0] + self.centering.shift,
                beta_fixed: u[1..1 + lay.p].to_vec(),
                theta_tve: lay.tve.iter().map(|&(o, l, t)| walk(&u[o..o + l], u[t].exp())).collect(),
                random_effects,
            },
            aux: self.aux_natural(u),
        }
    }

    fn eval(&self, u: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
        let lay = &self.layout;
        let pr = &self.spec.priors;
        let want = grad.is_some();
        if let Some(g) = grad.as_deref_mut() {
            g.fill(0.0);
        }
        if u.len() != lay.dim || u.iter().any(|v| !v.is_finite()) {
            return f64::NEG_INFINITY;
        }
        let params = self.model_params(u);
        let mut mg = self.lik.zero_grad(lay.p);
        let mut lp = 0.0;
        if !self.spec.prior_only {
            let ll = if want {
                self.lik.log_lik_grad(&params, &mut mg)
            } else {
                self.lik.log_lik(&params)
            };
            match ll {
                Ok(v) if v.is_finite() => lp += v,
                _ => return f64::NEG_INFINITY,
            }
        }
        let mut g = vec![0.0; if want { lay.dim } else { 0 }];

        // intercept and coefficients
        let (v, d) = scalar_prior(&pr.intercept, u[0]);
        lp += v;
        if want {
            g[0] = mg.intercept + d;
        }
        for q in 0..lay.p {
            let (v, d) = scalar_prior(&pr.coefficient(&self.spec.covariate_names[q]), u[1 + q]);
            lp += v;
            if want {
                g[1 + q] = mg.beta[q] + d;
            }
        }

        // time-varying effects
        let mut th_off = 0;
        for (k, &(o, l, t)) in lay.tve.iter().enumerate() {
            let tau = u[t].exp();
            let z = &u[o..o + l];
            let (vs, ds) = scalar_prior(&pr.smooth, tau);
            // Without the Jacobian the density is taken over θ, which is τ^(l-1) times denser than z.
            let log_jac = if self.jacobian { u[t] } else { -((l - 1) as f64) * u[t] };
            lp += z.iter().map(|v| -LN_SQRT_2PI - 0.5 * v * v).sum::<f64>() + vs + log_jac;
            if want {
                let gt = &mg.theta[th_off..th_off + l];
                let theta = &params.coefs.theta_tve[k];
                let mut tail = 0.0;
                for m in (0..l).rev() {
                    tail += gt[m];
                    g[o + m] = if m == 0 { tail } else { tau * tail } - z[m];
                }
                let dlog_tau: f64 = (1..l).map(|m| gt[m] * (theta[m] - theta[0])).sum();
                g[t] = dlog_tau + ds * tau + if self.jacobian { 1.0 } else { -((l - 1) as f64) };
            }
            th_off += l;
        }

        // baseline auxiliary parameters
        let a = lay.aux;
        match &self.spec.baseline {
            BaselineSpec::Exponential | BaselineSpec::ExponentialAft => {}
            BaselineSpec::Weibull | BaselineSpec::WeibullAft | BaselineSpec::Gompertz => {
                let gamma = params.aux[0];
                let (v, d) = scalar_prior(&pr.aux, gamma);
                lp += v + if self.jacobian { u[a] } else { 0.0 };
                if want {
                    g[a] = (mg.aux[0] + d) * gamma + if self.jacobian { 1.0 } else { 0.0 };
                }
            }
            BaselineSpec::BSpline { .. } => {
                for k in 0..lay.n_aux {
                    let (v, d) = scalar_prior(&pr.bspline_coefficients, u[a + k]);
                    lp += v;
                    if want {
                        g[a + k] = mg.aux[k] + d;
                    }
                }
            }
            BaselineSpec::MSpline { .. } => {
                let y = &u[a..a + lay.n_aux];
                lp += ms_block(y, pr.mspline_concentration, self.jacobian).1;
                if want {
                    for k in 0..lay.n_aux {
                        let (c, v) = ms_block(&seeded(y, k), pr.mspline_concentration, self.jacobian);
                        g[a + k] = v.d + c.iter().zip(&mg.aux).map(|(c, gc)| c.d * gc).sum::<f64>();
                    }
                }
            }
        }

        // random effects
        for (t, r) in lay.re.iter().enumerate() {
            let d = r.dim;
            let cov = &u[r.tau..r.tau + r.n_cov()];
            let (m, v) = re_block(cov, d, &pr.covariance, self.jacobian);
            lp += v;
            let z = &u[r.z..r.z + r.levels * d];
            lp -= z.iter().map(|x| 0.5 * x * x + LN_SQRT_2PI).sum::<f64>();
            if want {
                let gb = &mg.re[t];
                let mut a_mat = vec![vec![0.0; d]; d];
                for j in 0..r.levels {
                    let zj = &z[j * d..(j + 1) * d];
                    let gbj = &gb[j * d..(j + 1) * d];
                    for e in 0..d {
                        // (Mᵀ gb_j)_e − z_je
                        let mt: f64 = (e..d).map(|a| m[a][e] * gbj[a]).sum();
                        g[r.z + j * d + e] = mt - zj[e];
                        for f in 0..d {
                            a_mat[e][f] += gbj[e] * zj[f];
                        }
                    }
                }
                for k in 0..cov.len() {
                    let (md, vd) = re_block(&seeded(cov, k), d, &pr.covariance, self.jacobian);
                    let mut s = vd.d;
                    for e in 0..d {
                        for f in 0..=e {
                            s += md[e][f].d * a_mat[e][f];
                        }
                    }
                    g[r.tau + k] = s;
                }
            }
        }

        if !lp.is_finite() {
            return f64::NEG_INFINITY;
        }
        if let Some(out) = grad {
            if g.iter().any(|v| !v.is_finite()) {
                return f64::NEG_INFINITY;
            }
            out.copy_from_slice(&g);
        }
        lp
    }

    /// Constrained draw in the order of [`ModelSpec::parameter_names`], with
    /// the intercept and coefficients on the natural covariate scale.
    pub fn constrain(&self, u: &[f64]) -> Vec<f64> {
        let lay = &self.layout;
        let params = self.model_params(u);
        let c = &params.coefs;
        let mut out = Vec::with_capacity(self.spec.parameter_names().len());
        let adj: f64 = c.beta_fixed.iter().zip(&self.centering.means).map(|(b, m)| b * m).sum();
        out.push(c.intercept - adj);
        out.extend(&c.beta_fixed);
        for (k, &(_, _, t)) in lay.tve.iter().enumerate() {
            out.extend(&c.theta_tve[k]);
            out.push(u[t].exp());
        }
        out.extend(&params.aux);
        for (t, r) in lay.re.iter().enumerate() {
            for b in &c.random_effects[t] {
                out.extend(b);
            }
            let cov = &u[r.tau..r.tau + r.n_cov()];
            let d = r.dim;
            let tau = cov[0].exp();
            let (pi, _) = simplex_constrain(&cov[1..d]);
            let (l, _) = cholesky_corr_constrain(&cov[d..], d);
            out.extend(covariance_scales(&pi, tau));
            for i in 0..d {
                for j in i + 1..d {
                    out.push((0..d).map(|k| l[i][k] * l[j][k]).sum());
                }
            }
        }
        out
    }

    /// Inverse of [`Posterior::constrain`].
    pub fn unconstrain(&self, named: &[f64]) -> Result<Vec<f64>> {
        let lay = &self.layout;
        if named.len() != self.spec.parameter_names().len() {
            return Err(Error::DimensionMismatch("named parameter vector".into()));
        }
        let mut u = vec![0.0; lay.dim];
        let p = lay.p;
        let beta = &named[1..1 + p];
        let adj: f64 = beta.iter().zip(&self.centering.means).map(|(b, m)| b * m).sum();
        u[0] = named[0] + adj - self.centering.shift;
        u[1..1 + p].copy_from_slice(beta);
        let mut k = 1 + p;
        for &(o, l, t) in &lay.tve {
            let theta = &named[k..k + l];
            u[t] = positive_ln(named[k + l])?;
            u[o] = theta[0];
            for m in 1..l {
                u[o + m] = (theta[m] - theta[m - 1]) / named[k + l];
            }
            k += l + 1;
        }
        let aux = &named[k..k + self.spec.baseline.n_aux()];
        k += aux.len();
        let a = lay.aux;
        match &self.spec.baseline {
            BaselineSpec::MSpline { .. } => {
                if aux.iter().any(|&c| !(c > 0.0)) || (aux.iter().sum::<f64>() - 1.0).abs() > 1e-10 {
                    return Err(Error::InvalidSimplex);
                }
                u[a..a + lay.n_aux].copy_from_slice(&simplex_unconstrain(aux));
            }
            BaselineSpec::BSpline { .. } => u[a..a + lay.n_aux].copy_from_slice(aux),
            _ => {
                for (i, &v) in aux.iter().enumerate() {
                    u[a + i] = positive_ln(v)?;
                }
            }
        }
        for r in &lay.re {
            let d = r.dim;
            let b = &named[k..k + r.levels * d];
            k += r.levels * d;
            let sd = &named[k..k + d];
            k += d;
            let mut omega = vec![vec![0.0; d]; d];
            for i in 0..d {
                omega[i][i] = 1.0;
                for j in i + 1..d {
                    omega[i][j] = named[k];
                    omega[j][i] = named[k];
                    k += 1;
                }
            }
            let l = cholesky(&omega).ok_or(Error::InvalidCholesky)?;
            let ss: f64 = sd.iter().map(|s| s * s).sum();
            if sd.iter().any(|&s| !(s > 0.0)) {
                return Err(Error::PriorOutOfSupport(sd.iter().copied().fold(f64::INFINITY, f64::min)));
            }
            let tau = (ss / d as f64).sqrt();
            let pi: Vec<f64> = sd.iter().map(|s| s * s / ss).collect();
            u[r.tau] = tau.ln();
            u[r.simplex..r.simplex + d - 1].copy_from_slice(&simplex_unconstrain(&pi));
            u[r.cpc..r.cpc + d * (d - 1) / 2].copy_from_slice(&cholesky_corr_unconstrain(&l));
            for j in 0..r.levels {
                let bj = &b[j * d..(j + 1) * d];
                // forward substitution with diag(σ)·L
                let mut z = vec![0.0; d];
                for e in 0..d {
                    let s: f64 = (0..e).map(|f| sd[e] * l[e][f] * z[f]).sum();
                    z[e] = (bj[e] - s) / (sd[e] * l[e][e]);
                }
                u[r.z + j * d..r.z + (j + 1) * d].copy_from_slice(&z);
            }
        }
        Ok(u)
    }

    /// `b̃ ~ N(0, Σ_b)` for every random-effect term, concatenated.
    pub fn new_cluster_draw<G: Rng + ?Sized>(&self, u: &[f64], rng: &mut G) -> Vec<f64> {
        let mut out = Vec::new();
        for m in self.re_matrices(u) {
            let eps: Vec<f64> = (0..m.len()).map(|_| rng.sample(StandardNormal)).collect();
            out.extend((0..m.len()).map(|a| (0..=a).map(|b| m[a][b] * eps[b]).sum::<f64>()));
        }
        out
    }

    /// Copy of the likelihood gradient at natural parameters, for diagnostics.
    pub fn likelihood_grad(&self, params: &ModelParams) -> Result<(f64, ModelGrad)> {
        let mut g = self.lik.zero_grad(self.layout.p);
        let v = self.lik.log_lik_grad(params, &mut g)?;
        Ok((v, g))
    }
}

impl LogDensity for Posterior {
    fn dim(&self) -> usize {
        self.layout.dim
    }

    fn log_density_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        Posterior::log_density_grad(self, x, grad)
    }

    fn generated(&self, x: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.new_cluster_draw(x, rng)
    }
}

fn positive_ln(v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v.ln())
    } else {
        Err(Error::PriorOutOfSupport(v))
    }
}

/// Lower Cholesky factor of a symmetric positive-definite matrix.
pub fn cholesky(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let v = a[i][i] - s;
                if !(v > 0.0) {
                    return None;
                }
                l[i][i] = v.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    Some(l)
}

/// Natural-scale parameters from a constrained draw row. Random-effect levels
/// are followed by `new_cluster` (one vector per term) when given.
pub fn params_from_draw(spec: &ModelSpec, row: &[f64], new_cluster: Option<&[f64]>) -> ModelParams {
    let p = spec.n_covariates();
    let mut k = 1 + p;
    let mut theta = Vec::new();
    for t in &spec.tve {
        let l = t.n_coefs();
        theta.push(row[k..k + l].to_vec());
        k += l + 1;
    }
    let n_aux = spec.baseline.n_aux();
    let aux = row[k..k + n_aux].to_vec();
    k += n_aux;
    let mut re = Vec::new();
    let mut nk = 0;
    for r in &spec.random_effects {
        let d = r.dim();
        let mut levels: Vec<Vec<f64>> = (0..r.levels.len()).map(|j| row[k + j * d..k + (j + 1) * d].to_vec()).collect();
        k += r.levels.len() * d + d + d * (d - 1) / 2;
        if let Some(nc) = new_cluster {
            levels.push(nc[nk..nk + d].to_vec());
        }
        nk += d;
        re.push(levels);
    }
    ModelParams {
        coefs: CoefficientBlock {
            intercept: row[0],
            beta_fixed: row[1..1 + p].to_vec(),
            theta_tve: theta,
            random_effects: re,
        },
        aux,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{CensoringStatus, SurvivalRecord};
    use crate::model::spec::{RandomEffectSpec, ReTerm};
    use crate::predictor::{TveForm, TveSpec};
    use crate::spline::{BasisKind, KnotVector, SplineConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn data() -> Dataset {
        let rows = [
            (0.0, 1.2, None, 1, 0.5, 1.0, "a"),
            (0.5, 3.7, None, 1, -0.3, 0.0, "b"),
            (0.0, 2.5, None, 0, 1.2, 1.0, "c"),
            (0.2, 0.9, None, 2, 0.1, 0.0, "a"),
            (0.0, 2.0, Some(6.1), 3, -1.0, 1.0, "b"),
            (1.0, 7.5, None, 1, 0.7, 0.0, "c"),
            (0.0, 9.0, None, 0, 0.0, 1.0, "a"),
            (0.0, 4.4, None, 1, 0.3, 0.0, "b"),
        ];
        let recs = rows
            .iter()
            .map(|&(e, t, u, s, x, trt, site)| SurvivalRecord {
                entry_time: e,
                time: t,
                upper_time: u,
                status: CensoringStatus::from_code(s).unwrap(),
                covariates: vec![x, trt],
                cluster_labels: vec![Some(site.to_string())],
                id: None,
            })
            .collect();
        Dataset::new(recs, vec!["x".into(), "trt".into()], vec!["site".into()]).unwrap()
    }

    fn spec(base: BaselineSpec, tve: bool, re_dim: usize) -> ModelSpec {
        let mut s = ModelSpec::new(base, vec!["x".into(), "trt".into()]);
        if tve {
            s.tve.push(TveSpec {
                covariate_index: 1,
                form: TveForm::BsplineSmooth,
                spline: SplineConfig {
                    degree: 3,
                    knots: KnotVector::new(0.0, vec![3.0], 10.0).unwrap(),
                    basis_kind: BasisKind::BSpline,
                },
            });
        }
        if re_dim > 0 {
            s.random_effects.push(RandomEffectSpec {
                factor: "site".into(),
                terms: [ReTerm::Intercept, ReTerm::Slope(1), ReTerm::Slope(0)][..re_dim].to_vec(),
                levels: vec!["a".into(), "b".into(), "c".into()],
            });
        }
        s
    }

    fn ms() -> BaselineSpec {
        BaselineSpec::MSpline {
            spline: SplineConfig {
                degree: 3,
                knots: KnotVector::new(0.0, vec![2.0, 5.0], 10.0).unwrap(),
                basis_kind: BasisKind::MSpline,
            },
        }
    }

    fn check_gradient(post: &Posterior, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = post.dim();
        let u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut g = vec![0.0; n];
        let v = post.log_density_grad(&u, &mut g);
        assert!(v.is_finite());
        assert!((v - post.log_density(&u)).abs() < 1e-12 * v.abs().max(1.0));
        for k in 0..n {
            let h = 1e-5 * u[k].abs().max(1.0);
            let mut a = u.clone();
            let mut b = u.clone();
            a[k] += h;
            b[k] -= h;
            let fd = (post.log_density(&a) - post.log_density(&b)) / (2.0 * h);
            assert!((fd - g[k]).abs() <= 1e-5 * fd.abs().max(1.0), "component {k}: {} vs {fd}", g[k]);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for base in [BaselineSpec::Weibull, ms(), BaselineSpec::WeibullAft, BaselineSpec::Gompertz] {
            for (tve, re) in [(false, 0), (true, 1), (false, 2), (true, 3)] {
                let post = Posterior::new(&spec(base.clone(), tve, re), &data()).unwrap();
                check_gradient(&post, 7);
            }
        }
    }

    #[test]
    fn map_mode_gradient() {
        let mut post = Posterior::new(&spec(ms(), true, 2), &data()).unwrap();
        post.jacobian = false;
        check_gradient(&post, 11);
    }

    #[test]
    fn map_density_is_the_random_walk_over_theta() {
        let mut s = spec(BaselineSpec::Weibull, true, 0);
        s.prior_only = true;
        let mut post = Posterior::new(&s, &data()).unwrap();
        post.jacobian = false;
        let (o, l, t) = post.layout.tve[0];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u: Vec<f64> = (0..post.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut w = u.clone();
        for v in &mut w[o..o + l] {
            *v = rng.random_range(-1.0..1.0);
        }
        let tau = u[t].exp();
        let rw = |x: &[f64]| crate::priors::log_prior_random_walk(&walk(&x[o..o + l], tau), tau);
        let diff = post.log_density(&w) - post.log_density(&u);
        assert!((diff - (rw(&w) - rw(&u))).abs() < 1e-12);
    }

    #[test]
    fn round_trip() {
        for (base, tve, re) in [(ms(), true, 3), (BaselineSpec::Weibull, false, 1), (BaselineSpec::BSpline {
            spline: SplineConfig {
                degree: 2,
                knots: KnotVector::new(0.0, vec![4.0], 10.0).unwrap(),
                basis_kind: BasisKind::BSpline,
            },
        }, true, 2)] {
            let post = Posterior::new(&spec(base, tve, re), &data()).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let u: Vec<f64> = (0..post.dim()).map(|_| rng.random_range(-1.5..1.5)).collect();
            let named = post.constrain(&u);
            assert_eq!(named.len(), post.spec.parameter_names().len());
            let back = post.unconstrain(&named).unwrap();
            for (a, b) in u.iter().zip(&back) {
                assert!((a - b).abs() < 1e-10, "{a} vs {b}");
            }
            let again = post.constrain(&back);
            for (a, b) in named.iter().zip(&again) {
                assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
            }
        }
    }

    #[test]
    fn natural_and_centered_likelihoods_agree() {
        let s = spec(BaselineSpec::Weibull, true, 2);
        let post = Posterior::new(&s, &data()).unwrap();
        let u: Vec<f64> = (0..post.dim()).map(|k| 0.1 * (k as f64).sin()).collect();
        let centered = post.likelihood().log_lik(&post.model_params(&u)).unwrap();
        let natural_lik = Likelihood::new(&s, &data(), &Centering::none(2), LevelPolicy::Reject).unwrap();
        let natural = natural_lik.log_lik(&params_from_draw(&s, &post.constrain(&u), None)).unwrap();
        assert!((centered - natural).abs() < 1e-10 * centered.abs());
    }

    #[test]
    fn prior_only_drops_likelihood() {
        let mut s = spec(BaselineSpec::Weibull, false, 1);
        let post = Posterior::new(&s, &data()).unwrap();
        let u = vec![0.2; post.dim()];
        let ll = post.likelihood().log_lik(&post.model_params(&u)).unwrap();
        s.prior_only = true;
        let prior = Posterior::new(&s, &data()).unwrap();
        assert!((post.log_density(&u) - prior.log_density(&u) - ll).abs() < 1e-10);
        let empty = Dataset::new(vec![], vec!["x".into(), "trt".into()], vec!["site".into()]).unwrap();
        let e = Posterior::new(&s, &empty).unwrap();
        assert!((e.log_density(&u) - prior.log_density(&u)).abs() < 1e-12);
    }
}
