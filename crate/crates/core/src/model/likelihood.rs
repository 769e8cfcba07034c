//! Censored-data log likelihood with analytic gradients.
//!
//! Each record contributes through four quantities: `log h(T)` for events and
//! the cumulative hazards at `T`, `T^U` and `T^E`. Basis rows at every
//! evaluation point (including quadrature nodes) are computed once at
//! construction, so an evaluation touches only dot products and exponentials.

use std::collections::HashMap;

use crate::baseline::{gompertz_cum_h0, log1m_exp_neg};
use crate::data::{CensoringStatus, Dataset, SurvivalRecord};
use crate::error::{Error, Result};
use crate::model::spec::{BaselineSpec, ModelSpec, ReTerm};
use crate::predictor::{CoefficientBlock, LinearPredictor, TveBasis};
use crate::priors::{crude_event_rate, intercept_shift};
use crate::quadrature::{make_rule, NodePlan};
use crate::spline::SplineBasis;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kernel {
    Exp,
    Weibull,
    Gompertz,
    MSpline,
    BSpline,
    ExpAft,
    WeibullAft,
}

impl Kernel {
    fn aft(self) -> bool {
        matches!(self, Kernel::ExpAft | Kernel::WeibullAft)
    }
}

/// Covariate means and intercept shift applied during estimation.
#[derive(Debug, Clone, PartialEq)]
pub struct Centering {
    pub means: Vec<f64>,
    pub shift: f64,
}

impl Centering {
    pub fn none(p: usize) -> Self {
        Centering {
            means: vec![0.0; p],
            shift: 0.0,
        }
    }

    /// Means of covariates without a time-varying effect, and the log crude
    /// event rate (negated for AFT models).
    pub fn from_data(spec: &ModelSpec, data: &Dataset) -> Self {
        let p = spec.n_covariates();
        let mut means = vec![0.0; p];
        if !data.is_empty() {
            for r in &data.records {
                for (m, x) in means.iter_mut().zip(&r.covariates) {
                    *m += x;
                }
            }
            for (q, m) in means.iter_mut().enumerate() {
                *m = if spec.is_tve(q) { 0.0 } else { *m / data.len() as f64 };
            }
        }
        let (e, t) = crude_event_rate(data);
        Centering {
            means,
            shift: intercept_shift(e, t, spec.baseline.is_aft()),
        }
    }
}

/// Treatment of cluster labels missing from the fitted levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LevelPolicy {
    Reject,
    /// Map to an extra level with index equal to the number of fitted levels.
    NewLevel,
}

/// Natural-scale parameters: linear predictor coefficients plus the baseline's
/// auxiliary vector (`[γ]`, simplex or B-spline coefficients).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelParams {
    pub coefs: CoefficientBlock,
    pub aux: Vec<f64>,
}

/// Gradient with the layout of [`ModelParams`]; TVE coefficients are flattened
/// and random effects are stored `[level·D + d]` per term.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrad {
    pub intercept: f64,
    pub beta: Vec<f64>,
    pub theta: Vec<f64>,
    pub aux: Vec<f64>,
    pub re: Vec<Vec<f64>>,
}

impl ModelGrad {
    fn reset(&mut self) {
        self.intercept = 0.0;
        for v in self
            .beta
            .iter_mut()
            .chain(self.theta.iter_mut())
            .chain(self.aux.iter_mut())
            .chain(self.re.iter_mut().flatten())
        {
            *v = 0.0;
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Point {
    t: f64,
    log_t: f64,
    w: f64,
}

#[derive(Debug, Clone, Copy)]
enum Cum {
    None,
    Closed(usize),
    Quad(usize, usize),
}

#[derive(Debug, Clone)]
struct Rec {
    status: CensoringStatus,
    x: Vec<f64>,
    levels: Vec<usize>,
    z: Vec<Vec<f64>>,
    haz: Option<usize>,
    cum: [Cum; 3],
}

#[derive(Default)]
struct Workspace {
    dth: [Vec<f64>; 4],
    daux: [Vec<f64>; 4],
    dlam: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Likelihood {
    kernel: Kernel,
    quadrature: bool,
    n_base: usize,
    n_theta: usize,
    n_aux: usize,
    re_dims: Vec<usize>,
    re_levels: Vec<usize>,
    points: Vec<Point>,
    base: Vec<f64>,
    tve: Vec<f64>,
    recs: Vec<Rec>,
}

struct Builder<'a> {
    kernel: Kernel,
    basis: Option<SplineBasis>,
    tve: &'a [(usize, TveBasis)],
    n_base: usize,
    breakpoints: Vec<f64>,
    singular_origin: bool,
    rule: crate::quadrature::QuadratureRule,
    quadrature: bool,
    points: Vec<Point>,
    base: Vec<f64>,
    tvev: Vec<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Role {
    Hazard,
    Integral,
    Node,
}

impl Builder<'_> {
    fn point(&mut self, t: f64, w: f64, role: Role, x: &[f64]) -> Result<usize> {
        match (&self.basis, self.kernel) {
            (Some(b), Kernel::MSpline) => {
                if t > b.upper() + 1e-12 {
                    return Err(Error::OutOfSupport(t));
                }
                if t < b.lower() {
                    self.base.extend(std::iter::repeat_n(0.0, self.n_base));
                } else if role == Role::Integral {
                    self.base.extend(b.ispline(t)?);
                } else {
                    self.base.extend(b.mspline(t)?);
                }
            }
            (Some(b), Kernel::BSpline) => {
                let row = b.bspline(t.max(b.lower()))?;
                self.base.extend(&row[1..]);
            }
            _ => {}
        }
        for (p, basis) in self.tve {
            let row = basis.row(t)?;
            self.tvev.extend(row.iter().map(|v| v * x[*p]));
        }
        self.points.push(Point { t, log_t: t.ln(), w });
        Ok(self.points.len() - 1)
    }

    fn cum(&mut self, t: f64, x: &[f64]) -> Result<Cum> {
        if !self.quadrature {
            return Ok(Cum::Closed(self.point(t, 1.0, Role::Integral, x)?));
        }
        let plan = NodePlan::new(&self.rule, t, &self.breakpoints, self.singular_origin);
        let start = self.points.len();
        for (&tn, &w) in plan.times.iter().zip(&plan.weights) {
            self.point(tn, w, Role::Node, x)?;
        }
        Ok(Cum::Quad(start, self.points.len()))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(out: &mut [f64], a: f64, x: &[f64]) {
    for (o, v) in out.iter_mut().zip(x) {
        *o += a * v;
    }
}

/// `1 / expm1(x)`, zero at infinity.
fn inv_expm1(x: f64) -> f64 {
    if x > 700.0 {
        0.0
    } else {
        1.0 / x.exp_m1()
    }
}

impl Likelihood {
    pub fn new(spec: &ModelSpec, data: &Dataset, centering: &Centering, policy: LevelPolicy) -> Result<Self> {
        spec.validate()?;
        let p = spec.n_covariates();
        if data.covariate_names.len() != p && !data.is_empty() {
            return Err(Error::DimensionMismatch(format!(
                "data has {} covariates, model {p}",
                data.covariate_names.len()
            )));
        }
        for (a, b) in spec.covariate_names.iter().zip(&data.covariate_names) {
            if a != b {
                return Err(Error::DimensionMismatch(format!("covariate `{b}` where the model expects `{a}`")));
            }
        }
        let kernel = match spec.baseline {
            BaselineSpec::Exponential => Kernel::Exp,
            BaselineSpec::Weibull => Kernel::Weibull,
            BaselineSpec::Gompertz => Kernel::Gompertz,
            BaselineSpec::MSpline { .. } => Kernel::MSpline,
            BaselineSpec::BSpline { .. } => Kernel::BSpline,
            BaselineSpec::ExponentialAft => Kernel::ExpAft,
            BaselineSpec::WeibullAft => Kernel::WeibullAft,
        };
        let basis = spec.baseline.spline().map(SplineBasis::from_config).transpose()?;
        let lp = LinearPredictor::new(p, &spec.tve)?;
        let n_base = match kernel {
            Kernel::MSpline => basis.as_ref().map_or(0, |b| b.n_basis()),
            Kernel::BSpline => basis.as_ref().map_or(0, |b| b.n_basis() - 1),
            _ => 0,
        };
        let n_theta = lp.tve.iter().map(|(_, b)| b.n_coefs()).sum();
        let mut breakpoints = Vec::new();
        if let Some(b) = &basis {
            breakpoints.push(b.lower());
            breakpoints.extend(&b.knots().internal);
        }
        for (_, b) in &lp.tve {
            breakpoints.extend(b.breakpoints());
        }

        let mut level_maps = Vec::new();
        for re in &spec.random_effects {
            let f = data
                .factor_index(&re.factor)
                .ok_or_else(|| Error::MissingColumn(re.factor.clone()))?;
            let map: HashMap<&str, usize> = re.levels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
            level_maps.push((f, map, re.levels.len()));
        }

        let mut b = Builder {
            kernel,
            basis,
            tve: &lp.tve,
            n_base,
            breakpoints,
            singular_origin: kernel == Kernel::Weibull,
            rule: make_rule(spec.qnodes)?,
            quadrature: spec.uses_quadrature(),
            points: Vec::new(),
            base: Vec::new(),
            tvev: Vec::new(),
        };
        let mut recs = Vec::with_capacity(data.len());
        for (row, r) in data.records.iter().enumerate() {
            recs.push(Self::build_record(spec, &mut b, r, centering, &level_maps, policy).map_err(|e| match e {
                Error::OutOfSupport(_) | Error::InvalidModel(_) => Error::InvariantViolation {
                    row,
                    reason: e.to_string(),
                },
                e => e,
            })?);
        }
        Ok(Likelihood {
            kernel,
            quadrature: b.quadrature,
            n_base,
            n_theta,
            n_aux: spec.baseline.n_aux(),
            re_dims: spec.random_effects.iter().map(|r| r.dim()).collect(),
            re_levels: spec
                .random_effects
                .iter()
                .map(|r| r.levels.len() + usize::from(policy == LevelPolicy::NewLevel))
                .collect(),
            points: b.points,
            base: b.base,
            tve: b.tvev,
            recs,
        })
    }

    fn build_record(
        spec: &ModelSpec,
        b: &mut Builder,
        r: &SurvivalRecord,
        centering: &Centering,
        level_maps: &[(usize, HashMap<&str, usize>, usize)],
        policy: LevelPolicy,
    ) -> Result<Rec> {
        let x = &r.covariates;
        let mut levels = Vec::new();
        let mut z = Vec::new();
        for (re, (f, map, n)) in spec.random_effects.iter().zip(level_maps) {
            let label = r.cluster_labels.get(*f).and_then(|l| l.as_deref());
            let idx = match (label.and_then(|l| map.get(l)), policy) {
                (Some(&i), _) => i,
                (None, LevelPolicy::NewLevel) => *n,
                (None, LevelPolicy::Reject) => {
                    return Err(Error::InvalidModel(format!(
                        "level {:?} of `{}` was not seen at fit time",
                        label.unwrap_or(""),
                        re.factor
                    )))
                }
            };
            levels.push(idx);
            z.push(
                re.terms
                    .iter()
                    .map(|t| match t {
                        ReTerm::Intercept => 1.0,
                        ReTerm::Slope(q) => x[*q],
                    })
                    .collect(),
            );
        }
        let haz = if r.status == CensoringStatus::Event {
            Some(b.point(r.time, 1.0, Role::Hazard, x)?)
        } else {
            None
        };
        let cum_t = b.cum(r.time, x)?;
        let cum_u = match r.upper_time {
            Some(u) if r.status == CensoringStatus::IntervalCensored => b.cum(u, x)?,
            _ => Cum::None,
        };
        let cum_e = if r.entry_time > 0.0 { b.cum(r.entry_time, x)? } else { Cum::None };
        Ok(Rec {
            status: r.status,
            x: x.iter().zip(&centering.means).map(|(v, m)| v - m).collect(),
            levels,
            z,
            haz,
            cum: [cum_t, cum_u, cum_e],
        })
    }

    pub fn len(&self) -> usize {
        self.recs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.recs.is_empty()
    }

    pub fn uses_quadrature(&self) -> bool {
        self.quadrature
    }

    /// Total number of quadrature or closed-form evaluation points.
    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    pub fn zero_grad(&self, n_covariates: usize) -> ModelGrad {
        ModelGrad {
            intercept: 0.0,
            beta: vec![0.0; n_covariates],
            theta: vec![0.0; self.n_theta],
            aux: vec![0.0; self.n_aux],
            re: self
                .re_dims
                .iter()
                .zip(&self.re_levels)
                .map(|(d, j)| vec![0.0; d * j])
                .collect(),
        }
    }

    fn check_params(&self, p: &ModelParams) -> Result<()> {
        let c = &p.coefs;
        let theta: usize = c.theta_tve.iter().map(Vec::len).sum();
        let re_ok = c.random_effects.len() == self.re_dims.len()
            && c.random_effects
                .iter()
                .zip(self.re_dims.iter().zip(&self.re_levels))
                .all(|(lv, (d, j))| lv.len() >= *j && lv.iter().all(|b| b.len() == *d));
        if theta != self.n_theta || p.aux.len() != self.n_aux || !re_ok {
            return Err(Error::DimensionMismatch("parameters do not match the model".into()));
        }
        if let Some(r) = self.recs.first() {
            if c.beta_fixed.len() != r.x.len() {
                return Err(Error::DimensionMismatch("coefficient count".into()));
            }
        }
        Ok(())
    }

    fn workspace(&self) -> Workspace {
        let mk = |n| std::array::from_fn(|_| vec![0.0; n]);
        Workspace {
            dth: mk(self.n_theta),
            daux: mk(self.n_aux),
            dlam: vec![0.0; self.n_theta],
        }
    }

    /// Sum of record log likelihoods; `-∞` when any record is not finite.
    pub fn log_lik(&self, p: &ModelParams) -> Result<f64> {
        self.check_params(p)?;
        let theta: Vec<f64> = p.coefs.theta_tve.concat();
        let mut ws = self.workspace();
        let mut total = 0.0;
        for i in 0..self.recs.len() {
            total += self.eval(i, p, &theta, &mut ws, None);
        }
        Ok(if total.is_nan() { f64::NEG_INFINITY } else { total })
    }

    /// Log likelihood and its gradient (overwritten into `g`).
    pub fn log_lik_grad(&self, p: &ModelParams, g: &mut ModelGrad) -> Result<f64> {
        self.check_params(p)?;
        g.reset();
        let theta: Vec<f64> = p.coefs.theta_tve.concat();
        let mut ws = self.workspace();
        let mut total = 0.0;
        for i in 0..self.recs.len() {
            total += self.eval(i, p, &theta, &mut ws, Some(g));
        }
        Ok(if total.is_nan() { f64::NEG_INFINITY } else { total })
    }

    pub fn pointwise(&self, p: &ModelParams) -> Result<Vec<f64>> {
        self.check_params(p)?;
        let theta: Vec<f64> = p.coefs.theta_tve.concat();
        let mut ws = self.workspace();
        Ok((0..self.recs.len())
            .map(|i| self.eval(i, p, &theta, &mut ws, None))
            .collect())
    }

    /// Log likelihood of one record, with a diagnostic error when not finite.
    pub fn record_log_lik(&self, i: usize, p: &ModelParams) -> Result<f64> {
        self.check_params(p)?;
        let theta: Vec<f64> = p.coefs.theta_tve.concat();
        let v = self.eval(i, p, &theta, &mut self.workspace(), None);
        if !v.is_finite() {
            return Err(Error::NonFiniteLogLik {
                record: i,
                detail: format!("status {:?} evaluates to {v}", self.recs[i].status),
            });
        }
        Ok(v)
    }

    fn eta_const(&self, r: &Rec, p: &ModelParams) -> f64 {
        let c = &p.coefs;
        let mut eta = c.intercept + dot(&c.beta_fixed, &r.x);
        for ((lv, &j), z) in c.random_effects.iter().zip(&r.levels).zip(&r.z) {
            eta += dot(&lv[j], z);
        }
        eta
    }

    fn base_row(&self, i: usize) -> &[f64] {
        &self.base[i * self.n_base..(i + 1) * self.n_base]
    }

    fn tve_row(&self, i: usize) -> &[f64] {
        &self.tve[i * self.n_theta..(i + 1) * self.n_theta]
    }

    /// `(H, ∂H/∂η, Λ)` with `∂H/∂θ` and `∂H/∂aux` written when `want`.
    #[allow(clippy::too_many_arguments)]
    fn cum(
        &self,
        c: Cum,
        eta: f64,
        p: &ModelParams,
        theta: &[f64],
        want: bool,
        dth: &mut [f64],
        daux: &mut [f64],
        dlam: Option<&mut Vec<f64>>,
    ) -> (f64, f64, f64) {
        if want {
            dth.fill(0.0);
            daux.fill(0.0);
        }
        let gamma = p.aux.first().copied().unwrap_or(1.0);
        match c {
            Cum::None => (0.0, 0.0, f64::NAN),
            Cum::Closed(i) => {
                let pt = self.points[i];
                match self.kernel {
                    Kernel::ExpAft => {
                        let h = (pt.log_t - eta).exp();
                        (h, -h, f64::NAN)
                    }
                    Kernel::WeibullAft => {
                        let a = pt.log_t - eta;
                        let h = (gamma * a).exp();
                        if want {
                            daux[0] = h * a;
                        }
                        (h, -gamma * h, f64::NAN)
                    }
                    _ => {
                        let e = eta.exp();
                        let h0 = match self.kernel {
                            Kernel::Exp => pt.t,
                            Kernel::Weibull => {
                                let h0 = (gamma * pt.log_t).exp();
                                if want {
                                    daux[0] = e * h0 * pt.log_t;
                                }
                                h0
                            }
                            Kernel::Gompertz => {
                                let (h0, d) = gompertz_cum_h0(gamma, pt.t);
                                if want {
                                    daux[0] = e * d;
                                }
                                h0
                            }
                            Kernel::MSpline => {
                                let row = self.base_row(i);
                                if want {
                                    axpy(daux, e, row);
                                }
                                dot(&p.aux, row)
                            }
                            _ => unreachable!("no closed form"),
                        };
                        let h = h0 * e;
                        (h, h, f64::NAN)
                    }
                }
            }
            Cum::Quad(a, b) => {
                if self.kernel.aft() {
                    let mut lam = 0.0;
                    for i in a..b {
                        let pt = self.points[i];
                        let row = self.tve_row(i);
                        let v = pt.w * (-(eta + dot(theta, row))).exp();
                        lam += v;
                        if want {
                            axpy(dth, -v, row);
                        }
                    }
                    // keep ∂Λ/∂θ at T for the hazard term
                    if let (true, Some(dl)) = (want, dlam) {
                        dl.copy_from_slice(dth);
                    }
                    let (h, fprime) = match self.kernel {
                        Kernel::ExpAft => (lam, 1.0),
                        _ => {
                            let h = lam.powf(gamma);
                            (h, gamma * h / lam)
                        }
                    };
                    if want {
                        for v in dth.iter_mut() {
                            *v *= fprime;
                        }
                        if self.kernel == Kernel::WeibullAft {
                            daux[0] = h * lam.ln();
                        }
                    }
                    (h, -fprime * lam, lam)
                } else {
                    let e_c = eta.exp();
                    let mut h = 0.0;
                    let lg = gamma.ln();
                    for i in a..b {
                        let pt = self.points[i];
                        let row = self.tve_row(i);
                        let e = e_c * dot(theta, row).exp();
                        let h0 = match self.kernel {
                            Kernel::Exp => 1.0,
                            Kernel::Weibull => (lg + (gamma - 1.0) * pt.log_t).exp(),
                            Kernel::Gompertz => (gamma * pt.t).exp(),
                            Kernel::MSpline => dot(&p.aux, self.base_row(i)),
                            Kernel::BSpline => dot(&p.aux, self.base_row(i)).exp(),
                            _ => unreachable!(),
                        };
                        let v = pt.w * h0 * e;
                        h += v;
                        if want {
                            axpy(dth, v, row);
                            match self.kernel {
                                Kernel::Weibull => daux[0] += v * (1.0 / gamma + pt.log_t),
                                Kernel::Gompertz => daux[0] += v * pt.t,
                                Kernel::MSpline => axpy(daux, pt.w * e, self.base_row(i)),
                                Kernel::BSpline => axpy(daux, v, self.base_row(i)),
                                _ => {}
                            }
                        }
                    }
                    (h, h, f64::NAN)
                }
            }
        }
    }

    /// `(log h(T), ∂/∂η)` with θ and aux partials written when `want`.
    #[allow(clippy::too_many_arguments)]
    fn log_haz(
        &self,
        i: usize,
        eta: f64,
        p: &ModelParams,
        theta: &[f64],
        lam: f64,
        dlam: &[f64],
        want: bool,
        dth: &mut [f64],
        daux: &mut [f64],
    ) -> (f64, f64) {
        let pt = self.points[i];
        let row = self.tve_row(i);
        let gamma = p.aux.first().copied().unwrap_or(1.0);
        let eta_t = eta + dot(theta, row);
        if want {
            dth.fill(0.0);
            daux.fill(0.0);
        }
        match self.kernel {
            Kernel::ExpAft => {
                if want {
                    axpy(dth, -1.0, row);
                }
                (-eta_t, -1.0)
            }
            Kernel::WeibullAft if !self.quadrature => {
                if want {
                    daux[0] = 1.0 / gamma + pt.log_t - eta;
                }
                (gamma.ln() + (gamma - 1.0) * pt.log_t - gamma * eta, -gamma)
            }
            Kernel::WeibullAft => {
                let g1 = (gamma - 1.0) / lam;
                if want {
                    axpy(dth, -1.0, row);
                    axpy(dth, g1, dlam);
                    daux[0] = 1.0 / gamma + lam.ln();
                }
                (-eta_t + gamma.ln() + (gamma - 1.0) * lam.ln(), -gamma)
            }
            _ => {
                let lh0 = match self.kernel {
                    Kernel::Exp => 0.0,
                    Kernel::Weibull => {
                        if want {
                            daux[0] = 1.0 / gamma + pt.log_t;
                        }
                        gamma.ln() + (gamma - 1.0) * pt.log_t
                    }
                    Kernel::Gompertz => {
                        if want {
                            daux[0] = pt.t;
                        }
                        gamma * pt.t
                    }
                    Kernel::MSpline => {
                        let m = self.base_row(i);
                        let s = dot(&p.aux, m);
                        if want {
                            axpy(daux, 1.0 / s, m);
                        }
                        s.ln()
                    }
                    Kernel::BSpline => {
                        let b = self.base_row(i);
                        if want {
                            daux.copy_from_slice(b);
                        }
                        dot(&p.aux, b)
                    }
                    _ => unreachable!(),
                };
                if want {
                    dth.copy_from_slice(row);
                }
                (lh0 + eta_t, 1.0)
            }
        }
    }

    fn eval(&self, idx: usize, p: &ModelParams, theta: &[f64], ws: &mut Workspace, g: Option<&mut ModelGrad>) -> f64 {
        let r = &self.recs[idx];
        let want = g.is_some();
        let eta = self.eta_const(r, p);
        let mut hv = [0.0; 3];
        let mut dh = [0.0; 3];
        let mut lam_t = f64::NAN;
        for k in 0..3 {
            let dlam = if k == 0 { Some(&mut ws.dlam) } else { None };
            let (h, d, lam) = self.cum(r.cum[k], eta, p, theta, want, &mut ws.dth[k], &mut ws.daux[k], dlam);
            hv[k] = h;
            dh[k] = d;
            if k == 0 {
                lam_t = lam;
            }
        }
        let (mut lh, mut dlh) = (0.0, 0.0);
        if let Some(hi) = r.haz {
            let [.., d3] = &mut ws.dth;
            let [.., a3] = &mut ws.daux;
            (lh, dlh) = self.log_haz(hi, eta, p, theta, lam_t, &ws.dlam, want, d3, a3);
        }
        let mut m = [0.0, 0.0, 1.0];
        let mut m_h = 0.0;
        let mut ll = match r.status {
            CensoringStatus::RightCensored => {
                m[0] = -1.0;
                -hv[0]
            }
            CensoringStatus::Event => {
                m[0] = -1.0;
                m_h = 1.0;
                lh - hv[0]
            }
            CensoringStatus::LeftCensored => {
                m[0] = inv_expm1(hv[0]);
                log1m_exp_neg(hv[0])
            }
            CensoringStatus::IntervalCensored => {
                let delta = hv[1] - hv[0];
                let q = inv_expm1(delta);
                m[0] = -1.0 - q;
                m[1] = q;
                if delta > 0.0 {
                    -hv[0] + log1m_exp_neg(delta)
                } else {
                    f64::NEG_INFINITY
                }
            }
        };
        ll += hv[2];
        if let Some(g) = g {
            if !ll.is_finite() {
                return ll;
            }
            let mut g_eta = m_h * dlh;
            for k in 0..3 {
                if m[k] != 0.0 && !matches!(r.cum[k], Cum::None) {
                    g_eta += m[k] * dh[k];
                    axpy(&mut g.theta, m[k], &ws.dth[k]);
                    axpy(&mut g.aux, m[k], &ws.daux[k]);
                }
            }
            if m_h != 0.0 {
                axpy(&mut g.theta, m_h, &ws.dth[3]);
                axpy(&mut g.aux, m_h, &ws.daux[3]);
            }
            g.intercept += g_eta;
            axpy(&mut g.beta, g_eta, &r.x);
            for (t, (&j, z)) in r.levels.iter().zip(&r.z).enumerate() {
                let d = z.len();
                axpy(&mut g.re[t][j * d..(j + 1) * d], g_eta, z);
            }
        }
        ll
    }
}
