//! Posterior predictive survival curves.
//!
//! Every quantity is derived per draw from `log S(t)` and `log h(t)`, which are
//! obtained from the likelihood of pseudo-records: a right-censored record at
//! `t` gives `log S(t)` and an event record gives `log h(t) + log S(t)`.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{kaplan_meier, CensoringStatus, Dataset, SurvivalRecord};
use crate::error::{Error, Result};
use crate::fit::FittedModel;
use crate::model::{params_from_draw, Centering, LevelPolicy, Likelihood, ModelParams, ModelSpec};
use crate::summary::median_interval;

/// Hazards at `t = 0` use the smallest positive requested time, or this
/// fraction of `T_max` when there is none.
const HAZARD_ORIGIN_FRACTION: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantity {
    Surv,
    CumHaz,
    Haz,
    Cdf,
    LogSurv,
    LogCumHaz,
    LogHaz,
    LogCdf,
}

impl Quantity {
    pub const ALL: [Quantity; 8] = [
        Quantity::Surv,
        Quantity::CumHaz,
        Quantity::Haz,
        Quantity::Cdf,
        Quantity::LogSurv,
        Quantity::LogCumHaz,
        Quantity::LogHaz,
        Quantity::LogCdf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Quantity::Surv => "surv",
            Quantity::CumHaz => "cumhaz",
            Quantity::Haz => "haz",
            Quantity::Cdf => "cdf",
            Quantity::LogSurv => "logsurv",
            Quantity::LogCumHaz => "logcumhaz",
            Quantity::LogHaz => "loghaz",
            Quantity::LogCdf => "logcdf",
        }
    }

    fn needs_hazard(self) -> bool {
        matches!(self, Quantity::Haz | Quantity::LogHaz)
    }

    /// Value from `log S` and `log h`.
    pub fn from_logs(self, log_s: f64, log_h: f64) -> f64 {
        match self {
            Quantity::Surv => log_s.exp(),
            Quantity::LogSurv => log_s,
            Quantity::CumHaz => -log_s,
            Quantity::LogCumHaz => (-log_s).ln(),
            Quantity::Cdf => -log_s.exp_m1(),
            Quantity::LogCdf => (-log_s.exp_m1()).ln(),
            Quantity::Haz => log_h.exp(),
            Quantity::LogHaz => log_h,
        }
    }
}

impl FromStr for Quantity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Quantity::ALL
            .into_iter()
            .find(|q| q.name() == s)
            .ok_or_else(|| Error::UnknownQuantity(s.to_string()))
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One covariate profile to predict for.
#[derive(Debug, Clone, PartialEq)]
pub struct NewData {
    pub id: String,
    pub covariates: Vec<f64>,
    /// Cluster label per random-effect factor of the model; `None` or an
    /// unseen label marginalizes over a new cluster.
    pub cluster_labels: Vec<Option<String>>,
}

impl NewData {
    pub fn new(id: impl Into<String>, covariates: Vec<f64>) -> Self {
        NewData {
            id: id.into(),
            covariates,
            cluster_labels: Vec::new(),
        }
    }

    /// Profiles of every record in `data`, in model covariate order.
    pub fn from_dataset(fitted: &FittedModel, data: &Dataset) -> Result<Vec<NewData>> {
        let spec = &fitted.spec;
        let cols: Vec<usize> = spec
            .covariate_names
            .iter()
            .map(|n| data.covariate_index(n).ok_or_else(|| Error::MissingColumn(n.clone())))
            .collect::<Result<_>>()?;
        let facs: Vec<Option<usize>> = spec.random_effects.iter().map(|r| data.factor_index(&r.factor)).collect();
        Ok(data
            .records
            .iter()
            .enumerate()
            .map(|(i, r)| NewData {
                id: r.id.clone().unwrap_or_else(|| (i + 1).to_string()),
                covariates: cols.iter().map(|&c| r.covariates[c]).collect(),
                cluster_labels: facs.iter().map(|f| f.and_then(|f| r.cluster_labels[f].clone())).collect(),
            })
            .collect())
    }
}

/// Profiles from a CSV with one column per model covariate. Factor columns
/// are optional (absent means a new cluster). Row ids come from `id_column`
/// when present, else the row number.
pub fn read_new_data<R: Read>(input: R, spec: &ModelSpec, id_column: Option<&str>) -> Result<Vec<NewData>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let covs = spec
        .covariate_names
        .iter()
        .map(|n| find(n).ok_or_else(|| Error::MissingColumn(n.clone())))
        .collect::<Result<Vec<_>>>()?;
    let facs: Vec<Option<usize>> = spec.random_effects.iter().map(|r| find(&r.factor)).collect();
    let id = match id_column {
        Some(c) => Some(find(c).ok_or_else(|| Error::MissingColumn(c.to_string()))?),
        None => None,
    };
    let mut rows = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let covariates = covs
            .iter()
            .map(|&i| {
                field(i).parse::<f64>().map_err(|e| Error::ParseFailure {
                    row,
                    column: headers[i].to_string(),
                    message: e.to_string(),
                })
            })
            .collect::<Result<_>>()?;
        let cluster_labels = facs
            .iter()
            .map(|f| f.map(field).filter(|s| !s.is_empty() && !s.eq_ignore_ascii_case("na")).map(str::to_string))
            .collect();
        rows.push(NewData {
            id: id.map(|i| field(i).to_string()).unwrap_or_else(|| (row + 1).to_string()),
            covariates,
            cluster_labels,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRequest {
    pub rows: Vec<NewData>,
    pub quantity: Quantity,
    pub times: Vec<f64>,
    pub condition_time: Option<f64>,
    pub standardise: bool,
    pub level: f64,
}

impl PredictionRequest {
    pub fn new(rows: Vec<NewData>, quantity: Quantity, times: Vec<f64>) -> Self {
        PredictionRequest {
            rows,
            quantity,
            times,
            condition_time: None,
            standardise: false,
            level: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRow {
    pub id: String,
    pub cond_time: Option<f64>,
    pub time: f64,
    pub median: f64,
    pub ci_lb: f64,
    pub ci_ub: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionFrame {
    pub rows: Vec<PredictionRow>,
    pub quantity: Quantity,
    pub standardised: bool,
    pub conditional: bool,
}

impl PredictionFrame {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["id", "cond_time", "time", "median", "ci_lb", "ci_ub"])?;
        for r in &self.rows {
            wr.write_record([
                r.id.clone(),
                r.cond_time.map_or_else(|| "NA".to_string(), |c| format!("{c:?}")),
                format!("{:?}", r.time),
                format!("{:?}", r.median),
                format!("{:?}", r.ci_lb),
                format!("{:?}", r.ci_ub),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// `n` equally spaced times from `start` to `end` inclusive.
pub fn time_grid(start: f64, end: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![end],
        _ => (0..n).map(|k| start + (end - start) * k as f64 / (n - 1) as f64).collect(),
    }
}

/// Per-draw `log S` and `log h` on a fixed set of rows and times.
struct CurveEvaluator<'a> {
    fitted: &'a FittedModel,
    n_rows: usize,
    times: Vec<f64>,
    right: Likelihood,
    event: Option<Likelihood>,
}

impl<'a> CurveEvaluator<'a> {
    fn new(fitted: &'a FittedModel, rows: &[NewData], times: &[f64], hazard: bool) -> Result<Self> {
        let spec = &fitted.spec;
        let p = spec.n_covariates();
        let nf = spec.random_effects.len();
        for r in rows {
            if r.covariates.len() != p {
                return Err(Error::DimensionMismatch(format!(
                    "row `{}` has {} covariates, the model has {p}",
                    r.id,
                    r.covariates.len()
                )));
            }
        }
        let h_origin = times
            .iter()
            .copied()
            .filter(|&t| t > 0.0)
            .fold(f64::INFINITY, f64::min);
        let h_origin = if h_origin.is_finite() {
            h_origin
        } else {
            HAZARD_ORIGIN_FRACTION * fitted.t_max()
        };
        let make = |status: CensoringStatus| -> Result<Likelihood> {
            let mut recs = Vec::with_capacity(rows.len() * times.len());
            for r in rows {
                let mut labels = r.cluster_labels.clone();
                labels.resize(nf, None);
                for &t in times {
                    let t = if t > 0.0 { t } else { h_origin };
                    recs.push(SurvivalRecord {
                        cluster_labels: labels.clone(),
                        ..SurvivalRecord::simple(t, status, r.covariates.clone())
                    });
                }
            }
            let factors = spec.random_effects.iter().map(|r| r.factor.clone()).collect();
            let ds = Dataset::new(recs, spec.covariate_names.clone(), factors)?;
            Likelihood::new(spec, &ds, &Centering::none(p), LevelPolicy::NewLevel)
        };
        Ok(CurveEvaluator {
            fitted,
            n_rows: rows.len(),
            times: times.to_vec(),
            right: make(CensoringStatus::RightCensored)?,
            event: if hazard { Some(make(CensoringStatus::Event)?) } else { None },
        })
    }

    fn params(&self, s: usize) -> ModelParams {
        let spec = &self.fitted.spec;
        let draws = &self.fitted.draws;
        let zeros;
        let nc = match draws.new_cluster_row(s) {
            Some(v) => Some(v),
            None if !spec.random_effects.is_empty() => {
                zeros = vec![0.0; spec.new_cluster_names().len()];
                Some(zeros.as_slice())
            }
            None => None,
        };
        params_from_draw(spec, &draws.values[s], nc)
    }

    /// `(log S, log h)` flattened as `[row * n_times + k]`.
    fn eval(&self, s: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let p = self.params(s);
        let mut log_s = self.right.pointwise(&p)?;
        let log_h = match &self.event {
            Some(ev) => ev.pointwise(&p)?.iter().zip(&log_s).map(|(e, r)| e - r).collect(),
            None => vec![f64::NAN; log_s.len()],
        };
        let nt = self.times.len();
        for i in 0..self.n_rows {
            for (k, &t) in self.times.iter().enumerate() {
                if t == 0.0 {
                    log_s[i * nt + k] = 0.0;
                }
            }
        }
        Ok((log_s, log_h))
    }
}

fn check_times(fitted: &FittedModel, times: &[f64]) -> Result<()> {
    let t_max = fitted.t_max();
    for &t in times {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::DomainError(format!("prediction time {t} must be finite and non-negative")));
        }
        if t > t_max * (1.0 + 1e-12) {
            return Err(Error::ExtrapolationBeyondTmax { time: t, t_max });
        }
    }
    Ok(())
}

/// Per-draw values of the requested quantity: `out[cell][draw]` with cells
/// ordered by row then time (a single row when standardising).
fn draw_values(fitted: &FittedModel, req: &PredictionRequest) -> Result<Vec<Vec<f64>>> {
    if req.rows.is_empty() {
        return Err(Error::Config("prediction needs at least one row".into()));
    }
    check_times(fitted, &req.times)?;
    let mut times = req.times.clone();
    if let Some(c) = req.condition_time {
        let min_t = req.times.iter().copied().fold(f64::INFINITY, f64::min);
        if !(c > 0.0) || !(c < min_t) {
            return Err(Error::ConditionAfterPredictionTime(c));
        }
        check_times(fitted, &[c])?;
        times.push(c);
    }
    let hazard = req.quantity.needs_hazard();
    let ev = CurveEvaluator::new(fitted, &req.rows, &times, hazard)?;
    let nt_all = times.len();
    let nt = req.times.len();
    let n_cells = if req.standardise { nt } else { req.rows.len() * nt };
    let n_draws = fitted.draws.n_draws();
    let mut out = vec![Vec::with_capacity(n_draws); n_cells];
    for s in 0..n_draws {
        let (log_s, log_h) = ev.eval(s)?;
        let cond = |i: usize| match req.condition_time {
            Some(_) => log_s[i * nt_all + nt],
            None => 0.0,
        };
        if req.standardise {
            for k in 0..nt {
                let (mut s_sum, mut sh_sum) = (0.0, 0.0);
                for i in 0..req.rows.len() {
                    let sv = (log_s[i * nt_all + k] - cond(i)).exp();
                    s_sum += sv;
                    if hazard {
                        sh_sum += sv * log_h[i * nt_all + k].exp();
                    }
                }
                let n = req.rows.len() as f64;
                let lh = if hazard { (sh_sum / s_sum).ln() } else { f64::NAN };
                out[k].push(req.quantity.from_logs((s_sum / n).ln(), lh));
            }
        } else {
            for i in 0..req.rows.len() {
                for k in 0..nt {
                    let ls = log_s[i * nt_all + k] - cond(i);
                    out[i * nt + k].push(req.quantity.from_logs(ls, log_h[i * nt_all + k]));
                }
            }
        }
    }
    Ok(out)
}

/// Posterior median and equal-tailed interval of the requested quantity.
pub fn predict_curves(fitted: &FittedModel, req: &PredictionRequest) -> Result<PredictionFrame> {
    if fitted.draws.n_draws() == 0 {
        return Err(Error::DegenerateDraws);
    }
    let values = draw_values(fitted, req)?;
    let nt = req.times.len();
    let ids: Vec<String> = if req.standardise {
        vec!["standardised".to_string()]
    } else {
        req.rows.iter().map(|r| r.id.clone()).collect()
    };
    let mut rows = Vec::with_capacity(values.len());
    for (i, id) in ids.iter().enumerate() {
        for (k, &t) in req.times.iter().enumerate() {
            let (median, ci_lb, ci_ub) = median_interval(&values[i * nt + k], req.level);
            rows.push(PredictionRow {
                id: id.clone(),
                cond_time: req.condition_time,
                time: t,
                median,
                ci_lb,
                ci_ub,
            });
        }
    }
    Ok(PredictionFrame {
        rows,
        quantity: req.quantity,
        standardised: req.standardise,
        conditional: req.condition_time.is_some(),
    })
}

/// Survival conditional on being event-free at `condition_time`.
pub fn conditional_survival(
    fitted: &FittedModel,
    rows: Vec<NewData>,
    times: Vec<f64>,
    condition_time: f64,
) -> Result<PredictionFrame> {
    let mut req = PredictionRequest::new(rows, Quantity::Surv, times);
    req.condition_time = Some(condition_time);
    predict_curves(fitted, &req)
}

/// Survival averaged over the given covariate profiles.
pub fn standardised_survival(fitted: &FittedModel, rows: Vec<NewData>, times: Vec<f64>) -> Result<PredictionFrame> {
    let mut req = PredictionRequest::new(rows, Quantity::Surv, times);
    req.standardise = true;
    predict_curves(fitted, &req)
}

/// Per-draw values behind a prediction, for callers that need more than the summary.
pub fn prediction_draws(fitted: &FittedModel, req: &PredictionRequest) -> Result<Vec<Vec<f64>>> {
    draw_values(fitted, req)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsCheck {
    pub times: Vec<f64>,
    pub median: Vec<f64>,
    pub ci_lb: Vec<f64>,
    pub ci_ub: Vec<f64>,
    pub km: Vec<f64>,
    pub max_discrepancy: f64,
}

impl PsCheck {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["time", "median", "ci_lb", "ci_ub", "km"])?;
        for k in 0..self.times.len() {
            wr.write_record(
                [self.times[k], self.median[k], self.ci_lb[k], self.ci_ub[k], self.km[k]].map(|v| format!("{v:?}")),
            )?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Standardised predictive survival over the estimation sample against the
/// Kaplan–Meier estimate, on `grid_size` equally spaced times in `(0, T_max]`.
pub fn ps_check(fitted: &FittedModel, data: &Dataset, grid_size: usize) -> Result<PsCheck> {
    let km = kaplan_meier(data)?;
    let t_max = fitted.t_max();
    let times: Vec<f64> = (1..=grid_size).map(|k| t_max * k as f64 / grid_size as f64).collect();
    let frame = standardised_survival(fitted, NewData::from_dataset(fitted, data)?, times.clone())?;
    let km_vals: Vec<f64> = times.iter().map(|&t| km.at(t)).collect();
    let median: Vec<f64> = frame.rows.iter().map(|r| r.median).collect();
    let max_discrepancy = median
        .iter()
        .zip(&km_vals)
        .map(|(m, k)| (m - k).abs())
        .fold(0.0, f64::max);
    Ok(PsCheck {
        times,
        ci_lb: frame.rows.iter().map(|r| r.ci_lb).collect(),
        ci_ub: frame.rows.iter().map(|r| r.ci_ub).collect(),
        median,
        km: km_vals,
        max_discrepancy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::DatasetSummary;
    use crate::draws::PosteriorDraws;
    use crate::model::{BaselineSpec, ModelSpec, RandomEffectSpec, ReTerm};
    use crate::sampler::SamplerConfig;

    fn degenerate(spec: ModelSpec, row: Vec<f64>, n: usize, t_max: f64) -> FittedModel {
        let names = spec.parameter_names();
        assert_eq!(names.len(), row.len());
        FittedModel {
            draws: PosteriorDraws {
                names,
                values: vec![row; n],
                chain: vec![0; n],
                lp: vec![0.0; n],
                accept_stat: vec![1.0; n],
                stepsize: vec![1.0; n],
                treedepth: vec![1; n],
                n_leapfrog: vec![1; n],
                divergent: vec![false; n],
                new_cluster_names: spec.new_cluster_names(),
                new_cluster: vec![vec![0.0; spec.new_cluster_names().len()]; n],
            },
            spec,
            data: DatasetSummary {
                t_max,
                ..Default::default()
            },
            sampler: SamplerConfig::default(),
        }
    }

    fn exp_fit() -> FittedModel {
        degenerate(ModelSpec::new(BaselineSpec::Exponential, vec!["x".into()]), vec![0.0, 0.5], 3, 10.0)
    }

    #[test]
    fn degenerate_exponential_survival() {
        let f = exp_fit();
        let req = PredictionRequest::new(vec![NewData::new("a", vec![0.0])], Quantity::Surv, vec![0.0, 1.0]);
        let fr = predict_curves(&f, &req).unwrap();
        assert_eq!(fr.rows[0].median, 1.0);
        let r = &fr.rows[1];
        assert!((r.median - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(r.ci_lb, r.ci_ub);
    }

    #[test]
    fn quantity_identities() {
        let f = exp_fit();
        let rows = vec![NewData::new("a", vec![1.0]), NewData::new("b", vec![-0.3])];
        let times = vec![0.0, 0.5, 2.0, 7.5];
        let get = |q: Quantity| {
            prediction_draws(&f, &PredictionRequest::new(rows.clone(), q, times.clone())).unwrap()
        };
        let (s, h, c, ch) = (get(Quantity::Surv), get(Quantity::Haz), get(Quantity::Cdf), get(Quantity::CumHaz));
        let (ls, lh) = (get(Quantity::LogSurv), get(Quantity::LogHaz));
        for k in 0..s.len() {
            let (sv, cv, chv) = (s[k][0], c[k][0], ch[k][0]);
            assert!((sv + cv - 1.0).abs() < 1e-15);
            assert!((chv + sv.ln()).abs() < 1e-14);
            assert!((ls[k][0] - sv.ln()).abs() < 1e-14);
            assert!((lh[k][0] - h[k][0].ln()).abs() < 1e-14);
        }
        // row a: η = 0.5 → hazard e^0.5
        assert!((h[1][0] - 0.5f64.exp()).abs() < 1e-12);
        assert!((h[0][0] - 0.5f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn conditional_examples() {
        let f = exp_fit();
        let fr = conditional_survival(&f, vec![NewData::new("a", vec![0.0])], vec![2.0], 1.0).unwrap();
        assert!((fr.rows[0].median - (-1.0f64).exp()).abs() < 1e-14);
        assert_eq!(fr.rows[0].cond_time, Some(1.0));

        let w = degenerate(ModelSpec::new(BaselineSpec::Weibull, vec![]), vec![0.0, 2.0], 1, 5.0);
        let fr = conditional_survival(&w, vec![NewData::new("a", vec![])], vec![2.0], 1.0).unwrap();
        assert!((fr.rows[0].median - (-3.0f64).exp()).abs() < 1e-14);

        let err = conditional_survival(&f, vec![NewData::new("a", vec![0.0])], vec![2.0], 2.0);
        assert!(matches!(err, Err(Error::ConditionAfterPredictionTime(_))));
    }

    #[test]
    fn standardisation_averages() {
        let f = exp_fit();
        let rows = vec![NewData::new("a", vec![0.0]), NewData::new("b", vec![2.0])];
        let t = 1.3;
        let fr = standardised_survival(&f, rows.clone(), vec![t]).unwrap();
        let want = 0.5 * ((-t).exp() + (-t * 1f64.exp()).exp());
        assert!((fr.rows[0].median - want).abs() < 1e-14);
        let one = standardised_survival(&f, rows[..1].to_vec(), vec![t]).unwrap();
        assert!((one.rows[0].median - (-t).exp()).abs() < 1e-15);
    }

    #[test]
    fn extrapolation_and_unknown_quantity() {
        let f = exp_fit();
        let req = PredictionRequest::new(vec![NewData::new("a", vec![0.0])], Quantity::Surv, vec![11.0]);
        assert!(matches!(predict_curves(&f, &req), Err(Error::ExtrapolationBeyondTmax { .. })));
        assert!(matches!("hazard".parse::<Quantity>(), Err(Error::UnknownQuantity(_))));
        assert_eq!("logcdf".parse::<Quantity>().unwrap(), Quantity::LogCdf);
    }

    #[test]
    fn new_cluster_with_zero_variance_matches_no_effect() {
        let mut spec = ModelSpec::new(BaselineSpec::Exponential, vec!["x".into()]);
        spec.random_effects.push(RandomEffectSpec {
            factor: "site".into(),
            terms: vec![ReTerm::Intercept],
            levels: vec!["1".into(), "2".into()],
        });
        // b[1] = 0.7, b[2] = -0.2, sd = 0
        let f = degenerate(spec, vec![-1.0, 0.4, 0.7, -0.2, 0.0], 2, 10.0);
        let plain = exp_fit();
        let mut row = NewData::new("n", vec![1.0]);
        row.cluster_labels = vec![Some("unseen".into())];
        let times = vec![0.5, 3.0];
        let a = predict_curves(&f, &PredictionRequest::new(vec![row.clone()], Quantity::Surv, times.clone())).unwrap();
        let plain_f = degenerate(plain.spec.clone(), vec![-1.0, 0.4], 2, 10.0);
        let b = predict_curves(&plain_f, &PredictionRequest::new(vec![NewData::new("n", vec![1.0])], Quantity::Surv, times.clone())).unwrap();
        for (x, y) in a.rows.iter().zip(&b.rows) {
            assert_eq!(x.median, y.median);
        }
        row.cluster_labels = vec![Some("1".into())];
        let c = predict_curves(&f, &PredictionRequest::new(vec![row], Quantity::CumHaz, vec![1.0])).unwrap();
        assert!((c.rows[0].median - (-1.0f64 + 0.4 + 0.7).exp()).abs() < 1e-14);
    }

    #[test]
    fn csv_layout() {
        let f = exp_fit();
        let fr = predict_curves(&f, &PredictionRequest::new(vec![NewData::new("7", vec![0.0])], Quantity::Surv, vec![1.0])).unwrap();
        let mut buf = Vec::new();
        fr.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("id,cond_time,time,median,ci_lb,ci_ub\n7,NA,1.0,"));
    }
}
