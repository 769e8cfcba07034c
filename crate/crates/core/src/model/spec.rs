use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::predictor::TveSpec;
use crate::priors::PriorConfig;
use crate::spline::{SplineBasis, SplineConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum BaselineSpec {
    Exponential,
    Weibull,
    Gompertz,
    MSpline { spline: SplineConfig },
    BSpline { spline: SplineConfig },
    ExponentialAft,
    WeibullAft,
}

impl BaselineSpec {
    pub fn is_aft(&self) -> bool {
        matches!(self, BaselineSpec::ExponentialAft | BaselineSpec::WeibullAft)
    }

    /// Short name used on the command line.
    pub fn code(&self) -> &'static str {
        match self {
            BaselineSpec::Exponential => "exp",
            BaselineSpec::Weibull => "weibull",
            BaselineSpec::Gompertz => "gompertz",
            BaselineSpec::MSpline { .. } => "ms",
            BaselineSpec::BSpline { .. } => "bs",
            BaselineSpec::ExponentialAft => "exp-aft",
            BaselineSpec::WeibullAft => "weibull-aft",
        }
    }

    pub fn description(&self) -> String {
        match self {
            BaselineSpec::Exponential => "exponential".into(),
            BaselineSpec::Weibull => "weibull".into(),
            BaselineSpec::Gompertz => "gompertz".into(),
            BaselineSpec::MSpline { spline } => format!(
                "M-splines on hazard scale (degree {}, {} internal knots)",
                spline.degree,
                spline.knots.internal.len()
            ),
            BaselineSpec::BSpline { spline } => format!(
                "B-splines on log hazard scale (degree {}, {} internal knots)",
                spline.degree,
                spline.knots.internal.len()
            ),
            BaselineSpec::ExponentialAft => "exponential AFT".into(),
            BaselineSpec::WeibullAft => "weibull AFT".into(),
        }
    }

    /// Names of the auxiliary parameters in constrained order.
    pub fn aux_names(&self) -> Vec<String> {
        match self {
            BaselineSpec::Exponential | BaselineSpec::ExponentialAft => vec![],
            BaselineSpec::Weibull | BaselineSpec::WeibullAft => vec!["weibull-shape".into()],
            BaselineSpec::Gompertz => vec!["gompertz-scale".into()],
            BaselineSpec::MSpline { spline } => (1..=spline.n_basis()).map(|l| format!("m-splines-coef{l}")).collect(),
            BaselineSpec::BSpline { spline } => (1..spline.n_basis()).map(|l| format!("b-splines-coef{l}")).collect(),
        }
    }

    pub fn n_aux(&self) -> usize {
        self.aux_names().len()
    }

    pub fn spline(&self) -> Option<&SplineConfig> {
        match self {
            BaselineSpec::MSpline { spline } | BaselineSpec::BSpline { spline } => Some(spline),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReTerm {
    Intercept,
    Slope(usize),
}

/// Random effects for one clustering factor with their own covariance matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomEffectSpec {
    pub factor: String,
    pub terms: Vec<ReTerm>,
    /// Levels seen at fit time, in parameter order.
    pub levels: Vec<String>,
}

impl RandomEffectSpec {
    pub fn dim(&self) -> usize {
        self.terms.len()
    }
}

fn default_qnodes() -> usize {
    15
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub baseline: BaselineSpec,
    pub covariate_names: Vec<String>,
    #[serde(default)]
    pub tve: Vec<TveSpec>,
    #[serde(default)]
    pub random_effects: Vec<RandomEffectSpec>,
    #[serde(default)]
    pub priors: PriorConfig,
    #[serde(default = "default_qnodes")]
    pub qnodes: usize,
    #[serde(default)]
    pub prior_only: bool,
    /// Evaluate cumulative hazards by quadrature even when a closed form exists.
    #[serde(default)]
    pub force_quadrature: bool,
    #[serde(default)]
    pub formula: Option<String>,
}

impl ModelSpec {
    pub fn new(baseline: BaselineSpec, covariate_names: Vec<String>) -> Self {
        ModelSpec {
            baseline,
            covariate_names,
            tve: Vec::new(),
            random_effects: Vec::new(),
            priors: PriorConfig::default(),
            qnodes: 15,
            prior_only: false,
            force_quadrature: false,
            formula: None,
        }
    }

    pub fn n_covariates(&self) -> usize {
        self.covariate_names.len()
    }

    pub fn uses_quadrature(&self) -> bool {
        self.force_quadrature || !self.tve.is_empty() || matches!(self.baseline, BaselineSpec::BSpline { .. })
    }

    pub fn is_tve(&self, p: usize) -> bool {
        self.tve.iter().any(|t| t.covariate_index == p)
    }

    pub fn term_name(&self, t: ReTerm) -> &str {
        match t {
            ReTerm::Intercept => "(Intercept)",
            ReTerm::Slope(p) => &self.covariate_names[p],
        }
    }

    pub fn validate(&self) -> Result<()> {
        crate::quadrature::make_rule(self.qnodes)?;
        self.priors.validate()?;
        let p = self.n_covariates();
        if let Some(s) = self.baseline.spline() {
            SplineBasis::from_config(s)?;
            if let BaselineSpec::BSpline { .. } = self.baseline {
                if s.n_basis() < 2 {
                    return Err(Error::InvalidModel("a B-spline baseline needs at least two basis terms".into()));
                }
            }
        }
        let mut seen = Vec::new();
        for t in &self.tve {
            if t.covariate_index >= p {
                return Err(Error::InvalidModel(format!(
                    "time-varying effect on covariate {} of {p}",
                    t.covariate_index
                )));
            }
            if seen.contains(&t.covariate_index) {
                return Err(Error::InvalidModel(format!(
                    "covariate `{}` has two time-varying effects",
                    self.covariate_names[t.covariate_index]
                )));
            }
            seen.push(t.covariate_index);
            t.validate()?;
        }
        let mut factors = Vec::new();
        for re in &self.random_effects {
            if re.terms.is_empty() {
                return Err(Error::InvalidModel(format!("no terms for factor `{}`", re.factor)));
            }
            if factors.contains(&&re.factor) {
                return Err(Error::InvalidModel(format!("factor `{}` appears twice", re.factor)));
            }
            factors.push(&re.factor);
            for (i, t) in re.terms.iter().enumerate() {
                if re.terms[..i].contains(t) {
                    return Err(Error::InvalidModel("repeated random-effect term".into()));
                }
                if let ReTerm::Slope(q) = *t {
                    if q >= p {
                        return Err(Error::InvalidModel(format!(
                            "random slope on `{}` needs the covariate as a fixed effect too",
                            q
                        )));
                    }
                }
            }
            if re.levels.is_empty() {
                return Err(Error::InvalidModel(format!("factor `{}` has no levels", re.factor)));
            }
        }
        Ok(())
    }

    /// Column names of the constrained draws.
    pub fn parameter_names(&self) -> Vec<String> {
        let mut v = vec!["(Intercept)".to_string()];
        v.extend(self.covariate_names.iter().cloned());
        for t in &self.tve {
            let x = &self.covariate_names[t.covariate_index];
            v.extend((1..=t.n_coefs()).map(|l| format!("tve({x}):{l}")));
            v.push(format!("smooth_sd[{x}]"));
        }
        v.extend(self.baseline.aux_names());
        for re in &self.random_effects {
            for level in &re.levels {
                for &t in &re.terms {
                    v.push(format!("b[{} {}:{}]", self.term_name(t), re.factor, level));
                }
            }
            for &t in &re.terms {
                v.push(format!("sd[{}:{}]", re.factor, self.term_name(t)));
            }
            for i in 0..re.dim() {
                for j in i + 1..re.dim() {
                    v.push(format!(
                        "cor[{}:{},{}]",
                        re.factor,
                        self.term_name(re.terms[i]),
                        self.term_name(re.terms[j])
                    ));
                }
            }
        }
        v
    }

    /// Column names of the stored new-cluster draws.
    pub fn new_cluster_names(&self) -> Vec<String> {
        self.random_effects
            .iter()
            .flat_map(|re| {
                re.terms
                    .iter()
                    .map(move |&t| format!("b_new[{} {}]", self.term_name(t), re.factor))
            })
            .collect()
    }

    /// Coefficients whose exponential is a hazard ratio or acceleration factor.
    pub fn is_exponentiable(&self, name: &str) -> bool {
        self.covariate_names.iter().any(|c| c == name) || name.starts_with("tve(")
    }
}
