use std::path::PathBuf;

use bayes_surv::priors::PriorConfig;
use bayes_surv::sampler::SamplerConfig;
use bayes_surv::{Error, Result};
use clap::Args;
use serde::Deserialize;

const FAMILIES: [&str; 7] = ["exp", "weibull", "gompertz", "ms", "bs", "exp-aft", "weibull-aft"];

#[derive(Args, Debug, Default)]
pub struct FitArgs {
    /// JSON file with any of the keys below (snake_case); flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// CSV data file.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Model formula, e.g. `surv(time, status) ~ trt + (1 | site)`.
    #[arg(long)]
    pub formula: Option<String>,
    /// Baseline hazard family [default: ms].
    #[arg(long, value_parser = FAMILIES)]
    pub basehaz: Option<String>,
    #[arg(long)]
    pub basehaz_degree: Option<usize>,
    /// Internal knots for a spline baseline, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub basehaz_knots: Option<Vec<f64>>,
    #[arg(long)]
    pub basehaz_df: Option<usize>,
    /// Gauss-Kronrod nodes for cumulative hazards without a closed form (7, 11 or 15).
    #[arg(long)]
    pub qnodes: Option<usize>,
    #[arg(long)]
    pub chains: Option<usize>,
    /// Post-warmup draws per chain.
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub warmup: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub target_accept: Option<f64>,
    #[arg(long)]
    pub max_treedepth: Option<usize>,
    /// Chains sampled concurrently; 0 runs all chains at once.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Sample from the prior only.
    #[arg(long)]
    pub prior_only: bool,
    /// Column identifying subjects across start/stop rows.
    #[arg(long)]
    pub id: Option<String>,
    /// Directory for the fit bundle.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Fit settings as read from a config file.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub data: Option<PathBuf>,
    pub formula: Option<String>,
    pub basehaz: Option<String>,
    pub basehaz_degree: Option<usize>,
    pub basehaz_knots: Option<Vec<f64>>,
    pub basehaz_df: Option<usize>,
    pub qnodes: Option<usize>,
    pub chains: Option<usize>,
    pub iters: Option<usize>,
    pub warmup: Option<usize>,
    pub seed: Option<u64>,
    pub target_accept: Option<f64>,
    pub max_treedepth: Option<usize>,
    pub threads: Option<usize>,
    pub prior_only: Option<bool>,
    pub id: Option<String>,
    pub out: Option<PathBuf>,
    pub priors: Option<PriorConfig>,
}

/// Fully resolved fit settings.
#[derive(Debug)]
pub struct FitSettings {
    pub data: PathBuf,
    pub formula: String,
    pub basehaz: String,
    pub basehaz_degree: Option<usize>,
    pub basehaz_knots: Option<Vec<f64>>,
    pub basehaz_df: Option<usize>,
    pub qnodes: usize,
    pub sampler: SamplerConfig,
    pub prior_only: bool,
    pub id: Option<String>,
    pub out: PathBuf,
    pub priors: PriorConfig,
}

impl FitArgs {
    pub fn resolve(self) -> Result<FitSettings> {
        let file = match &self.config {
            Some(p) => serde_json::from_reader(std::fs::File::open(p)?)
                .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?,
            None => FitConfig::default(),
        };
        let missing = |what: &str| Error::Config(format!("--{what} is required (flag or config key)"));
        let basehaz = self.basehaz.or(file.basehaz).unwrap_or_else(|| "ms".into());
        if !FAMILIES.contains(&basehaz.as_str()) {
            return Err(Error::UnsupportedFamily(basehaz));
        }
        let defaults = SamplerConfig::default();
        Ok(FitSettings {
            data: self.data.or(file.data).ok_or_else(|| missing("data"))?,
            formula: self.formula.or(file.formula).ok_or_else(|| missing("formula"))?,
            basehaz,
            basehaz_degree: self.basehaz_degree.or(file.basehaz_degree),
            basehaz_knots: self.basehaz_knots.or(file.basehaz_knots),
            basehaz_df: self.basehaz_df.or(file.basehaz_df),
            qnodes: self.qnodes.or(file.qnodes).unwrap_or(15),
            sampler: SamplerConfig {
                chains: self.chains.or(file.chains).unwrap_or(defaults.chains),
                iters: self.iters.or(file.iters).unwrap_or(defaults.iters),
                warmup: self.warmup.or(file.warmup).unwrap_or(defaults.warmup),
                seed: self.seed.or(file.seed).unwrap_or(defaults.seed),
                target_accept: self.target_accept.or(file.target_accept).unwrap_or(defaults.target_accept),
                max_treedepth: self.max_treedepth.or(file.max_treedepth).unwrap_or(defaults.max_treedepth),
                threads: self.threads.or(file.threads).unwrap_or(defaults.threads),
                ..defaults
            },
            prior_only: self.prior_only || file.prior_only.unwrap_or(false),
            id: self.id.or(file.id),
            out: self.out.or(file.out).ok_or_else(|| missing("out"))?,
            priors: file.priors.unwrap_or_default(),
        })
    }
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    /// Fit bundle directory.
    #[arg(long)]
    pub fit: PathBuf,
    /// CSV of covariate profiles, one column per model covariate.
    #[arg(long)]
    pub newdata: PathBuf,
    /// Column of `newdata` holding row ids.
    #[arg(long)]
    pub id: Option<String>,
    /// surv, cumhaz, haz, cdf, logsurv, logcumhaz, loghaz or logcdf.
    #[arg(long, default_value = "surv")]
    pub quantity: String,
    /// Prediction times, comma separated. With --extrapolate, a single start time.
    #[arg(long, value_delimiter = ',')]
    pub times: Option<Vec<f64>>,
    /// Predict on a grid running forward from the start time.
    #[arg(long)]
    pub extrapolate: bool,
    /// Length of the extrapolation grid [default: up to the last observed time].
    #[arg(long)]
    pub edist: Option<f64>,
    /// Grid points when times are generated.
    #[arg(long, default_value_t = 100)]
    pub grid: usize,
    /// Condition on survival up to this time.
    #[arg(long)]
    pub condition_time: Option<f64>,
    /// Average the curves over all rows of `newdata`.
    #[arg(long)]
    pub standardise: bool,
    /// Credible interval level.
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Output CSV [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    #[arg(long)]
    pub fit: PathBuf,
    /// Data the model was fitted on.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub grid: usize,
    /// Output CSV [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
pub enum Criterion {
    Waic,
    Loo,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    /// Fit bundle directories; repeat for each model.
    #[arg(long = "fit", required = true, num_args = 1..)]
    pub fits: Vec<PathBuf>,
    /// Data the models were fitted on.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = Criterion::Waic)]
    pub criterion: Criterion,
    /// Sum log likelihood over rows sharing a subject id.
    #[arg(long)]
    pub by_subject: bool,
    /// Write the full comparison as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// JSON simulation design.
    #[arg(long)]
    pub design: PathBuf,
    /// Subjects, or subjects per cluster with --clusters.
    #[arg(short = 'n', long)]
    pub n: usize,
    /// Number of clusters for a frailty design.
    #[arg(long)]
    pub clusters: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output CSV [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_config() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("fit.json");
        std::fs::write(
            &cfg,
            r#"{"data": "a.csv", "formula": "surv(t, d) ~ x", "chains": 2, "seed": 9, "out": "o",
                "priors": {"coefficients": {"family": "normal", "location": 0.0, "scale": 1.0}}}"#,
        )
        .unwrap();
        let s = FitArgs {
            config: Some(cfg),
            seed: Some(3),
            basehaz: Some("weibull".into()),
            ..Default::default()
        }
        .resolve()
        .unwrap();
        assert_eq!(s.sampler.chains, 2);
        assert_eq!(s.sampler.seed, 3);
        assert_eq!(s.basehaz, "weibull");
        assert_eq!(s.data, PathBuf::from("a.csv"));
        assert_ne!(s.priors.coefficients, PriorConfig::default().coefficients);
    }

    #[test]
    fn unknown_config_key_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("fit.json");
        std::fs::write(&cfg, r#"{"chain": 2}"#).unwrap();
        let e = FitArgs {
            config: Some(cfg),
            ..Default::default()
        }
        .resolve()
        .unwrap_err();
        assert!(e.is_usage());
    }

    #[test]
    fn required_settings() {
        let e = FitArgs::default().resolve().unwrap_err();
        assert!(matches!(e, Error::Config(m) if m.contains("--data")));
    }
}
