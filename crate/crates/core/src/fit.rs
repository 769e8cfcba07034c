//! Entry points that turn a model specification and a dataset into estimates.

use crate::data::{Dataset, DatasetSummary};
use crate::draws::PosteriorDraws;
use crate::error::Result;
use crate::model::{ModelSpec, Posterior};
use crate::optimize::{maximize, OptimizeConfig, Optimum};
use crate::sampler::{run_chains, SamplerConfig};

/// Draw from the posterior with NUTS and map draws to the constrained scale.
pub fn sample_posterior(spec: &ModelSpec, data: &Dataset, cfg: &SamplerConfig) -> Result<PosteriorDraws> {
    spec.validate()?;
    let post = Posterior::new(spec, data)?;
    let chains = run_chains(&post, cfg)?;
    let mut out = PosteriorDraws {
        names: spec.parameter_names(),
        new_cluster_names: spec.new_cluster_names(),
        ..Default::default()
    };
    for (c, ch) in chains.into_iter().enumerate() {
        for q in &ch.positions {
            out.values.push(post.constrain(q));
            out.chain.push(c);
        }
        out.lp.extend(ch.lp);
        out.accept_stat.extend(ch.accept_stat);
        out.stepsize.extend(ch.stepsize);
        out.treedepth.extend(ch.treedepth);
        out.n_leapfrog.extend(ch.n_leapfrog);
        out.divergent.extend(ch.divergent);
        out.new_cluster.extend(ch.generated);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapEstimate {
    pub names: Vec<String>,
    pub values: Vec<f64>,
    pub optimum: Optimum,
}

impl MapEstimate {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|k| self.values[k])
    }
}

/// Posterior mode on the unconstrained scale without Jacobian terms, which is
/// the mode of the constrained density.
pub fn map_estimate(spec: &ModelSpec, data: &Dataset, cfg: &OptimizeConfig) -> Result<MapEstimate> {
    spec.validate()?;
    let mut post = Posterior::new(spec, data)?;
    post.jacobian = false;
    let init = vec![0.0; post.dim()];
    let optimum = maximize(&post, &init, cfg)?;
    Ok(MapEstimate {
        names: spec.parameter_names(),
        values: post.constrain(&optimum.x),
        optimum,
    })
}

/// A sampled model with what prediction and reporting need from its data.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub spec: ModelSpec,
    pub draws: PosteriorDraws,
    pub data: DatasetSummary,
    pub sampler: SamplerConfig,
}

impl FittedModel {
    pub fn t_max(&self) -> f64 {
        self.data.t_max
    }
}

pub fn fit(spec: &ModelSpec, data: &Dataset, cfg: &SamplerConfig) -> Result<FittedModel> {
    Ok(FittedModel {
        spec: spec.clone(),
        draws: sample_posterior(spec, data, cfg)?,
        data: data.summary(),
        sampler: *cfg,
    })
}
