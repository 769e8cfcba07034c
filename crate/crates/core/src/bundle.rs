//! On-disk fit bundle: a directory holding `spec.json`, `draws.csv`,
//! `diagnostics.json` and a `bundle_version` marker.
//!
//! Bundles are assembled in a sibling temporary directory and renamed into
//! place, so a failed write never leaves a partial bundle at the target path.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{DatasetSummary, Schema};
use crate::draws::PosteriorDraws;
use crate::error::{Error, Result};
use crate::eval::{diagnose, ParameterDiagnostics};
use crate::fit::FittedModel;
use crate::model::ModelSpec;
use crate::sampler::SamplerConfig;

pub const BUNDLE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleSpec {
    pub bundle_version: u32,
    pub model: ModelSpec,
    pub data: DatasetSummary,
    pub sampler: SamplerConfig,
    /// Columns the model was fitted on, for re-reading the data.
    pub schema: Option<Schema>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub n_draws: usize,
    pub n_chains: usize,
    pub divergent: usize,
    pub divergent_fraction: f64,
    /// Transitions that hit the tree-depth limit.
    pub max_treedepth_hits: usize,
    pub parameters: Vec<ParameterDiagnostics>,
}

impl Diagnostics {
    pub fn compute(draws: &PosteriorDraws, max_treedepth: usize) -> Self {
        Diagnostics {
            n_draws: draws.n_draws(),
            n_chains: draws.n_chains(),
            divergent: draws.divergent.iter().filter(|&&d| d).count(),
            divergent_fraction: draws.divergent_fraction(),
            max_treedepth_hits: draws.treedepth.iter().filter(|&&d| d >= max_treedepth).count(),
            // single-chain or very short runs have no split diagnostics
            parameters: diagnose(draws).unwrap_or_default(),
        }
    }

    pub fn max_rhat(&self) -> f64 {
        self.parameters.iter().map(|p| p.rhat).fold(f64::NAN, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bundle {
    pub fitted: FittedModel,
    pub schema: Option<Schema>,
    pub diagnostics: Diagnostics,
}

fn temp_sibling(target: &Path, tag: &str) -> PathBuf {
    let name = target.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    target.with_file_name(format!(".{name}.{tag}-{}", std::process::id()))
}

pub fn write_bundle(dir: &Path, fitted: &FittedModel, schema: Option<&Schema>) -> Result<Diagnostics> {
    let diagnostics = Diagnostics::compute(&fitted.draws, fitted.sampler.max_treedepth);
    let tmp = temp_sibling(dir, "tmp");
    if tmp.exists() {
        fs::remove_dir_all(&tmp)?;
    }
    let result = (|| -> Result<()> {
        fs::create_dir_all(&tmp)?;
        let spec = BundleSpec {
            bundle_version: BUNDLE_VERSION,
            model: fitted.spec.clone(),
            data: fitted.data.clone(),
            sampler: fitted.sampler,
            schema: schema.cloned(),
        };
        serde_json::to_writer_pretty(BufWriter::new(fs::File::create(tmp.join("spec.json"))?), &spec)?;
        fitted.draws.write_csv(BufWriter::new(fs::File::create(tmp.join("draws.csv"))?))?;
        serde_json::to_writer_pretty(
            BufWriter::new(fs::File::create(tmp.join("diagnostics.json"))?),
            &diagnostics,
        )?;
        fs::write(tmp.join("bundle_version"), format!("{BUNDLE_VERSION}\n"))?;
        if dir.exists() {
            let old = temp_sibling(dir, "old");
            fs::rename(dir, &old)?;
            fs::rename(&tmp, dir)?;
            fs::remove_dir_all(&old)?;
        } else {
            fs::rename(&tmp, dir)?;
        }
        Ok(())
    })();
    if result.is_err() && tmp.exists() {
        let _ = fs::remove_dir_all(&tmp);
    }
    result.map(|_| diagnostics)
}

pub fn read_bundle(dir: &Path) -> Result<Bundle> {
    let marker = fs::read_to_string(dir.join("bundle_version"))?;
    let found: u32 = marker.trim().parse().map_err(|_| Error::BundleVersionMismatch {
        found: 0,
        expected: BUNDLE_VERSION,
    })?;
    if found != BUNDLE_VERSION {
        return Err(Error::BundleVersionMismatch {
            found,
            expected: BUNDLE_VERSION,
        });
    }
    let spec: BundleSpec = serde_json::from_reader(fs::File::open(dir.join("spec.json"))?)?;
    if spec.bundle_version != BUNDLE_VERSION {
        return Err(Error::BundleVersionMismatch {
            found: spec.bundle_version,
            expected: BUNDLE_VERSION,
        });
    }
    let draws = PosteriorDraws::read_csv(fs::File::open(dir.join("draws.csv"))?)?;
    if draws.names != spec.model.parameter_names() {
        return Err(Error::DimensionMismatch("draw columns do not match the model".into()));
    }
    let diagnostics: Diagnostics = serde_json::from_reader(fs::File::open(dir.join("diagnostics.json"))?)?;
    Ok(Bundle {
        fitted: FittedModel {
            spec: spec.model,
            draws,
            data: spec.data,
            sampler: spec.sampler,
        },
        schema: spec.schema,
        diagnostics,
    })
}
