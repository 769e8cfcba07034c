//! Bayesian parametric survival models: baseline hazards, likelihood,
//! NUTS sampling, prediction and model comparison.

// `!(a > b)` is used deliberately so NaN takes the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod ad;
pub mod aft;
pub mod baseline;
pub mod bundle;
pub mod data;
pub mod draws;
pub mod error;
pub mod eval;
pub mod fit;
pub mod formula;
pub mod model;
pub mod optimize;
pub mod predictor;
pub mod predict;
pub mod priors;
pub mod quadrature;
pub mod sampler;
pub mod sim;
pub mod spline;
pub mod summary;

pub use error::{Error, Result};

macro_rules! guide {
    ($($name:ident => $file:literal),* $(,)?) => {
        $(
            #[cfg(doctest)]
            #[doc = include_str!(concat!("../../../book/src/", $file))]
            pub struct $name;
        )*
    };
}

guide! {
    GuideIntroduction => "introduction.md",
    GuideQuickstart => "quickstart.md",
    GuideModels => "models.md",
    GuidePriors => "priors.md",
    GuidePrediction => "prediction.md",
    GuideComparison => "comparison.md",
    GuideCli => "cli.md",
}
