//! Model specification, likelihood and posterior.

pub mod likelihood;
pub mod posterior;
pub mod spec;

pub use likelihood::{Centering, LevelPolicy, Likelihood, ModelGrad, ModelParams};
pub use spec::{BaselineSpec, ModelSpec, RandomEffectSpec, ReTerm};
pub use posterior::{params_from_draw, Layout, Posterior};
