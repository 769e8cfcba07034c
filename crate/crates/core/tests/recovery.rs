use std::collections::BTreeMap;

use bayes_surv::formula::{build_spec, parse_formula, BaselineOptions};
use bayes_surv::model::Posterior;
use bayes_surv::optimize::{maximize, OptimizeConfig};
use bayes_surv::sim::{simulate, CovariateGen, SimBaseline, SimCovariate, SimDesign, TdeFn};

fn step_design() -> SimDesign {
    SimDesign {
        baseline: SimBaseline::Weibull { lambda: 0.15, gamma: 1.1 },
        covariates: vec![SimCovariate {
            name: "trt".into(),
            generator: CovariateGen::Bernoulli { p: 0.5 },
        }],
        betas: BTreeMap::from([("trt".into(), -0.4)]),
        tde: BTreeMap::from([("trt".into(), 0.8)]),
        tde_fn: TdeFn::Step { threshold: 4.0 },
        max_time: 15.0,
        frailty: None,
    }
}

fn mode(formula: &str, n: usize, seed: u64) -> (Vec<String>, Vec<f64>) {
    let data = simulate(&step_design(), n, seed).unwrap();
    let spec = build_spec(&parse_formula(formula).unwrap(), &data, &BaselineOptions::new("weibull")).unwrap();
    let post = Posterior::new(&spec, &data).unwrap();
    let opt = maximize(&post, &vec![0.0; post.dim()], &OptimizeConfig::default()).unwrap();
    (spec.parameter_names(), post.constrain(&opt.x))
}

#[test]
fn step_effect_is_recovered_in_a_large_sample() {
    let (names, values) = mode("surv(time, status) ~ tve(trt, degree = 0, knots = [4])", 20_000, 7);
    let get = |n: &str| values[names.iter().position(|m| m == n).unwrap()];
    assert!((get("trt") + 0.4).abs() < 0.1, "{}", get("trt"));
    assert!((get("tve(trt):1") - 0.8).abs() < 0.15, "{}", get("tve(trt):1"));
    assert!((get("weibull-shape") - 1.1).abs() < 0.05);
}

#[test]
fn time_fixed_fit_averages_the_step() {
    let (names, values) = mode("surv(time, status) ~ trt", 20_000, 7);
    let trt = values[names.iter().position(|m| m == "trt").unwrap()];
    assert!(trt > -0.4 && trt < 0.4, "{trt}");
}
