use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use bayes_surv::bundle::{read_bundle, write_bundle, Bundle};
use bayes_surv::data::{load_dataset, Dataset};
use bayes_surv::eval::{compare as rank_models, log_lik_matrix, loo_raw, waic, ComparisonRow, Elpd, UnitDefinition};
use bayes_surv::formula::{build_spec, parse_formula, BaselineOptions, SplineOptions};
use bayes_surv::predict::{predict_curves, ps_check, read_new_data, time_grid, PredictionRequest, Quantity};
use bayes_surv::sim::{simulate as simulate_design, simulate_frailty, SimDesign};
use bayes_surv::{Error, Result};
use serde::Serialize;

use crate::args::{CheckArgs, CompareArgs, Criterion, FitArgs, PredictArgs, SimulateArgs};
use crate::report;

/// Sends CSV output to a file, or stdout when no path is given.
fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn load_fit_data(bundle: &Bundle, path: &Path) -> Result<Dataset> {
    let schema = bundle
        .schema
        .as_ref()
        .ok_or_else(|| Error::Config("fit bundle records no data schema".into()))?;
    load_dataset(path, schema)
}

pub fn fit(args: FitArgs) -> Result<()> {
    let s = args.resolve()?;
    let ast = parse_formula(&s.formula)?;
    let schema = ast.schema(s.id.clone());
    let data = load_dataset(&s.data, &schema)?;
    let baseline = BaselineOptions {
        family: s.basehaz.clone(),
        spline: SplineOptions {
            degree: s.basehaz_degree,
            df: s.basehaz_df,
            knots: s.basehaz_knots.clone(),
        },
    };
    let mut spec = build_spec(&ast, &data, &baseline)?;
    spec.qnodes = s.qnodes;
    spec.prior_only = s.prior_only;
    spec.priors = s.priors;
    let fitted = bayes_surv::fit::fit(&spec, &data, &s.sampler)?;
    let diag = write_bundle(&s.out, &fitted, Some(&schema))?;
    print!("{}", report::fit_summary(&fitted, &diag));
    Ok(())
}

pub fn predict(args: PredictArgs) -> Result<()> {
    let bundle = read_bundle(&args.fit)?;
    let fitted = &bundle.fitted;
    let quantity: Quantity = args.quantity.parse()?;
    let rows = read_new_data(File::open(&args.newdata)?, &fitted.spec, args.id.as_deref())?;
    let t_max = fitted.t_max();
    let times = if args.extrapolate {
        let start = match args.times.as_deref() {
            None => 0.0,
            Some([t]) => *t,
            Some(_) => return Err(Error::Config("--extrapolate takes a single start time".into())),
        };
        let edist = args.edist.unwrap_or(t_max - start);
        time_grid(start, start + edist, args.grid)
    } else {
        args.times.unwrap_or_else(|| time_grid(0.0, t_max, args.grid))
    };
    let req = PredictionRequest {
        condition_time: args.condition_time,
        standardise: args.standardise,
        level: args.level,
        ..PredictionRequest::new(rows, quantity, times)
    };
    let frame = predict_curves(fitted, &req)?;
    frame.write_csv(output(args.out.as_deref())?)
}

pub fn check(args: CheckArgs) -> Result<()> {
    let bundle = read_bundle(&args.fit)?;
    let data = load_fit_data(&bundle, &args.data)?;
    let pc = ps_check(&bundle.fitted, &data, args.grid)?;
    pc.write_csv(output(args.out.as_deref())?)?;
    eprintln!(
        "max |predictive median - Kaplan-Meier| over {} grid points: {:.4}",
        pc.times.len(),
        pc.max_discrepancy
    );
    Ok(())
}

#[derive(Serialize)]
struct ComparisonReport {
    criterion: &'static str,
    models: Vec<ModelElpd>,
    ranking: Vec<ComparisonRow>,
}

#[derive(Serialize)]
struct ModelElpd {
    model: String,
    elpd: f64,
    p_eff: f64,
    se: f64,
}

pub fn compare(args: CompareArgs) -> Result<()> {
    let unit = if args.by_subject { UnitDefinition::PerGroup } else { UnitDefinition::PerRow };
    let mut models: Vec<(String, Elpd)> = Vec::new();
    for dir in &args.fits {
        let bundle = read_bundle(dir)?;
        let data = load_fit_data(&bundle, &args.data)?;
        let ll = log_lik_matrix(&bundle.fitted.spec, &bundle.fitted.draws, &data, unit)?;
        let elpd = match args.criterion {
            Criterion::Waic => waic(&ll)?,
            Criterion::Loo => loo_raw(&ll)?,
        };
        let name = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| dir.display().to_string());
        models.push((name, elpd));
    }
    let ranking = rank_models(&models)?;
    print!("{}", report::comparison_table(&ranking));
    if let Some(path) = &args.out {
        let rep = ComparisonReport {
            criterion: match args.criterion {
                Criterion::Waic => "waic",
                Criterion::Loo => "loo",
            },
            models: models
                .iter()
                .map(|(m, e)| ModelElpd {
                    model: m.clone(),
                    elpd: e.elpd,
                    p_eff: e.p_eff,
                    se: e.se,
                })
                .collect(),
            ranking,
        };
        serde_json::to_writer_pretty(BufWriter::new(File::create(path)?), &rep)?;
    }
    Ok(())
}

pub fn simulate(args: SimulateArgs) -> Result<()> {
    let design: SimDesign = serde_json::from_reader(File::open(&args.design)?)?;
    let data = match args.clusters {
        Some(j) => simulate_frailty(&design, args.n, j, args.seed)?,
        None => simulate_design(&design, args.n, args.seed)?,
    };
    data.write_csv(output(args.out.as_deref())?)
}
