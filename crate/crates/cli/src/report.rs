use std::fmt::Write;

use bayes_surv::bundle::Diagnostics;
use bayes_surv::eval::ComparisonRow;
use bayes_surv::fit::FittedModel;
use bayes_surv::summary::summarize;

fn count_line(out: &mut String, label: &str, n: usize, total: usize) {
    let pct = if total == 0 { 0.0 } else { 100.0 * n as f64 / total as f64 };
    let _ = writeln!(out, " {label:<17}{n} ({pct:.0}%)");
}

/// Fit summary: model description, data counts, then one row per parameter.
/// Cluster-level effects `b[...]` are left out of the table.
pub fn fit_summary(fitted: &FittedModel, diag: &Diagnostics) -> String {
    let spec = &fitted.spec;
    let d = &fitted.data;
    let mut out = String::new();
    let scale = if spec.baseline.is_aft() { "accelerated failure time" } else { "proportional hazards" };
    let _ = writeln!(out, "bayes-surv ({scale})");
    let _ = writeln!(out, " baseline hazard: {}", spec.baseline.description());
    let _ = writeln!(out, " formula:         {}", spec.formula.as_deref().unwrap_or("-"));
    let _ = writeln!(out, " observations:    {}", d.observations);
    count_line(&mut out, "events:", d.events, d.observations);
    count_line(&mut out, "right censored:", d.right_censored, d.observations);
    if d.left_censored > 0 {
        count_line(&mut out, "left censored:", d.left_censored, d.observations);
    }
    if d.interval_censored > 0 {
        count_line(&mut out, "interval cens.:", d.interval_censored, d.observations);
    }
    if d.delayed_entry > 0 {
        let _ = writeln!(out, " delayed entry:   yes ({} rows)", d.delayed_entry);
    } else {
        let _ = writeln!(out, " delayed entry:   no");
    }
    if spec.prior_only {
        let _ = writeln!(out, " draws are from the prior only");
    }

    let rows: Vec<_> = summarize(spec, &fitted.draws).into_iter().filter(|p| !p.name.starts_with("b[")).collect();
    let width = rows.iter().map(|p| p.name.len()).max().unwrap_or(0).max(12);
    let _ = writeln!(out, "\nEstimates:");
    let _ = writeln!(out, " {:<width$} {:>9} {:>8} {:>12}", "", "Median", "MAD_SD", "exp(Median)");
    for p in &rows {
        let e = p.exp_median.map(|v| format!("{v:.3}")).unwrap_or_else(|| "NA".into());
        let _ = writeln!(out, " {:<width$} {:>9.3} {:>8.3} {:>12}", p.name, p.median, p.mad_sd, e);
    }
    let draws_per_chain = diag.n_draws.checked_div(diag.n_chains).unwrap_or(0);
    let _ = writeln!(
        out,
        "\nMCMC: {} chains x {} draws; {} divergent ({:.2}%); {} at max treedepth; max Rhat {:.3}",
        diag.n_chains,
        draws_per_chain,
        diag.divergent,
        100.0 * diag.divergent_fraction,
        diag.max_treedepth_hits,
        diag.max_rhat()
    );
    out
}

pub fn comparison_table(rows: &[ComparisonRow]) -> String {
    let width = rows.iter().map(|r| r.model.len()).max().unwrap_or(0).max(5);
    let mut out = String::new();
    let _ = writeln!(out, "{:<width$} {:>10} {:>8}", "", "elpd_diff", "se_diff");
    for r in rows {
        let _ = writeln!(out, "{:<width$} {:>10.1} {:>8.1}", r.model, r.elpd_diff, r.se_diff);
    }
    out
}
