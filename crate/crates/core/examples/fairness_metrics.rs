// Evaluate a risk score: C-index, integrated AUC, cross-group metrics and
// their disparities, plus a bootstrap interval.

use fasm::cohort::{simulate_cohort, stratified_split, SplitSpec};
use fasm::coxfit::{fit, FitConfig, Ties};
use fasm::pipeline::biased_cohort_spec;
use fasm::rankmetrics::{bootstrap_ci, evaluate, BootstrapConfig, BootstrapMetric, MetricOptions};

pub fn run_example() -> fasm::Result<()> {
    let cohort = simulate_cohort(&biased_cohort_spec(3000, 5))?;
    let (train, _, test) = stratified_split(&cohort, &SplitSpec::default())?;
    let names = train.variable_names().to_vec();
    let (model, _) = fit(&train, &names, &FitConfig::default(), Ties::Efron)?;

    let options = MetricOptions::default();
    let report = evaluate(&test, &model.risk_scores(&test)?, &options)?;
    println!("C-index {:.3}, iAUC {:.3}", report.c_index, report.i_auc);
    for x in &report.x_ci {
        println!("xCI({} -> {}) = {:.3}", x.a, x.b, x.value);
    }
    println!(
        "dCI {:.3}  dIAUC {:.3}  dxCI {:?}  idxAUC {:?}",
        report.delta_ci, report.delta_iauc, report.delta_xci, report.i_delta_xauc
    );

    let boot = BootstrapConfig {
        n_boot: 100,
        ..BootstrapConfig::default()
    };
    let ci = bootstrap_ci(&test, &model, BootstrapMetric::CIndex, &boot, &options)?;
    println!("C-index 95% CI [{:.3}, {:.3}]", ci.lower, ci.upper);
    Ok(())
}

fn main() -> fasm::Result<()> {
    run_example()
}
