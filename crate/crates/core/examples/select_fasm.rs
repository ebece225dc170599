// Pick the member of a Rashomon set with the highest mutual-sensitivity
// index, and show MSI on hand-made profiles.

use fasm::cohort::{simulate_cohort, stratified_split, SplitSpec};
use fasm::coxfit::{FitConfig, Ties};
use fasm::pipeline::biased_cohort_spec;
use fasm::rashomon::{build_integral_set, LikelihoodRatioR2, RashomonConfig, VariablePartition};
use fasm::select::{msi, select_fasm, FairnessProfile, SelectOptions, METRIC_ORDER};

pub fn run_example() -> fasm::Result<()> {
    // Profiles in METRIC_ORDER.
    for (name, m) in [
        ("balanced", [0.01, 0.01, 0.1, 0.01]),
        ("one gap", [0.01, 0.05, 0.3, 0.01]),
    ] {
        println!("{name}: MSI {}", msi(&FairnessProfile::from_values(m))?);
    }
    println!("metric order {METRIC_ORDER:?}");

    let cohort = simulate_cohort(&biased_cohort_spec(3000, 2))?;
    let (train, val, _) = stratified_split(&cohort, &SplitSpec::default())?;
    let partition = VariablePartition::resolve(cohort.variable_names(), &["group".into()])?;
    let config = RashomonConfig {
        n_target: 100,
        seed: 2,
        ..RashomonConfig::default()
    };
    let set = build_integral_set(
        &train,
        &val,
        &partition,
        &config,
        &FitConfig::default(),
        Ties::Efron,
        &LikelihoodRatioR2,
    )?;
    let selection = select_fasm(&set, &val, &SelectOptions::default())?;
    println!("selected {} with MSI {}", selection.id, selection.msi);
    for row in selection.table.iter().take(3) {
        println!("  {} perf {:.4} msi {:?}", row.id, row.performance, row.msi);
    }
    Ok(())
}

fn main() -> fasm::Result<()> {
    run_example()
}
