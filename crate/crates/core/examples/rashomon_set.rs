// Build the integral Rashomon set over the group indicator and write it as
// JSON lines.

use fasm::cohort::{simulate_cohort, stratified_split, SplitSpec};
use fasm::coxfit::{FitConfig, Ties};
use fasm::pipeline::biased_cohort_spec;
use fasm::rashomon::{
    build_integral_set, LikelihoodRatioR2, RashomonConfig, RashomonSet, VariablePartition,
};

pub fn run_example() -> fasm::Result<()> {
    let cohort = simulate_cohort(&biased_cohort_spec(3000, 9))?;
    let (train, val, _) = stratified_split(&cohort, &SplitSpec::default())?;
    let partition = VariablePartition::resolve(cohort.variable_names(), &["group".into()])?;
    let config = RashomonConfig {
        n_target: 200,
        seed: 9,
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

    println!("full model performance {:.4}", set.full_performance);
    for case in &set.cases {
        println!(
            "case {:?}: optimum {:.4}, {} members, acceptance rate {:.2}",
            case.case,
            case.performance,
            case.members.len(),
            case.stats.rate
        );
    }
    for ex in &set.excluded {
        println!("excluded {:?}: {}", ex.case, ex.reason);
    }

    let mut jsonl = Vec::new();
    set.write_jsonl(&mut jsonl)?;
    assert_eq!(RashomonSet::read_jsonl(jsonl.as_slice())?, set);
    Ok(())
}

fn main() -> fasm::Result<()> {
    run_example()
}
