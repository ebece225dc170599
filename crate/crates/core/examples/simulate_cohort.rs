// Simulate a biased two-group cohort, split it, and print per-group counts.

use fasm::cohort::{simulate_cohort, stratified_split, summarize, write_csv, SplitSpec};
use fasm::pipeline::biased_cohort_spec;

pub fn run_example() -> fasm::Result<()> {
    let spec = biased_cohort_spec(2000, 7);
    let cohort = simulate_cohort(&spec)?;
    println!("columns: {:?}", cohort.variable_names());

    let summary = summarize(&cohort)?;
    for g in &summary.groups {
        println!("{}: n={} event rate {:.3}", g.label, g.count, g.event_rate);
    }

    let (train, val, test) = stratified_split(&cohort, &SplitSpec::default())?;
    println!(
        "split sizes {} / {} / {}",
        train.len(),
        val.len(),
        test.len()
    );
    assert_eq!(train.len() + val.len() + test.len(), cohort.len());

    let mut csv = Vec::new();
    write_csv(&cohort, &mut csv)?;
    println!("{} CSV bytes", csv.len());
    Ok(())
}

fn main() -> fasm::Result<()> {
    run_example()
}
