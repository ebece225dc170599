// Kaplan-Meier survival, the censoring curve, and the IPCW weights built
// from it.

use fasm::censorkm::{censoring_km, kaplan_meier, Ipcw, DEFAULT_TRUNCATION_FLOOR};
use fasm::cohort::simulate_cohort;
use fasm::pipeline::biased_cohort_spec;

pub fn run_example() -> fasm::Result<()> {
    let cohort = simulate_cohort(&biased_cohort_spec(1000, 3))?;
    let s = kaplan_meier(&cohort);
    let g = censoring_km(&cohort);
    for t in [12.0, 36.0, 60.0, 120.0] {
        println!("t={t:>5}: S={:.3}  G={:.3}", s.eval(t), g.eval(t));
    }

    let pooled = Ipcw::overall(&cohort, DEFAULT_TRUNCATION_FLOOR);
    let by_group = Ipcw::per_group(&cohort, DEFAULT_TRUNCATION_FLOOR);
    let i = cohort.subjects().iter().position(|s| s.event).unwrap_or(0);
    let t = cohort.subjects()[i].time;
    println!(
        "case weight of subject {i} at {t:.1}: pooled {:.3}, per group {:.3}",
        pooled.case_weight(i, t),
        by_group.case_weight(i, t)
    );
    Ok(())
}

fn main() -> fasm::Result<()> {
    run_example()
}
