// Fit a Cox model with Efron ties and compare it against the generating
// coefficients.

use fasm::cohort::simulate_cohort;
use fasm::coxfit::{fit, FitConfig, Ties};
use fasm::pipeline::biased_cohort_spec;

pub fn run_example() -> fasm::Result<()> {
    let spec = biased_cohort_spec(3000, 1);
    let cohort = simulate_cohort(&spec)?;
    let names = spec.variable_names();
    let (model, summary) = fit(&cohort, &names, &FitConfig::default(), Ties::Efron)?;

    for ((name, b), (se, truth)) in names
        .iter()
        .zip(&model.beta)
        .zip(summary.standard_errors.iter().zip(spec.beta_vector()))
    {
        println!("{name:>8}: {b:+.3} (se {se:.3}, true {truth:+.1})");
    }
    println!("converged in {} iterations", summary.iterations);

    let first = &cohort.subjects()[0];
    let s = model.predict_survival(&names, first, 60.0)?;
    println!("S(60 | first subject) = {s:.3}");
    Ok(())
}

fn main() -> fasm::Result<()> {
    run_example()
}
