// Run the whole pipeline in memory and print the CoxPH / Under-blindness /
// FASM comparison on the test split.

use fasm::pipeline::{biased_cohort_spec, run_pipeline, PipelineConfig};

pub fn run_example() -> fasm::Result<()> {
    let mut config = PipelineConfig::default();
    config.data.simulate = Some(biased_cohort_spec(3000, 0));
    config.sensitive = vec!["group".into()];
    config.rashomon.config.n_target = 100;
    config.bootstrap.n_boot = 100;
    let config = config.with_seed(4);

    let outputs = run_pipeline(&config, None)?;
    for row in &outputs.comparison {
        println!(
            "{:<16} dxCI {:?}  idxAUC {:?}  C {:.3}  MSI {:?}",
            row.model, row.delta_xci, row.i_delta_xauc, row.c_index.point, row.msi
        );
    }
    for f in &outputs.manifest.files {
        println!("{} {} bytes {}", f.name, f.bytes, &f.sha256[..12]);
    }
    Ok(())
}

fn main() -> fasm::Result<()> {
    run_example()
}
