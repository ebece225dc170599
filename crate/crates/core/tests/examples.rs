macro_rules! example {
    ($module:ident, $file:literal) => {
        #[allow(dead_code)]
        mod $module {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", $file));
        }

        #[test]
        fn $module() {
            $module::run_example().expect(concat!($file, " should run"));
        }
    };
}

example!(simulate_cohort, "simulate_cohort.rs");
example!(fit_cox, "fit_cox.rs");
example!(kaplan_meier, "kaplan_meier.rs");
example!(fairness_metrics, "fairness_metrics.rs");
example!(rashomon_set, "rashomon_set.rs");
example!(select_fasm, "select_fasm.rs");
example!(full_pipeline, "full_pipeline.rs");
