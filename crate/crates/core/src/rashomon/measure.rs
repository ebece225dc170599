use std::collections::BTreeMap;

use crate::cohort::SurvivalDataset;
use crate::coxfit::{CoxProblem, Ties};
use crate::error::{Error, Result};

/// A pure, higher-is-better score of a coefficient vector on a prepared
/// dataset. Implementations must not depend on subject order.
pub trait PerformanceMeasure: Send + Sync {
    fn name(&self) -> &str;

    fn parameters(&self) -> BTreeMap<String, f64> {
        BTreeMap::new()
    }

    fn score(&self, problem: &CoxProblem, beta: &[f64]) -> Result<f64>;
}

/// Likelihood-ratio pseudo-R²: 1 - exp(-2 (l(beta) - l(0)) / n), with l the
/// log partial likelihood and n the number of subjects. Zero at beta = 0.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LikelihoodRatioR2;

impl LikelihoodRatioR2 {
    pub const NAME: &'static str = "lr_pseudo_r2";
}

impl PerformanceMeasure for LikelihoodRatioR2 {
    fn name(&self) -> &str {
        Self::NAME
    }

    fn score(&self, problem: &CoxProblem, beta: &[f64]) -> Result<f64> {
        let gain = problem.value(beta)? - problem.null_value();
        Ok(-(-2.0 * gain / problem.n_subjects() as f64).exp_m1())
    }
}

pub fn measure_by_name(name: &str) -> Result<Box<dyn PerformanceMeasure>> {
    match name {
        LikelihoodRatioR2::NAME => Ok(Box::new(LikelihoodRatioR2)),
        other => Err(Error::Config(format!(
            "unknown performance measure `{other}`"
        ))),
    }
}

/// Default measure of `beta` over `roster` on `dataset`.
pub fn performance_r2pl(
    dataset: &SurvivalDataset,
    roster: &[String],
    beta: &[f64],
    ties: Ties,
) -> Result<f64> {
    LikelihoodRatioR2.score(&CoxProblem::new(dataset, roster, ties)?, beta)
}
