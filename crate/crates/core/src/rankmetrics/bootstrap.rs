use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{grid_masses, integrate, MetricOptions, Prepared};
use crate::censorkm::kaplan_meier;
use crate::cohort::{quantile, SurvivalDataset};
use crate::coxfit::CoxModel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BootstrapMetric {
    CIndex,
    IAuc,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BootstrapConfig {
    pub n_boot: usize,
    pub seed: u64,
    /// Resample within each group instead of from the pooled cohort.
    pub stratified: bool,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            n_boot: 200,
            seed: 0,
            stratified: false,
        }
    }
}

/// Percentile interval around a point estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConfidenceInterval {
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
    pub replicates: usize,
    pub dropped: usize,
}

fn metric_on(
    dataset: &SurvivalDataset,
    scores: &[f64],
    metric: BootstrapMetric,
    options: &MetricOptions,
) -> Result<f64> {
    let ipcw = options.ipcw(dataset);
    let prepared = Prepared::new(dataset, scores, &ipcw)?;
    match metric {
        BootstrapMetric::CIndex => prepared.concordance(None, None),
        BootstrapMetric::IAuc => {
            let series = prepared.auc_series(None, None, &options.grid.points);
            let masses = grid_masses(&kaplan_meier(dataset), &options.grid);
            Ok(integrate(&series, &masses)?.value)
        }
    }
}

/// Nonparametric bootstrap 95% percentile interval. Replicate `r` draws from
/// its own RNG stream seeded with `seed ^ r`; censoring and survival curves
/// are re-estimated on each replicate.
pub fn bootstrap_ci(
    dataset: &SurvivalDataset,
    model: &CoxModel,
    metric: BootstrapMetric,
    config: &BootstrapConfig,
    options: &MetricOptions,
) -> Result<ConfidenceInterval> {
    if config.n_boot < 100 {
        return Err(Error::Config(format!(
            "n_boot must be at least 100, got {}",
            config.n_boot
        )));
    }
    options.validate()?;
    let scores = model.risk_scores(dataset)?;
    let point = metric_on(dataset, &scores, metric, options)?;

    let n = dataset.len();
    let strata: Vec<Vec<usize>> = if config.stratified {
        let gids = dataset.group_ids();
        (0..dataset.group_levels().len())
            .map(|g| (0..n).filter(|&i| gids[i] == g).collect())
            .collect()
    } else {
        vec![(0..n).collect()]
    };

    let outcomes: Vec<Option<f64>> = (0..config.n_boot as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ r);
            let mut rows = Vec::with_capacity(n);
            for stratum in &strata {
                rows.extend(
                    (0..stratum.len()).map(|_| stratum[rng.random_range(0..stratum.len())]),
                );
            }
            let sample = dataset.subset(&rows);
            let sample_scores: Vec<f64> = rows.iter().map(|&i| scores[i]).collect();
            metric_on(&sample, &sample_scores, metric, options).ok()
        })
        .collect();

    let mut values: Vec<f64> = outcomes.iter().flatten().copied().collect();
    let dropped = config.n_boot - values.len();
    if dropped * 10 > config.n_boot {
        return Err(Error::Bootstrap {
            dropped,
            total: config.n_boot,
        });
    }
    values.sort_by(f64::total_cmp);
    Ok(ConfidenceInterval {
        point,
        lower: quantile(&values, 0.025),
        upper: quantile(&values, 0.975),
        replicates: values.len(),
        dropped,
    })
}
