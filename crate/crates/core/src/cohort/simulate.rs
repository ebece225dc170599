use std::collections::BTreeMap;

use rand::distr::Open01;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Subject, SurvivalDataset};
use crate::error::{Error, Result};

/// Generator settings for a synthetic cohort with a Weibull baseline,
/// per-group exponential censoring and optional administrative censoring.
///
/// `true_beta` keys of the form `group=<level>` are coefficients on group
/// indicators; every other key names a standard-normal covariate. Indicators
/// are emitted for every non-reference level (reference = first level).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub n: usize,
    pub group_proportions: BTreeMap<String, f64>,
    pub true_beta: BTreeMap<String, f64>,
    pub baseline_shape: f64,
    pub baseline_scale: f64,
    #[serde(default)]
    pub censor_rate: BTreeMap<String, f64>,
    /// Administrative censoring time; `None` means no horizon.
    #[serde(default)]
    pub horizon: Option<f64>,
    pub seed: u64,
}

impl SimSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n == 0 {
            return bad("n must be positive".into());
        }
        if self.group_proportions.is_empty() {
            return bad("group_proportions is empty".into());
        }
        if self
            .group_proportions
            .values()
            .any(|&p| !(p > 0.0 && p <= 1.0))
        {
            return bad("group proportions must lie in (0, 1]".into());
        }
        let total: f64 = self.group_proportions.values().sum();
        if (total - 1.0).abs() > 1e-9 {
            return bad(format!("group proportions sum to {total}, expected 1"));
        }
        if !(self.baseline_shape > 0.0 && self.baseline_scale > 0.0)
            || !self.baseline_shape.is_finite()
            || !self.baseline_scale.is_finite()
        {
            return bad("baseline shape and scale must be positive".into());
        }
        for (g, &r) in &self.censor_rate {
            if !self.group_proportions.contains_key(g) {
                return bad(format!("censor_rate names unknown group `{g}`"));
            }
            if !(r >= 0.0 && r.is_finite()) {
                return bad(format!("censor_rate for `{g}` must be nonnegative"));
            }
        }
        if let Some(h) = self.horizon {
            if !(h > 0.0) {
                return bad("horizon must be positive".into());
            }
        }
        for (name, b) in &self.true_beta {
            if !b.is_finite() {
                return bad(format!("coefficient `{name}` is not finite"));
            }
            if let Some(level) = name.strip_prefix("group=") {
                if !self.group_proportions.contains_key(level) {
                    return bad(format!("`{name}` names unknown group"));
                }
            }
        }
        Ok(())
    }

    /// Continuous covariates (sorted), then indicators for non-reference groups.
    pub fn variable_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self
            .true_beta
            .keys()
            .filter(|k| !k.starts_with("group="))
            .cloned()
            .collect();
        names.extend(
            self.group_proportions
                .keys()
                .skip(1)
                .map(|g| format!("group={g}")),
        );
        names
    }

    /// True coefficient vector aligned with [`SimSpec::variable_names`].
    pub fn beta_vector(&self) -> Vec<f64> {
        self.variable_names()
            .iter()
            .map(|n| self.true_beta.get(n).copied().unwrap_or(0.0))
            .collect()
    }
}

pub fn simulate_cohort(spec: &SimSpec) -> Result<SurvivalDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let levels: Vec<&String> = spec.group_proportions.keys().collect();
    let cumulative: Vec<f64> = spec
        .group_proportions
        .values()
        .scan(0.0, |acc, p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    let names = spec.variable_names();
    let beta = spec.beta_vector();
    let n_cont = names.iter().filter(|n| !n.starts_with("group=")).count();

    // Stratified quantiles: subject i gets u in its own 1/n cell of a
    // random permutation, which pins group counts to within one of n*p.
    let mut cells: Vec<usize> = (0..spec.n).collect();
    cells.shuffle(&mut rng);

    let mut subjects = Vec::with_capacity(spec.n);
    for &cell in &cells {
        let jitter: f64 = rng.random();
        let u = (cell as f64 + jitter) / spec.n as f64;
        let g = cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or(levels.len() - 1);
        let group = levels[g].clone();

        let mut x: Vec<f64> = (0..n_cont).map(|_| rng.sample(StandardNormal)).collect();
        x.extend((1..levels.len()).map(|k| f64::from(k == g)));
        let eta: f64 = x.iter().zip(&beta).map(|(a, b)| a * b).sum();

        let e: f64 = rng.sample(Open01);
        let event_time =
            spec.baseline_scale * (-e.ln() / eta.exp()).powf(1.0 / spec.baseline_shape);
        let c: f64 = rng.sample(Open01);
        let rate = spec.censor_rate.get(&group).copied().unwrap_or(0.0);
        let censor_time = if rate > 0.0 {
            -c.ln() / rate
        } else {
            f64::INFINITY
        };
        let limit = censor_time.min(spec.horizon.unwrap_or(f64::INFINITY));
        let (time, event) = if event_time <= limit {
            (event_time, true)
        } else {
            (limit, false)
        };
        subjects.push(Subject {
            covariates: x,
            time,
            event,
            group,
        });
    }
    SurvivalDataset::new(names, subjects)
}
