//! Near-optimal Cox models: one optimum per subset of sensitive variables,
//! rejection sampling around each optimum, and the integral Rashomon set
//! that unions the case sets passing the near-optimality gate.

mod io;
mod measure;

pub use measure::{measure_by_name, performance_r2pl, LikelihoodRatioR2, PerformanceMeasure};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cohort::SurvivalDataset;
use crate::coxfit::{fit, CoxModel, CoxProblem, FitConfig, FitSummary, Ties};
use crate::error::{Error, Result};

/// Largest sensitive-variable count for which all 2^|S| cases are fitted.
pub const MAX_SENSITIVE: usize = 10;

/// Draws evaluated per parallel batch. Fixed so output never depends on
/// the worker count.
const BATCH: u64 = 256;

/// A sensitive variable and the design columns that carry it (one column for
/// a numeric variable, one indicator per non-reference level otherwise).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitiveVariable {
    pub name: String,
    pub columns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariablePartition {
    pub nonsensitive: Vec<String>,
    pub sensitive: Vec<SensitiveVariable>,
}

impl VariablePartition {
    /// One column per sensitive variable.
    pub fn new(nonsensitive: Vec<String>, sensitive: Vec<String>) -> Self {
        Self {
            nonsensitive,
            sensitive: sensitive
                .into_iter()
                .map(|name| SensitiveVariable {
                    columns: vec![name.clone()],
                    name,
                })
                .collect(),
        }
    }

    /// Resolves sensitive variable names against a design roster. A name
    /// matches the column of the same name or every `name=<level>` indicator.
    /// All remaining columns are nonsensitive.
    pub fn resolve(columns: &[String], sensitive: &[String]) -> Result<Self> {
        let mut vars = Vec::with_capacity(sensitive.len());
        for name in sensitive {
            let prefix = format!("{name}=");
            let cols: Vec<String> = columns
                .iter()
                .filter(|c| *c == name || c.starts_with(&prefix))
                .cloned()
                .collect();
            if cols.is_empty() {
                return Err(Error::Roster {
                    missing: vec![name.clone()],
                });
            }
            vars.push(SensitiveVariable {
                name: name.clone(),
                columns: cols,
            });
        }
        let nonsensitive = columns
            .iter()
            .filter(|c| !vars.iter().any(|v| v.columns.contains(c)))
            .cloned()
            .collect();
        let partition = Self {
            nonsensitive,
            sensitive: vars,
        };
        partition.validate()?;
        Ok(partition)
    }

    pub fn validate(&self) -> Result<()> {
        for (k, v) in self.sensitive.iter().enumerate() {
            if let Some(c) = v.columns.iter().find(|c| {
                self.nonsensitive.contains(c)
                    || self.sensitive[..k].iter().any(|w| w.columns.contains(c))
            }) {
                return Err(Error::Config(format!(
                    "column `{c}` is claimed twice in the variable partition"
                )));
            }
        }
        if self.sensitive.len() > MAX_SENSITIVE {
            return Err(Error::Config(format!(
                "{} sensitive variables; at most {MAX_SENSITIVE} supported",
                self.sensitive.len()
            )));
        }
        Ok(())
    }

    /// Sensitive variables included by subset `mask` (bit k = sensitive[k]).
    pub fn case(&self, mask: u32) -> Vec<String> {
        self.included(mask).map(|v| v.name.clone()).collect()
    }

    fn included(&self, mask: u32) -> impl Iterator<Item = &SensitiveVariable> {
        self.sensitive
            .iter()
            .enumerate()
            .filter(move |(k, _)| mask >> k & 1 == 1)
            .map(|(_, v)| v)
    }

    /// Nonsensitive columns followed by the columns of included variables.
    pub fn roster(&self, mask: u32) -> Vec<String> {
        let mut r = self.nonsensitive.clone();
        for v in self.included(mask) {
            r.extend(v.columns.iter().cloned());
        }
        r
    }

    pub fn full_mask(&self) -> u32 {
        (1u32 << self.sensitive.len()) - 1
    }
}

/// Which margin gates a case optimum into the integral set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateMargin {
    #[default]
    Epsilon,
    Epsilon0,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RashomonConfig {
    /// Integral-set margin.
    pub epsilon: f64,
    /// Case-specific margin, stricter than `epsilon`.
    pub epsilon0: f64,
    pub u1: f64,
    pub u2: f64,
    pub n_target: usize,
    /// Defaults to 50 * n_target.
    pub max_draws: Option<u64>,
    pub seed: u64,
    pub gate: GateMargin,
}

impl Default for RashomonConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.05,
            epsilon0: 0.02,
            u1: 0.1,
            u2: 2.0,
            n_target: 500,
            max_draws: None,
            seed: 0,
            gate: GateMargin::Epsilon,
        }
    }
}

impl RashomonConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.epsilon > 0.0
            && self.epsilon < 1.0
            && self.epsilon0 > 0.0
            && self.epsilon0 < self.epsilon
            && self.u1 > 0.0
            && self.u2 > self.u1
            && self.n_target > 0
            && self.max_draws.is_none_or(|d| d > 0);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "rashomon options need 0 < epsilon0 < epsilon < 1, 0 < u1 < u2, positive counts: {self:?}"
            )))
        }
    }

    pub fn max_draws(&self) -> u64 {
        self.max_draws.unwrap_or(50 * self.n_target as u64)
    }

    fn gate_margin(&self) -> f64 {
        match self.gate {
            GateMargin::Epsilon => self.epsilon,
            GateMargin::Epsilon0 => self.epsilon0,
        }
    }
}

/// A coefficient vector accepted into a case set. `draw` is `None` for the
/// case optimum itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledModel {
    pub case: Vec<String>,
    pub beta: Vec<f64>,
    pub performance: f64,
    pub draw: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceStats {
    pub draws: u64,
    pub accepted: usize,
    pub rate: f64,
}

/// Fitted optimum of one sensitive subset.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseOptimum {
    pub mask: u32,
    pub case: Vec<String>,
    pub roster: Vec<String>,
    pub fit: std::result::Result<(CoxModel, FitSummary), String>,
}

/// One case of the integral set with its accepted members.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseSet {
    pub case: Vec<String>,
    pub roster: Vec<String>,
    pub model: CoxModel,
    pub fit: FitSummary,
    /// Validation performance of the case optimum.
    pub performance: f64,
    /// Acceptance threshold (1 - epsilon0) * performance.
    pub threshold: f64,
    pub members: Vec<SampledModel>,
    pub stats: AcceptanceStats,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling_error: Option<String>,
}

impl CaseSet {
    /// Cox model of a member: its coefficients with the optimum's baseline.
    pub fn member_model(&self, member: &SampledModel) -> CoxModel {
        CoxModel {
            beta: member.beta.clone(),
            ..self.model.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedCase {
    pub case: Vec<String>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RashomonSet {
    pub config: RashomonConfig,
    pub measure: String,
    pub measure_parameters: std::collections::BTreeMap<String, f64>,
    /// Sensitive variables of the full case.
    pub full_case: Vec<String>,
    pub full_performance: f64,
    pub cases: Vec<CaseSet>,
    pub excluded: Vec<ExcludedCase>,
}

impl RashomonSet {
    pub fn member_count(&self) -> usize {
        self.cases.iter().map(|c| c.members.len()).sum()
    }

    pub fn full_case_set(&self) -> Option<&CaseSet> {
        self.cases.iter().find(|c| c.case == self.full_case)
    }
}

/// Fits the optimum of every sensitive subset, in bitmask order. Fit
/// failures are recorded on the case rather than returned.
pub fn case_optima(
    train: &SurvivalDataset,
    partition: &VariablePartition,
    ties: Ties,
    fit_config: &FitConfig,
) -> Result<Vec<CaseOptimum>> {
    partition.validate()?;
    Ok((0..=partition.full_mask())
        .map(|mask| {
            let roster = partition.roster(mask);
            CaseOptimum {
                mask,
                case: partition.case(mask),
                fit: fit(train, &roster, fit_config, ties).map_err(|e| e.to_string()),
                roster,
            }
        })
        .collect())
}

/// Symmetric square root V diag(sqrt(max(lambda, 0))) V'.
fn symmetric_sqrt(cov: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(cov.clone());
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

fn draw_beta(
    center: &DVector<f64>,
    root: &DMatrix<f64>,
    config: &RashomonConfig,
    stream: u64,
    k: u64,
) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ k);
    rng.set_stream(stream);
    let scale: f64 = rng.random_range(config.u1..config.u2);
    let z = DVector::from_fn(center.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
    let beta = center + root * z * scale.sqrt();
    beta.iter().copied().collect()
}

/// Rejection sampling around a case optimum: beta ~ N(beta*, k Sigma*) with
/// k ~ U(u1, u2), accepted iff measure(validation, beta) >=
/// (1 - epsilon0) measure(validation, beta*). Returns accepted draws in draw order,
/// truncated to `n_target`.
pub fn sample_case(
    model: &CoxModel,
    summary: &FitSummary,
    case: &[String],
    validation: &CoxProblem,
    config: &RashomonConfig,
    measure: &dyn PerformanceMeasure,
    stream: u64,
) -> Result<(Vec<SampledModel>, AcceptanceStats)> {
    config.validate()?;
    let center = DVector::from_column_slice(&model.beta);
    let root = symmetric_sqrt(&summary.covariance);
    let threshold = (1.0 - config.epsilon0) * measure.score(validation, &model.beta)?;
    let max_draws = config.max_draws();

    let mut accepted: Vec<SampledModel> = Vec::new();
    let mut draws = max_draws;
    let mut start = 0;
    while start < max_draws && accepted.len() < config.n_target {
        let end = (start + BATCH).min(max_draws);
        let batch: Vec<Option<SampledModel>> = (start..end)
            .into_par_iter()
            .map(|k| {
                let beta = draw_beta(&center, &root, config, stream, k);
                let performance = measure.score(validation, &beta)?;
                Ok((performance >= threshold).then(|| SampledModel {
                    case: case.to_vec(),
                    beta,
                    performance,
                    draw: Some(k),
                }))
            })
            .collect::<Result<_>>()?;
        accepted.extend(batch.into_iter().flatten());
        start = end;
    }
    if accepted.len() >= config.n_target {
        accepted.truncate(config.n_target);
        draws = accepted
            .last()
            .and_then(|m| m.draw)
            .map_or(max_draws, |k| k + 1);
    }
    if accepted.is_empty() {
        return Err(Error::SamplingExhausted {
            case: case.to_vec(),
            draws,
        });
    }
    let stats = AcceptanceStats {
        draws,
        accepted: accepted.len(),
        rate: accepted.len() as f64 / draws as f64,
    };
    Ok((accepted, stats))
}

/// Fits every case on `train`, gates cases against the full model on
/// `validation`, and samples each admitted case.
pub fn build_integral_set(
    train: &SurvivalDataset,
    validation: &SurvivalDataset,
    partition: &VariablePartition,
    config: &RashomonConfig,
    fit_config: &FitConfig,
    ties: Ties,
    measure: &dyn PerformanceMeasure,
) -> Result<RashomonSet> {
    config.validate()?;
    let optima = case_optima(train, partition, ties, fit_config)?;
    let full_mask = partition.full_mask();
    let full = optima
        .iter()
        .find(|o| o.mask == full_mask)
        .expect("full case enumerated");
    let (full_model, _) = full
        .fit
        .as_ref()
        .map_err(|e| Error::Objective(format!("full model fit failed: {e}")))?;
    let full_problem = CoxProblem::new(validation, &full.roster, ties)?;
    let full_performance = measure.score(&full_problem, &full_model.beta)?;
    let gate = (1.0 - config.gate_margin()) * full_performance;

    let mut cases = Vec::new();
    let mut excluded = Vec::new();
    for opt in &optima {
        let (model, summary) = match &opt.fit {
            Ok(f) => f,
            Err(e) => {
                excluded.push(ExcludedCase {
                    case: opt.case.clone(),
                    reason: format!("fit failed: {e}"),
                });
                continue;
            }
        };
        let problem = CoxProblem::new(validation, &opt.roster, ties)?;
        let performance = measure.score(&problem, &model.beta)?;
        if performance < gate {
            excluded.push(ExcludedCase {
                case: opt.case.clone(),
                reason: format!("validation performance {performance} below gate {gate}"),
            });
            continue;
        }
        let threshold = (1.0 - config.epsilon0) * performance;
        let mut members = Vec::new();
        if performance >= threshold {
            members.push(SampledModel {
                case: opt.case.clone(),
                beta: model.beta.clone(),
                performance,
                draw: None,
            });
        }
        let (sampled, stats, sampling_error) = match sample_case(
            model,
            summary,
            &opt.case,
            &problem,
            config,
            measure,
            u64::from(opt.mask),
        ) {
            Ok((s, stats)) => (s, stats, None),
            Err(e) => {
                let draws = config.max_draws();
                (
                    Vec::new(),
                    AcceptanceStats {
                        draws,
                        accepted: 0,
                        rate: 0.0,
                    },
                    Some(e.to_string()),
                )
            }
        };
        members.extend(sampled);
        cases.push(CaseSet {
            case: opt.case.clone(),
            roster: opt.roster.clone(),
            model: model.clone(),
            fit: summary.clone(),
            performance,
            threshold,
            members,
            stats,
            sampling_error,
        });
    }
    Ok(RashomonSet {
        config: config.clone(),
        measure: measure.name().to_string(),
        measure_parameters: measure.parameters(),
        full_case: full.case.clone(),
        full_performance,
        cases,
        excluded,
    })
}
