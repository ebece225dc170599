//! Cox proportional-hazards models: partial likelihood, Newton–Raphson
//! fitting, Breslow baseline hazard, and risk / survival prediction.

mod objective;

pub use objective::{log_partial_likelihood, CoxProblem, Objective};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::censorkm::StepFunction;
use crate::cohort::{Subject, SurvivalDataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ties {
    #[default]
    Efron,
    Breslow,
}

impl std::str::FromStr for Ties {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "efron" => Ok(Ties::Efron),
            "breslow" => Ok(Ties::Breslow),
            other => Err(Error::Config(format!("unknown ties method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub max_iterations: usize,
    /// Relative change of the log partial likelihood that ends iteration.
    pub tolerance: f64,
    pub step_halving_max: usize,
    /// Largest tolerated |beta_k| before declaring separation.
    pub divergence_bound: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            tolerance: 1e-9,
            step_halving_max: 10,
            divergence_bound: 20.0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0
            || self.step_halving_max == 0
            || !(self.tolerance > 0.0)
            || !(self.divergence_bound > 0.0)
        {
            return Err(Error::Config(format!(
                "fit options must be positive: {self:?}"
            )));
        }
        Ok(())
    }
}

fn serialize_matrix<S: Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
    rows.serialize(s)
}

fn deserialize_matrix<'de, D: Deserializer<'de>>(
    d: D,
) -> std::result::Result<DMatrix<f64>, D::Error> {
    let rows: Vec<Vec<f64>> = Vec::deserialize(d)?;
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(serde::de::Error::custom("covariance must be square"));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub log_partial_likelihood_at_optimum: f64,
    pub log_partial_likelihood_null: f64,
    /// Inverse observed information at the optimum.
    #[serde(
        serialize_with = "serialize_matrix",
        deserialize_with = "deserialize_matrix"
    )]
    pub covariance: DMatrix<f64>,
    pub standard_errors: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// A fitted (or perturbed) Cox model over a named covariate roster.
#[derive(Debug, Clone, PartialEq)]
pub struct CoxModel {
    pub variable_names: Vec<String>,
    pub beta: Vec<f64>,
    /// Breslow cumulative baseline hazard H0(t).
    pub baseline_cumhaz: StepFunction,
    pub ties: Ties,
}

#[derive(Serialize, Deserialize)]
struct BaselineWire {
    times: Vec<f64>,
    cumhaz: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CoxModelWire {
    variable_names: Vec<String>,
    beta: Vec<f64>,
    ties: Ties,
    baseline: BaselineWire,
}

impl Serialize for CoxModel {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CoxModelWire {
            variable_names: self.variable_names.clone(),
            beta: self.beta.clone(),
            ties: self.ties,
            baseline: BaselineWire {
                times: self.baseline_cumhaz.times().to_vec(),
                cumhaz: self.baseline_cumhaz.values().to_vec(),
            },
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for CoxModel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let w = CoxModelWire::deserialize(d)?;
        if w.variable_names.len() != w.beta.len() {
            return Err(D::Error::custom("beta and variable_names differ in length"));
        }
        if w.baseline.times.len() != w.baseline.cumhaz.len()
            || !w.baseline.times.windows(2).all(|p| p[0] < p[1])
        {
            return Err(D::Error::custom(
                "baseline times must be strictly increasing and aligned",
            ));
        }
        Ok(CoxModel {
            variable_names: w.variable_names,
            beta: w.beta,
            ties: w.ties,
            baseline_cumhaz: StepFunction::new(w.baseline.times, w.baseline.cumhaz, 0.0),
        })
    }
}

impl CoxModel {
    /// Column indices of this model's roster within `names`.
    pub fn bind(&self, names: &[String]) -> Result<Vec<usize>> {
        let mut missing = Vec::new();
        let idx = self
            .variable_names
            .iter()
            .filter_map(|v| {
                let i = names.iter().position(|n| n == v);
                if i.is_none() {
                    missing.push(v.clone());
                }
                i
            })
            .collect();
        if missing.is_empty() {
            Ok(idx)
        } else {
            Err(Error::Roster { missing })
        }
    }

    fn linear_predictor(&self, columns: &[usize], subject: &Subject) -> f64 {
        columns
            .iter()
            .zip(&self.beta)
            .map(|(&c, b)| b * subject.covariates[c])
            .sum()
    }

    /// Linear predictor beta'x; `names` is the roster of the subject's dataset.
    pub fn predict_risk(&self, names: &[String], subject: &Subject) -> Result<f64> {
        Ok(self.linear_predictor(&self.bind(names)?, subject))
    }

    /// Risk scores for every subject of a dataset, index-aligned.
    pub fn risk_scores(&self, dataset: &SurvivalDataset) -> Result<Vec<f64>> {
        let cols = self.bind(dataset.variable_names())?;
        Ok(dataset
            .subjects()
            .iter()
            .map(|s| self.linear_predictor(&cols, s))
            .collect())
    }

    /// S(t | x) = exp(-H0(t) exp(beta'x)).
    pub fn predict_survival(&self, names: &[String], subject: &Subject, time: f64) -> Result<f64> {
        let eta = self.predict_risk(names, subject)?;
        Ok(survival_from(&self.baseline_cumhaz, eta, time))
    }
}

pub(crate) fn survival_from(baseline: &StepFunction, eta: f64, time: f64) -> f64 {
    (-baseline.eval(time) * eta.exp()).exp().clamp(0.0, 1.0)
}

/// Breslow-type cumulative baseline hazard. Increments are d_t / S0(t)
/// under Breslow ties and the Efron-adjusted sum under Efron ties.
pub fn breslow_baseline(
    dataset: &SurvivalDataset,
    roster: &[String],
    beta: &[f64],
    ties: Ties,
) -> Result<StepFunction> {
    if dataset.event_count() == 0 {
        return Ok(StepFunction::constant(0.0));
    }
    let problem = CoxProblem::new(dataset, roster, ties)?;
    baseline_from_problem(&problem, beta)
}

fn baseline_from_problem(problem: &CoxProblem, beta: &[f64]) -> Result<StepFunction> {
    let mut cum = 0.0;
    let (times, values) = problem
        .baseline_increments(beta)?
        .into_iter()
        .map(|(t, inc)| {
            cum += inc;
            (t, cum)
        })
        .unzip();
    Ok(StepFunction::new(times, values, 0.0))
}

fn invert_information(hessian: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let info = -hessian;
    let chol = info.cholesky().ok_or_else(|| {
        Error::Conditioning("observed information is not positive definite".into())
    })?;
    let inv = chol.inverse();
    Ok((&inv + inv.transpose()) * 0.5)
}

/// Newton–Raphson maximization of the partial likelihood from beta = 0.
pub fn fit(
    dataset: &SurvivalDataset,
    roster: &[String],
    config: &FitConfig,
    ties: Ties,
) -> Result<(CoxModel, FitSummary)> {
    config.validate()?;
    let cols = dataset.column_indices(roster)?;
    for (name, &c) in roster.iter().zip(&cols) {
        let first = dataset.subjects().first().map(|s| s.covariates[c]);
        if dataset
            .subjects()
            .iter()
            .all(|s| Some(s.covariates[c]) == first)
        {
            return Err(Error::DegenerateDesign {
                column: name.clone(),
            });
        }
    }
    let problem = CoxProblem::new(dataset, roster, ties)?;
    let p = roster.len();
    let mut beta = DVector::<f64>::zeros(p);
    let mut obj = problem.evaluate(beta.as_slice())?;
    let null_value = obj.value;
    let mut converged = p == 0;
    let mut iterations = 0;

    while !converged && iterations < config.max_iterations {
        iterations += 1;
        let info = -&obj.hessian;
        let step = info
            .cholesky()
            .ok_or_else(|| {
                Error::Conditioning(format!("singular information at iteration {iterations}"))
            })?
            .solve(&obj.gradient);
        let mut scale = 1.0;
        let mut candidate = &beta + &step;
        let mut value = problem.value(candidate.as_slice())?;
        let mut halvings = 0;
        while !(value >= obj.value) && halvings < config.step_halving_max {
            scale *= 0.5;
            halvings += 1;
            candidate = &beta + &step * scale;
            value = problem.value(candidate.as_slice())?;
        }
        if !(value >= obj.value) {
            // No ascent along the Newton direction: numerically at the optimum.
            converged = true;
            break;
        }
        if let Some(k) = candidate
            .iter()
            .position(|b| b.abs() > config.divergence_bound)
        {
            return Err(Error::Separation {
                column: roster[k].clone(),
                bound: config.divergence_bound,
            });
        }
        let change = (value - obj.value).abs();
        let relative = if obj.value != 0.0 {
            change / obj.value.abs()
        } else {
            change
        };
        beta = candidate;
        obj = problem.evaluate(beta.as_slice())?;
        converged = relative < config.tolerance;
    }

    let covariance = if p == 0 {
        DMatrix::zeros(0, 0)
    } else {
        invert_information(&obj.hessian)?
    };
    let standard_errors = (0..p).map(|k| covariance[(k, k)].max(0.0).sqrt()).collect();
    let beta: Vec<f64> = beta.iter().copied().collect();
    let model = CoxModel {
        variable_names: roster.to_vec(),
        baseline_cumhaz: baseline_from_problem(&problem, &beta)?,
        beta,
        ties,
    };
    let summary = FitSummary {
        log_partial_likelihood_at_optimum: obj.value,
        log_partial_likelihood_null: null_value,
        covariance,
        standard_errors,
        iterations,
        converged,
    };
    Ok((model, summary))
}
