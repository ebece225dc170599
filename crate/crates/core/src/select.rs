//! Fairness profiles, the Model Selection Index (MSI) and selection of the
//! fairest near-optimal model.

use std::cmp::Ordering;
use std::fmt;

use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::cohort::SurvivalDataset;
use crate::coxfit::CoxModel;
use crate::error::{Error, Result};
use crate::rankmetrics::{evaluate, MetricOptions, TimeGrid};
use crate::rashomon::RashomonSet;

/// Metric order around the MSI cycle. Adjacency matters for J = 4, so the
/// order is part of every report.
pub const METRIC_ORDER: [&str; 4] = ["delta_iauc", "delta_ci", "delta_xci", "i_delta_xauc"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FairnessProfile {
    pub names: Vec<String>,
    pub metrics: Vec<f64>,
    pub grid: Option<TimeGrid>,
}

impl FairnessProfile {
    /// Profile in the canonical order, without a grid.
    pub fn from_values(metrics: [f64; 4]) -> Self {
        Self {
            names: METRIC_ORDER.iter().map(|s| s.to_string()).collect(),
            metrics: metrics.to_vec(),
            grid: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.metrics.len() < 2 || self.names.len() != self.metrics.len() {
            return Err(Error::Config(format!(
                "fairness profile needs at least 2 named metrics, got {}",
                self.metrics.len()
            )));
        }
        if let Some((name, v)) = self
            .names
            .iter()
            .zip(&self.metrics)
            .find(|(_, v)| !(**v >= 0.0))
        {
            return Err(Error::Config(format!(
                "fairness metric `{name}` is {v}, must be >= 0"
            )));
        }
        Ok(())
    }
}

/// MSI is +infinity exactly when the cyclic product sum is 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MsiValue {
    Finite(f64),
    Infinite,
}

impl MsiValue {
    pub fn as_f64(self) -> f64 {
        match self {
            MsiValue::Finite(v) => v,
            MsiValue::Infinite => f64::INFINITY,
        }
    }

    pub fn is_infinite(self) -> bool {
        self == MsiValue::Infinite
    }
}

impl PartialOrd for MsiValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.as_f64().total_cmp(&other.as_f64()))
    }
}

impl Serialize for MsiValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            MsiValue::Finite(v) => s.serialize_f64(*v),
            MsiValue::Infinite => s.serialize_str("inf"),
        }
    }
}

impl fmt::Display for MsiValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MsiValue::Finite(v) => write!(f, "{v:.2}"),
            MsiValue::Infinite => f.write_str("inf"),
        }
    }
}

/// Sum over j of m_j * m_{j+1}, wrapping m_{J+1} to m_1.
pub fn cyclic_product_sum(metrics: &[f64]) -> f64 {
    let j = metrics.len();
    (0..j).map(|k| metrics[k] * metrics[(k + 1) % j]).sum()
}

/// MSI = 1 / sum_j m_j m_{j+1} (cyclic).
pub fn msi(profile: &FairnessProfile) -> Result<MsiValue> {
    profile.validate()?;
    let sum = cyclic_product_sum(&profile.metrics);
    Ok(if sum == 0.0 {
        MsiValue::Infinite
    } else {
        MsiValue::Finite(1.0 / sum)
    })
}

/// Disparity profile of `model` on `dataset`, censoring and survival curves
/// estimated on `dataset`.
pub fn fairness_profile(
    model: &CoxModel,
    dataset: &SurvivalDataset,
    options: &MetricOptions,
) -> Result<FairnessProfile> {
    if dataset.group_levels().len() < 2 {
        return Err(Error::MetricUndefined(
            "cross-group metrics need at least two groups".into(),
        ));
    }
    let report = evaluate(dataset, &model.risk_scores(dataset)?, options)?;
    let missing = || Error::MetricUndefined("cross-group disparities unavailable".into());
    Ok(FairnessProfile {
        names: METRIC_ORDER.iter().map(|s| s.to_string()).collect(),
        metrics: vec![
            report.delta_iauc,
            report.delta_ci,
            report.delta_xci.ok_or_else(missing)?,
            report.i_delta_xauc.ok_or_else(missing)?,
        ],
        grid: Some(options.grid.clone()),
    })
}

/// Identifies a member of a Rashomon set: its sensitive-subset tag and draw
/// index (`None` for the case optimum).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CandidateId {
    pub case: Vec<String>,
    pub draw: Option<u64>,
}

impl fmt::Display for CandidateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]/", self.case.join(","))?;
        match self.draw {
            Some(k) => write!(f, "draw-{k}"),
            None => f.write_str("optimum"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedCandidate {
    pub id: CandidateId,
    pub performance: f64,
    pub profile: Option<Vec<f64>>,
    pub msi: Option<MsiValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct SelectOptions {
    pub metrics: MetricOptions,
    /// Min-max normalize each metric across candidates before MSI.
    pub normalize: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Selection {
    pub id: CandidateId,
    pub model: CoxModel,
    pub profile: FairnessProfile,
    pub msi: MsiValue,
    pub metric_order: Vec<String>,
    pub normalized: bool,
    /// Every candidate, best first.
    pub table: Vec<RankedCandidate>,
}

/// Higher MSI first, then higher performance, then lower draw index with the
/// case optimum first.
fn rank_order(a: &RankedCandidate, b: &RankedCandidate) -> Ordering {
    match (a.msi, b.msi) {
        (Some(x), Some(y)) => y
            .partial_cmp(&x)
            .unwrap_or(Ordering::Equal)
            .then(b.performance.total_cmp(&a.performance))
            .then(a.id.draw.cmp(&b.id.draw)),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    }
}

fn min_max_normalize(profiles: &mut [Option<Vec<f64>>]) {
    let Some(j) = profiles.iter().flatten().map(Vec::len).next() else {
        return;
    };
    for k in 0..j {
        let vals = profiles.iter().flatten().map(|p| p[k]);
        let lo = vals.clone().fold(f64::INFINITY, f64::min);
        let hi = vals.fold(f64::NEG_INFINITY, f64::max);
        for p in profiles.iter_mut().flatten() {
            p[k] = if hi > lo {
                (p[k] - lo) / (hi - lo)
            } else {
                0.0
            };
        }
    }
}

/// Profiles every member of `set` on `dataset` and returns the member with the
/// highest MSI together with the full ranked table.
pub fn select_fasm(
    set: &RashomonSet,
    dataset: &SurvivalDataset,
    options: &SelectOptions,
) -> Result<Selection> {
    options.metrics.validate()?;
    let members: Vec<(usize, usize)> = set
        .cases
        .iter()
        .enumerate()
        .flat_map(|(c, case)| (0..case.members.len()).map(move |m| (c, m)))
        .collect();
    if members.is_empty() {
        return Err(Error::Selection("Rashomon set has no members".into()));
    }
    let outcomes: Vec<Result<FairnessProfile>> = members
        .par_iter()
        .map(|&(c, m)| {
            let case = &set.cases[c];
            fairness_profile(
                &case.member_model(&case.members[m]),
                dataset,
                &options.metrics,
            )
        })
        .collect();

    let mut profiles: Vec<Option<Vec<f64>>> = outcomes
        .iter()
        .map(|o| o.as_ref().ok().map(|p| p.metrics.clone()))
        .collect();
    if options.normalize {
        min_max_normalize(&mut profiles);
    }
    let mut table = Vec::with_capacity(members.len());
    for ((&(c, m), outcome), scored) in members.iter().zip(&outcomes).zip(&profiles) {
        let member = &set.cases[c].members[m];
        let (msi_value, error) = match (outcome, scored) {
            (Ok(p), Some(v)) => match msi(&FairnessProfile {
                metrics: v.clone(),
                ..p.clone()
            }) {
                Ok(x) => (Some(x), None),
                Err(e) => (None, Some(e.to_string())),
            },
            (Err(e), _) => (None, Some(e.to_string())),
            (Ok(_), None) => unreachable!("profile recorded for every success"),
        };
        table.push((
            (c, m),
            RankedCandidate {
                id: CandidateId {
                    case: member.case.clone(),
                    draw: member.draw,
                },
                performance: member.performance,
                profile: scored.clone(),
                msi: msi_value,
                error,
            },
        ));
    }
    table.sort_by(|a, b| rank_order(&a.1, &b.1));
    let ((c, m), best) = table
        .first()
        .filter(|(_, r)| r.msi.is_some())
        .cloned()
        .ok_or_else(|| Error::Selection("every candidate failed fairness profiling".into()))?;
    let index = members
        .iter()
        .position(|&x| x == (c, m))
        .expect("member listed");
    let mut profile = outcomes[index].as_ref().expect("profiled").clone();
    profile.metrics = best.profile.clone().expect("profiled");
    let case = &set.cases[c];
    Ok(Selection {
        id: best.id.clone(),
        model: case.member_model(&case.members[m]),
        profile,
        msi: best.msi.expect("ranked first with a value"),
        metric_order: METRIC_ORDER.iter().map(|s| s.to_string()).collect(),
        normalized: options.normalize,
        table: table.into_iter().map(|(_, r)| r).collect(),
    })
}
