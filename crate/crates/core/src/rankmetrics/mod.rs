//! Intra-group and cross-group ranking metrics under censoring: C-index,
//! time-dependent AUC, their cross-group variants, time integration over a
//! grid, subgroup disparities, and bootstrap intervals.

mod bootstrap;
mod concordance;
mod integrate;

pub use bootstrap::{bootstrap_ci, BootstrapConfig, BootstrapMetric, ConfidenceInterval};
pub use concordance::{auc_t, c_index, x_ci, Prepared};
pub use integrate::{
    disparities, grid_masses, i_auc, integrate, CrossDisparities, Disparities, DisparityInputs,
    Integrated, TimeGrid,
};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::censorkm::{kaplan_meier, Ipcw, DEFAULT_TRUNCATION_FLOOR};
use crate::cohort::SurvivalDataset;
use crate::error::{Error, Result};

/// Which censoring curve weights a subject: one pooled G, or G per group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CensoringMode {
    #[default]
    Overall,
    PerGroup,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricOptions {
    pub grid: TimeGrid,
    pub truncation_floor: f64,
    pub censoring: CensoringMode,
}

impl Default for MetricOptions {
    fn default() -> Self {
        Self {
            grid: TimeGrid::monthly_ten_years(),
            truncation_floor: DEFAULT_TRUNCATION_FLOOR,
            censoring: CensoringMode::Overall,
        }
    }
}

impl MetricOptions {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if !(self.truncation_floor > 0.0 && self.truncation_floor <= 1.0) {
            return Err(Error::Config("truncation floor must lie in (0, 1]".into()));
        }
        Ok(())
    }

    pub fn ipcw(&self, dataset: &SurvivalDataset) -> Ipcw {
        match self.censoring {
            CensoringMode::Overall => Ipcw::overall(dataset, self.truncation_floor),
            CensoringMode::PerGroup => Ipcw::per_group(dataset, self.truncation_floor),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairValue {
    pub a: String,
    pub b: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairSeries {
    pub a: String,
    pub b: String,
    pub values: Vec<Option<f64>>,
}

/// Performance and fairness metrics of one risk score on one dataset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub groups: Vec<String>,
    pub censoring: CensoringMode,
    pub truncation_floor: f64,
    pub grid: TimeGrid,
    pub c_index: f64,
    pub c_index_by_group: BTreeMap<String, f64>,
    pub i_auc: f64,
    pub i_auc_by_group: BTreeMap<String, f64>,
    pub auc_t: Vec<Option<f64>>,
    pub x_ci: Vec<PairValue>,
    pub x_auc: Vec<PairSeries>,
    pub delta_ci: f64,
    pub delta_iauc: f64,
    pub delta_xci: Option<f64>,
    pub delta_xauc: Option<Vec<Option<f64>>>,
    pub i_delta_xauc: Option<f64>,
    /// Grid indices whose S-hat mass was merged into a neighbour in iΔxAUC.
    pub merged_points: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bootstrap: Option<BootstrapBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapBlock {
    pub c_index: ConfidenceInterval,
    pub i_auc: ConfidenceInterval,
}

/// One row of the long-format export.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TidyRow {
    pub metric: String,
    pub group_or_pair: String,
    pub time: Option<f64>,
    pub value: Option<f64>,
}

impl MetricReport {
    /// Long-format rows: scalars have no time; series have one row per point.
    pub fn tidy_rows(&self) -> Vec<TidyRow> {
        let mut rows = Vec::new();
        let mut scalar = |metric: &str, key: &str, value: f64| {
            rows.push(TidyRow {
                metric: metric.into(),
                group_or_pair: key.into(),
                time: None,
                value: Some(value),
            })
        };
        scalar("c_index", "all", self.c_index);
        for (g, v) in &self.c_index_by_group {
            scalar("c_index", g, *v);
        }
        scalar("i_auc", "all", self.i_auc);
        for (g, v) in &self.i_auc_by_group {
            scalar("i_auc", g, *v);
        }
        for p in &self.x_ci {
            scalar("x_ci", &format!("{}|{}", p.a, p.b), p.value);
        }
        scalar("delta_ci", "all", self.delta_ci);
        scalar("delta_iauc", "all", self.delta_iauc);
        if let Some(v) = self.delta_xci {
            scalar("delta_xci", "all", v);
        }
        if let Some(v) = self.i_delta_xauc {
            scalar("i_delta_xauc", "all", v);
        }
        let points = &self.grid.points;
        let mut series = |metric: &str, key: &str, values: &[Option<f64>]| {
            for (t, v) in points.iter().zip(values) {
                rows.push(TidyRow {
                    metric: metric.into(),
                    group_or_pair: key.into(),
                    time: Some(*t),
                    value: *v,
                });
            }
        };
        series("auc_t", "all", &self.auc_t);
        for p in &self.x_auc {
            series("x_auc", &format!("{}|{}", p.a, p.b), &p.values);
        }
        if let Some(d) = &self.delta_xauc {
            let key = if self.groups.len() == 2 {
                format!("{}|{}", self.groups[0], self.groups[1])
            } else {
                "max".to_string()
            };
            series("delta_xauc", &key, d);
        }
        rows
    }
}

/// Computes every metric of the report for `scores` on `dataset`. The
/// censoring curve(s) and S-hat are estimated on `dataset` itself.
pub fn evaluate(
    dataset: &SurvivalDataset,
    scores: &[f64],
    options: &MetricOptions,
) -> Result<MetricReport> {
    options.validate()?;
    let ipcw = options.ipcw(dataset);
    let s_hat = kaplan_meier(dataset);
    let masses = grid_masses(&s_hat, &options.grid);
    let prepared = Prepared::new(dataset, scores, &ipcw)?;
    let levels = dataset.group_levels().to_vec();
    let k = levels.len();
    let points = &options.grid.points;

    let c_index = prepared.concordance(None, None)?;
    let auc_t = prepared.auc_series(None, None, points);
    let i_auc = integrate(&auc_t, &masses)?.value;

    let mut per_group_ci = Vec::with_capacity(k);
    let mut per_group_iauc = Vec::with_capacity(k);
    for (g, label) in levels.iter().enumerate() {
        let ci = prepared
            .concordance(Some(g), Some(g))
            .map_err(|e| Error::MetricUndefined(format!("C-index of group `{label}`: {e}")))?;
        let series = prepared.auc_series(Some(g), Some(g), points);
        let ia = integrate(&series, &masses)
            .map_err(|e| Error::MetricUndefined(format!("iAUC of group `{label}`: {e}")))?
            .value;
        per_group_ci.push(ci);
        per_group_iauc.push(ia);
    }

    let mut x_ci_matrix = vec![vec![f64::NAN; k]; k];
    let mut x_auc_matrix = vec![vec![Vec::new(); k]; k];
    let mut x_ci = Vec::new();
    let mut x_auc = Vec::new();
    for a in 0..k {
        for b in 0..k {
            if a == b {
                continue;
            }
            let v = prepared.concordance(Some(a), Some(b)).map_err(|e| {
                Error::MetricUndefined(format!("xCI({}, {}): {e}", levels[a], levels[b]))
            })?;
            let s = prepared.auc_series(Some(a), Some(b), points);
            x_ci_matrix[a][b] = v;
            x_ci.push(PairValue {
                a: levels[a].clone(),
                b: levels[b].clone(),
                value: v,
            });
            x_auc.push(PairSeries {
                a: levels[a].clone(),
                b: levels[b].clone(),
                values: s.clone(),
            });
            x_auc_matrix[a][b] = s;
        }
    }

    let d = disparities(
        &DisparityInputs {
            c_index: per_group_ci.clone(),
            i_auc: per_group_iauc.clone(),
            x_ci: x_ci_matrix,
            x_auc: x_auc_matrix,
        },
        &masses,
    )?;
    let by_group = |v: &[f64]| levels.iter().cloned().zip(v.iter().copied()).collect();
    Ok(MetricReport {
        groups: levels.clone(),
        censoring: options.censoring,
        truncation_floor: options.truncation_floor,
        grid: options.grid.clone(),
        c_index,
        c_index_by_group: by_group(&per_group_ci),
        i_auc,
        i_auc_by_group: by_group(&per_group_iauc),
        auc_t,
        x_ci,
        x_auc,
        delta_ci: d.delta_ci,
        delta_iauc: d.delta_iauc,
        delta_xci: d.cross.as_ref().map(|c| c.delta_xci),
        delta_xauc: d.cross.as_ref().map(|c| c.delta_xauc.clone()),
        i_delta_xauc: d.cross.as_ref().map(|c| c.i_delta_xauc),
        merged_points: d.cross.map(|c| c.merged_points).unwrap_or_default(),
        bootstrap: None,
    })
}
