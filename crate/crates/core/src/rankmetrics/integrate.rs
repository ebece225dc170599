use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::concordance::Prepared;
use crate::censorkm::{Ipcw, StepFunction};
use crate::cohort::SurvivalDataset;
use crate::error::{Error, Result};

/// Evaluation horizons for time-dependent metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_start: f64,
    pub t_end: f64,
    pub points: Vec<f64>,
}

impl TimeGrid {
    pub fn new(t_start: f64, points: Vec<f64>) -> Result<Self> {
        let t_end = *points
            .last()
            .ok_or_else(|| Error::Config("time grid has no points".into()))?;
        let grid = Self {
            t_start,
            t_end,
            points,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// Points `first, first + step, ..., last`; the window opens one step
    /// before `first` (clamped at 0).
    pub fn regular(first: f64, last: f64, step: f64) -> Result<Self> {
        if !(step > 0.0 && first.is_finite() && last >= first) {
            return Err(Error::Config(format!("invalid grid {first}:{last}:{step}")));
        }
        let count = ((last - first) / step + 1e-9).floor() as usize + 1;
        let points = (0..count).map(|k| first + k as f64 * step).collect();
        Self::new((first - step).max(0.0), points)
    }

    /// Monthly grid over ten years: 1, 2, ..., 120.
    pub fn monthly_ten_years() -> Self {
        Self::regular(1.0, 120.0, 1.0).expect("static grid is valid")
    }

    /// Distinct event times of `dataset` inside `(t_start, t_end]`.
    pub fn event_times(dataset: &SurvivalDataset, t_start: f64, t_end: f64) -> Result<Self> {
        let mut pts: Vec<f64> = dataset
            .subjects()
            .iter()
            .filter(|s| s.event && s.time > t_start && s.time <= t_end)
            .map(|s| s.time)
            .collect();
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        Self::new(t_start, pts)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.t_start >= 0.0
            && self.t_end > self.t_start
            && !self.points.is_empty()
            && self.points.windows(2).all(|w| w[0] < w[1])
            && self.points[0] > self.t_start
            && *self.points.last().unwrap() <= self.t_end;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "time grid must be nonempty, strictly increasing and inside ({}, {}]",
                self.t_start, self.t_end
            )))
        }
    }
}

impl FromStr for TimeGrid {
    type Err = Error;

    /// Parses `start:end:step`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<f64> = s
            .split(':')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Config(format!("grid `{s}` is not start:end:step")))?;
        match parts[..] {
            [a, b, c] => Self::regular(a, b, c),
            _ => Err(Error::Config(format!("grid `{s}` is not start:end:step"))),
        }
    }
}

/// Left-closed S-hat increments S(t_{k-1}) - S(t_k), with t_0 = t_start.
pub fn grid_masses(s_hat: &StepFunction, grid: &TimeGrid) -> Vec<f64> {
    let mut prev = s_hat.eval(grid.t_start);
    grid.points
        .iter()
        .map(|&t| {
            let cur = s_hat.eval(t);
            let m = prev - cur;
            prev = cur;
            m
        })
        .collect()
}

/// Outcome of integrating a series with gaps against S-hat masses.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Integrated {
    pub value: f64,
    /// Grid indices whose mass was moved to a neighbouring defined point.
    pub merged_points: Vec<usize>,
}

/// S-hat weighted average of `values` over the grid. Mass at an undefined
/// point moves to the nearest later defined point, or the nearest earlier
/// one when none is later.
pub fn integrate(values: &[Option<f64>], masses: &[f64]) -> Result<Integrated> {
    assert_eq!(values.len(), masses.len());
    let mut weight = vec![0.0; values.len()];
    let mut merged_points = Vec::new();
    for k in 0..values.len() {
        if values[k].is_some() {
            weight[k] += masses[k];
            continue;
        }
        if masses[k] == 0.0 {
            continue;
        }
        let target = (k + 1..values.len())
            .find(|&j| values[j].is_some())
            .or_else(|| (0..k).rev().find(|&j| values[j].is_some()));
        if let Some(j) = target {
            weight[j] += masses[k];
            merged_points.push(k);
        }
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (v, w) in values.iter().zip(&weight) {
        if let Some(v) = v {
            num += w * v;
            den += w;
        }
    }
    if !(den > 0.0) {
        return Err(Error::MetricUndefined(
            "no survival mass at defined points of the window".into(),
        ));
    }
    Ok(Integrated {
        value: num / den,
        merged_points,
    })
}

/// Time-integrated AUC over the grid, weighted by increments of `s_hat`.
pub fn i_auc(
    dataset: &SurvivalDataset,
    scores: &[f64],
    ipcw: &Ipcw,
    s_hat: &StepFunction,
    grid: &TimeGrid,
    restrict_group: Option<&str>,
) -> Result<f64> {
    grid.validate()?;
    let g = restrict_group
        .map(|l| {
            dataset
                .group_levels()
                .iter()
                .position(|x| x == l)
                .ok_or_else(|| Error::MetricUndefined(format!("group `{l}` has no subjects")))
        })
        .transpose()?;
    let series = Prepared::new(dataset, scores, ipcw)?.auc_series(g, g, &grid.points);
    Ok(integrate(&series, &grid_masses(s_hat, grid))?.value)
}

/// Per-group and cross-group inputs for the disparity metrics. Matrices are
/// indexed `[a][b]` over group levels; diagonals are unused.
#[derive(Debug, Clone, PartialEq)]
pub struct DisparityInputs {
    pub c_index: Vec<f64>,
    pub i_auc: Vec<f64>,
    pub x_ci: Vec<Vec<f64>>,
    pub x_auc: Vec<Vec<Vec<Option<f64>>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossDisparities {
    pub delta_xci: f64,
    pub delta_xauc: Vec<Option<f64>>,
    pub i_delta_xauc: f64,
    pub merged_points: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Disparities {
    pub delta_ci: f64,
    pub delta_iauc: f64,
    /// Absent with fewer than two groups.
    pub cross: Option<CrossDisparities>,
}

fn max_pairwise_gap(values: &[f64]) -> f64 {
    let mut best = 0.0f64;
    for a in 0..values.len() {
        for b in a + 1..values.len() {
            best = best.max((values[a] - values[b]).abs());
        }
    }
    best
}

/// Maximum absolute disparities over unordered group pairs.
pub fn disparities(inputs: &DisparityInputs, masses: &[f64]) -> Result<Disparities> {
    let k = inputs.c_index.len();
    let delta_ci = max_pairwise_gap(&inputs.c_index);
    let delta_iauc = max_pairwise_gap(&inputs.i_auc);
    if k < 2 {
        return Ok(Disparities {
            delta_ci,
            delta_iauc,
            cross: None,
        });
    }
    let mut delta_xci = 0.0f64;
    let mut delta_xauc: Vec<Option<f64>> = vec![None; masses.len()];
    for a in 0..k {
        for b in a + 1..k {
            delta_xci = delta_xci.max((inputs.x_ci[a][b] - inputs.x_ci[b][a]).abs());
            for (t, slot) in delta_xauc.iter_mut().enumerate() {
                if let (Some(ab), Some(ba)) = (inputs.x_auc[a][b][t], inputs.x_auc[b][a][t]) {
                    let gap = (ab - ba).abs();
                    *slot = Some(slot.map_or(gap, |s| s.max(gap)));
                }
            }
        }
    }
    let integrated = integrate(&delta_xauc, masses)?;
    Ok(Disparities {
        delta_ci,
        delta_iauc,
        cross: Some(CrossDisparities {
            delta_xci,
            delta_xauc,
            i_delta_xauc: integrated.value,
            merged_points: integrated.merged_points,
        }),
    })
}
