use serde::Serialize;

use super::SurvivalDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanSd {
    pub mean: f64,
    /// Sample SD (n - 1 denominator); absent for a single observation.
    pub sd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum VariableSummary {
    Continuous {
        name: String,
        mean: f64,
        sd: Option<f64>,
        median: f64,
        q1: f64,
        q3: f64,
    },
    Indicator {
        name: String,
        count: usize,
        percent: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    pub label: String,
    pub count: usize,
    pub percent: f64,
    pub variables: Vec<VariableSummary>,
    pub survival_time: MeanSd,
    pub events: usize,
    pub event_rate: f64,
}

/// Descriptive table: one overall block and one block per group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CohortSummary {
    pub overall: GroupSummary,
    pub groups: Vec<GroupSummary>,
}

fn mean_sd(values: &[f64]) -> MeanSd {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.len() > 1).then(|| {
        let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
        (ss / (n - 1.0)).sqrt()
    });
    MeanSd { mean, sd }
}

/// Linear-interpolation quantile of sorted data.
pub(crate) fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn block(
    label: &str,
    dataset: &SurvivalDataset,
    rows: &[usize],
    indicator: &[bool],
) -> GroupSummary {
    let subjects = dataset.subjects();
    let n = rows.len();
    let variables = dataset
        .variable_names()
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let values: Vec<f64> = rows.iter().map(|&i| subjects[i].covariates[k]).collect();
            if indicator[k] {
                let count = values.iter().filter(|&&v| v == 1.0).count();
                VariableSummary::Indicator {
                    name: name.clone(),
                    count,
                    percent: 100.0 * count as f64 / n as f64,
                }
            } else {
                let MeanSd { mean, sd } = mean_sd(&values);
                let mut sorted = values;
                sorted.sort_by(f64::total_cmp);
                VariableSummary::Continuous {
                    name: name.clone(),
                    mean,
                    sd,
                    median: quantile(&sorted, 0.5),
                    q1: quantile(&sorted, 0.25),
                    q3: quantile(&sorted, 0.75),
                }
            }
        })
        .collect();
    let times: Vec<f64> = rows.iter().map(|&i| subjects[i].time).collect();
    let events = rows.iter().filter(|&&i| subjects[i].event).count();
    GroupSummary {
        label: label.to_string(),
        count: n,
        percent: 100.0 * n as f64 / dataset.len() as f64,
        variables,
        survival_time: mean_sd(&times),
        events,
        event_rate: events as f64 / n as f64,
    }
}

pub fn summarize(dataset: &SurvivalDataset) -> Result<CohortSummary> {
    if dataset.is_empty() {
        return Err(Error::Data("cannot summarize an empty dataset".into()));
    }
    let p = dataset.variable_names().len();
    let indicator: Vec<bool> = (0..p)
        .map(|k| {
            dataset
                .subjects()
                .iter()
                .all(|s| s.covariates[k] == 0.0 || s.covariates[k] == 1.0)
        })
        .collect();
    let all: Vec<usize> = (0..dataset.len()).collect();
    let overall = block("Overall", dataset, &all, &indicator);
    let gids = dataset.group_ids();
    let groups = dataset
        .group_levels()
        .iter()
        .enumerate()
        .map(|(g, label)| {
            let rows: Vec<usize> = all.iter().copied().filter(|&i| gids[i] == g).collect();
            block(label, dataset, &rows, &indicator)
        })
        .collect();
    Ok(CohortSummary { overall, groups })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::fixture;

    #[test]
    fn two_subjects() {
        let ds = fixture(&[(10.0, true, "A", &[]), (20.0, true, "A", &[])], &[]);
        let s = summarize(&ds).unwrap();
        assert_eq!(s.overall.survival_time.mean, 15.0);
        assert!((s.overall.survival_time.sd.unwrap() - 7.0710678118654755).abs() < 1e-12);
        assert_eq!(s.overall.event_rate, 1.0);
    }

    #[test]
    fn single_group_block_equals_overall() {
        let ds = fixture(
            &[
                (10.0, true, "A", &[1.0, 0.3]),
                (20.0, false, "A", &[0.0, 0.9]),
                (5.0, true, "A", &[1.0, 0.1]),
            ],
            &["ind", "x"],
        );
        let s = summarize(&ds).unwrap();
        let mut g = s.groups[0].clone();
        g.label = "Overall".into();
        assert_eq!(g, s.overall);
    }

    #[test]
    fn ten_subject_hand_enumeration() {
        // Hand-tallied: times sum 165 over 10, events 6; group A has 6 rows.
        let rows: [(f64, bool, &str, &[f64]); 10] = [
            (5.0, true, "A", &[1.0, 2.0]),
            (10.0, false, "A", &[0.0, 4.0]),
            (15.0, true, "B", &[1.0, 6.0]),
            (20.0, true, "A", &[1.0, 8.0]),
            (25.0, false, "B", &[0.0, 1.0]),
            (8.0, true, "A", &[0.0, 3.0]),
            (12.0, false, "B", &[1.0, 5.0]),
            (30.0, true, "A", &[0.0, 7.0]),
            (18.0, true, "B", &[0.0, 9.0]),
            (22.0, false, "A", &[1.0, 10.0]),
        ];
        let ds = fixture(&rows, &["married", "age"]);
        let s = summarize(&ds).unwrap();
        assert_eq!(s.overall.count, 10);
        assert_eq!(s.overall.survival_time.mean, 16.5);
        assert_eq!(s.overall.events, 6);
        assert_eq!(s.overall.event_rate, 0.6);
        assert_eq!(s.groups.iter().map(|g| g.count).sum::<usize>(), 10);

        let a = &s.groups[0];
        assert_eq!((a.label.as_str(), a.count, a.percent), ("A", 6, 60.0));
        // A: times 5,10,20,8,30,22 -> mean 95/6; events 4 of 6.
        assert!((a.survival_time.mean - 95.0 / 6.0).abs() < 1e-12);
        assert_eq!(a.events, 4);
        match &a.variables[0] {
            VariableSummary::Indicator { count, percent, .. } => {
                assert_eq!(*count, 3);
                assert_eq!(*percent, 50.0);
            }
            other => panic!("unexpected {other:?}"),
        }
        match &s.overall.variables[1] {
            VariableSummary::Continuous {
                mean,
                median,
                q1,
                q3,
                ..
            } => {
                assert_eq!(*mean, 5.5);
                assert_eq!(*median, 5.5);
                assert_eq!(*q1, 3.25);
                assert_eq!(*q3, 7.75);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_dataset_rejected() {
        let ds = fixture(&[], &[]);
        assert!(summarize(&ds).is_err());
    }
}
