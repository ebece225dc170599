//! Survival data model: subjects, datasets, CSV ingestion, stratified
//! splitting, descriptive summaries and a synthetic cohort generator.

mod csv_io;
mod simulate;
mod split;
mod summary;

pub use csv_io::{load_csv, read_csv, write_csv, CsvSchema};
pub use simulate::{simulate_cohort, SimSpec};
pub use split::{stratified_split, stratified_split_indices, SplitIndices, SplitSpec, StratumRole};
pub(crate) use summary::quantile;
pub use summary::{summarize, CohortSummary, GroupSummary, MeanSd, VariableSummary};

use crate::error::{Error, Result};

/// One row of a survival cohort. Covariates are index-aligned with the
/// owning dataset's `variable_names`.
#[derive(Debug, Clone, PartialEq)]
pub struct Subject {
    pub covariates: Vec<f64>,
    pub time: f64,
    pub event: bool,
    pub group: String,
}

/// An immutable, validated collection of subjects sharing one covariate roster.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalDataset {
    variable_names: Vec<String>,
    subjects: Vec<Subject>,
    group_levels: Vec<String>,
}

impl SurvivalDataset {
    /// Validates subjects against the roster. Group levels are the distinct
    /// labels in lexicographic order.
    pub fn new(variable_names: Vec<String>, subjects: Vec<Subject>) -> Result<Self> {
        let p = variable_names.len();
        for (a, name) in variable_names.iter().enumerate() {
            if variable_names[..a].contains(name) {
                return Err(Error::Data(format!("duplicate covariate name `{name}`")));
            }
        }
        for (i, s) in subjects.iter().enumerate() {
            if !(s.time.is_finite() && s.time > 0.0) {
                return Err(Error::Data(format!(
                    "subject {i}: time must be positive and finite, got {}",
                    s.time
                )));
            }
            if s.covariates.len() != p {
                return Err(Error::Data(format!(
                    "subject {i}: {} covariates, roster has {p}",
                    s.covariates.len()
                )));
            }
            if let Some(k) = s.covariates.iter().position(|v| !v.is_finite()) {
                return Err(Error::Data(format!(
                    "subject {i}: covariate `{}` is not finite",
                    variable_names[k]
                )));
            }
        }
        let mut group_levels: Vec<String> = subjects.iter().map(|s| s.group.clone()).collect();
        group_levels.sort();
        group_levels.dedup();
        Ok(Self {
            variable_names,
            subjects,
            group_levels,
        })
    }

    pub fn variable_names(&self) -> &[String] {
        &self.variable_names
    }

    pub fn subjects(&self) -> &[Subject] {
        &self.subjects
    }

    pub fn group_levels(&self) -> &[String] {
        &self.group_levels
    }

    pub fn len(&self) -> usize {
        self.subjects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subjects.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.variable_names.iter().position(|v| v == name)
    }

    /// Resolves a list of covariate names to column indices.
    pub fn column_indices(&self, names: &[String]) -> Result<Vec<usize>> {
        let mut missing = Vec::new();
        let idx: Vec<usize> = names
            .iter()
            .filter_map(|n| {
                let i = self.column_index(n);
                if i.is_none() {
                    missing.push(n.clone());
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

    pub fn times(&self) -> Vec<f64> {
        self.subjects.iter().map(|s| s.time).collect()
    }

    pub fn events(&self) -> Vec<bool> {
        self.subjects.iter().map(|s| s.event).collect()
    }

    pub fn event_count(&self) -> usize {
        self.subjects.iter().filter(|s| s.event).count()
    }

    /// Index of each subject's group within `group_levels`.
    pub fn group_ids(&self) -> Vec<usize> {
        self.subjects
            .iter()
            .map(|s| {
                self.group_levels
                    .binary_search(&s.group)
                    .expect("group levels cover every subject")
            })
            .collect()
    }

    /// Dataset restricted to the given rows, in the given order.
    pub fn subset(&self, indices: &[usize]) -> SurvivalDataset {
        let subjects: Vec<Subject> = indices.iter().map(|&i| self.subjects[i].clone()).collect();
        let mut group_levels: Vec<String> = subjects.iter().map(|s| s.group.clone()).collect();
        group_levels.sort();
        group_levels.dedup();
        SurvivalDataset {
            variable_names: self.variable_names.clone(),
            subjects,
            group_levels,
        }
    }

    /// Same subjects with event and censoring roles swapped.
    pub fn with_events_inverted(&self) -> SurvivalDataset {
        let mut out = self.clone();
        for s in &mut out.subjects {
            s.event = !s.event;
        }
        out
    }

    /// Same subjects with every group label replaced.
    pub fn relabeled(&self, f: impl Fn(&str) -> String) -> SurvivalDataset {
        let subjects = self
            .subjects
            .iter()
            .map(|s| Subject {
                group: f(&s.group),
                ..s.clone()
            })
            .collect();
        SurvivalDataset::new(self.variable_names.clone(), subjects)
            .expect("relabeling preserves validity")
    }
}

#[cfg(test)]
pub(crate) fn fixture(rows: &[(f64, bool, &str, &[f64])], names: &[&str]) -> SurvivalDataset {
    let subjects = rows
        .iter()
        .map(|(t, e, g, x)| Subject {
            covariates: x.to_vec(),
            time: *t,
            event: *e,
            group: g.to_string(),
        })
        .collect();
    SurvivalDataset::new(names.iter().map(|s| s.to_string()).collect(), subjects).unwrap()
}
