use std::collections::BTreeSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Subject, SurvivalDataset};
use crate::error::{Error, Result};

/// Column roles of a cohort CSV. An empty `covariates` list means "every
/// column that is not time, event or group", in file order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CsvSchema {
    pub time: String,
    pub event: String,
    pub group: String,
    pub covariates: Vec<String>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            time: "time".into(),
            event: "event".into(),
            group: "group".into(),
            covariates: Vec::new(),
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<SurvivalDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema)
}

fn is_missing(raw: &str) -> bool {
    matches!(raw, "" | "NA" | "NaN" | "nan" | "null")
}

/// Reads a cohort from any reader. Covariate columns whose values all parse
/// as numbers are kept as-is; other columns are expanded to `col=level`
/// indicators with the lexicographically first level as reference.
pub fn read_csv<R: Read>(reader: R, schema: &CsvSchema) -> Result<SurvivalDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn {
                column: name.to_string(),
            })
    };
    let time_col = find(&schema.time)?;
    let event_col = find(&schema.event)?;
    let group_col = find(&schema.group)?;
    let covariate_cols: Vec<usize> = if schema.covariates.is_empty() {
        (0..header.len())
            .filter(|c| ![time_col, event_col, group_col].contains(c))
            .collect()
    } else {
        schema
            .covariates
            .iter()
            .map(|c| find(c))
            .collect::<Result<_>>()?
    };

    let mut records = Vec::new();
    for rec in rdr.records() {
        records.push(rec?);
    }

    let mut times = Vec::with_capacity(records.len());
    let mut events = Vec::with_capacity(records.len());
    let mut groups = Vec::with_capacity(records.len());
    for (i, rec) in records.iter().enumerate() {
        let row = i + 1;
        let field = |c: usize| rec.get(c).map(str::trim).unwrap_or("");
        let raw_time = field(time_col);
        let time: f64 = raw_time.parse().map_err(|_| Error::Parse {
            row,
            message: format!("time `{raw_time}` is not numeric"),
        })?;
        if !(time.is_finite() && time > 0.0) {
            return Err(Error::Parse {
                row,
                message: format!("time `{raw_time}` must be positive"),
            });
        }
        let event = match field(event_col) {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::Parse {
                    row,
                    message: format!("event `{other}` is not 0 or 1"),
                })
            }
        };
        let group = field(group_col);
        if is_missing(group) {
            return Err(Error::Parse {
                row,
                message: format!("missing group in column `{}`", schema.group),
            });
        }
        times.push(time);
        events.push(event);
        groups.push(group.to_string());
    }

    // Encode each covariate column, then assemble rows.
    let mut variable_names = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for &c in &covariate_cols {
        let name = &header[c];
        let raw: Vec<&str> = records
            .iter()
            .map(|r| r.get(c).map(str::trim).unwrap_or(""))
            .collect();
        if let Some(i) = raw.iter().position(|v| is_missing(v)) {
            return Err(Error::Parse {
                row: i + 1,
                message: format!("missing value in column `{name}`"),
            });
        }
        let numeric: Option<Vec<f64>> = raw.iter().map(|v| v.parse::<f64>().ok()).collect();
        match numeric {
            Some(values) => {
                if let Some(i) = values.iter().position(|v| !v.is_finite()) {
                    return Err(Error::Parse {
                        row: i + 1,
                        message: format!("non-finite value in column `{name}`"),
                    });
                }
                variable_names.push(name.clone());
                columns.push(values);
            }
            None => {
                let levels: BTreeSet<&str> = raw.iter().copied().collect();
                for level in levels.into_iter().skip(1) {
                    variable_names.push(format!("{name}={level}"));
                    columns.push(raw.iter().map(|v| f64::from(*v == level)).collect());
                }
            }
        }
    }

    let subjects = (0..records.len())
        .map(|i| Subject {
            covariates: columns.iter().map(|col| col[i]).collect(),
            time: times[i],
            event: events[i],
            group: std::mem::take(&mut groups[i]),
        })
        .collect();
    SurvivalDataset::new(variable_names, subjects)
}

/// Writes `time,event,group,<covariates...>` with shortest round-trip floats.
pub fn write_csv<W: Write>(dataset: &SurvivalDataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["time".to_string(), "event".into(), "group".into()];
    header.extend(dataset.variable_names().iter().cloned());
    w.write_record(&header)?;
    for s in dataset.subjects() {
        let mut rec = vec![
            s.time.to_string(),
            if s.event { "1" } else { "0" }.to_string(),
            s.group.clone(),
        ];
        rec.extend(s.covariates.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}
