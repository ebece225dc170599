use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{AcceptanceStats, CaseSet, ExcludedCase, RashomonConfig, RashomonSet, SampledModel};
use crate::coxfit::{CoxModel, FitSummary};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
struct CaseHeader {
    case: Vec<String>,
    roster: Vec<String>,
    model: CoxModel,
    fit: FitSummary,
    performance: f64,
    threshold: f64,
    stats: AcceptanceStats,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sampling_error: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: RashomonConfig,
    measure: String,
    measure_parameters: BTreeMap<String, f64>,
    full_case: Vec<String>,
    full_performance: f64,
    cases: Vec<CaseHeader>,
    excluded: Vec<ExcludedCase>,
}

#[derive(Serialize, Deserialize)]
struct MemberRecord {
    case: Vec<String>,
    beta: BTreeMap<String, f64>,
    performance: f64,
    draw: Option<u64>,
}

impl RashomonSet {
    /// Line-delimited JSON: a header record, then one record per member.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        let header = Header {
            config: self.config.clone(),
            measure: self.measure.clone(),
            measure_parameters: self.measure_parameters.clone(),
            full_case: self.full_case.clone(),
            full_performance: self.full_performance,
            cases: self
                .cases
                .iter()
                .map(|c| CaseHeader {
                    case: c.case.clone(),
                    roster: c.roster.clone(),
                    model: c.model.clone(),
                    fit: c.fit.clone(),
                    performance: c.performance,
                    threshold: c.threshold,
                    stats: c.stats.clone(),
                    sampling_error: c.sampling_error.clone(),
                })
                .collect(),
            excluded: self.excluded.clone(),
        };
        let io = |e| Error::io("rashomon.jsonl", e);
        serde_json::to_writer(&mut out, &header)?;
        out.write_all(b"\n").map_err(io)?;
        for c in &self.cases {
            for m in &c.members {
                let record = MemberRecord {
                    case: m.case.clone(),
                    beta: c
                        .roster
                        .iter()
                        .cloned()
                        .zip(m.beta.iter().copied())
                        .collect(),
                    performance: m.performance,
                    draw: m.draw,
                };
                serde_json::to_writer(&mut out, &record)?;
                out.write_all(b"\n").map_err(io)?;
            }
        }
        out.flush().map_err(io)
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines().enumerate();
        let header: Header = match lines.next() {
            Some((_, line)) => {
                serde_json::from_str(&line.map_err(|e| Error::io("rashomon.jsonl", e))?)?
            }
            None => return Err(Error::Data("empty Rashomon file".into())),
        };
        let mut cases: Vec<CaseSet> = header
            .cases
            .into_iter()
            .map(|c| CaseSet {
                case: c.case,
                roster: c.roster,
                model: c.model,
                fit: c.fit,
                performance: c.performance,
                threshold: c.threshold,
                members: Vec::new(),
                stats: c.stats,
                sampling_error: c.sampling_error,
            })
            .collect();
        for (row, line) in lines {
            let line = line.map_err(|e| Error::io("rashomon.jsonl", e))?;
            if line.trim().is_empty() {
                continue;
            }
            let record: MemberRecord = serde_json::from_str(&line)?;
            let parse = |message: String| Error::Parse {
                row: row + 1,
                message,
            };
            let case = cases
                .iter_mut()
                .find(|c| c.case == record.case)
                .ok_or_else(|| parse(format!("member of unknown case {:?}", record.case)))?;
            if record.beta.len() != case.roster.len() {
                return Err(parse(
                    "coefficient names differ from the case roster".into(),
                ));
            }
            let beta = case
                .roster
                .iter()
                .map(|v| record.beta.get(v).copied())
                .collect::<Option<Vec<f64>>>()
                .ok_or_else(|| parse("coefficient names differ from the case roster".into()))?;
            case.members.push(SampledModel {
                case: record.case,
                beta,
                performance: record.performance,
                draw: record.draw,
            });
        }
        Ok(RashomonSet {
            config: header.config,
            measure: header.measure,
            measure_parameters: header.measure_parameters,
            full_case: header.full_case,
            full_performance: header.full_performance,
            cases,
            excluded: header.excluded,
        })
    }
}
