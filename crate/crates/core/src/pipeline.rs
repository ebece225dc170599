//! End-to-end run: split, fit the case optima, sample the Rashomon set,
//! select on validation and compare CoxPH, Under-blindness and the selected
//! model on test.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cohort::{
    load_csv, quantile, simulate_cohort, stratified_split, CsvSchema, SimSpec, SplitSpec,
    SurvivalDataset,
};
use crate::coxfit::{fit, survival_from, CoxModel, FitConfig, FitSummary, Ties};
use crate::error::{Error, Result};
use crate::rankmetrics::{
    bootstrap_ci, evaluate, BootstrapBlock, BootstrapConfig, BootstrapMetric, CensoringMode,
    ConfidenceInterval, MetricOptions, MetricReport, TimeGrid,
};
use crate::rashomon::{
    build_integral_set, measure_by_name, LikelihoodRatioR2, RashomonConfig, RashomonSet,
    VariablePartition,
};
use crate::select::{
    msi, select_fasm, FairnessProfile, MsiValue, SelectOptions, Selection, METRIC_ORDER,
};

/// Where the cohort comes from: a CSV file or the built-in simulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub path: Option<PathBuf>,
    pub simulate: Option<SimSpec>,
    pub schema: CsvSchema,
}

impl DataConfig {
    pub fn load(&self) -> Result<SurvivalDataset> {
        match (&self.path, &self.simulate) {
            (Some(p), None) => load_csv(p, &self.schema),
            (None, Some(spec)) => simulate_cohort(spec),
            _ => Err(Error::Config(
                "data needs exactly one of `path` or `simulate`".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct FitSection {
    pub ties: Ties,
    #[serde(flatten)]
    pub solver: FitConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RashomonSection {
    pub measure: String,
    #[serde(flatten)]
    pub config: RashomonConfig,
}

impl Default for RashomonSection {
    fn default() -> Self {
        Self {
            measure: LikelihoodRatioR2::NAME.into(),
            config: RashomonConfig::default(),
        }
    }
}

/// Evaluation window `(t_start, t_end]` sampled every `step`; predicted-risk
/// quantiles are reported every `year_length` time units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub t_start: f64,
    pub t_end: f64,
    pub step: f64,
    pub truncation_floor: f64,
    pub censoring: CensoringMode,
    pub year_length: f64,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            t_start: 0.0,
            t_end: 120.0,
            step: 1.0,
            truncation_floor: crate::censorkm::DEFAULT_TRUNCATION_FLOOR,
            censoring: CensoringMode::Overall,
            year_length: 12.0,
        }
    }
}

impl EvaluationConfig {
    pub fn grid(&self) -> Result<TimeGrid> {
        let g = TimeGrid::regular(self.t_start + self.step, self.t_end, self.step)?;
        TimeGrid::new(self.t_start, g.points)
    }

    pub fn metric_options(&self) -> Result<MetricOptions> {
        let options = MetricOptions {
            grid: self.grid()?,
            truncation_floor: self.truncation_floor,
            censoring: self.censoring,
        };
        options.validate()?;
        if !(self.year_length > 0.0) {
            return Err(Error::Config("year_length must be positive".into()));
        }
        Ok(options)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    pub normalize: bool,
}

/// Everything `run` needs; read from a TOML document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub data: DataConfig,
    /// Sensitive variable names; each matches a column or its `name=level`
    /// indicator columns.
    pub sensitive: Vec<String>,
    pub split: SplitSpec,
    pub fit: FitSection,
    pub rashomon: RashomonSection,
    pub evaluation: EvaluationConfig,
    pub bootstrap: BootstrapConfig,
    pub selection: SelectionConfig,
    pub output: Option<PathBuf>,
}

impl PipelineConfig {
    /// Parses TOML; a relative data path is resolved against `base`.
    pub fn from_toml(text: &str, base: Option<&Path>) -> Result<Self> {
        let mut config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if let (Some(base), Some(p)) = (base, config.data.path.as_mut()) {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, path.parent())
    }

    /// Sets every RNG seed of the run to `seed`.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.split.seed = seed;
        self.rashomon.config.seed = seed;
        self.bootstrap.seed = seed;
        if let Some(spec) = self.data.simulate.as_mut() {
            spec.seed = seed;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.data.path.is_some() == self.data.simulate.is_some() {
            return Err(Error::Config(
                "data needs exactly one of `path` or `simulate`".into(),
            ));
        }
        if let Some(spec) = &self.data.simulate {
            spec.validate()?;
        }
        self.split.validate()?;
        self.fit.solver.validate()?;
        self.rashomon.config.validate()?;
        measure_by_name(&self.rashomon.measure)?;
        self.evaluation.metric_options()?;
        if self.bootstrap.n_boot < 100 {
            return Err(Error::Config(format!(
                "n_boot must be at least 100, got {}",
                self.bootstrap.n_boot
            )));
        }
        Ok(())
    }
}

/// A synthetic two-group cohort with a higher hazard and heavier censoring in
/// the minority group B. Time is in months over a ten-year horizon.
pub fn biased_cohort_spec(n: usize, seed: u64) -> SimSpec {
    SimSpec {
        n,
        group_proportions: BTreeMap::from([("A".into(), 0.7), ("B".into(), 0.3)]),
        true_beta: BTreeMap::from([
            ("x1".into(), 0.8),
            ("x2".into(), -0.5),
            ("group=B".into(), 0.3),
        ]),
        baseline_shape: 1.2,
        baseline_scale: 150.0,
        censor_rate: BTreeMap::from([("A".into(), 0.004), ("B".into(), 0.012)]),
        horizon: Some(120.0),
        seed,
    }
}

/// Fits a Cox model on every dataset column, or on `roster` when given.
pub fn fit_all(
    dataset: &SurvivalDataset,
    roster: Option<&[String]>,
    section: &FitSection,
) -> Result<(CoxModel, FitSummary)> {
    let roster = roster.map_or_else(|| dataset.variable_names().to_vec(), <[String]>::to_vec);
    fit(dataset, &roster, &section.solver, section.ties)
}

/// One row of the three-model comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub model: String,
    pub delta_iauc: f64,
    pub delta_ci: f64,
    pub delta_xci: Option<f64>,
    pub i_delta_xauc: Option<f64>,
    pub i_auc: ConfidenceInterval,
    pub c_index: ConfidenceInterval,
    pub msi: Option<MsiValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelReport {
    pub name: String,
    pub variables: Vec<String>,
    pub beta: Vec<f64>,
    pub metrics: MetricReport,
}

/// Metrics of `model` on `dataset`, with percentile intervals when
/// `bootstrap` is given.
pub fn model_report(
    name: &str,
    model: &CoxModel,
    dataset: &SurvivalDataset,
    options: &MetricOptions,
    bootstrap: Option<&BootstrapConfig>,
) -> Result<ModelReport> {
    let mut metrics = evaluate(dataset, &model.risk_scores(dataset)?, options)?;
    if let Some(config) = bootstrap {
        metrics.bootstrap = Some(BootstrapBlock {
            c_index: bootstrap_ci(dataset, model, BootstrapMetric::CIndex, config, options)?,
            i_auc: bootstrap_ci(dataset, model, BootstrapMetric::IAuc, config, options)?,
        });
    }
    Ok(ModelReport {
        name: name.into(),
        variables: model.variable_names.clone(),
        beta: model.beta.clone(),
        metrics,
    })
}

pub fn comparison_row(report: &ModelReport) -> Result<ComparisonRow> {
    let m = &report.metrics;
    let ci = m
        .bootstrap
        .as_ref()
        .ok_or_else(|| Error::Config("comparison rows need bootstrap intervals".into()))?;
    let msi_value = match (m.delta_xci, m.i_delta_xauc) {
        (Some(x), Some(i)) => Some(msi(&FairnessProfile::from_values([
            m.delta_iauc,
            m.delta_ci,
            x,
            i,
        ]))?),
        _ => None,
    };
    Ok(ComparisonRow {
        model: report.name.clone(),
        delta_iauc: m.delta_iauc,
        delta_ci: m.delta_ci,
        delta_xci: m.delta_xci,
        i_delta_xauc: m.i_delta_xauc,
        i_auc: ci.i_auc,
        c_index: ci.c_index,
        msi: msi_value,
    })
}

/// Long-format curve rows shared by `run` and `evaluate`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveRow {
    pub model: String,
    pub metric: String,
    pub group_or_pair: String,
    pub time: Option<f64>,
    pub value: Option<f64>,
}

/// Quartiles of predicted risk 1 - S(t | x) at every multiple of
/// `year_length` inside the window, by group and final event status.
pub fn risk_quantile_rows(
    name: &str,
    model: &CoxModel,
    dataset: &SurvivalDataset,
    options: &MetricOptions,
    year_length: f64,
) -> Result<Vec<CurveRow>> {
    let eta = model.risk_scores(dataset)?;
    let mut years = Vec::new();
    let mut t = year_length;
    while t <= options.grid.t_end + 1e-9 {
        if t > options.grid.t_start {
            years.push(t);
        }
        t += year_length;
    }
    let gids = dataset.group_ids();
    let mut rows = Vec::new();
    for &t in &years {
        for (g, label) in dataset.group_levels().iter().enumerate() {
            for (status, want) in [("censored", false), ("event", true)] {
                let mut risks: Vec<f64> = dataset
                    .subjects()
                    .iter()
                    .enumerate()
                    .filter(|(i, s)| gids[*i] == g && s.event == want)
                    .map(|(i, _)| 1.0 - survival_from(&model.baseline_cumhaz, eta[i], t))
                    .collect();
                if risks.is_empty() {
                    continue;
                }
                risks.sort_by(f64::total_cmp);
                for (metric, q) in [("risk_q25", 0.25), ("risk_q50", 0.5), ("risk_q75", 0.75)] {
                    rows.push(CurveRow {
                        model: name.into(),
                        metric: metric.into(),
                        group_or_pair: format!("{label}|{status}"),
                        time: Some(t),
                        value: Some(quantile(&risks, q)),
                    });
                }
            }
        }
    }
    Ok(rows)
}

pub fn metric_curve_rows(report: &ModelReport) -> Vec<CurveRow> {
    report
        .metrics
        .tidy_rows()
        .into_iter()
        .map(|r| CurveRow {
            model: report.name.clone(),
            metric: r.metric,
            group_or_pair: r.group_or_pair,
            time: r.time,
            value: r.value,
        })
        .collect()
}

pub fn write_curves(rows: &[CurveRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["model", "metric", "group_or_pair", "time", "value"])?;
    let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.model.as_str(),
            r.metric.as_str(),
            r.group_or_pair.as_str(),
            &fmt(r.time),
            &fmt(r.value),
        ])?;
    }
    w.into_inner()
        .map_err(|e| Error::io("curves.csv", e.into_error()))
}

pub fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    pub split: u64,
    pub rashomon: u64,
    pub bootstrap: u64,
    pub simulate: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub config: PipelineConfig,
    pub seeds: Seeds,
    pub selected_model: String,
    pub timings_ms: BTreeMap<String, u128>,
    pub files: Vec<FileRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitSizes {
    pub train: usize,
    pub validation: usize,
    pub test: usize,
}

#[derive(Serialize)]
struct ValidationReport<'a> {
    dataset: &'static str,
    measure: &'a str,
    metric_order: &'a [String],
    split: &'a SplitSizes,
    models: &'a [ModelReport],
    rashomon: RashomonDigest<'a>,
    selection: &'a Selection,
}

#[derive(Serialize)]
struct RashomonDigest<'a> {
    full_performance: f64,
    cases: Vec<CaseDigest<'a>>,
    excluded: &'a [crate::rashomon::ExcludedCase],
}

#[derive(Serialize)]
struct CaseDigest<'a> {
    case: &'a [String],
    performance: f64,
    threshold: f64,
    members: usize,
    stats: &'a crate::rashomon::AcceptanceStats,
}

#[derive(Serialize)]
struct TestReport<'a> {
    dataset: &'static str,
    measure: &'a str,
    metric_order: &'a [String],
    comparison: &'a [ComparisonRow],
    models: &'a [ModelReport],
}

/// In-memory outputs of a run, keyed by file name in write order.
#[derive(Debug, Clone)]
pub struct RunOutputs {
    pub files: Vec<(String, Vec<u8>)>,
    pub comparison: Vec<ComparisonRow>,
    pub selection: Selection,
    pub set: RashomonSet,
    pub manifest: RunManifest,
}

fn stage<T>(
    name: &str,
    timings: &mut BTreeMap<String, u128>,
    f: impl FnOnce() -> Result<T>,
) -> Result<T> {
    let start = Instant::now();
    let out = f().map_err(|e| Error::Stage {
        stage: name.into(),
        source: Box::new(e),
    })?;
    timings.insert(name.into(), start.elapsed().as_millis());
    Ok(out)
}

pub const MODEL_NAMES: [&str; 3] = ["CoxPH", "Under-blindness", "FASM"];

/// Runs the full pipeline in memory. `grid` overrides the configured window.
pub fn run_pipeline(config: &PipelineConfig, grid: Option<&TimeGrid>) -> Result<RunOutputs> {
    let mut timings = BTreeMap::new();
    stage("config", &mut timings, || config.validate())?;
    let mut options = config.evaluation.metric_options()?;
    if let Some(g) = grid {
        g.validate()?;
        options.grid = g.clone();
    }
    let measure = measure_by_name(&config.rashomon.measure)?;

    let dataset = stage("load", &mut timings, || {
        let ds = config.data.load()?;
        if ds.group_levels().len() < 2 {
            return Err(Error::MetricUndefined(format!(
                "cross-group metrics need at least two groups, found {:?}",
                ds.group_levels()
            )));
        }
        Ok(ds)
    })?;
    let (train, val, test) = stage("split", &mut timings, || {
        stratified_split(&dataset, &config.split)
    })?;
    let partition = stage("partition", &mut timings, || {
        VariablePartition::resolve(dataset.variable_names(), &config.sensitive)
    })?;
    let (coxph, blind) = stage("fit", &mut timings, || {
        let full = fit_all(
            &train,
            Some(&partition.roster(partition.full_mask())),
            &config.fit,
        )?
        .0;
        let blind = fit_all(&train, Some(&partition.roster(0)), &config.fit)?.0;
        Ok((full, blind))
    })?;
    let set = stage("rashomon", &mut timings, || {
        build_integral_set(
            &train,
            &val,
            &partition,
            &config.rashomon.config,
            &config.fit.solver,
            config.fit.ties,
            measure.as_ref(),
        )
    })?;
    let select_options = SelectOptions {
        metrics: options.clone(),
        normalize: config.selection.normalize,
    };
    let selection = stage("select", &mut timings, || {
        select_fasm(&set, &val, &select_options)
    })?;

    let models = [&coxph, &blind, &selection.model];
    let (val_reports, test_reports) = stage("evaluate", &mut timings, || {
        let on = |ds: &SurvivalDataset, boot: Option<&BootstrapConfig>| {
            MODEL_NAMES
                .iter()
                .zip(models)
                .map(|(name, m)| model_report(name, m, ds, &options, boot))
                .collect::<Result<Vec<_>>>()
        };
        Ok((on(&val, None)?, on(&test, Some(&config.bootstrap))?))
    })?;
    let comparison = test_reports
        .iter()
        .map(comparison_row)
        .collect::<Result<Vec<_>>>()?;

    let files = stage("report", &mut timings, || {
        let metric_order: Vec<String> = METRIC_ORDER.iter().map(|s| s.to_string()).collect();
        let sizes = SplitSizes {
            train: train.len(),
            validation: val.len(),
            test: test.len(),
        };
        let mut jsonl = Vec::new();
        set.write_jsonl(&mut jsonl)?;
        let report_val = ValidationReport {
            dataset: "validation",
            measure: &set.measure,
            metric_order: &metric_order,
            split: &sizes,
            models: &val_reports,
            rashomon: RashomonDigest {
                full_performance: set.full_performance,
                cases: set
                    .cases
                    .iter()
                    .map(|c| CaseDigest {
                        case: &c.case,
                        performance: c.performance,
                        threshold: c.threshold,
                        members: c.members.len(),
                        stats: &c.stats,
                    })
                    .collect(),
                excluded: &set.excluded,
            },
            selection: &selection,
        };
        let report_test = TestReport {
            dataset: "test",
            measure: &set.measure,
            metric_order: &metric_order,
            comparison: &comparison,
            models: &test_reports,
        };
        let mut curves = Vec::new();
        for (report, model) in test_reports.iter().zip(models) {
            curves.extend(metric_curve_rows(report));
            curves.extend(risk_quantile_rows(
                &report.name,
                model,
                &test,
                &options,
                config.evaluation.year_length,
            )?);
        }
        Ok(vec![
            ("fasm_model.json".to_string(), to_json(&selection.model)?),
            ("rashomon.jsonl".to_string(), jsonl),
            ("report_val.json".to_string(), to_json(&report_val)?),
            ("report_test.json".to_string(), to_json(&report_test)?),
            ("curves.csv".to_string(), write_curves(&curves)?),
        ])
    })?;

    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").into(),
        config: config.clone(),
        seeds: Seeds {
            split: config.split.seed,
            rashomon: config.rashomon.config.seed,
            bootstrap: config.bootstrap.seed,
            simulate: config.data.simulate.as_ref().map(|s| s.seed),
        },
        selected_model: selection.id.to_string(),
        timings_ms: timings,
        files: files
            .iter()
            .map(|(name, bytes)| FileRecord {
                name: name.clone(),
                sha256: sha256_hex(bytes),
                bytes: bytes.len(),
            })
            .collect(),
    };
    Ok(RunOutputs {
        files,
        comparison,
        selection,
        set,
        manifest,
    })
}

/// Writes `files` into `dir` in order. On failure, files written so far are
/// removed, and `dir` too if this call created it.
pub fn write_files(dir: &Path, files: &[(String, Vec<u8>)]) -> Result<()> {
    let created_dir = !dir.exists();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written: Vec<PathBuf> = Vec::new();
    for (name, bytes) in files {
        let path = dir.join(name);
        if let Err(e) = fs::write(&path, bytes) {
            for p in &written {
                let _ = fs::remove_file(p);
            }
            if created_dir {
                let _ = fs::remove_dir(dir);
            }
            return Err(Error::io(&path, e));
        }
        written.push(path);
    }
    Ok(())
}

/// Writes every output and then the manifest.
pub fn write_outputs(outputs: &RunOutputs, dir: &Path) -> Result<()> {
    let mut files = outputs.files.clone();
    files.push(("manifest.json".into(), to_json(&outputs.manifest)?));
    write_files(dir, &files)
}
