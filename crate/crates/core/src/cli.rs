//! Command-line front end. Every subcommand is a thin wrapper over the
//! library; errors map to exit codes through [`Error::exit_code`].

use std::ffi::OsString;
use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::cohort::{
    load_csv, simulate_cohort, stratified_split, summarize, write_csv, SimSpec, SurvivalDataset,
};
use crate::coxfit::{CoxModel, FitSummary, Ties};
use crate::error::{Error, Result};
use crate::pipeline::{
    biased_cohort_spec, fit_all, metric_curve_rows, model_report, risk_quantile_rows, run_pipeline,
    to_json, write_curves, write_files, write_outputs, PipelineConfig,
};
use crate::rankmetrics::{MetricOptions, TimeGrid};
use crate::rashomon::{build_integral_set, measure_by_name, RashomonSet, VariablePartition};
use crate::select::{select_fasm, SelectOptions};

#[derive(Debug, Parser)]
#[command(name = "fasm", version, about = "Fairness-aware survival modeling")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Pipeline configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides every seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file or directory, depending on the subcommand.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Evaluation grid `start:end:step`.
    #[arg(long, global = true)]
    pub grid: Option<TimeGrid>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic cohort CSV and a truth sidecar JSON.
    Simulate {
        #[arg(long)]
        n: Option<usize>,
    },
    /// Fit a Cox model and write it as JSON.
    Fit {
        #[arg(long)]
        data: Option<PathBuf>,
        /// Drop a variable (column or `name=level` indicators). Repeatable.
        #[arg(long)]
        exclude: Vec<String>,
        #[arg(long)]
        ties: Option<Ties>,
    },
    /// Build the integral Rashomon set on the train/validation split.
    Rashomon {
        #[arg(long)]
        data: Option<PathBuf>,
        /// Sensitive variable. Repeatable.
        #[arg(long)]
        sensitive: Vec<String>,
    },
    /// Select the highest-MSI member of a Rashomon set on validation.
    Select {
        #[arg(long)]
        set: PathBuf,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        normalize: bool,
    },
    /// Audit a serialized model on a dataset.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Bootstrap replicates for C-index and iAUC intervals.
        #[arg(long)]
        bootstrap: Option<usize>,
        #[arg(long, default_value = "model")]
        name: String,
    },
    /// Full pipeline: split, fit, Rashomon set, selection, evaluation.
    Run,
    /// Descriptive cohort summary by group.
    Summarize {
        #[arg(long)]
        data: Option<PathBuf>,
    },
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("fasm: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.common.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be positive".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| dispatch(cli))
}

fn pipeline_config(common: &Common) -> Result<PipelineConfig> {
    let config = match &common.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    Ok(match common.seed {
        Some(s) => config.with_seed(s),
        None => config,
    })
}

fn metric_options(common: &Common, config: &PipelineConfig) -> Result<MetricOptions> {
    let mut options = config.evaluation.metric_options()?;
    if let Some(g) = &common.grid {
        options.grid = g.clone();
    }
    Ok(options)
}

fn dataset(config: &PipelineConfig, data: Option<&Path>) -> Result<SurvivalDataset> {
    match data {
        Some(p) => load_csv(p, &config.data.schema),
        None => config.data.load(),
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let bytes = to_json(value)?;
    std::io::stdout()
        .write_all(&bytes)
        .map_err(|e| Error::io("<stdout>", e))
}

fn write_one(path: &Path, bytes: Vec<u8>) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("`{}` is not a file path", path.display())))?;
    write_files(dir, &[(name.to_string_lossy().into_owned(), bytes)])
}

#[derive(Serialize)]
struct Truth<'a> {
    spec: &'a SimSpec,
    variable_names: Vec<String>,
    true_beta: Vec<f64>,
}

fn dispatch(cli: &Cli) -> Result<()> {
    let common = &cli.common;
    match &cli.command {
        Command::Simulate { n } => {
            let mut spec = match &common.config {
                Some(p) => {
                    let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                    toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?
                }
                None => biased_cohort_spec(1000, 0),
            };
            if let Some(n) = n {
                spec.n = *n;
            }
            if let Some(s) = common.seed {
                spec.seed = s;
            }
            spec.validate()?;
            let ds = simulate_cohort(&spec)?;
            let out = common
                .out
                .clone()
                .unwrap_or_else(|| PathBuf::from("cohort.csv"));
            let mut csv = Vec::new();
            write_csv(&ds, &mut csv)?;
            let truth = to_json(&Truth {
                spec: &spec,
                variable_names: spec.variable_names(),
                true_beta: spec.beta_vector(),
            })?;
            let dir = out
                .parent()
                .filter(|p| !p.as_os_str().is_empty())
                .unwrap_or(Path::new("."));
            let csv_name = out
                .file_name()
                .map(|f| f.to_string_lossy().into_owned())
                .unwrap_or_default();
            let stem = out
                .file_stem()
                .map(|f| f.to_string_lossy().into_owned())
                .unwrap_or_default();
            write_files(
                dir,
                &[(csv_name, csv), (format!("{stem}.truth.json"), truth)],
            )
        }
        Command::Fit {
            data,
            exclude,
            ties,
        } => {
            let mut config = pipeline_config(common)?;
            if let Some(t) = ties {
                config.fit.ties = *t;
            }
            config.fit.solver.validate()?;
            let ds = dataset(&config, data.as_deref())?;
            let roster = VariablePartition::resolve(ds.variable_names(), exclude)?.roster(0);
            let (model, summary) = fit_all(&ds, Some(&roster), &config.fit)?;
            write_one(
                &common.out.clone().unwrap_or_else(|| "model.json".into()),
                to_json(&model)?,
            )?;
            #[derive(Serialize)]
            struct FitOutput<'a> {
                variable_names: &'a [String],
                beta: &'a [f64],
                summary: &'a FitSummary,
            }
            print_json(&FitOutput {
                variable_names: &model.variable_names,
                beta: &model.beta,
                summary: &summary,
            })
        }
        Command::Rashomon { data, sensitive } => {
            let mut config = pipeline_config(common)?;
            if !sensitive.is_empty() {
                config.sensitive = sensitive.clone();
            }
            config.rashomon.config.validate()?;
            let ds = dataset(&config, data.as_deref())?;
            let (train, val, _) = stratified_split(&ds, &config.split)?;
            let partition = VariablePartition::resolve(ds.variable_names(), &config.sensitive)?;
            let measure = measure_by_name(&config.rashomon.measure)?;
            let set = build_integral_set(
                &train,
                &val,
                &partition,
                &config.rashomon.config,
                &config.fit.solver,
                config.fit.ties,
                measure.as_ref(),
            )?;
            let mut bytes = Vec::new();
            set.write_jsonl(&mut bytes)?;
            write_one(
                &common
                    .out
                    .clone()
                    .unwrap_or_else(|| "rashomon.jsonl".into()),
                bytes,
            )?;
            eprintln!(
                "{} members over {} cases ({} excluded)",
                set.member_count(),
                set.cases.len(),
                set.excluded.len()
            );
            Ok(())
        }
        Command::Select {
            set,
            data,
            normalize,
        } => {
            let config = pipeline_config(common)?;
            let options = metric_options(common, &config)?;
            let file = fs::File::open(set).map_err(|e| Error::io(set, e))?;
            let set = RashomonSet::read_jsonl(BufReader::new(file))?;
            let ds = dataset(&config, data.as_deref())?;
            let (_, val, _) = stratified_split(&ds, &config.split)?;
            let selection = select_fasm(
                &set,
                &val,
                &SelectOptions {
                    metrics: options,
                    normalize: *normalize || config.selection.normalize,
                },
            )?;
            let dir = common.out.clone().unwrap_or_else(|| PathBuf::from("."));
            write_files(
                &dir,
                &[
                    ("fasm_model.json".into(), to_json(&selection.model)?),
                    ("selection.json".into(), to_json(&selection)?),
                ],
            )?;
            eprintln!("selected {} (MSI {})", selection.id, selection.msi);
            Ok(())
        }
        Command::Evaluate {
            model,
            data,
            bootstrap,
            name,
        } => {
            let config = pipeline_config(common)?;
            let options = metric_options(common, &config)?;
            let text = fs::read_to_string(model).map_err(|e| Error::io(model, e))?;
            let model: CoxModel = serde_json::from_str(&text)?;
            let ds = load_csv(data, &config.data.schema)?;
            let boot = bootstrap.map(|n| crate::rankmetrics::BootstrapConfig {
                n_boot: n,
                ..config.bootstrap
            });
            let report = model_report(name, &model, &ds, &options, boot.as_ref())?;
            let mut curves = metric_curve_rows(&report);
            curves.extend(risk_quantile_rows(
                name,
                &model,
                &ds,
                &options,
                config.evaluation.year_length,
            )?);
            let dir = common.out.clone().unwrap_or_else(|| PathBuf::from("."));
            write_files(
                &dir,
                &[
                    ("report.json".into(), to_json(&report)?),
                    ("curves.csv".into(), write_curves(&curves)?),
                ],
            )
        }
        Command::Run => {
            let mut config = pipeline_config(common)?;
            if common.config.is_none() {
                return Err(Error::Config("run needs --config".into()));
            }
            if let Some(out) = &common.out {
                config.output = Some(out.clone());
            }
            let dir = config
                .output
                .clone()
                .unwrap_or_else(|| PathBuf::from("fasm_out"));
            let outputs = run_pipeline(&config, common.grid.as_ref())?;
            write_outputs(&outputs, &dir)?;
            for row in &outputs.comparison {
                let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.3}"));
                eprintln!(
                    "{:<16} dIAUC {:.3}  dCI {:.3}  dxCI {}  idxAUC {}  iAUC {:.3} [{:.3}, {:.3}]  CI {:.3} [{:.3}, {:.3}]",
                    row.model,
                    row.delta_iauc,
                    row.delta_ci,
                    opt(row.delta_xci),
                    opt(row.i_delta_xauc),
                    row.i_auc.point,
                    row.i_auc.lower,
                    row.i_auc.upper,
                    row.c_index.point,
                    row.c_index.lower,
                    row.c_index.upper,
                );
            }
            eprintln!(
                "selected {}; outputs in {}",
                outputs.manifest.selected_model,
                dir.display()
            );
            Ok(())
        }
        Command::Summarize { data } => {
            let config = pipeline_config(common)?;
            let ds = dataset(&config, data.as_deref())?;
            let summary = summarize(&ds)?;
            match &common.out {
                Some(p) => write_one(p, to_json(&summary)?),
                None => print_json(&summary),
            }
        }
    }
}
