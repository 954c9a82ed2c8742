//! Command-line front end.
//!
//! Feature indices on the command line and in every output file are 1-based.
//! Each run writes a `manifest.json` that `smle replay` turns back into the
//! same run.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::bench::{canonical_benchmark, run_experiments, ExperimentReport, ExperimentSpec};
use crate::datagen::{gen_data, Correlation, GenConfig};
use crate::error::SmleError;
use crate::frame::{read_table, write_table, Encoded, FeatureFrame};
use crate::glm::{newton_refit, Dataset, Family, NewtonOptions, Scale};
use crate::iht::{default_k, run_screening, ScreeningConfig, ScreeningResult, StepInit};
use crate::select::{select_from, Criterion, SelectionConfig, SelectionResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Smle(#[from] SmleError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
}

impl CliError {
    /// Machine-readable error code and process exit status.
    pub fn code(&self) -> (&'static str, i32) {
        match self {
            CliError::Usage(_) => ("usage", 2),
            CliError::Io { .. } => ("io", 5),
            CliError::Json { .. } => ("usage", 2),
            CliError::Smle(e) => match e {
                SmleError::InvalidConfig(_) => ("usage", 2),
                SmleError::DimensionMismatch(_)
                | SmleError::InvalidResponse { .. }
                | SmleError::EmptyCandidateSet
                | SmleError::MissingVotes
                | SmleError::Data(_) => ("validation", 3),
                SmleError::SingularDesign
                | SmleError::NonConvergence { .. }
                | SmleError::StepSizeExhausted { .. }
                | SmleError::NonFinite(_)
                | SmleError::NotPositiveDefinite(_)
                | SmleError::NoAdmissibleModel => ("numerical", 4),
                SmleError::Io(_) => ("io", 5),
            },
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "smle",
    version,
    about = "Sparse maximum likelihood feature screening for GLMs"
)]
pub struct Cli {
    /// Directory for output files.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// Worker threads for `select --parallel` and `eval`.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Debug, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "subcommand", content = "args", rename_all = "lowercase")]
pub enum Command {
    /// Simulate a dataset.
    Gen(GenArgs),
    /// Screen features by iterative hard thresholding.
    Screen(ScreenArgs),
    /// Select a sub-model from the screened features.
    Select(SelectArgs),
    /// Run a screening benchmark.
    Eval(EvalArgs),
    /// Refit the screened or selected model and predict.
    Predict(PredictArgs),
    /// Re-run the command recorded in a manifest.
    #[serde(skip)]
    Replay(ReplayArgs),
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct GenArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub p: usize,
    #[arg(long, default_value = "gaussian")]
    pub family: Family,
    #[arg(long, default_value = "id")]
    pub correlation: Correlation,
    #[arg(long, default_value_t = 0.2)]
    pub rho: f64,
    /// Number of causal features when `--pos-true` is absent.
    #[arg(long, default_value_t = 5)]
    pub num_true: usize,
    #[arg(long, value_delimiter = ',')]
    pub pos_true: Vec<usize>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub effects: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub ctg_pos: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    pub ctg_levels: Vec<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

/// Screener settings shared by `screen` and `select`.
#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct ScreenOpts {
    /// Retained features; defaults to floor(0.5 ln(n) n^(1/3)).
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub keyset: Vec<usize>,
    #[arg(long, default_value_t = 1e-2)]
    pub tol: f64,
    #[arg(long)]
    pub fast: bool,
    #[arg(long, default_value_t = 0.5)]
    pub u_rate: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 50)]
    pub max_u_tries: usize,
    #[arg(long)]
    pub standardize: bool,
    #[arg(long)]
    pub intercept: bool,
    /// Threshold categorical dummies one column at a time.
    #[arg(long)]
    pub no_group: bool,
    /// colnorm, infnorm, spectral, or a positive number.
    #[arg(long, default_value = "colnorm")]
    pub step_init: String,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct ScreenArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub family: Family,
    #[command(flatten)]
    pub opts: ScreenOpts,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct SelectArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// `screen_result.json` from a previous run; screens afresh when absent.
    #[arg(long)]
    pub screen: Option<PathBuf>,
    #[arg(long)]
    pub family: Option<Family>,
    #[command(flatten)]
    pub opts: ScreenOpts,
    #[arg(long, default_value = "ebic")]
    pub criterion: Criterion,
    #[arg(long, default_value_t = 1)]
    pub k_min: usize,
    #[arg(long)]
    pub k_max: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    pub gamma: f64,
    #[arg(long)]
    pub vote: bool,
    #[arg(long, value_delimiter = ',', default_value = "0,0.2,0.4,0.6,0.8,1")]
    pub gamma_seq: Vec<f64>,
    #[arg(long, default_value_t = 0.6)]
    pub vote_threshold: f64,
    #[arg(long)]
    pub parallel: bool,
    /// Model-space size in the EBIC penalty; defaults to the candidate count.
    #[arg(long)]
    pub ebic_p: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct EvalArgs {
    /// JSON list of experiment cells; the built-in benchmark when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the replication count of every cell.
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct PredictArgs {
    /// Training data.
    #[arg(long)]
    pub data: PathBuf,
    /// `screen_result.json` or `select_result.json`.
    #[arg(long)]
    pub result: PathBuf,
    #[arg(long)]
    pub newdata: Option<PathBuf>,
    #[arg(long = "type", default_value = "response")]
    pub scale: Scale,
}

#[derive(Clone, Debug, PartialEq, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub version: String,
    #[serde(flatten)]
    pub command: Command,
}

/// Parses `args` (program name first), runs the command and returns the exit
/// status. Errors go to stderr as `error[code]: message`.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            let (code, status) = e.code();
            eprintln!("error[{code}]: {e}");
            status
        }
    }
}

/// Runs a parsed command line.
pub fn execute(cli: &Cli) -> CliResult<()> {
    let run = || run_command(&cli.command, &cli.out_dir);
    match cli.threads {
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| CliError::Usage(format!("cannot build thread pool: {e}")))?;
            pool.install(run)
        }
        None => run(),
    }
}

pub fn run_command(command: &Command, out_dir: &Path) -> CliResult<()> {
    fs::create_dir_all(out_dir).map_err(|source| CliError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let resolved = match command {
        Command::Gen(a) => cmd_gen(a, out_dir)?,
        Command::Screen(a) => cmd_screen(a, out_dir)?,
        Command::Select(a) => cmd_select(a, out_dir)?,
        Command::Eval(a) => cmd_eval(a, out_dir)?,
        Command::Predict(a) => cmd_predict(a, out_dir)?,
        Command::Replay(a) => {
            let manifest: RunManifest = read_json(&a.manifest)?;
            if manifest.schema_version != SCHEMA_VERSION {
                return Err(CliError::Usage(format!(
                    "unsupported manifest schema version {}",
                    manifest.schema_version
                )));
            }
            return run_command(&manifest.command, out_dir);
        }
    };
    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: resolved,
    };
    write_json(&out_dir.join("manifest.json"), &manifest)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn to_zero_based(ids: &[usize], what: &str) -> CliResult<Vec<usize>> {
    ids.iter()
        .map(|&i| {
            i.checked_sub(1)
                .ok_or_else(|| CliError::Usage(format!("{what} indices are 1-based; got 0")))
        })
        .collect()
}

fn one_based(ids: &[usize]) -> Vec<usize> {
    ids.iter().map(|i| i + 1).collect()
}

fn cmd_gen(a: &GenArgs, out: &Path) -> CliResult<Command> {
    if a.ctg_pos.len() != a.ctg_levels.len() {
        return Err(CliError::Usage(
            "--ctg-pos and --ctg-levels must have the same length".into(),
        ));
    }
    let cfg = GenConfig {
        n: a.n,
        p: a.p,
        family: a.family,
        correlation: a.correlation,
        rho: a.rho,
        num_truecoef: a.num_true,
        pos_truecoef: (!a.pos_true.is_empty())
            .then(|| to_zero_based(&a.pos_true, "--pos-true"))
            .transpose()?,
        effect_truecoef: (!a.effects.is_empty()).then(|| a.effects.clone()),
        pos_ctgidx: (!a.ctg_pos.is_empty())
            .then(|| to_zero_based(&a.ctg_pos, "--ctg-pos"))
            .transpose()?,
        level_ctgidx: (!a.ctg_levels.is_empty()).then(|| a.ctg_levels.clone()),
        seed: a.seed,
        sigma_noise: a.sigma,
    };
    let g = gen_data(&cfg)?;
    write_table(&out.join("data.csv"), Some(&g.dataset.y), &g.frame)?;
    let truth = g
        .dataset
        .truth
        .as_ref()
        .expect("generated data carries truth");
    let categorical: Vec<Value> = cfg
        .pos_ctgidx
        .iter()
        .flatten()
        .zip(cfg.level_ctgidx.iter().flatten())
        .map(|(p, l)| json!({ "feature": p + 1, "levels": l }))
        .collect();
    write_json(
        &out.join("truth.json"),
        &json!({
            "schema_version": SCHEMA_VERSION,
            "family": cfg.family,
            "n": cfg.n,
            "p": cfg.p,
            "correlation": cfg.correlation,
            "rho": cfg.rho,
            "causal_index": one_based(&truth.causal_index),
            "causal_coef": truth.causal_coef,
            "categorical": categorical,
            "seed": cfg.seed,
        }),
    )?;
    let mut resolved = a.clone();
    resolved.pos_true = one_based(&truth.causal_index);
    resolved.effects = truth.causal_coef.clone();
    resolved.num_true = truth.causal_index.len();
    Ok(Command::Gen(resolved))
}

/// Training data as read from CSV together with its encoding.
struct Loaded {
    data: Dataset,
    frame: FeatureFrame,
    enc: Encoded,
}

fn load(path: &Path, family: Family) -> CliResult<Loaded> {
    let table = read_table(path)?;
    let y = table
        .y
        .ok_or_else(|| SmleError::Data(format!("{}: no response column 'y'", path.display())))?;
    let enc = table.frame.encode()?;
    let mut data = Dataset::new(y, enc.x.clone(), family)?;
    if table.frame.has_categorical() {
        data = data.with_groups(enc.groups.clone())?;
    }
    data.validate_response()?;
    Ok(Loaded {
        data,
        frame: table.frame,
        enc,
    })
}

fn parse_step_init(s: &str) -> CliResult<StepInit> {
    match s {
        "colnorm" => Ok(StepInit::ColumnNorm),
        "infnorm" => Ok(StepInit::InfNorm),
        "spectral" => Ok(StepInit::Spectral),
        other => other
            .parse::<f64>()
            .ok()
            .filter(|v| *v > 0.0 && v.is_finite())
            .map(StepInit::Fixed)
            .ok_or_else(|| CliError::Usage(format!("invalid --step-init '{other}'"))),
    }
}

impl ScreenOpts {
    /// Fills in the data-dependent default for `k`.
    fn resolved(&self, n: usize) -> Self {
        Self {
            k: Some(self.k.unwrap_or_else(|| default_k(n))),
            ..self.clone()
        }
    }

    fn to_config(&self, n: usize) -> CliResult<ScreeningConfig> {
        Ok(ScreeningConfig {
            k: self.k.unwrap_or_else(|| default_k(n)),
            keyset: to_zero_based(&self.keyset, "--keyset")?,
            coef_initial: None,
            tol: self.tol,
            fast: self.fast,
            u_rate: self.u_rate,
            max_iter: self.max_iter,
            max_u_tries: self.max_u_tries,
            standardize: self.standardize,
            intercept: self.intercept,
            group: !self.no_group,
            step_init: parse_step_init(&self.step_init)?,
        })
    }
}

fn column_entry(enc: &Encoded, frame: &FeatureFrame, data: &Dataset, c: usize, v: f64) -> Value {
    let feature = data.features_of(&[c])[0];
    json!({
        "column": enc.column_names[c],
        "feature": feature + 1,
        "feature_name": frame.names()[feature],
        "value": v,
    })
}

fn screen_json(l: &Loaded, opts: &ScreenOpts, r: &ScreeningResult) -> Value {
    let coefficients: Vec<Value> = r
        .beta_final
        .sparse_entries()
        .into_iter()
        .map(|(c, v)| column_entry(&l.enc, &l.frame, &l.data, c, v))
        .collect();
    json!({
        "schema_version": SCHEMA_VERSION,
        "family": l.data.family,
        "n": l.data.n(),
        "p": l.data.p(),
        "n_features": l.data.n_features(),
        "retained": one_based(&r.retained_features),
        "retained_columns": r.retained.iter().map(|&c| &l.enc.column_names[c]).collect::<Vec<_>>(),
        "coefficients": coefficients,
        "intercept": r.intercept,
        "standardized": r.standardization.is_some(),
        "iterations": r.iterations,
        "stop_reason": r.stop_reason,
        "nu0": r.nu0,
        "screening": opts,
    })
}

fn write_trace(path: &Path, r: &ScreeningResult) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| SmleError::Io(e.to_string()))?;
    let wrap = |e: csv::Error| CliError::from(SmleError::Io(e.to_string()));
    w.write_record(["iter", "loglik", "step_delta", "u_tries", "support_changes"])
        .map_err(wrap)?;
    for rec in &r.trace.records {
        w.write_record([
            rec.iter.to_string(),
            rec.loglik.to_string(),
            rec.step_delta.to_string(),
            rec.u_tries.to_string(),
            rec.support_changes.to_string(),
        ])
        .map_err(wrap)?;
    }
    w.flush().map_err(|e| SmleError::Io(e.to_string()).into())
}

/// Coefficient path of the finally retained columns, one row per iteration
/// (row 0 is the starting value).
fn write_path(path: &Path, r: &ScreeningResult, names: &[String]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| SmleError::Io(e.to_string()))?;
    let wrap = |e: csv::Error| CliError::from(SmleError::Io(e.to_string()));
    let mut header = vec!["iter".to_string()];
    header.extend(r.retained.iter().map(|&c| names[c].clone()));
    w.write_record(&header).map_err(wrap)?;
    let start: Vec<(usize, f64)> = r
        .config
        .coef_initial
        .as_ref()
        .map(|v| {
            v.iter()
                .enumerate()
                .filter(|(_, x)| **x != 0.0)
                .map(|(i, x)| (i, *x))
                .collect()
        })
        .unwrap_or_default();
    let rows =
        std::iter::once((0, &start)).chain(r.trace.records.iter().map(|t| (t.iter, &t.beta)));
    for (iter, beta) in rows {
        let mut row = vec![iter.to_string()];
        for &c in &r.retained {
            let v = beta.iter().find(|(j, _)| *j == c).map_or(0.0, |(_, v)| *v);
            row.push(v.to_string());
        }
        w.write_record(&row).map_err(wrap)?;
    }
    w.flush().map_err(|e| SmleError::Io(e.to_string()).into())
}

fn cmd_screen(a: &ScreenArgs, out: &Path) -> CliResult<Command> {
    let l = load(&a.data, a.family)?;
    let opts = a.opts.resolved(l.data.n());
    let r = run_screening(&l.data, &opts.to_config(l.data.n())?)?;
    write_json(&out.join("screen_result.json"), &screen_json(&l, &opts, &r))?;
    write_trace(&out.join("trace.csv"), &r)?;
    write_path(&out.join("path.csv"), &r, &l.enc.column_names)?;
    Ok(Command::Screen(ScreenArgs { opts, ..a.clone() }))
}

#[derive(Deserialize)]
struct ScreenFile {
    family: Family,
    retained: Vec<usize>,
    screening: ScreenOpts,
}

fn select_json(l: &Loaded, sel: &SelectionResult, screening: &ScreenOpts) -> Value {
    let names = &l.enc.column_names;
    let scores: Vec<Value> = sel
        .models
        .iter()
        .map(|m| {
            json!({
                "k": m.k,
                "features": one_based(&m.features),
                "loglik": m.loglik,
                "score": m.score,
                "failure": m.failure,
            })
        })
        .collect();
    let votes = sel.votes.as_ref().map(|v| {
        json!({
            "gamma_seq": v.gamma_seq,
            "chosen_k": v.chosen_k,
            "threshold": v.threshold,
            "frequencies": v.counts.iter().map(|&(f, c)| json!({
                "feature": f + 1,
                "count": c,
                "frequency": v.frequency(c),
            })).collect::<Vec<_>>(),
        })
    });
    json!({
        "schema_version": SCHEMA_VERSION,
        "family": l.data.family,
        "criterion": sel.criterion,
        "gamma_ebic": sel.gamma_ebic,
        "ebic_p": sel.config.ebic_p,
        "candidates": one_based(&sel.candidates),
        "chosen_k": sel.chosen_k,
        "selected": one_based(&sel.selected),
        "selected_columns": sel.selected_columns.iter().map(|&c| &names[c]).collect::<Vec<_>>(),
        "scores": scores,
        "votes": votes,
        "screening": screening,
    })
}

fn cmd_select(a: &SelectArgs, out: &Path) -> CliResult<Command> {
    let (family, candidates, opts, from_file) = match &a.screen {
        Some(path) => {
            let f: ScreenFile = read_json(path)?;
            if a.family.is_some_and(|fam| fam != f.family) {
                return Err(CliError::Usage(
                    "--family disagrees with the screening result".into(),
                ));
            }
            (f.family, Some(f.retained), f.screening, true)
        }
        None => {
            let family = a
                .family
                .ok_or_else(|| CliError::Usage("--family is required without --screen".into()))?;
            (family, None, a.opts.clone(), false)
        }
    };
    let l = load(&a.data, family)?;
    let opts = opts.resolved(l.data.n());
    let screening = opts.to_config(l.data.n())?;
    let candidates = match candidates {
        Some(c) => to_zero_based(&c, "retained")?,
        None => run_screening(&l.data, &screening)?.retained_features,
    };
    let cfg = SelectionConfig {
        k_min: a.k_min,
        k_max: a.k_max,
        criterion: a.criterion,
        gamma_ebic: a.gamma,
        vote: a.vote,
        gamma_seq: a.gamma_seq.clone(),
        vote_threshold: a.vote_threshold,
        parallel: a.parallel,
        ebic_p: a.ebic_p,
    };
    let sel = select_from(&l.data, &candidates, &screening, &cfg)?;
    write_json(
        &out.join("select_result.json"),
        &select_json(&l, &sel, &opts),
    )?;
    Ok(Command::Select(SelectArgs {
        family: Some(family),
        opts: if from_file { a.opts.clone() } else { opts },
        k_max: Some(a.k_max.unwrap_or(sel.candidates.len())),
        ..a.clone()
    }))
}

/// Experiment cells from a JSON file. Feature positions in the file are
/// 1-based like everywhere else on the command line.
fn load_cells(path: &Path) -> CliResult<Vec<ExperimentSpec>> {
    let mut cells: Vec<ExperimentSpec> = read_json(path)?;
    for c in &mut cells {
        if let Some(p) = &c.gen.pos_truecoef {
            c.gen.pos_truecoef = Some(to_zero_based(p, "pos_truecoef")?);
        }
        if let Some(p) = &c.gen.pos_ctgidx {
            c.gen.pos_ctgidx = Some(to_zero_based(p, "pos_ctgidx")?);
        }
    }
    Ok(cells)
}

fn deterministic_report(report: &ExperimentReport) -> Value {
    let rows: Vec<Value> = report
        .rows
        .iter()
        .map(|r| {
            json!({
                "cell": r.cell,
                "method": r.method,
                "family": r.family,
                "n": r.n,
                "p": r.p,
                "k": r.k,
                "replications": r.replications,
                "failures": r.failures,
                "ssr": r.ssr,
                "prr": r.prr,
                "mean_iterations": r.mean_iterations,
            })
        })
        .collect();
    json!({ "schema_version": SCHEMA_VERSION, "rows": rows })
}

fn cmd_eval(a: &EvalArgs, out: &Path) -> CliResult<Command> {
    let mut cells = match &a.config {
        Some(path) => load_cells(path)?,
        None => canonical_benchmark(100, a.seed),
    };
    if let Some(r) = a.reps {
        if r == 0 {
            return Err(CliError::Usage("--reps must be at least 1".into()));
        }
        for c in &mut cells {
            c.replications = r;
        }
    }
    let report = run_experiments(&cells)?;
    report.write_csv(&out.join("eval_report.csv"))?;
    report.write_timing_csv(&out.join("eval_timing.csv"))?;
    write_json(
        &out.join("eval_report.json"),
        &deterministic_report(&report),
    )?;
    Ok(Command::Eval(a.clone()))
}

fn cmd_predict(a: &PredictArgs, out: &Path) -> CliResult<Command> {
    let result: Value = read_json(&a.result)?;
    let family: Family =
        serde_json::from_value(result["family"].clone()).map_err(|source| CliError::Json {
            path: a.result.clone(),
            source,
        })?;
    let columns_key = if result.get("selected_columns").is_some() {
        "selected_columns"
    } else {
        "retained_columns"
    };
    let names: Vec<String> =
        serde_json::from_value(result[columns_key].clone()).map_err(|source| CliError::Json {
            path: a.result.clone(),
            source,
        })?;
    let intercept = result["screening"]["intercept"].as_bool().unwrap_or(false);

    let l = load(&a.data, family)?;
    let support = names
        .iter()
        .map(|n| {
            l.enc
                .column_names
                .iter()
                .position(|c| c == n)
                .ok_or_else(|| SmleError::Data(format!("column '{n}' is not in the training data")))
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let fit = newton_refit(
        &l.data,
        &support,
        &NewtonOptions {
            intercept,
            ..Default::default()
        },
    )?;

    let x_new = match &a.newdata {
        None => l.data.x.clone(),
        Some(path) => {
            let t = read_table(path)?;
            if t.frame.names() != l.frame.names() {
                return Err(SmleError::Data(format!(
                    "{}: feature columns do not match the training data",
                    path.display()
                ))
                .into());
            }
            t.frame.encode_with_levels(&l.enc.levels)?.x
        }
    };
    let pred = fit.predict(&x_new, a.scale)?;
    let path = out.join("predictions.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| SmleError::Io(e.to_string()))?;
    let wrap = |e: csv::Error| CliError::from(SmleError::Io(e.to_string()));
    w.write_record(["prediction"]).map_err(wrap)?;
    for v in pred.iter() {
        w.write_record([v.to_string()]).map_err(wrap)?;
    }
    w.flush()
        .map_err(|e| CliError::from(SmleError::Io(e.to_string())))?;
    Ok(Command::Predict(a.clone()))
}
