//! Command-line front end. Every subcommand reads and writes the file
//! formats of the library modules; nothing is cached between runs.
//!
//! A JSON config file (`--config`) may supply any flag; flags given on the
//! command line take precedence. Relative paths in the config file resolve
//! against the file's directory.

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::activations::{load_dump, ActivationRecord, DistanceMetric, Split};
use crate::calibrator::{
    fit, recalibrate, threshold_decision, CalibrationConfig, FittedCalibrator, Mode, WeightFormula,
};
use crate::error::Error;
use crate::evaluation::{
    reports_to_csv, sweep, EvaluationReport, FoldDumps, Method, ProtocolSpec, SweepGrid, ThresholdPolicy,
};
use crate::mixture::{cap_selection, mixture_batch, select_unknown_candidates, DEFAULT_SIGMA};
use crate::plot;

/// Synthetic-sample budget relative to the mean per-class training count.
pub const GENERATION_FACTOR: usize = 10;

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";
pub const F_MEASURE_SVG: &str = "f_measure_vs_openness.svg";
pub const ACCURACY_SVG: &str = "accuracy_vs_tail_size.svg";

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments, config values or missing inputs. Exit code 2.
    Validation(String),
    /// Failure while running a valid command. Exit code 1.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig { .. } | Error::InvalidTailSize(_) => CliError::Validation(e.to_string()),
            e => CliError::Runtime(e.to_string()),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn validation(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

#[derive(Debug, Parser)]
#[command(name = "gopenmax", version, about = "Open-set calibration with Weibull tail models")]
pub struct Cli {
    /// JSON config file; command-line flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit per-class Weibull models and write the calibrator JSON.
    Fit(FitArgs),
    /// Recalibrate every record of a dump with a fitted calibrator.
    Calibrate(CalibrateArgs),
    /// Apply the threshold rule to probability vectors.
    Decide(DecideArgs),
    /// Write a batch of class-mixture vectors.
    Mix(MixArgs),
    /// Select generated samples the closed-set classifier gets wrong.
    Select(SelectArgs),
    /// Evaluate one configuration over the protocol folds.
    Evaluate(EvaluateArgs),
    /// Evaluate the full grid of the config file.
    Sweep(SweepArgs),
    /// Render SVG plots from a report file.
    Plot(PlotArgs),
}

#[derive(Debug, Args, Default)]
pub struct CalibrationFlags {
    #[arg(long)]
    pub mode: Option<Mode>,
    #[arg(long)]
    pub alpha: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub tail_size: Option<usize>,
    #[arg(long)]
    pub metric: Option<DistanceMetric>,
    #[arg(long)]
    pub weights: Option<WeightFormula>,
    /// Use every training sample for the MAV, not only correctly classified ones.
    #[arg(long)]
    pub all_samples: bool,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub dump: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub calibration: CalibrationFlags,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub dump: Option<PathBuf>,
    /// Only records of this split (default: all).
    #[arg(long)]
    pub split: Option<String>,
    /// Override the calibrator's threshold.
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DecideArgs {
    /// Comma-separated probabilities.
    #[arg(long, conflicts_with = "input")]
    pub probs: Option<String>,
    /// Output of `calibrate`; every line is re-decided.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// `openmax` / `gopenmax` treat the last position as unknown; `softmax` does not.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MixArgs {
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long)]
    pub count: Option<usize>,
    /// Derive the count as ten times the mean per-class training count of this dump.
    #[arg(long, conflicts_with = "count")]
    pub budget_from: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[arg(long)]
    pub generated: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub cap: Option<usize>,
    /// Cap at the mean per-class training count of this dump.
    #[arg(long, conflicts_with = "cap")]
    pub cap_from: Option<PathBuf>,
    /// Also write the full selection (with rejection reasons) as JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub method: Option<Method>,
    #[arg(long)]
    pub alpha: Option<usize>,
    #[arg(long)]
    pub tail_size: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Number of unknown test classes to include (default: all).
    #[arg(long)]
    pub unknown_classes: Option<usize>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub dump: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub generated: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub budget_from: Option<PathBuf>,
    pub cap_from: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FoldPaths {
    pub net: PathBuf,
    #[serde(default)]
    pub net_g: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixtureParams {
    pub n_classes: Option<usize>,
    pub sigma: f64,
    pub count: Option<usize>,
    pub seed: u64,
    pub cap: Option<usize>,
}

impl Default for MixtureParams {
    fn default() -> Self {
        MixtureParams {
            n_classes: None,
            sigma: DEFAULT_SIGMA,
            count: None,
            seed: 0,
            cap: None,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: PathsConfig,
    pub calibration: CalibrationConfig,
    pub protocol: Option<ProtocolSpec>,
    pub folds: Vec<FoldPaths>,
    pub grid: SweepGrid,
    pub mixture: MixtureParams,
    pub jobs: usize,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<RunConfig> {
        let text = fs::read_to_string(path).map_err(|e| validation(format!("config {}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| validation(format!("config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve(base);
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(path) = p {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        };
        let p = &mut self.paths;
        for slot in [
            &mut p.dump,
            &mut p.model,
            &mut p.generated,
            &mut p.out,
            &mut p.out_dir,
            &mut p.report,
            &mut p.budget_from,
            &mut p.cap_from,
        ] {
            fix(slot);
        }
        for f in &mut self.folds {
            if f.net.is_relative() {
                f.net = base.join(&f.net);
            }
            fix(&mut f.net_g);
        }
    }
}

/// Parses `args` (program name first) and runs the selected command.
pub fn run<I, T>(args: I) -> CliResult<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| match e.kind() {
        clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
            // help and version go to stdout and succeed
            let _ = e.print();
            CliError::Runtime(String::new())
        }
        _ => validation(e.to_string()),
    });
    let cli = match cli {
        Err(CliError::Runtime(m)) if m.is_empty() => return Ok(()),
        other => other?,
    };
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::Fit(a) => cmd_fit(&cfg, a),
        Command::Calibrate(a) => cmd_calibrate(&cfg, a),
        Command::Decide(a) => cmd_decide(a),
        Command::Mix(a) => cmd_mix(&cfg, a),
        Command::Select(a) => cmd_select(&cfg, a),
        Command::Evaluate(a) => cmd_evaluate(&cfg, a),
        Command::Sweep(a) => cmd_sweep(&cfg, a),
        Command::Plot(a) => cmd_plot(&cfg, a),
    }
}

fn required(value: Option<PathBuf>, flag: &str) -> CliResult<PathBuf> {
    value.ok_or_else(|| {
        validation(format!(
            "missing --{flag} (or paths.{} in the config)",
            flag.replace('-', "_")
        ))
    })
}

fn existing(path: &Path) -> CliResult<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(validation(format!("input file not found: {}", path.display())))
    }
}

fn read_dump(path: &Path) -> CliResult<Vec<ActivationRecord>> {
    existing(path)?;
    Ok(load_dump(path)?)
}

fn write_file(path: &Path, contents: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, contents).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn json_lines<T: Serialize>(items: &[T]) -> CliResult<Vec<u8>> {
    let mut out = Vec::new();
    for item in items {
        serde_json::to_writer(&mut out, item).map_err(|e| CliError::Runtime(e.to_string()))?;
        out.push(b'\n');
    }
    Ok(out)
}

/// Mean number of training records per known class (labels >= 0).
pub fn mean_train_count(records: &[ActivationRecord]) -> usize {
    let mut counts = std::collections::BTreeMap::<i64, usize>::new();
    for r in records.iter().filter(|r| r.split == Split::Train && r.true_label >= 0) {
        *counts.entry(r.true_label).or_default() += 1;
    }
    if counts.is_empty() {
        return 0;
    }
    counts.values().sum::<usize>() / counts.len()
}

fn merged_calibration(cfg: &RunConfig, flags: &CalibrationFlags) -> CalibrationConfig {
    let mut c = cfg.calibration;
    if let Some(v) = flags.mode {
        c.mode = v;
    }
    if let Some(v) = flags.alpha {
        c.alpha = v;
    }
    if let Some(v) = flags.epsilon {
        c.epsilon = v;
    }
    if let Some(v) = flags.tail_size {
        c.tail_size = v;
    }
    if let Some(v) = flags.metric {
        c.metric = v;
    }
    if let Some(v) = flags.weights {
        c.weight_formula = v;
    }
    if flags.all_samples {
        c.correct_only = false;
    }
    c
}

fn cmd_fit(cfg: &RunConfig, args: FitArgs) -> CliResult<()> {
    let dump = required(args.dump.or(cfg.paths.dump.clone()), "dump")?;
    let out = required(args.out.or(cfg.paths.out.clone()), "out")?;
    let config = merged_calibration(cfg, &args.calibration);
    config.validate(None)?;
    let records = read_dump(&dump)?;
    let calib = fit(&records, &config)?;
    let json = serde_json::to_vec_pretty(&calib).map_err(|e| CliError::Runtime(e.to_string()))?;
    write_file(&out, &json)
}

/// One line of `calibrate` output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibratedLine {
    pub id: String,
    pub probabilities: Vec<f64>,
    pub revised_activations: Vec<f64>,
    pub unknown_probability: f64,
    pub decision: crate::calibrator::Decision,
}

fn load_calibrator(path: &Path) -> CliResult<FittedCalibrator> {
    existing(path)?;
    let text = fs::read_to_string(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn cmd_calibrate(cfg: &RunConfig, args: CalibrateArgs) -> CliResult<()> {
    let model = required(args.model.or(cfg.paths.model.clone()), "model")?;
    let dump = required(args.dump.or(cfg.paths.dump.clone()), "dump")?;
    let out = required(args.out.or(cfg.paths.out.clone()), "out")?;
    let split: Option<Split> = args
        .split
        .map(|s| serde_json::from_value(serde_json::Value::String(s.clone())))
        .transpose()
        .map_err(|_| validation("--split must be one of train, val, test, generated"))?;
    let mut calib = load_calibrator(&model)?;
    if let Some(eps) = args.epsilon {
        calib = calib.with_epsilon(eps)?;
    }
    let records = read_dump(&dump)?;
    let lines = records
        .iter()
        .filter(|r| split.is_none_or(|s| r.split == s))
        .map(|r| {
            let o = recalibrate(&r.av, &calib).map_err(|e| CliError::Runtime(format!("record {}: {e}", r.id)))?;
            Ok(CalibratedLine {
                id: r.id.clone(),
                probabilities: o.probabilities,
                revised_activations: o.revised_activations,
                unknown_probability: o.unknown_probability,
                decision: o.decision,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    write_file(&out, &json_lines(&lines)?)
}

#[derive(Debug, Serialize)]
struct DecisionLine<'a> {
    id: &'a str,
    decision: crate::calibrator::Decision,
}

fn cmd_decide(args: DecideArgs) -> CliResult<()> {
    let epsilon = args.epsilon.unwrap_or(0.0);
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(validation(format!("epsilon: {epsilon} outside [0, 1]")));
    }
    let last_is_unknown = match args.mode.as_deref().unwrap_or("gopenmax") {
        "openmax" | "gopenmax" | "gsoftmax" => true,
        "softmax" => false,
        other => return Err(validation(format!("mode: unknown value `{other}`"))),
    };
    if let Some(probs) = args.probs {
        let p = probs
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| validation(format!("probs: {e}")))?;
        let total: f64 = p.iter().sum();
        if p.is_empty() || (total - 1.0).abs() > 1e-9 {
            return Err(validation(format!("probs: must sum to 1 (got {total})")));
        }
        let d = threshold_decision(&p, epsilon, last_is_unknown);
        let text = format!("{d}\n");
        return match args.out {
            Some(out) => write_file(&out, text.as_bytes()),
            None => {
                print!("{text}");
                Ok(())
            }
        };
    }
    let input = args
        .input
        .ok_or_else(|| validation("one of --probs or --input is required"))?;
    existing(&input)?;
    let out = required(args.out, "out")?;
    let file = fs::File::open(&input).map_err(|e| CliError::Runtime(format!("{}: {e}", input.display())))?;
    let mut buf = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::Runtime(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: CalibratedLine = serde_json::from_str(&line)
            .map_err(|e| CliError::Runtime(format!("{} line {}: {e}", input.display(), i + 1)))?;
        let decision = threshold_decision(&rec.probabilities, epsilon, last_is_unknown);
        serde_json::to_writer(&mut buf, &DecisionLine { id: &rec.id, decision })
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        buf.write_all(b"\n").map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    write_file(&out, &buf)
}

fn cmd_mix(cfg: &RunConfig, args: MixArgs) -> CliResult<()> {
    let out = required(args.out.or(cfg.paths.out.clone()), "out")?;
    let n_classes = args
        .classes
        .or(cfg.mixture.n_classes)
        .ok_or_else(|| validation("missing --classes (or mixture.n_classes in the config)"))?;
    if n_classes == 0 {
        return Err(validation("classes: must be at least 1"));
    }
    let sigma = args.sigma.unwrap_or(cfg.mixture.sigma);
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(validation(format!("sigma: {sigma} must be > 0")));
    }
    let seed = args.seed.unwrap_or(cfg.mixture.seed);
    let count = match (args.count, args.budget_from.or(cfg.paths.budget_from.clone())) {
        (Some(c), _) => c,
        (None, Some(dump)) => GENERATION_FACTOR * mean_train_count(&read_dump(&dump)?),
        (None, None) => cfg
            .mixture
            .count
            .ok_or_else(|| validation("missing --count (or --budget-from / mixture.count)"))?,
    };
    let batch = mixture_batch(n_classes, count, seed, sigma)?;
    write_file(&out, &json_lines(&batch)?)
}

fn cmd_select(cfg: &RunConfig, args: SelectArgs) -> CliResult<()> {
    let generated = required(args.generated.or(cfg.paths.generated.clone()), "generated")?;
    let out = required(args.out.or(cfg.paths.out.clone()), "out")?;
    let cap = match (
        args.cap.or(cfg.mixture.cap),
        args.cap_from.or(cfg.paths.cap_from.clone()),
    ) {
        (Some(c), _) => Some(c),
        (None, Some(dump)) => Some(mean_train_count(&read_dump(&dump)?)),
        (None, None) => None,
    };
    let records = read_dump(&generated)?;
    let mut selection = select_unknown_candidates(&records)?;
    if let Some(cap) = cap {
        selection = cap_selection(selection, cap);
    }
    let mut ids = String::new();
    for id in &selection.selected_ids {
        ids.push_str(id);
        ids.push('\n');
    }
    write_file(&out, ids.as_bytes())?;
    if let Some(report) = args.report.or(cfg.paths.report.clone()) {
        let json = serde_json::to_vec_pretty(&selection).map_err(|e| CliError::Runtime(e.to_string()))?;
        write_file(&report, &json)?;
    }
    Ok(())
}

/// Loads every fold listed in the config.
pub fn load_folds(cfg: &RunConfig) -> CliResult<Vec<FoldDumps>> {
    if cfg.folds.is_empty() {
        return Err(validation("folds: the config lists no fold dumps"));
    }
    for f in &cfg.folds {
        existing(&f.net)?;
        if let Some(g) = &f.net_g {
            existing(g)?;
        }
    }
    cfg.folds
        .iter()
        .map(|f| {
            Ok(FoldDumps {
                net: load_dump(&f.net)?,
                net_g: f.net_g.as_ref().map(load_dump).transpose()?,
            })
        })
        .collect()
}

fn protocol(cfg: &RunConfig) -> CliResult<ProtocolSpec> {
    cfg.protocol
        .clone()
        .ok_or_else(|| validation("protocol: missing from the config"))
}

fn write_reports(out_dir: &Path, reports: &[EvaluationReport]) -> CliResult<()> {
    let json = serde_json::to_vec_pretty(reports).map_err(|e| CliError::Runtime(e.to_string()))?;
    write_file(&out_dir.join(REPORT_JSON), &json)?;
    write_file(&out_dir.join(REPORT_CSV), reports_to_csv(reports).as_bytes())?;
    write_plots(out_dir, reports)
}

fn write_plots(out_dir: &Path, reports: &[EvaluationReport]) -> CliResult<()> {
    write_file(
        &out_dir.join(F_MEASURE_SVG),
        plot::f_measure_vs_openness(reports).as_bytes(),
    )?;
    write_file(
        &out_dir.join(ACCURACY_SVG),
        plot::accuracy_vs_tail_size(reports).as_bytes(),
    )
}

/// The single-cell grid `evaluate` runs.
pub fn evaluate_grid(cfg: &RunConfig, args: &EvaluateArgs) -> SweepGrid {
    let c = &cfg.calibration;
    let method = args.method.unwrap_or(match c.mode {
        Mode::OpenMax => Method::OpenMax,
        Mode::GOpenMax => Method::GOpenMax,
    });
    SweepGrid {
        methods: vec![method],
        alphas: vec![args.alpha.unwrap_or(c.alpha)],
        tail_sizes: vec![args.tail_size.unwrap_or(c.tail_size)],
        epsilons: vec![args.epsilon.unwrap_or(c.epsilon)],
        unknown_counts: Some(vec![args
            .unknown_classes
            .unwrap_or_else(|| cfg.protocol.as_ref().map_or(0, |p| p.unknown_test_classes.len()))]),
        threshold: ThresholdPolicy::Fixed,
        metric: c.metric,
        weight_formula: c.weight_formula,
        correct_only: c.correct_only,
        f_measure: cfg.grid.f_measure,
    }
}

fn cmd_evaluate(cfg: &RunConfig, args: EvaluateArgs) -> CliResult<()> {
    let out_dir = required(args.out_dir.clone().or(cfg.paths.out_dir.clone()), "out-dir")?;
    let protocol = protocol(cfg)?;
    let grid = evaluate_grid(cfg, &args);
    grid.validate(&protocol)?;
    let folds = load_folds(cfg)?;
    let reports = sweep(&folds, &protocol, &grid, cfg.jobs)?;
    write_reports(&out_dir, &reports)
}

fn cmd_sweep(cfg: &RunConfig, args: SweepArgs) -> CliResult<()> {
    let out_dir = required(args.out_dir.or(cfg.paths.out_dir.clone()), "out-dir")?;
    let protocol = protocol(cfg)?;
    protocol.validate()?;
    cfg.grid.validate(&protocol)?;
    let folds = load_folds(cfg)?;
    let reports = sweep(&folds, &protocol, &cfg.grid, args.jobs.unwrap_or(cfg.jobs))?;
    write_reports(&out_dir, &reports)
}

fn cmd_plot(cfg: &RunConfig, args: PlotArgs) -> CliResult<()> {
    let report = required(args.report.or(cfg.paths.report.clone()), "report")?;
    let out_dir = required(args.out_dir.or(cfg.paths.out_dir.clone()), "out-dir")?;
    existing(&report)?;
    let text = fs::read_to_string(&report).map_err(|e| CliError::Runtime(format!("{}: {e}", report.display())))?;
    let reports: Vec<EvaluationReport> =
        serde_json::from_str(&text).map_err(|e| CliError::Runtime(format!("{}: {e}", report.display())))?;
    write_plots(&out_dir, &reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_paths_resolve_against_config_dir() {
        let mut cfg: RunConfig = serde_json::from_str(
            r#"{"paths": {"dump": "a/net.jsonl", "out": "/abs/out.json"},
                "folds": [{"net": "f0/net.jsonl", "net_g": "f0/net_g.jsonl"}]}"#,
        )
        .unwrap();
        cfg.resolve(Path::new("/base"));
        assert_eq!(cfg.paths.dump.unwrap(), PathBuf::from("/base/a/net.jsonl"));
        assert_eq!(cfg.paths.out.unwrap(), PathBuf::from("/abs/out.json"));
        assert_eq!(cfg.folds[0].net_g.as_deref(), Some(Path::new("/base/f0/net_g.jsonl")));
    }

    #[test]
    fn unknown_config_fields_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"pathz": {}}"#).is_err());
    }

    #[test]
    fn flags_override_config() {
        let cfg = RunConfig {
            calibration: CalibrationConfig {
                alpha: 3,
                tail_size: 50,
                ..Default::default()
            },
            ..Default::default()
        };
        let flags = CalibrationFlags {
            alpha: Some(1),
            all_samples: true,
            ..Default::default()
        };
        let merged = merged_calibration(&cfg, &flags);
        assert_eq!(merged.alpha, 1);
        assert_eq!(merged.tail_size, 50);
        assert!(!merged.correct_only);
    }

    #[test]
    fn error_exit_codes() {
        assert_eq!(CliError::from(Error::config("grid.alphas", "x")).exit_code(), 2);
        assert_eq!(CliError::from(Error::EmptyClass(3)).exit_code(), 1);
    }
}
