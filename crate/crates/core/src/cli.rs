//! Command-line front end: argument parsing, run configuration and JSON
//! report emission.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::dataset::{
    load_cifar10, load_csv, load_idx, write_csv_row, write_subset, CsvOptions, DatasetFormat,
    DatasetSource, LabeledDataset, SubsetFormat,
};
use crate::error::{Error, Result};
use crate::eval::{evaluate, Algorithm, ReductionParams, ReductionResult, Selection};
use crate::ghcidr::ghcidr_reduce;
use crate::merge::{calibrate_beta, merged_ghcidr_reduce_detailed, DEFAULT_CALIBRATION_TOLERANCE};
use crate::rhc::{rhc_partition, rhc_reduce_partition, Partition, SizeHistogram};

/// Exit status for a successful run.
pub const EXIT_OK: i32 = 0;
/// Exit status for bad flags or missing parameters.
pub const EXIT_USAGE: i32 = 1;
/// Exit status for unreadable, malformed or inconsistent data.
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "ghcidr",
    version,
    about = "Homogeneous-clustering dataset reduction"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Reduce a dataset and write the selection plus a JSON report.
    Reduce(ReduceArgs),
    /// Print the cluster-size histogram of the homogeneous partition.
    Stats(CommonArgs),
    /// Reduce, then measure k-NN accuracy of the reduced set on a test set.
    Evaluate(EvaluateArgs),
    /// Search beta so Merged-GHCIDR reaches a target reduction rate.
    CalibrateBeta(CalibrateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Idx,
    Cifar10,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlgorithmArg {
    Rhc,
    Ghcidr,
    MergedGhcidr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Indices,
    Csv,
    JsonReport,
}

/// Named datasets with known (alpha, beta) settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DatasetPreset {
    Mnist,
    Fmnist,
    Cifar10,
    TinyImagenet,
}

impl DatasetPreset {
    /// `(alpha, beta)` that bring Merged-GHCIDR to the RHC reduction rate.
    pub fn defaults(self) -> (f64, f64) {
        match self {
            DatasetPreset::Mnist => (0.85, 0.4),
            DatasetPreset::Fmnist => (0.9, 0.38),
            DatasetPreset::Cifar10 => (0.4, 0.3),
            DatasetPreset::TinyImagenet => (0.4, 0.5),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Input file(s): IDX images, CIFAR-10 batches, or one CSV file.
    #[arg(long = "input", required = true, num_args = 1..)]
    pub input: Vec<PathBuf>,
    /// IDX labels file (required with --format idx).
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "idx")]
    pub format: FormatArg,
    /// CSV input starts with a header line.
    #[arg(long)]
    pub has_header: bool,
    /// Min-max normalize CSV feature values into [0, 1].
    #[arg(long)]
    pub normalize: bool,
    /// Class count, when the highest class ids are absent from the data.
    #[arg(long)]
    pub num_classes: Option<u32>,
    /// JSON file caching the homogeneous partition between runs.
    #[arg(long)]
    pub partition_cache: Option<PathBuf>,
    /// Destination for the selection, or for the report of stats, evaluate and calibrate-beta (stdout when omitted).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct AlgorithmArgs {
    #[arg(long, value_enum, default_value = "merged-ghcidr")]
    pub algorithm: AlgorithmArg,
    /// Shell sparsity in [0, 1]: a cluster of n rows gets floor((1 - alpha) * n) shells.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Fraction of same-label clusters kept after merging, in (0, 1].
    #[arg(long)]
    pub beta: Option<f64>,
    /// Take alpha and beta defaults for a named dataset.
    #[arg(long, value_enum)]
    pub dataset: Option<DatasetPreset>,
}

#[derive(Debug, Clone, Args)]
pub struct ReduceArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub algorithm: AlgorithmArgs,
    #[arg(long, value_enum, default_value = "indices")]
    pub output_format: OutputFormat,
    /// Where to write the JSON report (stdout when omitted).
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub algorithm: AlgorithmArgs,
    /// Held-out file(s), in the same format as --input.
    #[arg(long = "test-input", required = true, num_args = 1..)]
    pub test_input: Vec<PathBuf>,
    /// IDX labels for --test-input.
    #[arg(long)]
    pub test_labels: Option<PathBuf>,
    /// Neighbours voting in the k-NN proxy.
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// Also score the full training set (slow on large data).
    #[arg(long)]
    pub full: bool,
}

#[derive(Debug, Clone, Args)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Shell sparsity in [0, 1]: a cluster of n rows gets floor((1 - alpha) * n) shells.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Take the alpha default for a named dataset.
    #[arg(long, value_enum)]
    pub dataset: Option<DatasetPreset>,
    /// Target reduction in percent (defaults to the RHC rate of the partition).
    #[arg(long)]
    pub target_reduction: Option<f64>,
    /// Accepted distance to the target, in percentage points.
    #[arg(long, default_value_t = DEFAULT_CALIBRATION_TOLERANCE)]
    pub tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Reduce,
    Stats,
    Evaluate,
    CalibrateBeta,
}

/// Where and how to read one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct InputSpec {
    pub format: DatasetFormat,
    pub paths: Vec<PathBuf>,
    pub labels: Option<PathBuf>,
    pub has_header: bool,
    pub normalize: bool,
    pub num_classes: Option<u32>,
}

impl InputSpec {
    pub fn load(&self) -> Result<LabeledDataset> {
        let ds = match self.format {
            DatasetFormat::Idx => {
                let labels = self
                    .labels
                    .as_ref()
                    .ok_or_else(|| Error::Parameter("--format idx requires --labels".into()))?;
                let [images] = self.paths.as_slice() else {
                    return Err(Error::Parameter(
                        "--format idx takes exactly one --input images file".into(),
                    ));
                };
                load_idx(images, labels)?
            }
            DatasetFormat::Cifar10 => load_cifar10(&self.paths)?,
            DatasetFormat::Csv => {
                let [path] = self.paths.as_slice() else {
                    return Err(Error::Parameter(
                        "--format csv takes exactly one --input file".into(),
                    ));
                };
                load_csv(
                    path,
                    CsvOptions {
                        has_header: self.has_header,
                        normalize: self.normalize,
                    },
                )?
            }
            DatasetFormat::Memory => {
                return Err(Error::Parameter(
                    "in-memory datasets cannot be loaded from disk".into(),
                ))
            }
        };
        match self.num_classes {
            Some(k) => ds.with_num_classes(k),
            None => Ok(ds),
        }
    }
}

/// Fully resolved settings for one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: CommandKind,
    pub input: InputSpec,
    pub test_input: Option<InputSpec>,
    pub algorithm: Algorithm,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub k: usize,
    pub include_full: bool,
    pub partition_cache: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub output_format: OutputFormat,
    pub report: Option<PathBuf>,
    pub threads: Option<usize>,
    pub target_reduction: Option<f64>,
    pub tolerance: f64,
}

fn format_of(f: FormatArg) -> DatasetFormat {
    match f {
        FormatArg::Idx => DatasetFormat::Idx,
        FormatArg::Cifar10 => DatasetFormat::Cifar10,
        FormatArg::Csv => DatasetFormat::Csv,
    }
}

fn algorithm_of(a: AlgorithmArg) -> Algorithm {
    match a {
        AlgorithmArg::Rhc => Algorithm::Rhc,
        AlgorithmArg::Ghcidr => Algorithm::Ghcidr,
        AlgorithmArg::MergedGhcidr => Algorithm::MergedGhcidr,
    }
}

impl RunConfig {
    fn base(command: CommandKind, common: &CommonArgs) -> RunConfig {
        RunConfig {
            command,
            input: InputSpec {
                format: format_of(common.format),
                paths: common.input.clone(),
                labels: common.labels.clone(),
                has_header: common.has_header,
                normalize: common.normalize,
                num_classes: common.num_classes,
            },
            test_input: None,
            algorithm: Algorithm::MergedGhcidr,
            alpha: None,
            beta: None,
            k: 1,
            include_full: false,
            partition_cache: common.partition_cache.clone(),
            output: common.output.clone(),
            output_format: OutputFormat::JsonReport,
            report: None,
            threads: common.threads,
            target_reduction: None,
            tolerance: DEFAULT_CALIBRATION_TOLERANCE,
        }
    }

    fn with_algorithm(mut self, a: &AlgorithmArgs) -> RunConfig {
        let preset = a.dataset.map(DatasetPreset::defaults);
        self.algorithm = algorithm_of(a.algorithm);
        self.alpha = a.alpha.or(preset.map(|p| p.0));
        self.beta = a.beta.or(preset.map(|p| p.1));
        self
    }

    pub fn from_cli(cli: Cli) -> Result<RunConfig> {
        let config = match cli.command {
            CliCommand::Reduce(args) => {
                let mut c = RunConfig::base(CommandKind::Reduce, &args.common)
                    .with_algorithm(&args.algorithm);
                c.output_format = args.output_format;
                c.report = args.report;
                c
            }
            CliCommand::Stats(common) => RunConfig::base(CommandKind::Stats, &common),
            CliCommand::Evaluate(args) => {
                let mut c = RunConfig::base(CommandKind::Evaluate, &args.common)
                    .with_algorithm(&args.algorithm);
                c.test_input = Some(InputSpec {
                    paths: args.test_input,
                    labels: args.test_labels,
                    ..c.input.clone()
                });
                c.k = args.k;
                c.include_full = args.full;
                c
            }
            CliCommand::CalibrateBeta(args) => {
                let mut c = RunConfig::base(CommandKind::CalibrateBeta, &args.common);
                c.alpha = args.alpha.or(args.dataset.map(|p| p.defaults().0));
                c.target_reduction = args.target_reduction;
                c.tolerance = args.tolerance;
                c
            }
        };
        config.validate()?;
        Ok(config)
    }

    /// Checks that every parameter the chosen command and algorithm need is present.
    pub fn validate(&self) -> Result<()> {
        let needs_alpha = match self.command {
            CommandKind::Reduce | CommandKind::Evaluate => self.algorithm != Algorithm::Rhc,
            CommandKind::CalibrateBeta => true,
            CommandKind::Stats => false,
        };
        let needs_beta = matches!(self.command, CommandKind::Reduce | CommandKind::Evaluate)
            && self.algorithm == Algorithm::MergedGhcidr;
        if needs_alpha && self.alpha.is_none() {
            return Err(Error::Parameter(format!(
                "--alpha is required for {} (or pass --dataset for defaults)",
                self.describe()
            )));
        }
        if needs_beta && self.beta.is_none() {
            return Err(Error::Parameter(format!(
                "--beta is required for {} (or pass --dataset for defaults)",
                self.describe()
            )));
        }
        if let Some(alpha) = self.alpha {
            if !(0.0..=1.0).contains(&alpha) {
                return Err(Error::Parameter(format!(
                    "--alpha must lie in [0, 1], got {alpha}"
                )));
            }
        }
        if let Some(beta) = self.beta {
            if !(beta > 0.0 && beta <= 1.0) {
                return Err(Error::Parameter(format!(
                    "--beta must lie in (0, 1], got {beta}"
                )));
            }
        }
        if self.k == 0 {
            return Err(Error::Parameter("--k must be at least 1".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Parameter("--threads must be at least 1".into()));
        }
        if self.input.format == DatasetFormat::Idx && self.input.labels.is_none() {
            return Err(Error::Parameter("--format idx requires --labels".into()));
        }
        if let Some(test) = &self.test_input {
            if test.format == DatasetFormat::Idx && test.labels.is_none() {
                return Err(Error::Parameter(
                    "--format idx requires --test-labels".into(),
                ));
            }
        }
        if self.command == CommandKind::Reduce
            && self.algorithm == Algorithm::Rhc
            && self.output_format == OutputFormat::Indices
            && self.output.is_some()
        {
            return Err(Error::Parameter(
                "rhc keeps synthetic centroids, not rows; use --output-format csv or json-report"
                    .into(),
            ));
        }
        Ok(())
    }

    fn describe(&self) -> String {
        match self.command {
            CommandKind::CalibrateBeta => "calibrate-beta".to_string(),
            _ => format!("--algorithm {}", self.algorithm),
        }
    }
}

/// JSON report written by `reduce`.
#[derive(Debug, Serialize)]
pub struct ReduceReport {
    pub algorithm: Algorithm,
    pub params: ReductionParams,
    pub n: usize,
    pub reduced_n: usize,
    pub reduction_rate: f64,
    pub synthetic: bool,
    pub num_clusters: usize,
    pub per_class_counts: BTreeMap<u32, usize>,
    pub cluster_size_histogram: SizeHistogram,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub merged_cluster_size_histogram: Option<SizeHistogram>,
    pub source: DatasetSource,
    pub conventions: Conventions,
    pub wall_time_per_stage: BTreeMap<String, f64>,
}

/// Choices that affect reproducibility, recorded with every report.
#[derive(Debug, Serialize)]
pub struct Conventions {
    pub feature_scaling: &'static str,
    pub annulus_membership: &'static str,
    pub linkage: &'static str,
    pub kmeans_init: &'static str,
}

const CONVENTIONS: Conventions = Conventions {
    feature_scaling: "pixel bytes divided by 255 (global, no per-channel normalization)",
    annulus_membership: "half-open [inner, outer), outermost shell closed",
    linkage: "complete linkage over member points",
    kmeans_init: "class means of the cluster being split",
};

#[derive(Debug, Serialize)]
struct StatsReport {
    n: usize,
    num_clusters: usize,
    histogram: SizeHistogram,
}

struct Timer(BTreeMap<String, f64>);

impl Timer {
    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let started = Instant::now();
        let out = f()?;
        *self.0.entry(stage.to_string()).or_default() += started.elapsed().as_secs_f64();
        Ok(out)
    }
}

fn partition_for(
    ds: &LabeledDataset,
    cache: Option<&Path>,
    timer: &mut Timer,
) -> Result<Partition> {
    match cache {
        Some(path) if path.exists() => {
            timer.time("partition_cache_load", || Partition::load(ds, path))
        }
        Some(path) => {
            let p = timer.time("partition", || Ok(rhc_partition(ds)))?;
            timer.time("partition_cache_save", || p.save(path))?;
            Ok(p)
        }
        None => timer.time("partition", || Ok(rhc_partition(ds))),
    }
}

fn reduce(
    config: &RunConfig,
    ds: &LabeledDataset,
    p: &Partition,
    timer: &mut Timer,
) -> Result<(ReductionResult, Option<Partition>)> {
    let alpha = || {
        config
            .alpha
            .ok_or_else(|| Error::Parameter("--alpha is required".into()))
    };
    let (result, merged) = match config.algorithm {
        Algorithm::Rhc => (
            timer.time("select", || Ok(rhc_reduce_partition(ds, p)))?,
            None,
        ),
        Algorithm::Ghcidr => (
            timer.time("select", || ghcidr_reduce(ds, p, alpha()?))?,
            None,
        ),
        Algorithm::MergedGhcidr => {
            let beta = config
                .beta
                .ok_or_else(|| Error::Parameter("--beta is required".into()))?;
            let (r, m) = timer.time("merge_select", || {
                merged_ghcidr_reduce_detailed(ds, p, alpha()?, beta)
            })?;
            (r, Some(m))
        }
    };
    Ok((result, merged))
}

/// Pads every float to at least [`MIN_SIGNIFICANT_DIGITS`] significant
/// digits. The shortest round-trip form is kept as the prefix, so values
/// still parse back exactly.
struct PaddedFloats<F>(F);

pub const MIN_SIGNIFICANT_DIGITS: usize = 9;

/// Shortest round-trip decimal for `v`, zero-padded to the minimum digit count.
pub fn format_float(v: f64) -> String {
    let mut s = format!("{v:?}");
    if !v.is_finite() || s.contains('e') {
        return s;
    }
    if !s.contains('.') {
        s.push_str(".0");
    }
    let digits: String = s.chars().filter(char::is_ascii_digit).collect();
    let significant = if v == 0.0 {
        digits.len()
    } else {
        digits.trim_start_matches('0').len()
    };
    s.extend(std::iter::repeat('0').take(MIN_SIGNIFICANT_DIGITS.saturating_sub(significant)));
    s
}

impl<F: Formatter> Formatter for PaddedFloats<F> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> std::io::Result<()> {
        w.write_all(format_float(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> std::io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> std::io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object_value(w)
    }
}

fn write_json<T: Serialize>(value: &T, path: Option<&Path>, stdout: &mut dyn Write) -> Result<()> {
    let mut buf = Vec::new();
    let mut ser =
        serde_json::Serializer::with_formatter(&mut buf, PaddedFloats(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    let text = String::from_utf8(buf).expect("serde_json emits UTF-8");
    match path {
        Some(path) => fs::write(path, text + "\n").map_err(|e| Error::io(path, e)),
        None => writeln!(stdout, "{text}").map_err(|e| Error::io("<stdout>", e)),
    }
}

fn write_synthetic_csv(result: &ReductionResult, path: &Path) -> Result<()> {
    let Selection::Synthetic {
        dim,
        features,
        labels,
    } = &result.selection
    else {
        unreachable!("called for synthetic selections only")
    };
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for (label, row) in labels.iter().zip(features.chunks_exact(*dim)) {
        write_csv_row(&mut w, *label, row).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn run_reduce(config: &RunConfig, stdout: &mut dyn Write) -> Result<()> {
    let mut timer = Timer(BTreeMap::new());
    let ds = timer.time("load", || config.input.load())?;
    let p = partition_for(&ds, config.partition_cache.as_deref(), &mut timer)?;
    let (result, merged) = reduce(config, &ds, &p, &mut timer)?;

    let report_path = match (config.output_format, config.output.as_deref()) {
        (OutputFormat::JsonReport, Some(out)) => Some(out),
        _ => config.report.as_deref(),
    };
    if let Some(out) = config.output.as_deref() {
        timer.time("write", || match (config.output_format, &result.selection) {
            (OutputFormat::JsonReport, _) => Ok(()),
            (OutputFormat::Indices, Selection::Subset(spec)) => write_subset(&ds, spec, out, SubsetFormat::Indices),
            (OutputFormat::Csv, Selection::Subset(spec)) => write_subset(&ds, spec, out, SubsetFormat::Csv),
            (OutputFormat::Csv, Selection::Synthetic { .. }) => write_synthetic_csv(&result, out),
            (OutputFormat::Indices, Selection::Synthetic { .. }) => Err(Error::Parameter(
                "rhc keeps synthetic centroids, not rows; use --output-format csv or json-report".into(),
            )),
        })?;
    }

    let mut wall_time = timer.0;
    for (stage, secs) in &result.wall_time {
        wall_time.insert(format!("core.{stage}"), *secs);
    }
    let report = ReduceReport {
        algorithm: result.algorithm,
        params: result.params,
        n: ds.len(),
        reduced_n: result.reduced_len(),
        reduction_rate: result.reduction_rate,
        synthetic: result.synthetic(),
        num_clusters: p.len(),
        per_class_counts: result.per_class_counts(&ds)?,
        cluster_size_histogram: p.stats(),
        merged_cluster_size_histogram: merged.as_ref().map(Partition::stats),
        source: ds.source().clone(),
        conventions: CONVENTIONS,
        wall_time_per_stage: wall_time,
    };
    write_json(&report, report_path, stdout)
}

fn run_stats(config: &RunConfig, stdout: &mut dyn Write) -> Result<()> {
    let mut timer = Timer(BTreeMap::new());
    let ds = timer.time("load", || config.input.load())?;
    let p = partition_for(&ds, config.partition_cache.as_deref(), &mut timer)?;
    let report = StatsReport {
        n: ds.len(),
        num_clusters: p.len(),
        histogram: p.stats(),
    };
    write_json(&report, config.output.as_deref(), stdout)
}

fn run_evaluate(config: &RunConfig, stdout: &mut dyn Write) -> Result<()> {
    let mut timer = Timer(BTreeMap::new());
    let ds = timer.time("load", || config.input.load())?;
    let test_spec = config
        .test_input
        .as_ref()
        .ok_or_else(|| Error::Parameter("--test-input is required for evaluate".into()))?;
    let test = timer.time("load_test", || test_spec.load())?;
    let p = partition_for(&ds, config.partition_cache.as_deref(), &mut timer)?;
    let (result, _) = reduce(config, &ds, &p, &mut timer)?;
    let report = timer.time("evaluate", || {
        evaluate(&ds, &result, &test, config.k, config.include_full)
    })?;
    write_json(&report, config.output.as_deref(), stdout)
}

#[derive(Debug, Serialize)]
struct CalibrationReport {
    alpha: f64,
    beta: f64,
    target_reduction: f64,
    target_source: &'static str,
    achieved_reduction: f64,
    tolerance: f64,
    steps: usize,
    envelope: (f64, f64),
}

fn run_calibrate(config: &RunConfig, stdout: &mut dyn Write) -> Result<()> {
    let mut timer = Timer(BTreeMap::new());
    let ds = timer.time("load", || config.input.load())?;
    let p = partition_for(&ds, config.partition_cache.as_deref(), &mut timer)?;
    let alpha = config
        .alpha
        .ok_or_else(|| Error::Parameter("--alpha is required for calibrate-beta".into()))?;
    let (target, target_source) = match config.target_reduction {
        Some(t) => (t, "flag"),
        None => (rhc_reduce_partition(&ds, &p).reduction_rate, "rhc"),
    };
    let cal = timer.time("calibrate", || {
        calibrate_beta(&ds, &p, alpha, target, config.tolerance)
    })?;
    let report = CalibrationReport {
        alpha,
        beta: cal.beta,
        target_reduction: target,
        target_source,
        achieved_reduction: cal.reduction_rate,
        tolerance: config.tolerance,
        steps: cal.steps,
        envelope: cal.envelope,
    };
    write_json(&report, config.output.as_deref(), stdout)
}

/// Executes `config`, writing artifacts to disk and any report without a
/// destination file to `stdout`.
pub fn run(config: &RunConfig, stdout: &mut dyn Write) -> Result<()> {
    config.validate()?;
    let go = |stdout: &mut dyn Write| match config.command {
        CommandKind::Reduce => run_reduce(config, stdout),
        CommandKind::Stats => run_stats(config, stdout),
        CommandKind::Evaluate => run_evaluate(config, stdout),
        CommandKind::CalibrateBeta => run_calibrate(config, stdout),
    };
    let Some(n) = config.threads else {
        return go(stdout);
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| Error::Parameter(format!("cannot start {n} worker threads: {e}")))?;
    // The caller's writer need not be Send; buffer inside the pool.
    let mut buffer = Vec::new();
    let outcome = pool.install(|| go(&mut buffer));
    stdout
        .write_all(&buffer)
        .map_err(|e| Error::io("<stdout>", e))?;
    outcome
}

/// Exit status for an error returned by [`run`] or [`RunConfig::from_cli`].
pub fn exit_code(err: &Error) -> i32 {
    if err.is_usage() {
        EXIT_USAGE
    } else {
        EXIT_DATA
    }
}

/// Parses `args`, runs, and returns the process exit status.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(stderr, "{}", e.render())
            } else {
                write!(stdout, "{}", e.render())
            };
            return code;
        }
    };
    let result = RunConfig::from_cli(cli).and_then(|config| run(&config, stdout));
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}
