//! The `pmss` command line.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::corpus::{
    attach_ground_truth, load_structured_log, load_structured_log_with_templates, write_structured_log,
    write_templates, ColumnMap, Corpus,
};
use crate::corrections::{correct_corpus, version_diff, CorrectionProfile, VersionDiff};
use crate::error::Error;
use crate::labeled_metrics::{
    f1_grouping_accuracy, f1_template_accuracy, grouping_accuracy, labeled_scores, parsing_accuracy,
};
use crate::report::{
    average_gap, filter_version, fmt3, metric_gap, minmax_delta, optimal_parser, parse_reports,
    sample_points, spearman_rho, to_json, write_reports_csv, write_table, DeltaRow, GapRow, Metric,
    MetricReport, OptimalCell,
};
use crate::silhouette::{evaluate_pmss, NeighborMode, SilhouetteOptions};
use crate::synth::{generate, SynthSpec};
use crate::template_prep::PLACEHOLDER;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_UNDEFINED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "pmss", version, about = "Evaluate log parser output with label-free and label-based metrics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score one parser output.
    Evaluate(EvaluateArgs),
    /// Apply a correction profile to a ground-truth file.
    Correct(CorrectArgs),
    /// Compare ground-truth versions and per-version parser reports.
    CompareVersions(CompareArgs),
    /// Optimal parser tables and metric gaps.
    Rank(RankArgs),
    /// Spearman correlation between metrics across reports.
    Correlate(CorrelateArgs),
    /// Write a synthetic labeled corpus.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Neighbors {
    Sorted,
    Exact,
}

#[derive(Debug, Args)]
struct OutputArgs {
    #[arg(long, value_enum, default_value = "json")]
    output: OutputFormat,
    /// Write to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Parser output as a structured-log CSV.
    #[arg(long)]
    parsed: PathBuf,
    /// Separate templates file for the parser output.
    #[arg(long)]
    templates: Option<PathBuf>,
    #[arg(long)]
    groundtruth: Option<PathBuf>,
    /// Separate templates file for the ground truth.
    #[arg(long)]
    groundtruth_templates: Option<PathBuf>,
    /// Comma-separated subset of ga,pa,fga,fta,pmss. Defaults to all five
    /// with --groundtruth and to pmss without.
    #[arg(long, value_delimiter = ',')]
    metrics: Vec<String>,
    #[arg(long, value_enum, default_value = "sorted")]
    neighbors: Neighbors,
    /// Worker threads for PMSS; defaults to the hardware thread count.
    #[arg(long)]
    jobs: Option<usize>,
    /// Record wall time per metric.
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    keep_message_scores: bool,
    #[arg(long, default_value = PLACEHOLDER)]
    placeholder: String,
    /// Dataset label; defaults to the parsed file's stem.
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long, default_value = "unknown")]
    parser: String,
    #[arg(long)]
    truth_version: Option<String>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct CorrectArgs {
    /// Ground-truth structured log to correct.
    #[arg(long)]
    groundtruth: PathBuf,
    #[arg(long)]
    templates: Option<PathBuf>,
    /// Built-in profile (v1..v5) or a TOML profile file.
    #[arg(long)]
    profile: String,
    /// Output directory for structured.csv, templates.csv and merge_map.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// Ground-truth versions of one corpus, as LABEL=PATH or PATH.
    #[arg(long = "version", value_name = "[LABEL=]PATH")]
    versions: Vec<String>,
    /// Metric report files (a report or an array of reports each).
    #[arg(long, num_args = 1..)]
    reports: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "pa,fta")]
    metrics: Vec<String>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct RankArgs {
    #[arg(long, num_args = 1.., required = true)]
    reports: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "pmss")]
    metrics: Vec<String>,
    /// Metric gaps as REFERENCE:SELECTOR, e.g. fga:pmss.
    #[arg(long, value_delimiter = ',')]
    gap: Vec<String>,
    /// Keep only reports for this truth version.
    #[arg(long)]
    truth_version: Option<String>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct CorrelateArgs {
    #[arg(long, num_args = 1.., required = true)]
    reports: Vec<PathBuf>,
    /// Metric pairs as X:Y.
    #[arg(long, value_delimiter = ',', default_value = "pmss:fga,pmss:fta")]
    pairs: Vec<String>,
    /// Truth version to pool over. When reports span several versions and
    /// this is unset, "v2" is used.
    #[arg(long)]
    truth_version: Option<String>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 20)]
    template_count: usize,
    #[arg(long, default_value_t = 1000)]
    message_count: usize,
    #[arg(long, default_value_t = 0.3)]
    variable_rate: f64,
    #[arg(long, default_value_t = 0.0)]
    noise_rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Data(e)
    }
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(e) if e.is_undefined() => EXIT_UNDEFINED,
            CliError::Data(_) => EXIT_DATA,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Data(e) => write!(f, "{e}"),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `args` (program name first), runs the command and returns the
/// exit code. Diagnostics go to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Evaluate(a) => evaluate(a, out),
        Command::Correct(a) => correct(a, out),
        Command::CompareVersions(a) => compare_versions(a, out),
        Command::Rank(a) => rank(a, out),
        Command::Correlate(a) => correlate(a, out),
        Command::Synth(a) => synth(a, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "pmss: {e}");
            e.code()
        }
    }
}

fn parse_metrics(names: &[String]) -> CliResult<Vec<Metric>> {
    let mut metrics = Vec::new();
    for n in names.iter().filter(|n| !n.trim().is_empty()) {
        let m: Metric = n.parse().map_err(|e: Error| CliError::Usage(e.to_string()))?;
        if !metrics.contains(&m) {
            metrics.push(m);
        }
    }
    metrics.sort();
    Ok(metrics)
}

fn parse_pair(text: &str) -> CliResult<(Metric, Metric)> {
    let (a, b) = text
        .split_once(':')
        .ok_or_else(|| CliError::Usage(format!("expected METRIC:METRIC, got {text:?}")))?;
    let m = parse_metrics(&[a.to_string()])?;
    let n = parse_metrics(&[b.to_string()])?;
    Ok((m[0], n[0]))
}

fn load(path: &Path, templates: Option<&Path>) -> CliResult<Corpus> {
    let cols = ColumnMap::default();
    Ok(match templates {
        Some(t) => load_structured_log_with_templates(path, t, &cols)?,
        None => load_structured_log(path, &cols)?,
    })
}

fn emit(output: &OutputArgs, text: &str, out: &mut dyn Write) -> CliResult<()> {
    match &output.out {
        Some(path) => fs::write(path, text).map_err(|e| Error::io(path, e))?,
        None => out
            .write_all(text.as_bytes())
            .map_err(|e| Error::io(Path::new("<stdout>"), e))?,
    }
    Ok(())
}

fn csv_string(f: impl FnOnce(&mut Vec<u8>) -> crate::Result<()>) -> CliResult<String> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(String::from_utf8(buf).expect("CSV output is UTF-8"))
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1000.0
}

fn evaluate(a: EvaluateArgs, out: &mut dyn Write) -> CliResult<()> {
    let mut metrics = parse_metrics(&a.metrics)?;
    if metrics.is_empty() {
        metrics = if a.groundtruth.is_some() {
            Metric::ALL.to_vec()
        } else {
            vec![Metric::Pmss]
        };
    }
    let labeled: Vec<Metric> = metrics.iter().copied().filter(|m| m.needs_ground_truth()).collect();
    if !labeled.is_empty() && a.groundtruth.is_none() {
        return Err(CliError::Usage(format!(
            "metric {} needs --groundtruth",
            labeled[0]
        )));
    }
    if a.jobs == Some(0) {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    if a.placeholder.trim().is_empty() {
        return Err(CliError::Usage("--placeholder must not be blank".into()));
    }

    let mut corpus = load(&a.parsed, a.templates.as_deref())?;
    if let Some(gt) = &a.groundtruth {
        let truth = load(gt, a.groundtruth_templates.as_deref())?;
        corpus = attach_ground_truth(&corpus, &truth)?;
    }

    let dataset = a.dataset.clone().unwrap_or_else(|| {
        a.parsed
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    let mut report = MetricReport::new(dataset, a.parser.clone(), corpus.len());
    report.truth_version = a.truth_version.clone();

    if !labeled.is_empty() {
        if a.timing {
            for &m in &labeled {
                let start = Instant::now();
                let v = match m {
                    Metric::Ga => grouping_accuracy(&corpus)?,
                    Metric::Pa => parsing_accuracy(&corpus)?,
                    Metric::Fga => f1_grouping_accuracy(&corpus)?,
                    Metric::Fta => f1_template_accuracy(&corpus)?,
                    Metric::Pmss => unreachable!("filtered above"),
                };
                report.timing_ms.insert(m, elapsed_ms(start));
                report.metrics.set(m, v);
            }
        } else {
            let s = labeled_scores(&corpus)?;
            for &m in &labeled {
                let v = match m {
                    Metric::Ga => s.ga,
                    Metric::Pa => s.pa,
                    Metric::Fga => s.fga,
                    Metric::Fta => s.fta,
                    Metric::Pmss => unreachable!("filtered above"),
                };
                report.metrics.set(m, v);
            }
        }
    }

    if metrics.contains(&Metric::Pmss) {
        let options = SilhouetteOptions {
            mode: match a.neighbors {
                Neighbors::Sorted => NeighborMode::Sorted,
                Neighbors::Exact => NeighborMode::Exact,
            },
            keep_message_scores: a.keep_message_scores,
            jobs: a.jobs,
            placeholder: a.placeholder.clone(),
        };
        let start = Instant::now();
        let result = evaluate_pmss(&corpus, &options)?;
        if a.timing {
            report.timing_ms.insert(Metric::Pmss, elapsed_ms(start));
        }
        report.metrics.set(Metric::Pmss, result.pmss);
        report.emss = Some(result.event_scores);
        report.matched_fraction = Some(result.matched_fraction);
        report.template_count = Some(result.template_count);
        report.empty_events = result.empty_events;
        report.message_scores = result.message_scores;
    }

    let text = match a.output.output {
        OutputFormat::Json => report.to_json()?,
        OutputFormat::Csv => csv_string(|b| write_reports_csv(b, std::slice::from_ref(&report)))?,
    };
    emit(&a.output, &text, out)
}

#[derive(Serialize)]
struct CorrectSummary {
    profile: String,
    events_before: usize,
    events_after: usize,
    merged: Vec<MergeEntry>,
    files: Vec<String>,
}

#[derive(Serialize)]
struct MergeEntry {
    from: String,
    into: String,
}

fn correct(a: CorrectArgs, out: &mut dyn Write) -> CliResult<()> {
    let profile = CorrectionProfile::resolve(&a.profile)?;
    let truth = load(&a.groundtruth, a.templates.as_deref())?;
    let (corrected, correction) = correct_corpus(&truth, &profile)?;

    fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let structured = a.out.join("structured.csv");
    let templates = a.out.join("templates.csv");
    let merge_map = a.out.join("merge_map.csv");

    let text = csv_string(|b| write_structured_log(&corrected, b))?;
    fs::write(&structured, text).map_err(|e| Error::io(&structured, e))?;
    let text = csv_string(|b| write_templates(corrected.parsed_templates(), b))?;
    fs::write(&templates, text).map_err(|e| Error::io(&templates, e))?;
    let rows: Vec<Vec<String>> = truth
        .parsed_templates()
        .iter()
        .map(|e| vec![e.event_id.clone(), correction.remap[&e.event_id].clone()])
        .collect();
    let text = csv_string(|b| write_table(b, &["OldEventId", "NewEventId"], &rows))?;
    fs::write(&merge_map, text).map_err(|e| Error::io(&merge_map, e))?;

    let summary = CorrectSummary {
        profile: profile.name().to_string(),
        events_before: truth.parsed_templates().len(),
        events_after: corrected.parsed_templates().len(),
        merged: correction
            .merged()
            .map(|(from, into)| MergeEntry {
                from: from.clone(),
                into: into.clone(),
            })
            .collect(),
        files: [&structured, &templates, &merge_map]
            .iter()
            .map(|p| p.display().to_string())
            .collect(),
    };
    out.write_all(to_json(&summary)?.as_bytes())
        .map_err(|e| CliError::Data(Error::io(Path::new("<stdout>"), e)))
}

#[derive(Serialize)]
struct VersionPair {
    a: String,
    b: String,
    #[serde(flatten)]
    diff: VersionDiff,
}

#[derive(Serialize)]
struct MetricTables<T> {
    metric: Metric,
    rows: Vec<T>,
}

#[derive(Serialize)]
struct CompareOutput {
    version_diffs: Vec<VersionPair>,
    deltas: Vec<MetricTables<DeltaRow>>,
    optimal: Vec<MetricTables<OptimalCell>>,
}

fn load_reports(paths: &[PathBuf]) -> CliResult<Vec<MetricReport>> {
    let mut all = Vec::new();
    for p in paths {
        let text = crate::corpus::read_text(p)?;
        all.extend(parse_reports(&text).map_err(|e| match e {
            Error::InvalidReport(m) => Error::InvalidReport(format!("{}: {m}", p.display())),
            other => other,
        })?);
    }
    Ok(all)
}

fn compare_versions(a: CompareArgs, out: &mut dyn Write) -> CliResult<()> {
    if a.versions.is_empty() && a.reports.is_empty() {
        return Err(CliError::Usage("give --version files and/or --reports".into()));
    }
    if a.versions.len() == 1 {
        return Err(CliError::Usage("version comparison needs at least 2 --version files".into()));
    }
    let metrics = parse_metrics(&a.metrics)?;

    let mut versions = Vec::new();
    for v in &a.versions {
        let (label, path) = match v.split_once('=') {
            Some((l, p)) => (l.to_string(), PathBuf::from(p)),
            None => {
                let p = PathBuf::from(v);
                let l = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                (l, p)
            }
        };
        versions.push((label, load(&path, None)?));
    }
    let mut version_diffs = Vec::new();
    for i in 0..versions.len() {
        for j in i + 1..versions.len() {
            version_diffs.push(VersionPair {
                a: versions[i].0.clone(),
                b: versions[j].0.clone(),
                diff: version_diff(&versions[i].1, &versions[j].1)?,
            });
        }
    }

    let reports = load_reports(&a.reports)?;
    let mut deltas = Vec::new();
    let mut optimal = Vec::new();
    if !reports.is_empty() {
        for &m in &metrics {
            deltas.push(MetricTables { metric: m, rows: minmax_delta(&reports, m)? });
            optimal.push(MetricTables { metric: m, rows: optimal_parser(&reports, m)? });
        }
    }
    let result = CompareOutput {
        version_diffs,
        deltas,
        optimal,
    };

    let text = match a.output.output {
        OutputFormat::Json => to_json(&result)?,
        OutputFormat::Csv => {
            let mut sections = Vec::new();
            let rows: Vec<Vec<String>> = result
                .version_diffs
                .iter()
                .map(|p| {
                    vec![
                        p.a.clone(),
                        p.b.clone(),
                        fmt3(Some(p.diff.template_diff_pct)),
                        fmt3(Some(p.diff.message_diff_pct)),
                    ]
                })
                .collect();
            sections.push(csv_string(|b| {
                write_table(b, &["version_a", "version_b", "template_diff_pct", "message_diff_pct"], &rows)
            })?);
            sections.push(delta_csv(&result.deltas)?);
            sections.push(optimal_csv(&result.optimal)?);
            sections.join("\n")
        }
    };
    emit(&a.output, &text, out)
}

fn delta_csv(tables: &[MetricTables<DeltaRow>]) -> CliResult<String> {
    let rows: Vec<Vec<String>> = tables
        .iter()
        .flat_map(|t| {
            t.rows.iter().map(move |r| {
                vec![
                    t.metric.to_string(),
                    r.dataset.clone(),
                    r.parser.clone(),
                    fmt3(Some(r.min)),
                    fmt3(Some(r.max)),
                    fmt3(Some(r.delta)),
                    r.flagged.to_string(),
                ]
            })
        })
        .collect();
    csv_string(|b| write_table(b, &["metric", "dataset", "parser", "min", "max", "delta", "flagged"], &rows))
}

fn optimal_csv(tables: &[MetricTables<OptimalCell>]) -> CliResult<String> {
    let rows: Vec<Vec<String>> = tables
        .iter()
        .flat_map(|t| {
            t.rows.iter().map(move |c| {
                vec![
                    t.metric.to_string(),
                    c.dataset.clone(),
                    c.truth_version.clone().unwrap_or_default(),
                    c.parser.clone(),
                    fmt3(Some(c.score)),
                    c.tie.to_string(),
                    c.consistent.to_string(),
                ]
            })
        })
        .collect();
    csv_string(|b| {
        write_table(
            b,
            &["metric", "dataset", "truth_version", "parser", "score", "tie", "consistent"],
            &rows,
        )
    })
}

#[derive(Serialize)]
struct GapTable {
    reference: Metric,
    selector: Metric,
    rows: Vec<GapRow>,
    average_gap: Option<f64>,
}

#[derive(Serialize)]
struct RankOutput {
    optimal: Vec<MetricTables<OptimalCell>>,
    gaps: Vec<GapTable>,
}

fn rank(a: RankArgs, out: &mut dyn Write) -> CliResult<()> {
    let metrics = parse_metrics(&a.metrics)?;
    let gaps: Vec<(Metric, Metric)> = a.gap.iter().map(|g| parse_pair(g)).collect::<CliResult<_>>()?;
    let mut reports = load_reports(&a.reports)?;
    if let Some(v) = &a.truth_version {
        reports = filter_version(&reports, v);
    }
    if reports.is_empty() {
        return Err(CliError::Data(Error::InvalidReport("no reports to rank".into())));
    }
    let mut result = RankOutput {
        optimal: Vec::new(),
        gaps: Vec::new(),
    };
    for &m in &metrics {
        result.optimal.push(MetricTables { metric: m, rows: optimal_parser(&reports, m)? });
    }
    for (reference, selector) in gaps {
        let rows = metric_gap(&reports, reference, selector)?;
        let average_gap = average_gap(&rows);
        result.gaps.push(GapTable {
            reference,
            selector,
            rows,
            average_gap,
        });
    }
    let text = match a.output.output {
        OutputFormat::Json => to_json(&result)?,
        OutputFormat::Csv => {
            let rows: Vec<Vec<String>> = result
                .gaps
                .iter()
                .flat_map(|g| {
                    g.rows.iter().map(move |r| {
                        vec![
                            g.reference.to_string(),
                            g.selector.to_string(),
                            r.dataset.clone(),
                            r.selected_parser.clone(),
                            fmt3(Some(r.reference_max)),
                            fmt3(Some(r.selected_reference)),
                            fmt3(r.gap),
                        ]
                    })
                })
                .collect();
            let gap_table = csv_string(|b| {
                write_table(
                    b,
                    &["reference", "selector", "dataset", "selected_parser", "reference_max", "selected_reference", "gap"],
                    &rows,
                )
            })?;
            [optimal_csv(&result.optimal)?, gap_table].join("\n")
        }
    };
    emit(&a.output, &text, out)
}

#[derive(Serialize)]
struct CorrelationRow {
    x: Metric,
    y: Metric,
    n: usize,
    rho: f64,
    p_value: f64,
}

#[derive(Serialize)]
struct CorrelateOutput {
    truth_version: Option<String>,
    pairs: Vec<CorrelationRow>,
}

fn correlate(a: CorrelateArgs, out: &mut dyn Write) -> CliResult<()> {
    let pairs: Vec<(Metric, Metric)> = a.pairs.iter().map(|p| parse_pair(p)).collect::<CliResult<_>>()?;
    let mut reports = load_reports(&a.reports)?;
    let mut versions: Vec<Option<&str>> = reports.iter().map(|r| r.truth_version.as_deref()).collect();
    versions.sort();
    versions.dedup();
    let version = match (&a.truth_version, versions.len() > 1) {
        (Some(v), _) => Some(v.clone()),
        (None, true) => Some("v2".to_string()),
        (None, false) => versions.first().copied().flatten().map(str::to_string),
    };
    if a.truth_version.is_some() || versions.len() > 1 {
        let v = version.as_deref().expect("set above");
        reports = filter_version(&reports, v);
        if reports.is_empty() {
            return Err(CliError::Usage(format!(
                "no reports for truth version {v:?}; pass --truth-version"
            )));
        }
    }
    let mut rows = Vec::new();
    for (x, y) in pairs {
        let points = sample_points(&reports, x, y)?;
        let c = spearman_rho(&points)?.ok_or_else(|| {
            Error::Undefined(format!("correlation of {x} and {y} is undefined: a series is constant"))
        })?;
        rows.push(CorrelationRow {
            x,
            y,
            n: c.n,
            rho: c.rho,
            p_value: c.p_value,
        });
    }
    let result = CorrelateOutput {
        truth_version: version,
        pairs: rows,
    };
    let text = match a.output.output {
        OutputFormat::Json => to_json(&result)?,
        OutputFormat::Csv => {
            let rows: Vec<Vec<String>> = result
                .pairs
                .iter()
                .map(|r| {
                    vec![
                        r.x.to_string(),
                        r.y.to_string(),
                        r.n.to_string(),
                        fmt3(Some(r.rho)),
                        format!("{:.3e}", r.p_value),
                    ]
                })
                .collect();
            csv_string(|b| write_table(b, &["x", "y", "n", "rho", "p_value"], &rows))?
        }
    };
    emit(&a.output, &text, out)
}

#[derive(Serialize)]
struct SynthSummary {
    spec: SynthSpec,
    files: Vec<String>,
}

fn synth(a: SynthArgs, out: &mut dyn Write) -> CliResult<()> {
    let spec = SynthSpec {
        template_count: a.template_count,
        message_count: a.message_count,
        variable_rate: a.variable_rate,
        noise_rate: a.noise_rate,
        seed: a.seed,
    };
    let g = generate(&spec)?;
    fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let mut files = Vec::new();
    for (name, corpus) in [("truth", &g.truth), ("parsed", &g.parsed)] {
        let log = a.out.join(format!("{name}.csv"));
        let text = csv_string(|b| write_structured_log(corpus, b))?;
        fs::write(&log, text).map_err(|e| Error::io(&log, e))?;
        let tpl = a.out.join(format!("{name}_templates.csv"));
        let text = csv_string(|b| write_templates(corpus.parsed_templates(), b))?;
        fs::write(&tpl, text).map_err(|e| Error::io(&tpl, e))?;
        files.push(log.display().to_string());
        files.push(tpl.display().to_string());
    }
    let summary = SynthSummary { spec, files };
    out.write_all(to_json(&summary)?.as_bytes())
        .map_err(|e| CliError::Data(Error::io(Path::new("<stdout>"), e)))
}
