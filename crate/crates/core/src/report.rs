//! Metric reports and the analyses run across many of them: min-max
//! deltas between ground-truth versions, optimal parser per cell, metric
//! gaps, Spearman rank correlation and per-1,000-line timing.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::silhouette::{EventScore, MessageScore};

/// Min-max deltas at or above this are flagged.
pub const DELTA_FLAG_THRESHOLD: f64 = 0.04;

// Deltas are differences of values that are themselves rounded ratios; a
// small slack keeps e.g. 0.54 - 0.50 from falling just under the threshold.
const DELTA_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Ga,
    Pa,
    Fga,
    Fta,
    Pmss,
}

impl Metric {
    pub const ALL: [Metric; 5] = [Metric::Ga, Metric::Pa, Metric::Fga, Metric::Fta, Metric::Pmss];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Ga => "ga",
            Metric::Pa => "pa",
            Metric::Fga => "fga",
            Metric::Fta => "fta",
            Metric::Pmss => "pmss",
        }
    }

    pub fn needs_ground_truth(self) -> bool {
        self != Metric::Pmss
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Metric::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidReport(format!("unknown metric {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ga: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fga: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pmss: Option<f64>,
}

impl Metrics {
    pub fn get(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Ga => self.ga,
            Metric::Pa => self.pa,
            Metric::Fga => self.fga,
            Metric::Fta => self.fta,
            Metric::Pmss => self.pmss,
        }
    }

    pub fn set(&mut self, metric: Metric, value: f64) {
        let slot = match metric {
            Metric::Ga => &mut self.ga,
            Metric::Pa => &mut self.pa,
            Metric::Fga => &mut self.fga,
            Metric::Fta => &mut self.fta,
            Metric::Pmss => &mut self.pmss,
        };
        *slot = Some(value);
    }
}

/// Scores of one parser on one dataset (against one truth version).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub dataset: String,
    pub parser: String,
    #[serde(default)]
    pub truth_version: Option<String>,
    pub metrics: Metrics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emss: Option<Vec<EventScore>>,
    #[serde(default)]
    pub timing_ms: BTreeMap<Metric, f64>,
    pub line_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matched_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub empty_events: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message_scores: Option<Vec<MessageScore>>,
}

impl MetricReport {
    pub fn new(dataset: impl Into<String>, parser: impl Into<String>, line_count: usize) -> Self {
        MetricReport {
            dataset: dataset.into(),
            parser: parser.into(),
            truth_version: None,
            metrics: Metrics::default(),
            emss: None,
            timing_ms: BTreeMap::new(),
            line_count,
            matched_fraction: None,
            template_count: None,
            empty_events: Vec::new(),
            message_scores: None,
        }
    }

    pub fn metric(&self, metric: Metric) -> Option<f64> {
        self.metrics.get(metric)
    }

    fn require(&self, metric: Metric) -> Result<f64> {
        self.metric(metric).ok_or_else(|| Error::MissingMetric {
            metric: metric.to_string(),
            dataset: self.dataset.clone(),
            parser: self.parser.clone(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        to_json(self)
    }
}

/// Pretty JSON followed by a newline.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidReport(format!("cannot serialise: {e}")))?;
    s.push('\n');
    Ok(s)
}

/// Reads one report or an array of reports.
pub fn parse_reports(text: &str) -> Result<Vec<MetricReport>> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::InvalidReport(format!("bad report JSON: {e}")))?;
    let parsed = if value.is_array() {
        serde_json::from_value(value)
    } else {
        serde_json::from_value(value).map(|r| vec![r])
    };
    parsed.map_err(|e| Error::InvalidReport(format!("bad report JSON: {e}")))
}

/// Three-decimal rendering used in tables.
pub fn fmt3(value: Option<f64>) -> String {
    value.map(|v| format!("{v:.3}")).unwrap_or_default()
}

fn csv_out<W: Write>(out: W) -> csv::Writer<W> {
    csv::Writer::from_writer(out)
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidReport(format!("cannot write CSV: {e}"))
}

/// Writes string rows as CSV.
pub fn write_table<W: Write>(out: W, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv_out(out);
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::InvalidReport(e.to_string()))
}

/// One CSV row per report.
pub fn write_reports_csv<W: Write>(out: W, reports: &[MetricReport]) -> Result<()> {
    let mut header = vec!["dataset", "parser", "truth_version", "line_count"];
    header.extend(Metric::ALL.iter().map(|m| m.name()));
    let timing_cols = ["ms_ga", "ms_pa", "ms_fga", "ms_fta", "ms_pmss"];
    header.extend(timing_cols);
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            let mut row = vec![
                r.dataset.clone(),
                r.parser.clone(),
                r.truth_version.clone().unwrap_or_default(),
                r.line_count.to_string(),
            ];
            row.extend(Metric::ALL.iter().map(|&m| fmt3(r.metric(m))));
            row.extend(Metric::ALL.iter().map(|m| fmt3(r.timing_ms.get(m).copied())));
            row
        })
        .collect();
    write_table(out, &header, &rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub dataset: String,
    pub parser: String,
    pub min: f64,
    pub max: f64,
    pub delta: f64,
    pub versions: usize,
    pub flagged: bool,
}

/// Largest minus smallest value of `metric` across truth versions, per
/// (dataset, parser).
pub fn minmax_delta(reports: &[MetricReport], metric: Metric) -> Result<Vec<DeltaRow>> {
    let mut groups: BTreeMap<(&str, &str), Vec<f64>> = BTreeMap::new();
    for r in reports {
        groups
            .entry((&r.dataset, &r.parser))
            .or_default()
            .push(r.require(metric)?);
    }
    groups
        .into_iter()
        .map(|((dataset, parser), values)| {
            if values.len() < 2 {
                return Err(Error::InvalidReport(format!(
                    "{dataset}/{parser}: min-max delta needs at least 2 truth versions"
                )));
            }
            let min = values.iter().copied().fold(f64::INFINITY, f64::min);
            let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let delta = max - min;
            Ok(DeltaRow {
                dataset: dataset.to_string(),
                parser: parser.to_string(),
                min,
                max,
                delta,
                versions: values.len(),
                flagged: delta + DELTA_SLACK >= DELTA_FLAG_THRESHOLD,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalCell {
    pub dataset: String,
    pub truth_version: Option<String>,
    pub parser: String,
    pub score: f64,
    /// Another parser reached the same score.
    pub tie: bool,
    /// Every version of this dataset has the same winner.
    pub consistent: bool,
}

/// Best parser per (dataset, truth version). Ties go to the
/// lexicographically smallest parser name.
pub fn optimal_parser(reports: &[MetricReport], metric: Metric) -> Result<Vec<OptimalCell>> {
    type Cell<'a> = (&'a str, Option<&'a str>);
    let mut cells: BTreeMap<Cell, Vec<(&str, f64)>> = BTreeMap::new();
    for r in reports {
        cells
            .entry((&r.dataset, r.truth_version.as_deref()))
            .or_default()
            .push((&r.parser, r.require(metric)?));
    }
    let mut out: Vec<OptimalCell> = cells
        .into_iter()
        .map(|((dataset, version), entries)| {
            let (parser, score, tie) = argmax(&entries)
                .ok_or_else(|| Error::InvalidReport(format!("{dataset}: empty cell")))?;
            Ok(OptimalCell {
                dataset: dataset.to_string(),
                truth_version: version.map(str::to_string),
                parser: parser.to_string(),
                score,
                tie,
                consistent: true,
            })
        })
        .collect::<Result<_>>()?;
    let mut winners: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for c in &out {
        winners.entry(c.dataset.clone()).or_default().push(c.parser.clone());
    }
    for c in &mut out {
        let w = &winners[&c.dataset];
        c.consistent = w.iter().all(|p| *p == w[0]);
    }
    Ok(out)
}

/// Highest score; ties resolved to the smallest name and flagged.
fn argmax<'a>(entries: &[(&'a str, f64)]) -> Option<(&'a str, f64, bool)> {
    let best = entries
        .iter()
        .map(|e| e.1)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut at_best: Vec<&str> = entries
        .iter()
        .filter(|e| e.1 == best)
        .map(|e| e.0)
        .collect();
    at_best.sort_unstable();
    at_best.dedup();
    let first = *at_best.first()?;
    Some((first, best, at_best.len() > 1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub dataset: String,
    pub reference_max: f64,
    pub selected_parser: String,
    pub selected_reference: f64,
    /// `None` when the best reference score is 0.
    pub gap: Option<f64>,
}

/// Relative shortfall, measured in `reference`, of the parser that
/// `selector` ranks first: `(ref_max - ref_of_selected) / ref_max`.
pub fn metric_gap(reports: &[MetricReport], reference: Metric, selector: Metric) -> Result<Vec<GapRow>> {
    let mut datasets: BTreeMap<&str, Vec<&MetricReport>> = BTreeMap::new();
    for r in reports {
        datasets.entry(&r.dataset).or_default().push(r);
    }
    datasets
        .into_iter()
        .map(|(dataset, rs)| {
            let mut parsers: Vec<&str> = rs.iter().map(|r| r.parser.as_str()).collect();
            parsers.sort_unstable();
            if parsers.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidReport(format!(
                    "{dataset}: several reports per parser; select one truth version"
                )));
            }
            let sel: Vec<(&str, f64)> = rs
                .iter()
                .map(|r| Ok((r.parser.as_str(), r.require(selector)?)))
                .collect::<Result<_>>()?;
            let refs: Vec<(&str, f64)> = rs
                .iter()
                .map(|r| Ok((r.parser.as_str(), r.require(reference)?)))
                .collect::<Result<_>>()?;
            let (chosen, _, _) = argmax(&sel).expect("non-empty dataset");
            let reference_max = refs.iter().map(|e| e.1).fold(f64::NEG_INFINITY, f64::max);
            let selected_reference = refs
                .iter()
                .find(|e| e.0 == chosen)
                .map(|e| e.1)
                .expect("same parser set");
            let gap = (reference_max != 0.0)
                .then(|| (reference_max - selected_reference) / reference_max);
            Ok(GapRow {
                dataset: dataset.to_string(),
                reference_max,
                selected_parser: chosen.to_string(),
                selected_reference,
                gap,
            })
        })
        .collect()
}

/// Mean of the defined gaps.
pub fn average_gap(rows: &[GapRow]) -> Option<f64> {
    let defined: Vec<f64> = rows.iter().filter_map(|r| r.gap).collect();
    (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
}

/// Keeps reports whose truth version equals `version`.
pub fn filter_version(reports: &[MetricReport], version: &str) -> Vec<MetricReport> {
    reports
        .iter()
        .filter(|r| r.truth_version.as_deref() == Some(version))
        .cloned()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePoint {
    pub dataset: String,
    pub parser: String,
    pub x: f64,
    pub y: f64,
}

pub fn sample_points(reports: &[MetricReport], x: Metric, y: Metric) -> Result<Vec<SamplePoint>> {
    reports
        .iter()
        .map(|r| {
            Ok(SamplePoint {
                dataset: r.dataset.clone(),
                parser: r.parser.clone(),
                x: r.require(x)?,
                y: r.require(y)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub rho: f64,
    pub p_value: f64,
    pub n: usize,
}

/// 1-based ranks; tied values share the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's rho with average-rank ties and a two-sided p-value from the
/// t approximation with n - 2 degrees of freedom. `Ok(None)` when either
/// series is constant.
pub fn spearman_rho(points: &[SamplePoint]) -> Result<Option<Correlation>> {
    if points.len() < 3 {
        return Err(Error::InvalidReport(format!(
            "rank correlation needs at least 3 points, got {}",
            points.len()
        )));
    }
    if let Some(p) = points.iter().find(|p| !p.x.is_finite() || !p.y.is_finite()) {
        return Err(Error::InvalidReport(format!(
            "non-finite sample for {}/{}",
            p.dataset, p.parser
        )));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.x).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.y).collect();
    let Some(rho) = pearson(&average_ranks(&xs), &average_ranks(&ys)) else {
        return Ok(None);
    };
    let n = points.len();
    Ok(Some(Correlation {
        rho,
        p_value: t_test_p(rho, n),
        n,
    }))
}

fn t_test_p(rho: f64, n: usize) -> f64 {
    if rho.abs() >= 1.0 {
        return 0.0;
    }
    let df = (n - 2) as f64;
    let t = rho * (df / (1.0 - rho * rho)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("df >= 1");
    (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub dataset: String,
    pub parser: String,
    pub metric: Metric,
    pub ms_per_1k_lines: f64,
    pub runs: usize,
}

/// Milliseconds per 1,000 lines per (dataset, parser, metric); the median
/// is reported when several runs are present.
pub fn timing_summary(reports: &[MetricReport]) -> Result<Vec<TimingRow>> {
    let mut groups: BTreeMap<(&str, &str, Metric), Vec<f64>> = BTreeMap::new();
    for r in reports {
        if r.line_count == 0 {
            return Err(Error::InvalidReport(format!(
                "{}/{}: timing needs a non-zero line count",
                r.dataset, r.parser
            )));
        }
        for (&m, &ms) in &r.timing_ms {
            groups
                .entry((&r.dataset, &r.parser, m))
                .or_default()
                .push(ms / (r.line_count as f64 / 1000.0));
        }
    }
    Ok(groups
        .into_iter()
        .map(|((dataset, parser, metric), mut v)| {
            v.sort_by(f64::total_cmp);
            let mid = v.len() / 2;
            let median = if v.len() % 2 == 1 {
                v[mid]
            } else {
                (v[mid - 1] + v[mid]) / 2.0
            };
            TimingRow {
                dataset: dataset.to_string(),
                parser: parser.to_string(),
                metric,
                ms_per_1k_lines: median,
                runs: v.len(),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rep(dataset: &str, parser: &str, version: Option<&str>, scores: &[(Metric, f64)]) -> MetricReport {
        let mut r = MetricReport::new(dataset, parser, 1000);
        r.truth_version = version.map(str::to_string);
        for &(m, v) in scores {
            r.metrics.set(m, v);
        }
        r
    }

    #[test]
    fn minmax_examples() {
        let same: Vec<_> = ["v1", "v2"]
            .iter()
            .map(|v| rep("D", "P", Some(v), &[(Metric::Pa, 0.7)]))
            .collect();
        let rows = minmax_delta(&same, Metric::Pa).unwrap();
        assert_eq!((rows[0].delta, rows[0].flagged), (0.0, false));

        let lunar: Vec<_> = [0.30, 0.32, 0.817]
            .iter()
            .enumerate()
            .map(|(i, &v)| rep("OpenStack", "LUNAR", Some(&format!("v{i}")), &[(Metric::Pa, v)]))
            .collect();
        let rows = minmax_delta(&lunar, Metric::Pa).unwrap();
        assert!((rows[0].delta - 0.517).abs() < 1e-12);
        assert!(rows[0].flagged);

        let small: Vec<_> = [0.50, 0.53]
            .iter()
            .enumerate()
            .map(|(i, &v)| rep("D", "P", Some(&format!("v{i}")), &[(Metric::Pa, v)]))
            .collect();
        let rows = minmax_delta(&small, Metric::Pa).unwrap();
        assert!((rows[0].delta - 0.03).abs() < 1e-12);
        assert!(!rows[0].flagged);
    }

    #[test]
    fn minmax_needs_metric_and_versions() {
        let one = [rep("D", "P", Some("v1"), &[(Metric::Pa, 0.5)])];
        assert!(minmax_delta(&one, Metric::Pa).is_err());
        let missing = [
            rep("D", "P", Some("v1"), &[(Metric::Pa, 0.5)]),
            rep("D", "P", Some("v2"), &[]),
        ];
        assert!(matches!(minmax_delta(&missing, Metric::Pa), Err(Error::MissingMetric { .. })));
    }

    #[test]
    fn optimal_single_and_swapping() {
        let single = [
            rep("D", "Drain", Some("v1"), &[(Metric::Pa, 0.4)]),
            rep("D", "Drain", Some("v2"), &[(Metric::Pa, 0.5)]),
        ];
        let cells = optimal_parser(&single, Metric::Pa).unwrap();
        assert!(cells.iter().all(|c| c.parser == "Drain" && c.consistent && !c.tie));

        let swap = [
            rep("D", "A", Some("v1"), &[(Metric::Pa, 0.9)]),
            rep("D", "B", Some("v1"), &[(Metric::Pa, 0.8)]),
            rep("D", "A", Some("v2"), &[(Metric::Pa, 0.7)]),
            rep("D", "B", Some("v2"), &[(Metric::Pa, 0.85)]),
        ];
        let cells = optimal_parser(&swap, Metric::Pa).unwrap();
        assert_eq!(cells[0].parser, "A");
        assert_eq!(cells[1].parser, "B");
        assert!(cells.iter().all(|c| !c.consistent));
    }

    #[test]
    fn optimal_tie_breaks_by_name() {
        let tie = [
            rep("D", "Zed", None, &[(Metric::Fta, 0.6)]),
            rep("D", "Alpha", None, &[(Metric::Fta, 0.6)]),
        ];
        let cells = optimal_parser(&tie, Metric::Fta).unwrap();
        assert_eq!(cells[0].parser, "Alpha");
        assert!(cells[0].tie);
    }

    #[test]
    fn gap_examples() {
        let agree = [
            rep("D", "A", None, &[(Metric::Fga, 0.9), (Metric::Pmss, 0.8)]),
            rep("D", "B", None, &[(Metric::Fga, 0.5), (Metric::Pmss, 0.3)]),
        ];
        assert_eq!(metric_gap(&agree, Metric::Fga, Metric::Pmss).unwrap()[0].gap, Some(0.0));

        let disagree = [
            rep("D", "A", None, &[(Metric::Fga, 0.9), (Metric::Pmss, 0.3)]),
            rep("D", "B", None, &[(Metric::Fga, 0.8), (Metric::Pmss, 0.7)]),
        ];
        let g = metric_gap(&disagree, Metric::Fga, Metric::Pmss).unwrap()[0].gap.unwrap();
        assert!((g - 0.1 / 0.9).abs() < 1e-12);

        let zero = [
            rep("D", "A", None, &[(Metric::Fga, 0.0), (Metric::Pmss, 0.3)]),
            rep("D", "B", None, &[(Metric::Fga, 0.0), (Metric::Pmss, 0.7)]),
        ];
        assert_eq!(metric_gap(&zero, Metric::Fga, Metric::Pmss).unwrap()[0].gap, None);
    }

    #[test]
    fn gap_rejects_mixed_versions() {
        let mixed = [
            rep("D", "A", Some("v1"), &[(Metric::Fga, 0.9), (Metric::Pmss, 0.3)]),
            rep("D", "A", Some("v2"), &[(Metric::Fga, 0.9), (Metric::Pmss, 0.3)]),
        ];
        assert!(metric_gap(&mixed, Metric::Fga, Metric::Pmss).is_err());
        assert_eq!(filter_version(&mixed, "v2").len(), 1);
    }

    fn pts(xy: &[(f64, f64)]) -> Vec<SamplePoint> {
        xy.iter()
            .enumerate()
            .map(|(i, &(x, y))| SamplePoint {
                dataset: format!("d{i}"),
                parser: "p".into(),
                x,
                y,
            })
            .collect()
    }

    #[test]
    fn spearman_monotone() {
        let up = pts(&[(1.0, 1.0), (2.0, 2.0), (3.0, 3.0), (4.0, 4.0)]);
        let c = spearman_rho(&up).unwrap().unwrap();
        assert_eq!(c.rho, 1.0);
        assert_eq!(c.p_value, 0.0);
        let down = pts(&[(1.0, -1.0), (2.0, -2.0), (3.0, -3.0), (4.0, -4.0)]);
        assert_eq!(spearman_rho(&down).unwrap().unwrap().rho, -1.0);
    }

    #[test]
    fn spearman_degenerate() {
        let flat = pts(&[(1.0, 5.0), (2.0, 5.0), (3.0, 5.0)]);
        assert_eq!(spearman_rho(&flat).unwrap(), None);
        assert!(spearman_rho(&pts(&[(1.0, 1.0), (2.0, 2.0)])).is_err());
    }

    #[test]
    fn average_ranks_with_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 30.0]), vec![1.5, 3.0, 1.5, 4.0]);
    }

    #[test]
    fn p_value_matches_t_approximation() {
        // rho = 0.5, n = 10: t = 0.5 * sqrt(8 / 0.75) = 1.63299..., df = 8;
        // two-sided p from the t table is about 0.1411.
        let p = t_test_p(0.5, 10);
        assert!((p - 0.1411).abs() < 5e-4, "{p}");
    }

    #[test]
    fn timing_examples() {
        let mut r = MetricReport::new("D", "P", 2000);
        r.timing_ms.insert(Metric::Pmss, 30.0);
        let rows = timing_summary(&[r.clone()]).unwrap();
        assert_eq!(rows[0].ms_per_1k_lines, 15.0);

        let runs: Vec<_> = [10.0, 50.0, 20.0, 40.0, 30.0]
            .iter()
            .map(|&ms| {
                let mut r = r.clone();
                r.timing_ms.insert(Metric::Pmss, ms);
                r
            })
            .collect();
        let rows = timing_summary(&runs).unwrap();
        assert_eq!((rows[0].ms_per_1k_lines, rows[0].runs), (15.0, 5));

        r.line_count = 0;
        assert!(timing_summary(&[r]).is_err());
    }

    #[test]
    fn json_round_trip_and_schema() {
        let mut r = rep("D", "P", Some("v2"), &[(Metric::Ga, 1.0), (Metric::Pmss, 0.25)]);
        r.emss = Some(vec![EventScore {
            event_id: "E1".into(),
            size: 3,
            emss: 0.25,
        }]);
        r.timing_ms.insert(Metric::Pmss, 1.5);
        let text = r.to_json().unwrap();
        assert!(text.ends_with('\n'));
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        for key in ["dataset", "parser", "truth_version", "metrics", "emss", "timing_ms", "line_count"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["metrics"]["pmss"], 0.25);
        assert_eq!(v["emss"][0]["event_id"], "E1");
        assert_eq!(v["timing_ms"]["pmss"], 1.5);
        assert_eq!(parse_reports(&text).unwrap(), vec![r.clone()]);
        let arr = to_json(&vec![r.clone(), r]).unwrap();
        assert_eq!(parse_reports(&arr).unwrap().len(), 2);
    }

    #[test]
    fn csv_three_decimals() {
        let r = rep("D", "P", None, &[(Metric::Ga, 1.0), (Metric::Pa, 2.0 / 3.0)]);
        let mut out = Vec::new();
        write_reports_csv(&mut out, &[r]).unwrap();
        let text = String::from_utf8(out).unwrap();
        let line = text.lines().nth(1).unwrap();
        assert_eq!(line, "D,P,,1000,1.000,0.667,,,,,,,,");
    }
    #[test]
    fn average_gap_three_datasets() {
        let mut rs = Vec::new();
        // D1: gap 0. D2: (0.9 - 0.8) / 0.9. D3: (0.5 - 0.25) / 0.5.
        for (d, a, b) in [("D1", (0.9, 0.8), (0.5, 0.3)), ("D2", (0.9, 0.3), (0.8, 0.7)), ("D3", (0.5, 0.1), (0.25, 0.2))] {
            rs.push(rep(d, "A", None, &[(Metric::Fga, a.0), (Metric::Pmss, a.1)]));
            rs.push(rep(d, "B", None, &[(Metric::Fga, b.0), (Metric::Pmss, b.1)]));
        }
        let rows = metric_gap(&rs, Metric::Fga, Metric::Pmss).unwrap();
        let want = (0.0 + 0.1 / 0.9 + 0.5) / 3.0;
        assert!((average_gap(&rows).unwrap() - want).abs() < 1e-12);
    }

    /// Rank by counting: #smaller + (#equal + 1) / 2.
    fn count_rank(v: &[f64], i: usize) -> f64 {
        let less = v.iter().filter(|&&x| x < v[i]).count() as f64;
        let eq = v.iter().filter(|&&x| x == v[i]).count() as f64;
        less + (eq + 1.0) / 2.0
    }

    fn oracle_rho(xy: &[(f64, f64)]) -> f64 {
        let xs: Vec<f64> = xy.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = xy.iter().map(|p| p.1).collect();
        let rx: Vec<f64> = (0..xs.len()).map(|i| count_rank(&xs, i)).collect();
        let ry: Vec<f64> = (0..ys.len()).map(|i| count_rank(&ys, i)).collect();
        let n = rx.len() as f64;
        let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
        let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
        let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
        let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
        cov / (vx * vy).sqrt()
    }

    #[test]
    fn spearman_ten_points_with_ties() {
        let xy = [
            (0.1, 0.5), (0.4, 0.2), (0.4, 0.9), (0.7, 0.9), (0.2, 0.1),
            (0.9, 0.9), (0.5, 0.3), (0.5, 0.6), (0.3, 0.6), (0.8, 0.7),
        ];
        let c = spearman_rho(&pts(&xy)).unwrap().unwrap();
        assert!((c.rho - oracle_rho(&xy)).abs() < 1e-12);
        assert_eq!(c.n, 10);
        assert!(c.p_value > 0.0 && c.p_value < 1.0);
    }

    proptest::proptest! {
        #[test]
        fn spearman_invariant_under_increasing_transform(
            xy in proptest::collection::vec((0u8..20, 0u8..20), 3..30)
        ) {
            let base: Vec<(f64, f64)> = xy.iter().map(|&(x, y)| (x as f64, y as f64)).collect();
            let moved: Vec<(f64, f64)> = base.iter().map(|&(x, y)| (x.exp(), y * 3.0 + 1.0)).collect();
            let a = spearman_rho(&pts(&base)).unwrap();
            let b = spearman_rho(&pts(&moved)).unwrap();
            match (a, b) {
                (Some(a), Some(b)) => {
                    proptest::prop_assert!((a.rho - b.rho).abs() < 1e-12);
                    proptest::prop_assert!((a.rho - oracle_rho(&base)).abs() < 1e-12);
                    proptest::prop_assert!((-1.0..=1.0).contains(&a.rho));
                }
                (None, None) => {}
                _ => proptest::prop_assert!(false, "definedness differs"),
            }
        }

        #[test]
        fn minmax_nonnegative_and_zero_iff_equal(vals in proptest::collection::vec(0u8..5, 2..6)) {
            let rs: Vec<_> = vals
                .iter()
                .enumerate()
                .map(|(i, &v)| rep("D", "P", Some(&format!("v{i}")), &[(Metric::Fta, v as f64 / 4.0)]))
                .collect();
            let d = minmax_delta(&rs, Metric::Fta).unwrap()[0].delta;
            proptest::prop_assert!(d >= 0.0);
            proptest::prop_assert_eq!(d == 0.0, vals.iter().all(|&v| v == vals[0]));
        }

        #[test]
        fn optimal_invariant_under_permutation(
            scores in proptest::collection::vec(0u8..4, 6),
            shift in 0usize..6,
        ) {
            let names = ["A", "B", "C"];
            let rs: Vec<_> = scores
                .iter()
                .enumerate()
                .map(|(i, &s)| rep("D", names[i % 3], Some(if i < 3 { "v1" } else { "v2" }), &[(Metric::Pa, s as f64)]))
                .collect();
            let mut rotated = rs.clone();
            rotated.rotate_left(shift);
            rotated.reverse();
            proptest::prop_assert_eq!(
                optimal_parser(&rs, Metric::Pa).unwrap(),
                optimal_parser(&rotated, Metric::Pa).unwrap()
            );
        }
    }
}
