//! Medoid silhouette scoring of parser output.
//!
//! Every event template acts as the medoid of its group. A message that
//! its template matches is scored by comparing its token distance to that
//! template (`dist_in`) with the distance to the nearest neighbouring
//! template (`dist_out`); unmatched messages score 0. EMSS averages the
//! scores of one event, and PMSS averages EMSS over events.
//!
//! Neighbours are the adjacent entries in the canonical template order by
//! default. [`NeighborMode::Exact`] scans every other template instead and
//! exists as a reference for the sorted approximation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, LogRecord};
use crate::error::{Error, Result};
use crate::template_prep::{prepare_templates_with, PreparedTemplateSet, TemplateEntry, PLACEHOLDER};
use crate::token_distance::{levenshtein, levenshtein_below, tokenize_message_with};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighborMode {
    #[default]
    Sorted,
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageScore {
    pub line_id: u64,
    pub matched: bool,
    pub dist_in: Option<usize>,
    pub dist_out: Option<usize>,
    pub coefficient: f64,
}

impl MessageScore {
    fn unmatched(line_id: u64) -> Self {
        MessageScore {
            line_id,
            matched: false,
            dist_in: None,
            dist_out: None,
            coefficient: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventScore {
    pub event_id: String,
    pub size: usize,
    pub emss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SilhouetteResult {
    pub pmss: f64,
    /// Events with at least one message, in canonical template order.
    pub event_scores: Vec<EventScore>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message_scores: Option<Vec<MessageScore>>,
    pub matched_fraction: f64,
    /// All parsed templates, including those without messages.
    pub template_count: usize,
    /// Templates with no assigned message; left out of the PMSS average.
    pub empty_events: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct SilhouetteOptions {
    pub mode: NeighborMode,
    pub keep_message_scores: bool,
    /// Worker threads; `None` uses the global rayon pool.
    pub jobs: Option<usize>,
    pub placeholder: String,
}

impl Default for SilhouetteOptions {
    fn default() -> Self {
        SilhouetteOptions {
            mode: NeighborMode::Sorted,
            keep_message_scores: false,
            jobs: None,
            placeholder: PLACEHOLDER.to_string(),
        }
    }
}

/// `(dist_out - dist_in) / max(dist_out, dist_in)`, and 0 when both are 0.
pub fn silhouette_coefficient(dist_in: usize, dist_out: usize) -> f64 {
    let denom = dist_in.max(dist_out);
    if denom == 0 {
        return 0.0;
    }
    (dist_out as f64 - dist_in as f64) / denom as f64
}

pub fn matchable(message: &str, template: &TemplateEntry) -> bool {
    template.match_pattern.is_match(message)
}

/// Smallest distance from `tokens` to any candidate template, skipping
/// candidates whose length difference already rules them out.
fn nearest<'a>(tokens: &[&str], candidates: impl Iterator<Item = &'a TemplateEntry>) -> Option<usize> {
    let mut best: Option<usize> = None;
    for c in candidates {
        match best {
            None => best = Some(levenshtein(tokens, &c.constant_tokens)),
            Some(b) => {
                if let Some(d) = levenshtein_below(tokens, &c.constant_tokens, b) {
                    best = Some(d);
                }
            }
        }
        if best == Some(0) {
            break;
        }
    }
    best
}

fn score_at(
    record: &LogRecord,
    index: usize,
    templates: &PreparedTemplateSet,
    mode: NeighborMode,
) -> MessageScore {
    let entries = templates.entries();
    let own = &entries[index];
    let mut locs = own.match_pattern.regex().capture_locations();
    let Some(tokens) = tokenize_message_with(&record.content, own, &mut locs) else {
        return MessageScore::unmatched(record.line_id);
    };
    let dist_in = levenshtein(&tokens, &own.constant_tokens);
    let dist_out = match mode {
        NeighborMode::Sorted => {
            let before = index.checked_sub(1).map(|i| &entries[i]);
            let after = entries.get(index + 1);
            nearest(&tokens, before.into_iter().chain(after))
        }
        NeighborMode::Exact => nearest(
            &tokens,
            entries
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != index)
                .map(|(_, e)| e),
        ),
    }
    .expect("at least two templates");
    MessageScore {
        line_id: record.line_id,
        matched: true,
        dist_in: Some(dist_in),
        dist_out: Some(dist_out),
        coefficient: silhouette_coefficient(dist_in, dist_out),
    }
}

fn event_index(record: &LogRecord, templates: &PreparedTemplateSet) -> Result<usize> {
    let event = record
        .parsed_event
        .as_deref()
        .ok_or(Error::MissingParsedEvent {
            line_id: record.line_id,
        })?;
    templates.index_of(event).ok_or_else(|| Error::UnknownEvent {
        event_id: event.to_string(),
    })
}

/// Silhouette coefficient of one message against its parsed template.
pub fn message_coefficient(
    record: &LogRecord,
    templates: &PreparedTemplateSet,
    mode: NeighborMode,
) -> Result<MessageScore> {
    if templates.len() < 2 {
        return Err(Error::TooFewTemplates {
            found: templates.len(),
        });
    }
    let index = event_index(record, templates)?;
    Ok(score_at(record, index, templates, mode))
}

/// PMSS of the parsed side of `corpus`.
pub fn evaluate_pmss(corpus: &Corpus, options: &SilhouetteOptions) -> Result<SilhouetteResult> {
    let templates = prepare_templates_with(corpus.parsed_templates(), &options.placeholder)?;
    evaluate_prepared(corpus.records(), &templates, options)
}

pub fn evaluate_prepared(
    records: &[LogRecord],
    templates: &PreparedTemplateSet,
    options: &SilhouetteOptions,
) -> Result<SilhouetteResult> {
    if templates.len() < 2 {
        return Err(Error::TooFewTemplates {
            found: templates.len(),
        });
    }
    let indices: Vec<usize> = records
        .iter()
        .map(|r| event_index(r, templates))
        .collect::<Result<_>>()?;

    let score_all = || -> Vec<MessageScore> {
        records
            .par_iter()
            .zip(indices.par_iter())
            .map(|(r, &i)| score_at(r, i, templates, options.mode))
            .collect()
    };
    let scores = match options.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Undefined(format!("cannot start worker pool: {e}")))?
            .install(score_all),
        None => score_all(),
    };

    // Per-event reduction in a fixed order so the result does not depend on
    // record order or on how work was split.
    let mut members: Vec<Vec<f64>> = vec![Vec::new(); templates.len()];
    let mut matched = 0usize;
    for (s, &i) in scores.iter().zip(&indices) {
        members[i].push(s.coefficient);
        matched += usize::from(s.matched);
    }
    let mut event_scores = Vec::new();
    let mut empty_events = Vec::new();
    for (entry, mut coefficients) in templates.entries().iter().zip(members) {
        if coefficients.is_empty() {
            empty_events.push(entry.event_id.clone());
            continue;
        }
        coefficients.sort_unstable_by(f64::total_cmp);
        let sum: f64 = coefficients.iter().sum();
        event_scores.push(EventScore {
            event_id: entry.event_id.clone(),
            size: coefficients.len(),
            emss: sum / coefficients.len() as f64,
        });
    }
    let pmss = if event_scores.is_empty() {
        0.0
    } else {
        event_scores.iter().map(|e| e.emss).sum::<f64>() / event_scores.len() as f64
    };
    let matched_fraction = if records.is_empty() {
        0.0
    } else {
        matched as f64 / records.len() as f64
    };
    Ok(SilhouetteResult {
        pmss,
        event_scores,
        message_scores: options.keep_message_scores.then_some(scores),
        matched_fraction,
        template_count: templates.len(),
        empty_events,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::TemplateSet;

    fn corpus(templates: &[(&str, &str)], messages: &[(&str, &str)]) -> Corpus {
        let set = TemplateSet::from_pairs(templates.iter().copied()).unwrap();
        let records = messages
            .iter()
            .enumerate()
            .map(|(i, (event, content))| LogRecord::new(i as u64 + 1, *content, Some(event.to_string())))
            .collect();
        Corpus::new(records, set, None).unwrap()
    }

    fn keep() -> SilhouetteOptions {
        SilhouetteOptions {
            keep_message_scores: true,
            ..Default::default()
        }
    }

    #[test]
    fn coefficient_formula() {
        assert_eq!(silhouette_coefficient(0, 5), 1.0);
        assert_eq!(silhouette_coefficient(2, 5), 0.6);
        assert_eq!(silhouette_coefficient(0, 0), 0.0);
        assert_eq!(silhouette_coefficient(4, 2), -0.5);
    }

    #[test]
    fn matchability() {
        let set = TemplateSet::from_pairs([("E1", "Bluetooth: <*> (ver <*>)"), ("E2", "<*>")]).unwrap();
        let p = crate::template_prep::prepare_templates(&set).unwrap();
        let bt = p.get("E1").unwrap();
        assert!(matchable("Bluetooth: L2CAP (ver 2.1)", bt));
        assert!(!matchable("Bluetooth L2CAP", bt));
        assert!(matchable("whatever it is", p.get("E2").unwrap()));
    }

    #[test]
    fn unmatched_scores_zero() {
        let c = corpus(
            &[("A", "alpha beta"), ("B", "gamma delta")],
            &[("A", "not alpha"), ("B", "gamma delta")],
        );
        let r = evaluate_pmss(&c, &keep()).unwrap();
        let m = &r.message_scores.unwrap()[0];
        assert!(!m.matched);
        assert_eq!(m.coefficient, 0.0);
        assert_eq!(m.dist_in, None);
        assert_eq!(r.matched_fraction, 0.5);
    }

    #[test]
    fn perfect_parse_scores_one() {
        let c = corpus(
            &[("A", "alpha beta"), ("B", "gamma delta epsilon"), ("C", "zeta")],
            &[("A", "alpha beta"), ("B", "gamma delta epsilon"), ("C", "zeta"), ("A", "alpha beta")],
        );
        let r = evaluate_pmss(&c, &SilhouetteOptions::default()).unwrap();
        assert_eq!(r.pmss, 1.0);
        assert!(r.event_scores.iter().all(|e| e.emss == 1.0));
    }

    #[test]
    fn nothing_matches_scores_zero() {
        let c = corpus(
            &[("A", "alpha"), ("B", "beta")],
            &[("A", "x"), ("B", "y"), ("B", "z")],
        );
        assert_eq!(evaluate_pmss(&c, &SilhouetteOptions::default()).unwrap().pmss, 0.0);
    }

    #[test]
    fn single_template_is_an_error() {
        let c = corpus(&[("A", "alpha <*>")], &[("A", "alpha 1")]);
        assert!(matches!(
            evaluate_pmss(&c, &SilhouetteOptions::default()),
            Err(Error::TooFewTemplates { found: 1 })
        ));
    }

    #[test]
    fn empty_events_are_excluded_and_reported() {
        let c = corpus(
            &[("A", "alpha"), ("B", "beta"), ("C", "gamma")],
            &[("A", "alpha"), ("C", "gamma")],
        );
        let r = evaluate_pmss(&c, &SilhouetteOptions::default()).unwrap();
        assert_eq!(r.empty_events, vec!["B"]);
        assert_eq!(r.template_count, 3);
        assert_eq!(r.event_scores.len(), 2);
        assert_eq!(r.pmss, 1.0);
    }

    #[test]
    fn pmss_is_unweighted_over_events() {
        // A: 3 perfect messages (1.0 each). B: one unmatched (0.0).
        let c = corpus(
            &[("A", "alpha one"), ("B", "beta two")],
            &[("A", "alpha one"), ("A", "alpha one"), ("A", "alpha one"), ("B", "nope")],
        );
        let r = evaluate_pmss(&c, &SilhouetteOptions::default()).unwrap();
        assert_eq!(r.pmss, 0.5);
    }

    #[test]
    fn worked_coefficient() {
        // Sorted order: "a <*>" < "a b c d e f g" < "z". For the message
        // "a w x" on "a <*>": tokens [a,w,x], dist_in 2; neighbour
        // "a b c d e f g" is at distance 6 ([a,w,x] -> 7 tokens).
        let c = corpus(
            &[("E1", "a <*>"), ("E2", "a b c d e f g"), ("E3", "z")],
            &[("E1", "a w x")],
        );
        let r = evaluate_pmss(&c, &keep()).unwrap();
        let m = &r.message_scores.unwrap()[0];
        assert_eq!((m.dist_in, m.dist_out), (Some(2), Some(6)));
        assert!((m.coefficient - 4.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn message_coefficient_errors() {
        let set = TemplateSet::from_pairs([("A", "a"), ("B", "b")]).unwrap();
        let p = crate::template_prep::prepare_templates(&set).unwrap();
        let r = LogRecord::new(1, "a", Some("Z".into()));
        assert!(matches!(
            message_coefficient(&r, &p, NeighborMode::Sorted),
            Err(Error::UnknownEvent { .. })
        ));
        let r = LogRecord::new(1, "a", None);
        assert!(matches!(
            message_coefficient(&r, &p, NeighborMode::Sorted),
            Err(Error::MissingParsedEvent { line_id: 1 })
        ));
    }
}
