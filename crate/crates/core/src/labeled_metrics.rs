//! Label-based metrics: GA, PA, FGA and FTA.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupingOutcome {
    pub correct_messages: usize,
    pub total_messages: usize,
    /// Parsed events whose message set equals a truth event's message set.
    pub correct_events: usize,
    /// Correctly grouped events whose template also equals the truth template.
    pub correct_template_events: usize,
    pub parsed_event_count: usize,
    pub truth_event_count: usize,
    pub correctly_parsed_messages: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledScores {
    pub ga: f64,
    pub pa: f64,
    pub fga: f64,
    pub fta: f64,
}

/// F1 with the 0/0 case mapped to 0.
pub fn harmonic_mean(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn same_template(a: &str, b: &str) -> bool {
    a.trim_end() == b.trim_end()
}

#[derive(Clone, Copy)]
enum Purity {
    Pure(usize),
    Mixed,
}

/// Counts behind all four metrics in one pass over the corpus.
pub fn grouping_outcome(corpus: &Corpus) -> Result<GroupingOutcome> {
    let truth_templates = corpus.truth_templates().ok_or(Error::MissingGroundTruth)?;
    let parsed_templates = corpus.parsed_templates();

    let mut parsed_ids: HashMap<&str, usize> = HashMap::new();
    let mut truth_ids: HashMap<&str, usize> = HashMap::new();
    let mut parsed_size: Vec<usize> = Vec::new();
    let mut parsed_truth: Vec<Purity> = Vec::new();
    let mut parsed_names: Vec<&str> = Vec::new();
    let mut truth_size: Vec<usize> = Vec::new();
    let mut truth_names: Vec<&str> = Vec::new();
    let mut correctly_parsed = 0;

    for r in corpus.records() {
        let p = r.parsed_event.as_deref().ok_or(Error::MissingParsedEvent {
            line_id: r.line_id,
        })?;
        let t = r.truth_event.as_deref().ok_or(Error::MissingGroundTruth)?;
        let ti = *truth_ids.entry(t).or_insert_with(|| {
            truth_size.push(0);
            truth_names.push(t);
            truth_size.len() - 1
        });
        truth_size[ti] += 1;
        let pi = *parsed_ids.entry(p).or_insert_with(|| {
            parsed_size.push(0);
            parsed_truth.push(Purity::Pure(ti));
            parsed_names.push(p);
            parsed_size.len() - 1
        });
        parsed_size[pi] += 1;
        if let Purity::Pure(prev) = parsed_truth[pi] {
            if prev != ti {
                parsed_truth[pi] = Purity::Mixed;
            }
        }
        let pt = parsed_templates.get(p).ok_or_else(|| Error::UnknownEvent {
            event_id: p.to_string(),
        })?;
        let tt = truth_templates.get(t).ok_or_else(|| Error::UnknownEvent {
            event_id: t.to_string(),
        })?;
        if same_template(pt, tt) {
            correctly_parsed += 1;
        }
    }

    let mut outcome = GroupingOutcome {
        total_messages: corpus.len(),
        parsed_event_count: parsed_size.len(),
        truth_event_count: truth_size.len(),
        correctly_parsed_messages: correctly_parsed,
        ..Default::default()
    };
    for (pi, purity) in parsed_truth.iter().enumerate() {
        let Purity::Pure(ti) = *purity else { continue };
        if parsed_size[pi] != truth_size[ti] {
            continue;
        }
        outcome.correct_events += 1;
        outcome.correct_messages += parsed_size[pi];
        let pt = parsed_templates.get(parsed_names[pi]).unwrap_or_default();
        let tt = truth_templates.get(truth_names[ti]).unwrap_or_default();
        if same_template(pt, tt) {
            outcome.correct_template_events += 1;
        }
    }
    Ok(outcome)
}

impl GroupingOutcome {
    pub fn scores(&self) -> LabeledScores {
        let pga = ratio(self.correct_events, self.parsed_event_count);
        let rga = ratio(self.correct_events, self.truth_event_count);
        let pta = ratio(self.correct_template_events, self.parsed_event_count);
        let rta = ratio(self.correct_template_events, self.truth_event_count);
        LabeledScores {
            ga: ratio(self.correct_messages, self.total_messages),
            pa: ratio(self.correctly_parsed_messages, self.total_messages),
            fga: harmonic_mean(pga, rga),
            fta: harmonic_mean(pta, rta),
        }
    }
}

pub fn labeled_scores(corpus: &Corpus) -> Result<LabeledScores> {
    Ok(grouping_outcome(corpus)?.scores())
}

/// Share of messages grouped with exactly the messages of their truth event.
pub fn grouping_accuracy(corpus: &Corpus) -> Result<f64> {
    Ok(labeled_scores(corpus)?.ga)
}

/// Share of messages whose parsed template equals the truth template.
pub fn parsing_accuracy(corpus: &Corpus) -> Result<f64> {
    Ok(labeled_scores(corpus)?.pa)
}

pub fn f1_grouping_accuracy(corpus: &Corpus) -> Result<f64> {
    Ok(labeled_scores(corpus)?.fga)
}

pub fn f1_template_accuracy(corpus: &Corpus) -> Result<f64> {
    Ok(labeled_scores(corpus)?.fta)
}
