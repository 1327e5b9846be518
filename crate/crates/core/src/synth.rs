//! Synthetic labeled corpora.
//!
//! Randomness comes from SplitMix64 (Steele, Lea and Flood 2014), seeded
//! with the 64-bit `seed`:
//!
//! ```text
//! state = state + 0x9E3779B97F4A7C15
//! z = state
//! z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//! z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//! return z ^ (z >> 31)
//! ```
//!
//! All arithmetic wraps modulo 2^64. A draw below `n` is the high half of
//! the 128-bit product `next() * n`; a unit draw is `(next() >> 11) * 2^-53`.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, LogRecord, TemplateSet};
use crate::error::{Error, Result};
use crate::template_prep::PLACEHOLDER;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub template_count: usize,
    pub message_count: usize,
    /// Probability that a template slot is a placeholder.
    pub variable_rate: f64,
    /// Fraction of messages given a wrong parsed event.
    pub noise_rate: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            template_count: 20,
            message_count: 1000,
            variable_rate: 0.3,
            noise_rate: 0.0,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.template_count < 2 {
            return Err(Error::InvalidSynthSpec(format!(
                "template_count must be at least 2, got {}",
                self.template_count
            )));
        }
        if self.message_count == 0 {
            return Err(Error::InvalidSynthSpec("message_count must be positive".into()));
        }
        for (name, v) in [("variable_rate", self.variable_rate), ("noise_rate", self.noise_rate)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidSynthSpec(format!("{name} must be in [0, 1], got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `0..n`; `n` must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn chance(&mut self, p: f64) -> bool {
        self.unit() < p
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

const WORDS: &[&str] = &[
    "accept", "block", "cache", "daemon", "error", "failed", "session", "opened",
    "closed", "user", "request", "received", "sending", "packet", "node", "disk",
    "memory", "timeout", "connection", "reset", "kernel", "module", "loaded", "service",
    "started", "stopped", "warning", "invalid", "token", "checkpoint", "replica", "commit",
    "verify", "host", "port", "socket", "thread", "queue", "flush", "write",
    "read", "mount", "device", "driver", "power", "state", "change", "retry",
    "auth", "login", "logout", "shutdown", "restart", "config", "update", "delete",
    "create", "job", "task", "worker", "container", "image", "volume", "network",
];

const MIN_SLOTS: usize = 3;
const MAX_SLOTS: usize = 9;

fn random_template(rng: &mut SplitMix64, variable_rate: f64) -> String {
    let len = MIN_SLOTS + rng.below(MAX_SLOTS - MIN_SLOTS + 1);
    let mut slots: Vec<&str> = Vec::with_capacity(len);
    // The first slot stays constant so no template matches everything.
    slots.push(WORDS[rng.below(WORDS.len())]);
    for _ in 1..len {
        if rng.chance(variable_rate) && slots.last() != Some(&PLACEHOLDER) {
            slots.push(PLACEHOLDER);
        } else {
            slots.push(WORDS[rng.below(WORDS.len())]);
        }
    }
    slots.join(" ")
}

fn random_value(rng: &mut SplitMix64) -> String {
    match rng.below(5) {
        0 => rng.below(100_000).to_string(),
        1 => format!("0x{:x}", rng.next_u64() >> 40),
        2 => format!(
            "10.{}.{}.{}",
            rng.below(256),
            rng.below(256),
            rng.below(256)
        ),
        3 => format!("blk_{}", rng.next_u64() >> 20),
        _ => format!("{}-{}", WORDS[rng.below(WORDS.len())], rng.below(1000)),
    }
}

fn instantiate(rng: &mut SplitMix64, template: &str) -> String {
    template
        .split(' ')
        .map(|t| {
            if t == PLACEHOLDER {
                random_value(rng)
            } else {
                t.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    /// Perfect parse: parsed events are the truth events.
    pub truth: Corpus,
    pub parsed: Corpus,
}

impl SynthCorpus {
    /// The parsed corpus with the truth attached.
    pub fn labeled(&self) -> Result<Corpus> {
        crate::corpus::attach_ground_truth(&self.parsed, &self.truth)
    }
}

pub fn event_id(index: usize) -> String {
    format!("E{}", index + 1)
}

/// Builds a truth corpus and a parsed corpus that disagrees with it on
/// `round(noise_rate * message_count)` messages. A noisy message is either
/// regrouped into another truth event or split off into a new event
/// (`E<n>s`) whose template is the first split message's own content.
pub fn generate(spec: &SynthSpec) -> Result<SynthCorpus> {
    spec.validate()?;
    let mut rng = SplitMix64::new(spec.seed);

    let mut seen = HashSet::new();
    let mut templates = Vec::with_capacity(spec.template_count);
    for i in 0..spec.template_count {
        let mut t = random_template(&mut rng, spec.variable_rate);
        let mut tries = 0;
        while seen.contains(&t) {
            tries += 1;
            t = if tries < 100 {
                random_template(&mut rng, spec.variable_rate)
            } else {
                format!("{t} t{i}")
            };
        }
        seen.insert(t.clone());
        templates.push(t);
    }

    let mut assignment: Vec<usize> = (0..spec.message_count)
        .map(|i| {
            if i < spec.template_count {
                i
            } else {
                rng.below(spec.template_count)
            }
        })
        .collect();
    rng.shuffle(&mut assignment);
    let contents: Vec<String> = assignment
        .iter()
        .map(|&e| instantiate(&mut rng, &templates[e]))
        .collect();

    let noisy_count = (spec.noise_rate * spec.message_count as f64).round() as usize;
    let mut order: Vec<usize> = (0..spec.message_count).collect();
    rng.shuffle(&mut order);
    let mut noisy: Vec<usize> = order[..noisy_count].to_vec();
    noisy.sort_unstable();

    let mut parsed_event: Vec<String> = assignment.iter().map(|&e| event_id(e)).collect();
    let mut split_templates: Vec<Option<String>> = vec![None; spec.template_count];
    for &m in &noisy {
        let truth = assignment[m];
        if rng.chance(0.5) {
            let other = (truth + 1 + rng.below(spec.template_count - 1)) % spec.template_count;
            parsed_event[m] = event_id(other);
        } else {
            split_templates[truth].get_or_insert_with(|| contents[m].clone());
            parsed_event[m] = format!("{}s", event_id(truth));
        }
    }

    let truth_set = TemplateSet::from_pairs(
        templates.iter().enumerate().map(|(i, t)| (event_id(i), t.clone())),
    )?;
    let used: HashSet<&str> = parsed_event.iter().map(String::as_str).collect();
    let mut parsed_pairs = Vec::new();
    for (i, t) in templates.iter().enumerate() {
        let id = event_id(i);
        if used.contains(id.as_str()) {
            parsed_pairs.push((id, t.clone()));
        }
        if let Some(s) = &split_templates[i] {
            parsed_pairs.push((format!("{}s", event_id(i)), s.clone()));
        }
    }
    let parsed_set = TemplateSet::from_pairs(parsed_pairs)?;

    let records = |events: &[String]| -> Vec<LogRecord> {
        contents
            .iter()
            .zip(events)
            .enumerate()
            .map(|(i, (c, e))| LogRecord::new(i as u64 + 1, c.clone(), Some(e.clone())))
            .collect()
    };
    let truth_events: Vec<String> = assignment.iter().map(|&e| event_id(e)).collect();
    Ok(SynthCorpus {
        truth: Corpus::new(records(&truth_events), truth_set, None)?,
        parsed: Corpus::new(records(&parsed_event), parsed_set, None)?,
    })
}
