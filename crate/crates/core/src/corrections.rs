//! Template correction rules and ground-truth version profiles.
//!
//! Ten rewriting rules normalise templates (spacing, booleans, digits,
//! hex numbers, paths, key=value pairs, placeholder runs). A profile is an
//! ordered selection of rules; applying it to a template set rewrites each
//! template to a fixed point and merges events whose templates end up
//! identical.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::{read_text, Corpus, LogRecord, TemplateSet};
use crate::error::{Error, Result};

const PH: &str = "<*>";

/// Delimiters used by DV (and MT's "delimiter-only" test) unless a profile
/// overrides them.
pub const DEFAULT_DELIMITERS: &str = ".:-#/+,";

/// Upper bound on rewrite sweeps per template.
pub const MAX_SWEEPS: usize = 10;

/// Rule identifiers, declared in canonical application order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RuleId {
    MS,
    BL,
    US,
    DG,
    HEX,
    PS,
    VA,
    MT,
    DV,
    CV,
}

impl RuleId {
    pub const ALL: [RuleId; 10] = [
        RuleId::MS,
        RuleId::BL,
        RuleId::US,
        RuleId::DG,
        RuleId::HEX,
        RuleId::PS,
        RuleId::VA,
        RuleId::MT,
        RuleId::DV,
        RuleId::CV,
    ];
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for RuleId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RuleId::ALL
            .into_iter()
            .find(|r| r.to_string().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidProfile(format!("unknown rule {s:?}")))
    }
}

/// A rule together with its parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CorrectionRule {
    MultipleSpaces,
    Boolean,
    UserStrings(Vec<String>),
    Digit,
    Hex { prefixed_min: usize, bare_min: usize },
    PathLike,
    ValueAssignment,
    MixedToken,
    DelimitedVariables(Vec<char>),
    ConsecutiveVariables,
}

impl CorrectionRule {
    pub fn id(&self) -> RuleId {
        match self {
            CorrectionRule::MultipleSpaces => RuleId::MS,
            CorrectionRule::Boolean => RuleId::BL,
            CorrectionRule::UserStrings(_) => RuleId::US,
            CorrectionRule::Digit => RuleId::DG,
            CorrectionRule::Hex { .. } => RuleId::HEX,
            CorrectionRule::PathLike => RuleId::PS,
            CorrectionRule::ValueAssignment => RuleId::VA,
            CorrectionRule::MixedToken => RuleId::MT,
            CorrectionRule::DelimitedVariables(_) => RuleId::DV,
            CorrectionRule::ConsecutiveVariables => RuleId::CV,
        }
    }

    /// The rule with default parameters (empty US dictionary, full
    /// delimiter set, HEX thresholds 4 and 8).
    pub fn with_defaults(id: RuleId) -> Self {
        match id {
            RuleId::MS => CorrectionRule::MultipleSpaces,
            RuleId::BL => CorrectionRule::Boolean,
            RuleId::US => CorrectionRule::UserStrings(Vec::new()),
            RuleId::DG => CorrectionRule::Digit,
            RuleId::HEX => CorrectionRule::Hex {
                prefixed_min: 4,
                bare_min: 8,
            },
            RuleId::PS => CorrectionRule::PathLike,
            RuleId::VA => CorrectionRule::ValueAssignment,
            RuleId::MT => CorrectionRule::MixedToken,
            RuleId::DV => CorrectionRule::DelimitedVariables(DEFAULT_DELIMITERS.chars().collect()),
            RuleId::CV => CorrectionRule::ConsecutiveVariables,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            CorrectionRule::UserStrings(words) => {
                for w in words {
                    if w.is_empty() || w.contains(PH) || w.chars().any(char::is_whitespace) {
                        return Err(Error::InvalidProfile(format!(
                            "user string {w:?} must be a single non-placeholder token"
                        )));
                    }
                }
            }
            CorrectionRule::Hex {
                prefixed_min,
                bare_min,
            } => {
                if *prefixed_min == 0 || *bare_min == 0 {
                    return Err(Error::InvalidProfile("hex thresholds must be positive".into()));
                }
            }
            CorrectionRule::DelimitedVariables(delims) => {
                if delims.is_empty() {
                    return Err(Error::InvalidProfile("DV needs at least one delimiter".into()));
                }
                if let Some(c) = delims
                    .iter()
                    .find(|c| matches!(c, '<' | '*' | '>') || c.is_whitespace())
                {
                    return Err(Error::InvalidProfile(format!("invalid delimiter {c:?}")));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// Applies `f` to every whitespace-delimited token, leaving the whitespace
/// between tokens untouched.
fn map_tokens(text: &str, mut f: impl FnMut(&str) -> Option<String>) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while !rest.is_empty() {
        let ws = rest
            .find(|c: char| !c.is_whitespace())
            .unwrap_or(rest.len());
        out.push_str(&rest[..ws]);
        rest = &rest[ws..];
        let end = rest.find(char::is_whitespace).unwrap_or(rest.len());
        let token = &rest[..end];
        if !token.is_empty() {
            match f(token) {
                Some(t) => out.push_str(&t),
                None => out.push_str(token),
            }
        }
        rest = &rest[end..];
    }
    out
}

fn is_key_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '-')
}

/// Splits `key=value` at the first `=` when the key is an identifier.
fn split_assignment(token: &str) -> Option<(&str, &str)> {
    let eq = token.find('=')?;
    let key = &token[..eq];
    (!key.is_empty() && key.chars().all(is_key_char)).then(|| (key, &token[eq + 1..]))
}

/// Rewrites either the whole token or, for `key=value`, the value part.
fn token_or_value(token: &str, replace: impl Fn(&str) -> bool) -> Option<String> {
    if replace(token) {
        return Some(PH.to_string());
    }
    let (key, value) = split_assignment(token)?;
    replace(value).then(|| format!("{key}={PH}"))
}

fn is_boolean(s: &str) -> bool {
    s.eq_ignore_ascii_case("true") || s.eq_ignore_ascii_case("false")
}

fn is_digits(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit())
}

fn is_hex(token: &str, prefixed_min: usize, bare_min: usize) -> bool {
    let hex = |s: &str| s.bytes().all(|b| b.is_ascii_hexdigit());
    if let Some(digits) = token.strip_prefix("0x").or_else(|| token.strip_prefix("0X")) {
        return digits.len() >= prefixed_min && hex(digits);
    }
    token.len() >= bare_min && hex(token) && token.bytes().any(|b| b.is_ascii_digit())
}

fn is_path(token: &str) -> bool {
    let rest = token
        .strip_prefix("./")
        .or_else(|| token.strip_prefix('/'));
    rest.is_some_and(|r| r.contains('/'))
}

fn mixed_token(token: &str) -> Option<String> {
    if !token.contains(PH) {
        return None;
    }
    let (prefix, rest) = match split_assignment(token) {
        Some((key, value)) => (format!("{key}="), value),
        None => (String::new(), token),
    };
    if rest == PH || !rest.contains(PH) {
        return None;
    }
    let leftover = rest.replace(PH, "");
    let only_delims = leftover.chars().all(|c| DEFAULT_DELIMITERS.contains(c));
    (!only_delims).then(|| format!("{prefix}{PH}"))
}

fn collapse_runs(text: &str, delimiters: &[char]) -> String {
    let alternatives: Vec<String> = delimiters
        .iter()
        .map(|c| regex::escape(&c.to_string()))
        .collect();
    let pattern = format!(r"<\*>(?:(?:{})<\*>)+", alternatives.join("|"));
    let re = Regex::new(&pattern).expect("escaped delimiters");
    re.replace_all(text, PH).into_owned()
}

fn multiple_spaces_re() -> &'static Regex {
    static RE: std::sync::OnceLock<Regex> = std::sync::OnceLock::new();
    RE.get_or_init(|| Regex::new(" {2,}").expect("static pattern"))
}

/// Applies one rule once. Every rule is idempotent.
pub fn apply_rule(template: &str, rule: &CorrectionRule) -> String {
    match rule {
        CorrectionRule::MultipleSpaces => multiple_spaces_re()
            .replace_all(template, " ")
            .trim_matches(' ')
            .to_string(),
        CorrectionRule::Boolean => map_tokens(template, |t| token_or_value(t, is_boolean)),
        CorrectionRule::UserStrings(words) => map_tokens(template, |t| {
            words.iter().any(|w| w == t).then(|| PH.to_string())
        }),
        CorrectionRule::Digit => map_tokens(template, |t| token_or_value(t, is_digits)),
        CorrectionRule::Hex {
            prefixed_min,
            bare_min,
        } => map_tokens(template, |t| {
            is_hex(t, *prefixed_min, *bare_min).then(|| PH.to_string())
        }),
        CorrectionRule::PathLike => {
            map_tokens(template, |t| is_path(t).then(|| PH.to_string()))
        }
        CorrectionRule::ValueAssignment => map_tokens(template, |t| {
            let (key, value) = split_assignment(t)?;
            (value != PH).then(|| format!("{key}={PH}"))
        }),
        CorrectionRule::MixedToken => map_tokens(template, mixed_token),
        CorrectionRule::DelimitedVariables(delims) => collapse_runs(template, delims),
        CorrectionRule::ConsecutiveVariables => {
            let mut out = template.to_string();
            let double = PH.repeat(2);
            while out.contains(&double) {
                out = out.replace(&double, PH);
            }
            out
        }
    }
}

/// A named, canonically ordered selection of rules.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorrectionProfile {
    name: String,
    rules: Vec<CorrectionRule>,
}

impl CorrectionProfile {
    /// Sorts `rules` into canonical order; duplicate rule ids are rejected.
    pub fn new(name: impl Into<String>, mut rules: Vec<CorrectionRule>) -> Result<Self> {
        rules.sort_by_key(CorrectionRule::id);
        if let Some(w) = rules.windows(2).find(|w| w[0].id() == w[1].id()) {
            return Err(Error::InvalidProfile(format!("rule {} listed twice", w[0].id())));
        }
        for r in &rules {
            r.validate()?;
        }
        Ok(CorrectionProfile {
            name: name.into(),
            rules,
        })
    }

    fn from_ids(name: &str, ids: &[RuleId], delimiters: &str) -> Self {
        let rules = ids
            .iter()
            .map(|&id| match id {
                RuleId::DV => CorrectionRule::DelimitedVariables(delimiters.chars().collect()),
                _ => CorrectionRule::with_defaults(id),
            })
            .collect();
        CorrectionProfile::new(name, rules).expect("built-in profiles are valid")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn rules(&self) -> &[CorrectionRule] {
        &self.rules
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// The five ground-truth versions: `v1` (uncorrected original), `v2`
    /// (Loghub 2.0), `v3` (LogBatcher), `v4` (UNLEASH), `v5` (LUNAR).
    pub fn builtin(name: &str) -> Result<Self> {
        use RuleId::*;
        let key = name.trim().to_ascii_lowercase();
        let profile = match key.as_str() {
            "v1" | "original" => Self::from_ids("v1", &[], DEFAULT_DELIMITERS),
            "v2" | "loghub2" | "loghub-2.0" => {
                Self::from_ids("v2", &[MS, BL, US, DG, PS, MT, DV, CV], ".")
            }
            "v3" | "logbatcher" => Self::from_ids("v3", &[MS, BL, US, DG, PS, MT, DV, CV, VA], "."),
            "v4" | "unleash" => Self::from_ids("v4", &[DV, CV], DEFAULT_DELIMITERS),
            "v5" | "lunar" => {
                Self::from_ids("v5", &[MS, DG, HEX, MT, DV, CV, VA], DEFAULT_DELIMITERS)
            }
            _ => return Err(Error::UnknownProfile(name.to_string())),
        };
        Ok(profile)
    }

    pub fn builtins() -> Vec<Self> {
        ["v1", "v2", "v3", "v4", "v5"]
            .into_iter()
            .map(|n| Self::builtin(n).expect("known"))
            .collect()
    }

    /// Parses a TOML profile:
    ///
    /// ```toml
    /// name = "custom"
    /// rules = ["MS", "DG", "DV", "CV"]
    /// delimiters = ".-"
    /// user_strings = ["Root"]
    /// hex_prefixed_min = 4
    /// hex_bare_min = 8
    /// ```
    pub fn from_toml(text: &str) -> Result<Self> {
        let file: ProfileFile =
            toml::from_str(text).map_err(|e| Error::InvalidProfile(e.to_string()))?;
        let rules = file
            .rules
            .iter()
            .map(|r| {
                let id: RuleId = r.parse()?;
                Ok(match id {
                    RuleId::US => CorrectionRule::UserStrings(file.user_strings.clone()),
                    RuleId::DV => CorrectionRule::DelimitedVariables(
                        file.delimiters
                            .as_deref()
                            .unwrap_or(DEFAULT_DELIMITERS)
                            .chars()
                            .collect(),
                    ),
                    RuleId::HEX => CorrectionRule::Hex {
                        prefixed_min: file.hex_prefixed_min.unwrap_or(4),
                        bare_min: file.hex_bare_min.unwrap_or(8),
                    },
                    other => CorrectionRule::with_defaults(other),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        CorrectionProfile::new(file.name, rules)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&read_text(path)?)
    }

    /// A built-in name, or else a path to a TOML profile file.
    pub fn resolve(name_or_path: &str) -> Result<Self> {
        match Self::builtin(name_or_path) {
            Ok(p) => Ok(p),
            Err(e) => {
                let path = Path::new(name_or_path);
                if path.is_file() {
                    Self::load(path)
                } else {
                    Err(e)
                }
            }
        }
    }

    /// Rewrites one template to a fixed point. Returns the result and the
    /// number of sweeps over the rule list it took.
    pub fn correct(&self, template: &str) -> (String, usize) {
        let mut current = template.to_string();
        for sweep in 1..=MAX_SWEEPS {
            let next = self
                .rules
                .iter()
                .fold(current.clone(), |t, rule| apply_rule(&t, rule));
            if next == current {
                return (current, sweep);
            }
            current = next;
        }
        (current, MAX_SWEEPS + 1)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileFile {
    name: String,
    rules: Vec<String>,
    #[serde(default)]
    delimiters: Option<String>,
    #[serde(default)]
    user_strings: Vec<String>,
    #[serde(default)]
    hex_prefixed_min: Option<usize>,
    #[serde(default)]
    hex_bare_min: Option<usize>,
}

/// A corrected template set and where each original event went.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Correction {
    pub templates: TemplateSet,
    /// Every original event id mapped to its surviving id.
    pub remap: BTreeMap<String, String>,
}

impl Correction {
    /// Original events folded into another event.
    pub fn merged(&self) -> impl Iterator<Item = (&String, &String)> {
        self.remap.iter().filter(|(old, new)| old != new)
    }

    pub fn has_merges(&self) -> bool {
        self.merged().next().is_some()
    }
}

/// Corrects every template and merges events whose templates became
/// identical. A merged event keeps the smallest (byte order) of its ids.
/// Templates the profile left unchanged are never merged with each other.
pub fn apply_profile(templates: &TemplateSet, profile: &CorrectionProfile) -> Correction {
    let corrected: Vec<(String, bool)> = templates
        .iter()
        .map(|t| {
            let (fixed, _) = profile.correct(&t.template);
            let changed = fixed != t.template;
            (fixed, changed)
        })
        .collect();

    // Group by corrected text; only groups touched by a rewrite merge.
    let mut groups: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, (text, _)) in corrected.iter().enumerate() {
        groups.entry(text.as_str()).or_default().push(i);
    }
    let entries = templates.entries();
    let mut remap = BTreeMap::new();
    for members in groups.values() {
        let merge = members.len() > 1 && members.iter().any(|&i| corrected[i].1);
        if merge {
            let keep = members
                .iter()
                .map(|&i| entries[i].event_id.as_str())
                .min()
                .expect("non-empty group");
            for &i in members {
                remap.insert(entries[i].event_id.clone(), keep.to_string());
            }
        } else {
            for &i in members {
                remap.insert(entries[i].event_id.clone(), entries[i].event_id.clone());
            }
        }
    }
    let survivors = entries
        .iter()
        .zip(&corrected)
        .filter(|(e, _)| remap[&e.event_id] == e.event_id)
        .map(|(e, (text, _))| (e.event_id.clone(), text.clone()));
    let templates = TemplateSet::from_pairs(survivors).expect("survivor ids are unique");
    Correction { templates, remap }
}

/// Applies `profile` to the parsed side of `corpus` (the side a
/// ground-truth file is loaded into), remapping each record's event.
pub fn correct_corpus(corpus: &Corpus, profile: &CorrectionProfile) -> Result<(Corpus, Correction)> {
    let correction = apply_profile(corpus.parsed_templates(), profile);
    let records: Vec<LogRecord> = corpus
        .records()
        .iter()
        .map(|r| LogRecord {
            parsed_event: r
                .parsed_event
                .as_ref()
                .map(|e| correction.remap.get(e).cloned().unwrap_or_else(|| e.clone())),
            ..r.clone()
        })
        .collect();
    let corrected = Corpus::new(
        records,
        correction.templates.clone(),
        corpus.truth_templates().cloned(),
    )?;
    Ok((corrected, correction))
}

/// Share of events and messages whose template differs between two
/// versions of the same corpus, in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VersionDiff {
    pub template_diff_pct: f64,
    pub message_diff_pct: f64,
}

/// Compares two ground-truth versions of the same log lines.
///
/// Events are the classes of messages sharing both their event in `a` and
/// their event in `b`; without merges these are exactly the original events.
pub fn version_diff(a: &Corpus, b: &Corpus) -> Result<VersionDiff> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            parsed: a.len(),
            truth: b.len(),
        });
    }
    let mut b_by_line: Vec<Option<&LogRecord>> = vec![None; b.len()];
    for r in b.records() {
        b_by_line[r.line_id as usize - 1] = Some(r);
    }
    let mut classes: HashMap<(&str, &str), bool> = HashMap::new();
    let mut differing_messages = 0usize;
    for ra in a.records() {
        let rb = b_by_line[ra.line_id as usize - 1].expect("both are 1..n");
        if ra.content != rb.content {
            return Err(Error::ContentMismatch { line_id: ra.line_id });
        }
        let ea = ra.parsed_event.as_deref().ok_or(Error::MissingParsedEvent {
            line_id: ra.line_id,
        })?;
        let eb = rb.parsed_event.as_deref().ok_or(Error::MissingParsedEvent {
            line_id: rb.line_id,
        })?;
        let ta = a.parsed_templates().get(ea).unwrap_or_default();
        let tb = b.parsed_templates().get(eb).unwrap_or_default();
        let differs = ta != tb;
        differing_messages += usize::from(differs);
        classes.insert((ea, eb), differs);
    }
    let pct = |num: usize, den: usize| {
        if den == 0 {
            0.0
        } else {
            100.0 * num as f64 / den as f64
        }
    };
    let differing_events = classes.values().filter(|&&d| d).count();
    Ok(VersionDiff {
        template_diff_pct: pct(differing_events, classes.len()),
        message_diff_pct: pct(differing_messages, a.len()),
    })
}
