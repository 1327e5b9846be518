//! Template preparation: canonical ordering, numeric filtering, full-match
//! pattern compilation and constant-token extraction.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::sync::OnceLock;

use regex::Regex;

use crate::corpus::TemplateSet;
use crate::error::{Error, Result};

/// The Loghub placeholder literal.
pub const PLACEHOLDER: &str = "<*>";

fn numeric_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\b\d+\b").expect("static pattern"))
}

/// Replaces every word-boundary-delimited digit run with `<*>`, then
/// collapses directly adjacent placeholders.
pub fn filter_numerics(raw_template: &str) -> String {
    filter_numerics_with(raw_template, PLACEHOLDER)
}

pub fn filter_numerics_with(raw_template: &str, placeholder: &str) -> String {
    let replaced = numeric_re().replace_all(raw_template, regex::NoExpand(placeholder));
    collapse_adjacent(&replaced, placeholder)
}

fn collapse_adjacent(text: &str, placeholder: &str) -> String {
    if placeholder.is_empty() {
        return text.to_string();
    }
    let double = placeholder.repeat(2);
    let mut out = text.to_string();
    while out.contains(&double) {
        out = out.replace(&double, placeholder);
    }
    out
}

/// Escapes ASCII punctuation so it matches literally. `<` and `>` are left
/// alone since `\<`/`\>` are word-boundary assertions in the regex syntax.
fn escape_literal(segment: &str, out: &mut String) {
    for c in segment.chars() {
        if c.is_ascii_punctuation() && c != '<' && c != '>' {
            out.push('\\');
        }
        out.push(c);
    }
}

/// A compiled full-match pattern; one lazy capture per placeholder.
#[derive(Clone)]
pub struct MatchPattern {
    source: String,
    regex: Regex,
    captures: usize,
}

impl MatchPattern {
    /// Unanchored pattern text, e.g. `Bluetooth\: (.*?) \(ver (.*?)\)`.
    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn regex(&self) -> &Regex {
        &self.regex
    }

    pub fn capture_count(&self) -> usize {
        self.captures
    }

    pub fn is_match(&self, message: &str) -> bool {
        self.regex.is_match(message)
    }
}

impl fmt::Debug for MatchPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("MatchPattern").field(&self.source).finish()
    }
}

impl PartialEq for MatchPattern {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source
    }
}

impl Eq for MatchPattern {}

pub fn compile_pattern(prepared_template: &str) -> MatchPattern {
    compile_pattern_with(prepared_template, PLACEHOLDER)
}

pub fn compile_pattern_with(prepared_template: &str, placeholder: &str) -> MatchPattern {
    let mut source = String::with_capacity(prepared_template.len() * 2);
    let mut captures = 0;
    let segments: Vec<&str> = if placeholder.is_empty() {
        vec![prepared_template]
    } else {
        prepared_template.split(placeholder).collect()
    };
    for (i, segment) in segments.iter().enumerate() {
        if i > 0 {
            source.push_str("(.*?)");
            captures += 1;
        }
        escape_literal(segment, &mut source);
    }
    let regex = Regex::new(&format!("^(?s:{source})$"))
        .expect("escaped template always compiles");
    MatchPattern {
        source,
        regex,
        captures,
    }
}

/// Splits a template on placeholders and whitespace, dropping the
/// placeholders themselves.
pub fn tokenize_template(prepared_template: &str) -> Vec<String> {
    tokenize_template_with(prepared_template, PLACEHOLDER)
}

pub fn tokenize_template_with(prepared_template: &str, placeholder: &str) -> Vec<String> {
    let segments: Vec<&str> = if placeholder.is_empty() {
        vec![prepared_template]
    } else {
        prepared_template.split(placeholder).collect()
    };
    segments
        .into_iter()
        .flat_map(str::split_whitespace)
        .map(str::to_string)
        .collect()
}

/// One prepared template.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateEntry {
    pub event_id: String,
    pub raw_template: String,
    pub prepared_template: String,
    pub match_pattern: MatchPattern,
    pub constant_tokens: Vec<String>,
    pub sorted_index: usize,
}

/// Templates in canonical order, ready for matching and distance queries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreparedTemplateSet {
    entries: Vec<TemplateEntry>,
    placeholder: String,
    by_event: HashMap<String, usize>,
}

impl PreparedTemplateSet {
    pub fn entries(&self) -> &[TemplateEntry] {
        &self.entries
    }

    pub fn placeholder(&self) -> &str {
        &self.placeholder
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Sorted index of `event_id`.
    pub fn index_of(&self, event_id: &str) -> Option<usize> {
        self.by_event.get(event_id).copied()
    }

    pub fn get(&self, event_id: &str) -> Option<&TemplateEntry> {
        self.index_of(event_id).map(|i| &self.entries[i])
    }
}

/// Byte-wise order on the prepared template, then on event id.
fn canonical_order(a: &TemplateEntry, b: &TemplateEntry) -> Ordering {
    a.prepared_template
        .as_bytes()
        .cmp(b.prepared_template.as_bytes())
        .then_with(|| a.event_id.as_bytes().cmp(b.event_id.as_bytes()))
}

pub fn prepare_templates(templates: &TemplateSet) -> Result<PreparedTemplateSet> {
    prepare_templates_with(templates, PLACEHOLDER)
}

pub fn prepare_templates_with(
    templates: &TemplateSet,
    placeholder: &str,
) -> Result<PreparedTemplateSet> {
    if templates.is_empty() {
        return Err(Error::EmptyTemplateSet);
    }
    let mut entries: Vec<TemplateEntry> = templates
        .iter()
        .map(|t| {
            let prepared = filter_numerics_with(&t.template, placeholder);
            TemplateEntry {
                event_id: t.event_id.clone(),
                raw_template: t.template.clone(),
                match_pattern: compile_pattern_with(&prepared, placeholder),
                constant_tokens: tokenize_template_with(&prepared, placeholder),
                prepared_template: prepared,
                sorted_index: 0,
            }
        })
        .collect();
    entries.sort_by(canonical_order);
    let mut by_event = HashMap::with_capacity(entries.len());
    for (i, e) in entries.iter_mut().enumerate() {
        e.sorted_index = i;
        by_event.insert(e.event_id.clone(), i);
    }
    Ok(PreparedTemplateSet {
        entries,
        placeholder: placeholder.to_string(),
        by_event,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn is_word(c: char) -> bool {
        c.is_alphanumeric() || c == '_'
    }

    /// Character-walk reference for `\b\d+\b` replacement (no collapsing).
    fn walk_filter(s: &str) -> String {
        let chars: Vec<char> = s.chars().collect();
        let mut out = String::new();
        let mut i = 0;
        while i < chars.len() {
            let left_ok = i == 0 || !is_word(chars[i - 1]);
            if chars[i].is_ascii_digit() && left_ok {
                let mut j = i;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
                let right_ok = j == chars.len() || !is_word(chars[j]);
                if right_ok {
                    out.push_str(PLACEHOLDER);
                    i = j;
                    continue;
                }
            }
            out.push(chars[i]);
            i += 1;
        }
        out
    }

    #[test]
    fn numeric_filter_examples() {
        assert_eq!(filter_numerics("retry 3 times"), "retry <*> times");
        assert_eq!(filter_numerics("<*> <*>"), "<*> <*>");
        // "2" in "v2" has a letter on its left, so only "1" is replaced.
        assert_eq!(walk_filter("v2.1 ready"), "v2.<*> ready");
        assert_eq!(filter_numerics("v2.1 ready"), "v2.<*> ready");
        assert_eq!(filter_numerics("port 8080:22"), "port <*>:<*>");
        assert_eq!(filter_numerics("abc123 123abc"), "abc123 123abc");
    }

    #[test]
    fn numeric_filter_collapses_new_adjacency() {
        assert_eq!(filter_numerics("id <*>42"), "id <*>");
    }

    #[test]
    fn bluetooth_regex_conversion() {
        let p = compile_pattern("Bluetooth: <*> (ver <*>)");
        assert_eq!(p.source(), r"Bluetooth\: (.*?) \(ver (.*?)\)");
        assert_eq!(p.capture_count(), 2);
        assert!(p.is_match("Bluetooth: L2CAP (ver 2.1)"));
        assert!(!p.is_match("x Bluetooth: L2CAP (ver 2.1)"));
    }

    #[test]
    fn plain_and_universal_patterns() {
        let p = compile_pattern("plain text");
        assert!(p.is_match("plain text"));
        assert!(!p.is_match("plain text!"));
        assert!(!p.is_match("a plain text"));
        let u = compile_pattern("<*>");
        assert_eq!(u.capture_count(), 1);
        assert!(u.is_match("anything\nat all"));
        assert!(u.is_match(""));
    }

    #[test]
    fn every_ascii_punctuation_matches_literally() {
        let all: String = (0u8..128)
            .map(char::from)
            .filter(|c| c.is_ascii_punctuation())
            .collect();
        let p = compile_pattern(&all);
        assert!(p.is_match(&all));
        assert!(!p.is_match(&all[1..]));
    }

    #[test]
    fn tokenization_examples() {
        assert_eq!(
            tokenize_template("Bluetooth: <*> (ver <*>)"),
            vec!["Bluetooth:", "(ver", ")"]
        );
        assert!(tokenize_template("<*>").is_empty());
        assert_eq!(tokenize_template("a=<*>b c"), vec!["a=", "b", "c"]);
    }

    #[test]
    fn prepare_sorts_and_indexes() {
        let set = TemplateSet::from_pairs([("E1", "b x"), ("E2", "a y")]).unwrap();
        let p = prepare_templates(&set).unwrap();
        let order: Vec<_> = p.entries().iter().map(|e| e.raw_template.as_str()).collect();
        assert_eq!(order, ["a y", "b x"]);
        assert_eq!(p.get("E2").unwrap().sorted_index, 0);
        assert_eq!(p.get("E1").unwrap().sorted_index, 1);
    }

    #[test]
    fn prepare_ties_break_on_event_id() {
        let set = TemplateSet::from_pairs([("E9", "same"), ("E1", "same")]).unwrap();
        let p = prepare_templates(&set).unwrap();
        assert_eq!(p.entries()[0].event_id, "E1");
    }

    #[test]
    fn prepare_rejects_empty() {
        assert!(matches!(
            prepare_templates(&TemplateSet::new()),
            Err(Error::EmptyTemplateSet)
        ));
    }

    #[test]
    fn custom_placeholder() {
        let set = TemplateSet::from_pairs([("E1", "open {} now 5")]).unwrap();
        let p = prepare_templates_with(&set, "{}").unwrap();
        let e = &p.entries()[0];
        assert_eq!(e.prepared_template, "open {} now {}");
        assert_eq!(e.constant_tokens, vec!["open", "now"]);
        assert!(e.match_pattern.is_match("open door now 7"));
    }

    fn template_strategy() -> impl Strategy<Value = String> {
        prop::collection::vec(
            prop_oneof![
                Just("<*>".to_string()),
                "[a-z]{1,5}",
                "[0-9]{1,3}",
                "[a-z:=()\\[\\].+*?|^$]{1,4}",
            ],
            1..6,
        )
        .prop_map(|parts| parts.join(" "))
    }

    proptest! {
        #[test]
        fn filter_matches_walk_oracle(s in "[a-z0-9 ._:=<>*-]{0,30}") {
            let expected = collapse_adjacent(&walk_filter(&s), PLACEHOLDER);
            prop_assert_eq!(filter_numerics(&s), expected);
        }

        #[test]
        fn tokens_have_no_placeholder_or_whitespace(t in template_strategy()) {
            for tok in tokenize_template(&t) {
                prop_assert!(!tok.is_empty());
                prop_assert!(!tok.contains(PLACEHOLDER));
                prop_assert!(!tok.chars().any(char::is_whitespace));
            }
        }

        #[test]
        fn captures_reconstruct_message(
            t in template_strategy(),
            fills in prop::collection::vec("[a-z0-9 .]{0,6}", 6),
        ) {
            let pieces: Vec<&str> = t.split(PLACEHOLDER).collect();
            let mut msg = String::new();
            for (i, piece) in pieces.iter().enumerate() {
                if i > 0 {
                    msg.push_str(&fills[i - 1]);
                }
                msg.push_str(piece);
            }
            let p = compile_pattern(&t);
            let caps = p.regex().captures(&msg);
            prop_assert!(caps.is_some());
            let caps = caps.unwrap();
            prop_assert_eq!(caps.len() - 1, p.capture_count());
            let mut rebuilt = String::new();
            for (i, piece) in pieces.iter().enumerate() {
                if i > 0 {
                    rebuilt.push_str(caps.get(i).map_or("", |m| m.as_str()));
                }
                rebuilt.push_str(piece);
            }
            prop_assert_eq!(rebuilt, msg);
        }

        #[test]
        fn prepare_is_permutation_invariant(
            ts in prop::collection::btree_map("E[0-9]{1,3}", template_strategy(), 1..30),
            seed in any::<u64>(),
        ) {
            let mut pairs: Vec<(String, String)> = ts.into_iter().collect();
            let a = prepare_templates(&TemplateSet::from_pairs(pairs.clone()).unwrap()).unwrap();
            let n = pairs.len();
            for i in 0..n {
                pairs.swap(i, (seed as usize).wrapping_mul(i + 7) % n);
            }
            let b = prepare_templates(&TemplateSet::from_pairs(pairs).unwrap()).unwrap();
            prop_assert_eq!(a.entries(), b.entries());
        }
    }
}
