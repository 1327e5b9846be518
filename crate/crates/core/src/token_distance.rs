//! Token-level edit distance and message tokenization.

use regex::CaptureLocations;

use crate::template_prep::TemplateEntry;

/// Unit-cost Levenshtein distance over whole tokens.
///
/// Runs a two-row dynamic program sized by the shorter input.
pub fn levenshtein<A, B>(a: &[A], b: &[B]) -> usize
where
    A: AsRef<str>,
    B: AsRef<str>,
{
    if a.len() < b.len() {
        return levenshtein(b, a);
    }
    // b is now the shorter side
    if b.is_empty() {
        return a.len();
    }
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, x) in a.iter().enumerate() {
        let x = x.as_ref();
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let substitute = diag + usize::from(x != y.as_ref());
            diag = row[j + 1];
            row[j + 1] = substitute.min(row[j] + 1).min(diag + 1);
        }
    }
    row[b.len()]
}

/// Distance to `b` if it can be smaller than `bound`, using the length
/// difference as a lower bound to skip the full computation.
pub fn levenshtein_below<A, B>(a: &[A], b: &[B], bound: usize) -> Option<usize>
where
    A: AsRef<str>,
    B: AsRef<str>,
{
    if a.len().abs_diff(b.len()) >= bound {
        return None;
    }
    let d = levenshtein(a, b);
    (d < bound).then_some(d)
}

/// Splits a message that matches `template` into tokens, keeping constant
/// parts and variable captures apart. Returns `None` when the message does
/// not match.
pub fn tokenize_message<'m>(message: &'m str, template: &TemplateEntry) -> Option<Vec<&'m str>> {
    let mut locs = template.match_pattern.regex().capture_locations();
    tokenize_message_with(message, template, &mut locs)
}

/// As [`tokenize_message`], reusing caller-owned capture storage.
pub fn tokenize_message_with<'m>(
    message: &'m str,
    template: &TemplateEntry,
    locs: &mut CaptureLocations,
) -> Option<Vec<&'m str>> {
    template
        .match_pattern
        .regex()
        .captures_read(locs, message)?;
    let mut tokens = Vec::new();
    let mut pos = 0;
    for g in 1..locs.len() {
        let (start, end) = locs.get(g).unwrap_or((pos, pos));
        tokens.extend(message[pos..start].split_whitespace());
        tokens.extend(message[start..end].split_whitespace());
        pos = end;
    }
    tokens.extend(message[pos..].split_whitespace());
    Some(tokens)
}
