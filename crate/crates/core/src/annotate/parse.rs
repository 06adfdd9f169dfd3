use std::fmt;

use crate::corpus::Label;

/// The response did not contain a recognizable label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParseFailure;

impl fmt::Display for ParseFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("no label in response")
    }
}

fn label_after_marker(rest: &str) -> Option<Label> {
    let rest = rest.trim_start();
    let mut chars = rest.chars();
    let label = match chars.next()? {
        '0' => 0,
        '1' => 1,
        _ => return None,
    };
    match chars.next() {
        Some(c) if c.is_ascii_digit() => None,
        _ => Some(label),
    }
}

/// Extract a binary label from a completion.
///
/// The last occurrence of `marker` followed by optional whitespace and a
/// single `0`/`1` wins. Without any marker occurrence, a response that is
/// exactly `0` or `1` after trimming is accepted. Everything else is a
/// [`ParseFailure`].
pub fn parse_label(raw: &str, marker: &str) -> Result<Label, ParseFailure> {
    if marker.is_empty() {
        return bare_label(raw);
    }
    let mut found_marker = false;
    let mut last = None;
    for (at, _) in raw.match_indices(marker) {
        found_marker = true;
        if let Some(l) = label_after_marker(&raw[at + marker.len()..]) {
            last = Some(l);
        }
    }
    match (found_marker, last) {
        (_, Some(l)) => Ok(l),
        (true, None) => Err(ParseFailure),
        (false, None) => bare_label(raw),
    }
}

fn bare_label(raw: &str) -> Result<Label, ParseFailure> {
    match raw.trim() {
        "0" => Ok(0),
        "1" => Ok(1),
        _ => Err(ParseFailure),
    }
}
