//! Delexicalization of system utterances into `[value_<slot>]` templates and
//! the inverse fill-in.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{BeliefState, DomainName};
use crate::kb::{BookingResult, EntityRecord};

/// Slots that are abstracted into placeholders. The same slot in any domain
/// maps to the same placeholder.
pub const DELEX_SLOTS: [&str; 19] = [
    "name",
    "type",
    "area",
    "pricerange",
    "food",
    "day",
    "time",
    "people",
    "stay",
    "ref",
    "phone",
    "address",
    "postcode",
    "id",
    "price",
    "departure",
    "destination",
    "leave",
    "arrive",
];

const OPEN: &str = "[value_";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LexError {
    #[error("no value available for placeholder [value_{0}]")]
    UnfilledPlaceholder(String),
    #[error("value map does not line up with the template at placeholder {index}")]
    ValueMapMismatch { index: usize },
}

pub fn is_delex_slot(slot: &str) -> bool {
    DELEX_SLOTS.contains(&slot)
}

pub fn placeholder(slot: &str) -> String {
    format!("{OPEN}{slot}]")
}

/// Which placeholder slot each abstracted surface value came from, in order of
/// appearance.
pub type ValueMap = Vec<(String, String)>;

/// A delexicalized response.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Template(String);

impl Template {
    pub fn new(text: impl Into<String>) -> Self {
        Template(text.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.trim().is_empty()
    }

    /// Placeholder slots in order of appearance, repeats included.
    pub fn placeholders(&self) -> Vec<String> {
        self.segments()
            .into_iter()
            .filter_map(|seg| match seg {
                Segment::Slot(s) => Some(s.to_string()),
                Segment::Text(_) => None,
            })
            .collect()
    }

    /// Every bracket opens a `[value_<slot>]` with a known slot and is closed.
    pub fn is_well_formed(&self) -> bool {
        let mut rest = self.0.as_str();
        loop {
            let open = rest.find('[');
            let close = rest.find(']');
            match (open, close) {
                (None, None) => return true,
                (Some(o), Some(c)) if o < c => {
                    let inner = &rest[o + 1..c];
                    let Some(slot) = inner.strip_prefix("value_") else {
                        return false;
                    };
                    if !is_delex_slot(slot) {
                        return false;
                    }
                    rest = &rest[c + 1..];
                }
                _ => return false,
            }
        }
    }

    fn segments(&self) -> Vec<Segment<'_>> {
        let mut out = Vec::new();
        let mut rest = self.0.as_str();
        while let Some(start) = rest.find(OPEN) {
            let after = &rest[start + OPEN.len()..];
            let Some(end) = after.find(']') else { break };
            let slot = &after[..end];
            if slot.is_empty() || !slot.chars().all(|c| c.is_ascii_lowercase() || c == '_') {
                out.push(Segment::Text(&rest[..start + OPEN.len()]));
                rest = after;
                continue;
            }
            out.push(Segment::Text(&rest[..start]));
            out.push(Segment::Slot(slot));
            rest = &after[end + 1..];
        }
        out.push(Segment::Text(rest));
        out
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

enum Segment<'a> {
    Text(&'a str),
    Slot(&'a str),
}

fn is_bare_count(value: &str) -> bool {
    !value.is_empty() && value.len() <= 3 && value.bytes().all(|b| b.is_ascii_digit())
}

fn surface_variants(slot: &str, value: &str) -> Vec<String> {
    let mut out = vec![value.to_string()];
    if slot == "type" {
        out.push(format!("{value}s"));
        if value == "guesthouse" {
            out.push("guest house".to_string());
            out.push("guest houses".to_string());
        }
    }
    out
}

fn looks_like_ref(token: &str) -> bool {
    token.len() == 8
        && token.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit())
        && token.bytes().any(|b| b.is_ascii_digit())
        && token.bytes().any(|b| b.is_ascii_lowercase())
}

/// Replaces known surface values in `utterance` with placeholders.
///
/// Candidates come from belief values first, then record attributes in the
/// given order; the first source claiming a surface decides its slot. Matching
/// is longest-first at word boundaries, left to right, without overlaps.
/// Bare counts of up to three digits stay literal, and leftover eight-character
/// alphanumeric tokens mixing letters and digits are taken as booking refs.
pub fn delexicalize(
    utterance: &str,
    belief: &BeliefState,
    records: &[&EntityRecord],
) -> (Template, ValueMap) {
    let mut candidates: Vec<(String, &'static str)> = Vec::new();
    let mut seen = BTreeSet::new();
    let mut add = |slot: &'static str, value: &str, out: &mut Vec<(String, &'static str)>| {
        if is_bare_count(value) {
            return;
        }
        for surface in surface_variants(slot, value) {
            if seen.insert(surface.clone()) {
                out.push((surface, slot));
            }
        }
    };
    for (_, constraints) in belief.iter() {
        for (slot, value) in constraints {
            if let Some(s) = DELEX_SLOTS.iter().find(|s| **s == slot) {
                add(s, value, &mut candidates);
            }
        }
    }
    for record in records {
        for slot in DELEX_SLOTS {
            if let Some(value) = record.get(slot) {
                add(slot, value, &mut candidates);
            }
        }
    }
    // stable sort keeps source priority among equal lengths
    candidates.sort_by_key(|(surface, _)| std::cmp::Reverse(surface.len()));

    let bytes = utterance.as_bytes();
    let mut out = String::with_capacity(utterance.len());
    let mut values = ValueMap::new();
    let mut pos = 0;
    let mut copied = 0;
    while pos < utterance.len() {
        let word_start = utterance.is_char_boundary(pos)
            && utterance[pos..].chars().next().is_some_and(char::is_alphanumeric)
            && !utterance[..pos].chars().next_back().is_some_and(char::is_alphanumeric);
        if word_start {
            let hit = candidates.iter().find(|(surface, _)| {
                utterance[pos..].starts_with(surface.as_str())
                    && !utterance[pos + surface.len()..]
                        .chars()
                        .next()
                        .is_some_and(char::is_alphanumeric)
            });
            let hit = hit.map(|(s, slot)| (s.len(), *slot)).or_else(|| {
                let len = utterance[pos..]
                    .find(|c: char| !c.is_alphanumeric())
                    .unwrap_or(utterance.len() - pos);
                looks_like_ref(&utterance[pos..pos + len]).then_some((len, "ref"))
            });
            if let Some((len, slot)) = hit {
                out.push_str(&utterance[copied..pos]);
                out.push_str(&placeholder(slot));
                values.push((slot.to_string(), utterance[pos..pos + len].to_string()));
                pos += len;
                copied = pos;
                continue;
            }
        }
        pos += 1;
        while pos < bytes.len() && !utterance.is_char_boundary(pos) {
            pos += 1;
        }
    }
    out.push_str(&utterance[copied..]);
    (Template(out), values)
}

/// Placeholder slots not covered by `available`, deduplicated, in order of
/// first appearance.
pub fn validate_template<'a>(
    template: &Template,
    available: impl IntoIterator<Item = &'a str>,
) -> Vec<String> {
    let available: BTreeSet<&str> = available.into_iter().collect();
    let mut missing: Vec<String> = Vec::new();
    for slot in template.placeholders() {
        if !available.contains(slot.as_str()) && !missing.contains(&slot) {
            missing.push(slot);
        }
    }
    missing
}

/// Fills placeholders from grounding sources.
///
/// Candidates per slot, in precedence order: the booking result, distinct
/// values across `records`, then `belief[domain]`. The k-th occurrence of a
/// slot takes the k-th distinct candidate and repeats the last one when the
/// sources run out.
pub fn relexicalize(
    template: &Template,
    belief: &BeliefState,
    domain: DomainName,
    records: &[&EntityRecord],
    booking: Option<&BookingResult>,
) -> Result<String, LexError> {
    relexicalize_with_values(template, belief, domain, records, booking).map(|(text, _)| text)
}

/// [`relexicalize`], also reporting which value filled each placeholder.
pub fn relexicalize_with_values(
    template: &Template,
    belief: &BeliefState,
    domain: DomainName,
    records: &[&EntityRecord],
    booking: Option<&BookingResult>,
) -> Result<(String, ValueMap), LexError> {
    let mut values = ValueMap::new();
    let mut used: Vec<(String, usize)> = Vec::new();
    let mut out = String::new();
    for seg in template.segments() {
        match seg {
            Segment::Text(t) => out.push_str(t),
            Segment::Slot(slot) => {
                let mut cands: Vec<&str> = Vec::new();
                let booked = booking
                    .filter(|b| b.success)
                    .and_then(|b| b.get(slot));
                let from_records = records.iter().filter_map(|r| r.get(slot));
                let from_belief = belief.get(domain, slot);
                for v in booked.into_iter().chain(from_records).chain(from_belief) {
                    if !cands.contains(&v) {
                        cands.push(v);
                    }
                }
                if cands.is_empty() {
                    return Err(LexError::UnfilledPlaceholder(slot.to_string()));
                }
                let k = match used.iter_mut().find(|(s, _)| s == slot) {
                    Some((_, n)) => {
                        *n += 1;
                        *n
                    }
                    None => {
                        used.push((slot.to_string(), 0));
                        0
                    }
                };
                let value = cands[k.min(cands.len() - 1)];
                out.push_str(value);
                values.push((slot.to_string(), value.to_string()));
            }
        }
    }
    Ok((out, values))
}

/// Exact inverse of [`delexicalize`]: fills placeholders from the value map
/// it produced.
pub fn fill_values(template: &Template, values: &ValueMap) -> Result<String, LexError> {
    let mut out = String::new();
    let mut next = values.iter();
    let mut index = 0;
    for seg in template.segments() {
        match seg {
            Segment::Text(t) => out.push_str(t),
            Segment::Slot(slot) => {
                match next.next() {
                    Some((s, v)) if s == slot => out.push_str(v),
                    _ => return Err(LexError::ValueMapMismatch { index }),
                }
                index += 1;
            }
        }
    }
    if next.next().is_some() {
        return Err(LexError::ValueMapMismatch { index });
    }
    Ok(out)
}
