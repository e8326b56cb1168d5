//! User-facing rewrites of system responses. The rewritten text is only
//! shown to the user; dialog history keeps the raw response.

use crate::engine::SystemTurn;
use crate::kb::Database;
use crate::text::find_phrase;

pub trait PolishRule: Send + Sync {
    fn name(&self) -> &'static str;
    /// Rewrites `text`, or returns `None` when the rule does not fire.
    fn apply(&self, turn: &SystemTurn, db: &Database, text: &str) -> Option<String>;
}

fn display_name(slot: &str) -> &str {
    match slot {
        "leave" => "leave time",
        "arrive" => "arrival time",
        "pricerange" => "price range",
        "ref" => "reference number",
        other => other,
    }
}

/// Spells out every booked field after a successful booking.
pub struct BookingExpansion;

impl PolishRule for BookingExpansion {
    fn name(&self) -> &'static str {
        "booking_expansion"
    }

    fn apply(&self, turn: &SystemTurn, _db: &Database, _text: &str) -> Option<String> {
        let booking = turn.booking.as_ref().filter(|b| b.success)?;
        let reference = booking.reference.as_deref()?;
        let mut parts: Vec<String> = booking
            .fields
            .iter()
            .map(|(s, v)| format!("{}: {v}", display_name(s)))
            .collect();
        parts.push(format!("{}: {reference}", display_name("ref")));
        Some(format!(
            "booking was successful . {} . is there anything else i can help with ?",
            parts.join(", ")
        ))
    }
}

/// Appends example values to open questions about a categorical slot.
pub struct OptionSuggestion {
    /// Trigger phrase and slot, checked in order.
    pub keywords: Vec<(String, String)>,
    pub max_values: usize,
}

impl Default for OptionSuggestion {
    fn default() -> Self {
        let keywords = [
            ("price range", "pricerange"),
            ("area", "area"),
            ("food", "food"),
            ("type", "type"),
        ];
        OptionSuggestion {
            keywords: keywords
                .iter()
                .map(|(k, s)| (k.to_string(), s.to_string()))
                .collect(),
            max_values: 3,
        }
    }
}

fn or_list(values: &[String]) -> String {
    match values {
        [] => String::new(),
        [a] => a.clone(),
        [a, b] => format!("{a} or {b}"),
        [init @ .., last] => format!("{}, or {last}", init.join(", ")),
    }
}

impl PolishRule for OptionSuggestion {
    fn name(&self) -> &'static str {
        "option_suggestion"
    }

    fn apply(&self, turn: &SystemTurn, db: &Database, text: &str) -> Option<String> {
        let first = text.split_whitespace().next()?;
        if !matches!(first, "which" | "what" | "where") || !text.trim_end().ends_with('?') {
            return None;
        }
        let slot = self
            .keywords
            .iter()
            .find(|(k, _)| find_phrase(text, k).is_some())
            .map(|(_, s)| s)?;
        let mut values = db.distinct_values(turn.domain, slot).ok()?;
        values.truncate(self.max_values);
        if values.is_empty() {
            return None;
        }
        Some(format!("{} for example {} ?", text.trim_end(), or_list(&values)))
    }
}

pub struct Polisher {
    rules: Vec<Box<dyn PolishRule>>,
}

impl Default for Polisher {
    fn default() -> Self {
        Polisher {
            rules: vec![Box::new(BookingExpansion), Box::new(OptionSuggestion::default())],
        }
    }
}

impl Polisher {
    pub fn new(rules: Vec<Box<dyn PolishRule>>) -> Self {
        Polisher { rules }
    }

    /// Applies each rule in order to the output of the previous one.
    pub fn polish(&self, turn: &SystemTurn, db: &Database) -> String {
        let mut text = turn.raw_response.clone();
        for rule in &self.rules {
            if let Some(rewritten) = rule.apply(turn, db, &text) {
                text = rewritten;
            }
        }
        text
    }
}

/// Polishes with the default rules: booking expansion, then option suggestion.
pub fn polish(turn: &SystemTurn, db: &Database) -> String {
    Polisher::default().polish(turn, db)
}
