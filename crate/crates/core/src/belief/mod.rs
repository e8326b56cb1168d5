//! Belief states, the closed domain set, and the canonical belief grammar.
//!
//! The textual form `domain { slot = value , slot = value }` is a wire
//! format: it is embedded in flattened training sequences and returned by
//! the HTTP debug payload, so [`serialize_belief`] must stay bit-stable.

mod grammar;
mod turn_domain;

pub use grammar::{parse_belief, repair_belief, serialize_belief};
pub use turn_domain::compute_turn_domain;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::text::normalize_spacing;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BeliefError {
    #[error("malformed belief state at byte {at}: {reason}")]
    Malformed { at: usize, reason: String },
    #[error("unknown domain `{0}`")]
    UnknownDomain(String),
    #[error("invalid slot name `{0}`")]
    InvalidSlot(String),
    #[error("invalid slot value `{0}`")]
    InvalidValue(String),
}

/// The closed set of dialog domains. Declaration order is the canonical
/// enumeration order used for serialization and tie-breaking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DomainName {
    Restaurant,
    Hotel,
    Attraction,
    Train,
    Taxi,
    Police,
    Hospital,
    General,
}

impl DomainName {
    pub const ALL: [DomainName; 8] = [
        DomainName::Restaurant,
        DomainName::Hotel,
        DomainName::Attraction,
        DomainName::Train,
        DomainName::Taxi,
        DomainName::Police,
        DomainName::Hospital,
        DomainName::General,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DomainName::Restaurant => "restaurant",
            DomainName::Hotel => "hotel",
            DomainName::Attraction => "attraction",
            DomainName::Train => "train",
            DomainName::Taxi => "taxi",
            DomainName::Police => "police",
            DomainName::Hospital => "hospital",
            DomainName::General => "general",
        }
    }
}

impl fmt::Display for DomainName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DomainName {
    type Err = BeliefError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DomainName::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| BeliefError::UnknownDomain(s.to_string()))
    }
}

impl Serialize for DomainName {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for DomainName {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Slot constraints for one domain.
pub type Constraints = BTreeMap<String, String>;

/// Per-domain slot→value constraints accumulated over a dialog.
///
/// Invariants: no empty domain blocks, slot names are single
/// `[a-z0-9_]` words, values are non-empty and tokenizer-stable with no
/// grammar punctuation. [`BeliefState::set`] enforces all of them.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BeliefState {
    domains: BTreeMap<DomainName, Constraints>,
}

impl BeliefState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.domains.is_empty()
    }

    pub fn domain(&self, domain: DomainName) -> Option<&Constraints> {
        self.domains.get(&domain)
    }

    /// Constraints of `domain`, empty when the domain is absent.
    pub fn constraints(&self, domain: DomainName) -> Constraints {
        self.domains.get(&domain).cloned().unwrap_or_default()
    }

    pub fn get(&self, domain: DomainName, slot: &str) -> Option<&str> {
        self.domains.get(&domain)?.get(slot).map(String::as_str)
    }

    /// Iterates domains in enumeration order.
    pub fn iter(&self) -> impl Iterator<Item = (DomainName, &Constraints)> {
        self.domains.iter().map(|(d, c)| (*d, c))
    }

    pub fn domain_names(&self) -> impl Iterator<Item = DomainName> + '_ {
        self.domains.keys().copied()
    }

    /// Sets `slot = value` in `domain`, normalizing the value's spacing.
    pub fn set(&mut self, domain: DomainName, slot: &str, value: &str) -> Result<(), BeliefError> {
        validate_slot(slot)?;
        let value = normalize_value(value)?;
        self.domains
            .entry(domain)
            .or_default()
            .insert(slot.to_string(), value);
        Ok(())
    }

    pub fn remove(&mut self, domain: DomainName, slot: &str) -> Option<String> {
        let constraints = self.domains.get_mut(&domain)?;
        let removed = constraints.remove(slot);
        if constraints.is_empty() {
            self.domains.remove(&domain);
        }
        removed
    }

    /// Renames every slot through `rename`, keeping the last value on collision.
    pub fn map_slots(&self, rename: impl Fn(&str) -> String) -> Result<BeliefState, BeliefError> {
        let mut out = BeliefState::new();
        for (domain, constraints) in self.iter() {
            for (slot, value) in constraints {
                out.set(domain, &rename(slot), value)?;
            }
        }
        Ok(out)
    }
}

impl fmt::Display for BeliefState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize_belief(self))
    }
}

impl Serialize for BeliefState {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&serialize_belief(self))
    }
}

impl<'de> Deserialize<'de> for BeliefState {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        parse_belief(&s).map_err(serde::de::Error::custom)
    }
}

fn validate_slot(slot: &str) -> Result<(), BeliefError> {
    let ok = !slot.is_empty()
        && slot
            .chars()
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_');
    if ok {
        Ok(())
    } else {
        Err(BeliefError::InvalidSlot(slot.to_string()))
    }
}

fn normalize_value(value: &str) -> Result<String, BeliefError> {
    let normalized = normalize_spacing(value);
    let has_grammar_char = normalized.contains(['{', '}', ',', '='])
        || normalized.split(' ').any(|tok| tok == ":");
    if normalized.is_empty() || has_grammar_char {
        return Err(BeliefError::InvalidValue(value.to_string()));
    }
    Ok(normalized)
}
