//! Goal-driven user simulation and automatic evaluation.
//!
//! An agenda-based simulator talks to an [`Engine`](crate::engine::Engine)
//! through template NLG, and finished dialogs are scored against the goal
//! they were generated from: inform precision/recall over requestable slots,
//! booking rate, and task success grounded in the database.

mod campaign;
mod evaluate;
mod goal;
mod oracle;
mod simulator;

pub use campaign::{run_campaign, CampaignConfig};
pub use evaluate::{evaluate, score_dialog, DialogScore, EvalReport};
pub use goal::{generate_goals, load_goals, DomainGoal, Goal};
pub use oracle::{simulator_backend, understand, OracleKind};
pub use simulator::{
    simulate_turn, AgendaState, DialogRecord, NluMode, SimAction, SystemObservation, UserSimulator,
};

use thiserror::Error;

use crate::belief::DomainName;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no dialogs to evaluate")]
    EmptyInput,
    #[error("invalid goal file: {0}")]
    BadGoals(String),
}

/// Slots a user may constrain when searching.
pub fn informable_slots(domain: DomainName) -> &'static [&'static str] {
    match domain {
        DomainName::Restaurant => &["food", "area", "pricerange"],
        DomainName::Hotel => &["area", "pricerange", "type", "stars"],
        DomainName::Attraction => &["area", "type"],
        DomainName::Train => &["departure", "destination", "day"],
        _ => &[],
    }
}

/// Entity attributes a user may ask for.
pub fn requestable_slots(domain: DomainName) -> &'static [&'static str] {
    match domain {
        DomainName::Restaurant | DomainName::Hotel => &["phone", "address", "postcode"],
        DomainName::Attraction => &["phone", "address", "postcode", "price"],
        DomainName::Train => &["price", "arrive", "leave"],
        _ => &[],
    }
}

/// Slot holding the offered entity's identifier.
pub fn entity_slot(domain: DomainName) -> &'static str {
    if domain == DomainName::Train {
        "id"
    } else {
        "name"
    }
}

pub(crate) fn intro(domain: DomainName) -> &'static str {
    match domain {
        DomainName::Hotel => "i want a place to stay",
        DomainName::Restaurant => "i am looking for a restaurant",
        DomainName::Attraction => "i would like to find someplace to visit",
        DomainName::Train => "i need a train",
        DomainName::Taxi => "i need a taxi",
        DomainName::Police => "i need the police",
        DomainName::Hospital => "i need a hospital",
        DomainName::General => "i need some help",
    }
}

/// User-side phrase for informing `slot`, with `{}` standing for the value.
pub(crate) fn phrase_pattern(slot: &str) -> Option<&'static str> {
    Some(match slot {
        "area" => "in the {}",
        "pricerange" => "with a {} price range",
        "food" => "serving {} food",
        "type" => "that is a {}",
        "stars" => "with {} stars",
        "name" => "called {}",
        "departure" => "leaving from {}",
        "destination" => "going to {}",
        "day" => "on {}",
        "leave" => "leaving after {}",
        "arrive" => "arriving by {}",
        "people" => "for {} people",
        "time" => "at {}",
        "stay" => "for {} nights",
        _ => return None,
    })
}

pub(crate) const PHRASE_SLOTS: [&str; 14] = [
    "area", "pricerange", "food", "type", "stars", "name", "departure", "destination", "day",
    "leave", "arrive", "people", "time", "stay",
];

pub(crate) fn phrase(slot: &str, value: &str) -> String {
    phrase_pattern(slot).map_or_else(|| format!("{slot} {value}"), |p| p.replace("{}", value))
}

/// How a user refers to a requestable slot.
pub(crate) fn request_name(slot: &str) -> &str {
    match slot {
        "phone" => "phone number",
        "leave" => "departure time",
        "arrive" => "arrival time",
        other => other,
    }
}

pub(crate) const REQUEST_SLOTS: [&str; 6] = ["phone", "address", "postcode", "price", "leave", "arrive"];

pub(crate) const GOODBYE: &str = "thank you , goodbye .";
pub(crate) const DONT_CARE_REPLY: &str = "i do not care .";
pub(crate) const RECOMMEND: &str = "can you recommend one ?";
