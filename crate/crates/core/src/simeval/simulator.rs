use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{
    entity_slot, intro, phrase, request_name, Goal, DONT_CARE_REPLY, GOODBYE, RECOMMEND,
    REQUEST_SLOTS,
};
use crate::belief::DomainName;
use crate::engine::SystemTurn;
use crate::kb::{BookingResult, Database};
use crate::seqmodel::Role;
use crate::text::{find_phrase, tokenize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SimAction {
    Say(String),
    /// The user ends the dialog with this closing utterance.
    Terminate(String),
}

impl SimAction {
    pub fn text(&self) -> &str {
        match self {
            SimAction::Say(t) | SimAction::Terminate(t) => t,
        }
    }
}

/// How the simulator reads system turns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NluMode {
    /// Use the values the engine substituted.
    #[default]
    Structured,
    /// Spot DB values in the polished text.
    Keyword,
}

/// What the simulator understood from one system turn.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SystemObservation {
    pub domain: Option<DomainName>,
    pub values: Vec<(String, String)>,
    pub booking: Option<BookingResult>,
    pub text: String,
}

fn display_slot(name: &str) -> &str {
    match name {
        "leave time" => "leave",
        "arrival time" => "arrive",
        "price range" => "pricerange",
        "reference number" => "ref",
        other => other,
    }
}

/// The eight-character token following "reference number" (and `:` or `is`).
fn find_reference(text: &str) -> Option<String> {
    let tokens = tokenize(text);
    let at = tokens.windows(2).position(|w| w == ["reference", "number"])? + 2;
    tokens[at..]
        .iter()
        .find(|t| !matches!(t.as_str(), ":" | "is"))
        .filter(|t| t.len() == 8 && t.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit()))
        .cloned()
}

impl SystemObservation {
    pub fn from_turn(turn: &SystemTurn, polished: &str) -> Self {
        SystemObservation {
            domain: Some(turn.domain),
            values: turn.values.clone(),
            booking: turn.booking.clone(),
            text: polished.to_string(),
        }
    }

    /// Keyword NLU over `text`, assuming the user's current `domain`.
    /// Attribute values are looked up on the entity named in `text`, else on
    /// the previously `offered` one.
    pub fn from_text(db: &Database, domain: DomainName, text: &str, offered: Option<&str>) -> Self {
        let mut obs = SystemObservation {
            domain: Some(domain),
            text: text.to_string(),
            ..Default::default()
        };
        let Ok(records) = db.records(domain) else {
            return obs;
        };
        let key_slot = entity_slot(domain);
        let entity = records
            .iter()
            .filter_map(|r| r.get(key_slot).map(|k| (r, k)))
            .filter(|(_, k)| find_phrase(text, k).is_some())
            .max_by_key(|(_, k)| k.len());
        if let Some((_, key)) = entity {
            obs.values.push((key_slot.to_string(), key.to_string()));
        }
        let known = entity
            .map(|(r, _)| r)
            .or_else(|| offered.and_then(|k| db.find_by_key(domain, k)));
        if let Some(record) = known {
            for slot in REQUEST_SLOTS {
                if let Some(v) = record.get(slot) {
                    if find_phrase(text, v).is_some() {
                        obs.values.push((slot.to_string(), v.to_string()));
                    }
                }
            }
        }
        obs.booking = parse_booking(domain, text);
        obs
    }
}

fn parse_booking(domain: DomainName, text: &str) -> Option<BookingResult> {
    let reference = find_reference(text)?;
    let mut fields = Vec::new();
    if let Some(start) = text.find("booking was successful .") {
        let body = &text[start + "booking was successful .".len()..];
        let body = body.split(" . ").next().unwrap_or(body);
        for part in body.split(", ") {
            if let Some((k, v)) = part.split_once(": ") {
                let slot = display_slot(k.trim());
                if slot != "ref" {
                    fields.push((slot.to_string(), v.trim().trim_end_matches(" .").to_string()));
                }
            }
        }
    }
    let entity = fields
        .iter()
        .find(|(s, _)| s == entity_slot(domain))
        .map(|(_, v)| v.clone());
    Some(BookingResult {
        domain,
        success: true,
        reference: Some(reference),
        fields,
        entity,
    })
}

/// Progress through a goal.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgendaState {
    /// Index of the domain goal being pursued.
    pub current: usize,
    pub introduced: bool,
    pub delivered: BTreeSet<String>,
    /// An entity was offered after the last inform.
    pub offer_fresh: bool,
    pub recommend_asks: usize,
    pub requested: bool,
    pub booking_requested: bool,
    pub pending_question: Option<String>,
    pub finished: bool,
    pub offered: BTreeMap<DomainName, String>,
    pub provided: BTreeMap<DomainName, BTreeMap<String, String>>,
    pub booked: BTreeMap<DomainName, BookingResult>,
}

impl AgendaState {
    pub fn current_domain(&self, goal: &Goal) -> Option<DomainName> {
        goal.domains.get(self.current).map(|g| g.domain)
    }

    /// Folds a system turn into the state.
    pub fn observe(&mut self, goal: &Goal, obs: &SystemObservation) {
        let current = self.current_domain(goal);
        let domain = obs.domain.or(current);
        if let Some(d) = domain {
            for (slot, value) in &obs.values {
                if slot == entity_slot(d) {
                    self.offered.insert(d, value.clone());
                    if Some(d) == current {
                        self.offer_fresh = true;
                    }
                } else {
                    self.provided
                        .entry(d)
                        .or_default()
                        .insert(slot.clone(), value.clone());
                }
            }
        }
        if let Some(b) = obs.booking.as_ref().filter(|b| b.success) {
            let mut b = b.clone();
            if b.entity.is_none() {
                b.entity = self.offered.get(&b.domain).cloned();
            }
            self.booked.insert(b.domain, b);
        }
        self.pending_question = detect_question(&obs.text);
    }
}

/// Slot asked about by a system question, if any.
fn detect_question(text: &str) -> Option<String> {
    let text = text.trim_end();
    if !text.ends_with('?') {
        return None;
    }
    const KEYS: [(&str, &str); 11] = [
        ("price range", "pricerange"),
        ("area", "area"),
        ("food", "food"),
        ("type of place", "type"),
        ("stars", "stars"),
        ("where are you going", "destination"),
        ("where are you leaving from", "departure"),
        ("what day", "day"),
        ("how many people", "people"),
        ("how many nights", "stay"),
        ("what time", "time"),
    ];
    KEYS.iter()
        .find(|(k, _)| find_phrase(text, k).is_some())
        .map(|(_, s)| s.to_string())
}

fn phrases<'a>(items: impl IntoIterator<Item = (&'a String, &'a String)>) -> String {
    items
        .into_iter()
        .map(|(s, v)| phrase(s, v))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Advances the agenda after `last` and picks the next user act.
pub fn simulate_turn(
    goal: &Goal,
    state: &mut AgendaState,
    last: Option<&SystemObservation>,
) -> SimAction {
    if let Some(obs) = last {
        state.observe(goal, obs);
    }
    next_action(goal, state)
}

fn next_action(goal: &Goal, state: &mut AgendaState) -> SimAction {
    loop {
        if state.finished {
            return SimAction::Terminate(GOODBYE.to_string());
        }
        let Some(g) = goal.domains.get(state.current) else {
            state.finished = true;
            continue;
        };
        if let Some(slot) = state.pending_question.take().filter(|_| state.introduced) {
            let informable = g.informables.get(&slot);
            let value = informable.or_else(|| g.booking.as_ref().and_then(|b| b.get(&slot)));
            if informable.is_some() && state.delivered.insert(slot.clone()) {
                state.offer_fresh = false;
            }
            return SimAction::Say(match value {
                Some(v) => format!("{} .", phrase(&slot, v)),
                None => DONT_CARE_REPLY.to_string(),
            });
        }
        let pending: Vec<(&String, &String)> = g
            .informables
            .iter()
            .filter(|(s, _)| !state.delivered.contains(*s))
            .take(2)
            .collect();
        if !state.introduced || !pending.is_empty() {
            let text = if state.introduced {
                format!("i would also like it {} .", phrases(pending.iter().copied()))
            } else if pending.is_empty() {
                format!("{} .", intro(g.domain))
            } else {
                format!("{} {} .", intro(g.domain), phrases(pending.iter().copied()))
            };
            state.introduced = true;
            state.offer_fresh = false;
            for (s, _) in pending {
                state.delivered.insert(s.clone());
            }
            return SimAction::Say(text);
        }
        if !state.offer_fresh && state.recommend_asks < 2 {
            state.recommend_asks += 1;
            return SimAction::Say(RECOMMEND.to_string());
        }
        let provided = state.provided.get(&g.domain);
        let missing: Vec<&String> = g
            .requestables
            .iter()
            .filter(|r| !provided.is_some_and(|p| p.contains_key(*r)))
            .collect();
        if !missing.is_empty() && !state.requested {
            state.requested = true;
            let names: Vec<&str> = missing.iter().map(|r| request_name(r)).collect();
            return SimAction::Say(format!("what is the {} ?", names.join(" and the ")));
        }
        if let Some(booking) = &g.booking {
            if !state.booked.contains_key(&g.domain) && !state.booking_requested {
                state.booking_requested = true;
                return SimAction::Say(format!("can you book it {} ?", phrases(booking)));
            }
        }
        *state = AgendaState {
            current: state.current + 1,
            offered: std::mem::take(&mut state.offered),
            provided: std::mem::take(&mut state.provided),
            booked: std::mem::take(&mut state.booked),
            ..Default::default()
        };
    }
}

/// Stateful wrapper around [`simulate_turn`].
#[derive(Debug, Clone)]
pub struct UserSimulator {
    pub goal: Goal,
    pub state: AgendaState,
    pub mode: NluMode,
}

impl UserSimulator {
    pub fn new(goal: Goal, mode: NluMode) -> Self {
        UserSimulator {
            goal,
            state: AgendaState::default(),
            mode,
        }
    }

    pub fn current_domain(&self) -> Option<DomainName> {
        self.state.current_domain(&self.goal)
    }

    pub fn observe_turn(&mut self, db: &Database, turn: &SystemTurn, polished: &str) {
        let obs = match self.mode {
            NluMode::Structured => SystemObservation::from_turn(turn, polished),
            NluMode::Keyword => {
                let domain = self.current_domain().unwrap_or(turn.domain);
                let offered = self.state.offered.get(&domain).map(String::as_str);
                SystemObservation::from_text(db, domain, polished, offered)
            }
        };
        self.state.observe(&self.goal, &obs);
    }

    pub fn next_action(&mut self) -> SimAction {
        next_action(&self.goal, &mut self.state)
    }
}

/// A finished simulated dialog with everything the scorer needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogRecord {
    pub goal: Goal,
    pub transcript: Vec<(Role, String)>,
    /// Entity key offered per domain.
    pub offered: BTreeMap<DomainName, String>,
    pub provided: BTreeMap<DomainName, BTreeMap<String, String>>,
    pub booked: BTreeMap<DomainName, BookingResult>,
    /// Completed user/system exchanges.
    pub turns: usize,
    /// The user closed the dialog before the turn limit.
    pub completed: bool,
    pub tolerance_events: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl DialogRecord {
    pub fn new(goal: Goal) -> Self {
        DialogRecord {
            goal,
            transcript: Vec::new(),
            offered: BTreeMap::new(),
            provided: BTreeMap::new(),
            booked: BTreeMap::new(),
            turns: 0,
            completed: false,
            tolerance_events: 0,
            error: None,
        }
    }
}
