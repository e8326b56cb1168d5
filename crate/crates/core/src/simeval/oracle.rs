//! Scripted system backends that understand the simulator's phrasing.

use std::sync::Arc;

use super::{
    entity_slot, intro, phrase_pattern, request_name, DONT_CARE_REPLY, GOODBYE, PHRASE_SLOTS,
    RECOMMEND, REQUEST_SLOTS,
};
use crate::belief::{serialize_belief, BeliefState, DomainName};
use crate::kb::{Database, DONTCARE};
use crate::lexicon::placeholder;
use crate::seqmodel::scripted::{Prompt, ScriptedBackend, Stage};
use crate::seqmodel::Vocab;
use crate::text::{find_phrase, tokenize};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleKind {
    /// Answers every request and books when asked.
    Perfect,
    /// Like `Perfect` but never answers requests.
    Lossy,
}

impl OracleKind {
    fn name(self) -> &'static str {
        match self {
            OracleKind::Perfect => "perfect",
            OracleKind::Lossy => "lossy",
        }
    }
}

const INTRO_KEYS: [(&str, DomainName); 5] = [
    ("place to stay", DomainName::Hotel),
    ("restaurant", DomainName::Restaurant),
    ("someplace to visit", DomainName::Attraction),
    ("a train", DomainName::Train),
    ("a taxi", DomainName::Taxi),
];
const DAYS: [&str; 7] = ["monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"];

fn is_time(t: &str) -> bool {
    let b = t.as_bytes();
    b.len() == 5 && b[2] == b':' && [0, 1, 3, 4].iter().all(|&i| b[i].is_ascii_digit())
}

fn is_count(t: &str) -> bool {
    t.parse::<u32>().is_ok_and(|n| (1..=20).contains(&n))
}

/// Value spotted for `slot` in `utterance` via its inform phrase.
fn spot(db: &Database, domain: DomainName, slot: &str, utterance: &str) -> Option<String> {
    let (pre, post) = phrase_pattern(slot)?.split_once("{}")?;
    let shape: Option<fn(&str) -> bool> = match slot {
        "time" | "leave" | "arrive" => Some(is_time),
        "people" | "stay" => Some(is_count),
        "day" => Some(|t| DAYS.contains(&t)),
        _ => None,
    };
    if let Some(shape) = shape {
        let words = tokenize(utterance);
        let (pre, post) = (tokenize(pre), tokenize(post));
        return (0..words.len()).find_map(|i| {
            let at = i + pre.len();
            let value = words.get(at)?;
            let fits = words[i..].starts_with(&pre)
                && shape(value)
                && words[at + 1..].starts_with(&post);
            fits.then(|| value.clone())
        });
    }
    let values = db.distinct_values(domain, slot).ok()?;
    values
        .into_iter()
        .filter(|v| find_phrase(utterance, &format!("{pre}{v}{post}")).is_some())
        .max_by_key(String::len)
}

/// Keyword NLU over the user side of a dialog: the active domain and the
/// accumulated belief state.
pub fn understand<'a>(
    db: &Database,
    history: impl IntoIterator<Item = (bool, &'a str)>,
) -> (DomainName, BeliefState) {
    let mut domain = DomainName::General;
    let mut belief = BeliefState::new();
    let mut last_question: Option<&str> = None;
    for (is_user, utterance) in history {
        if !is_user {
            last_question = Some(utterance);
            continue;
        }
        if let Some((_, d)) = INTRO_KEYS.iter().find(|(k, _)| find_phrase(utterance, k).is_some()) {
            domain = *d;
        }
        if domain == DomainName::General {
            continue;
        }
        for slot in PHRASE_SLOTS {
            if let Some(v) = spot(db, domain, slot, utterance) {
                let _ = belief.set(domain, slot, &v);
            }
        }
        if utterance == DONT_CARE_REPLY {
            let asked = last_question.and_then(|q| {
                PHRASE_SLOTS.iter().find(|s| {
                    let key = if **s == "pricerange" { "price range" } else { **s };
                    find_phrase(q, key).is_some()
                })
            });
            if let Some(slot) = asked {
                let _ = belief.set(domain, slot, DONTCARE);
            }
        }
    }
    (domain, belief)
}

fn requested_slots(utterance: &str) -> Vec<&'static str> {
    let mut found: Vec<(usize, &str)> = REQUEST_SLOTS
        .iter()
        .filter_map(|s| find_phrase(utterance, request_name(s)).map(|p| (p, *s)))
        .collect();
    found.sort();
    found.into_iter().map(|(_, s)| s).collect()
}

const NO_MATCH: &str = "i am sorry , there is no match for that .";
const BOOKED: &str = "i have booked it for you . your reference number is [value_ref] .";
const BYE: &str = "you are welcome . goodbye .";
const HELLO: &str = "how can i help you ?";
const ANYTHING_ELSE: &str = "is there anything else i can help with ?";
const OFFER: &str = "{} is a good choice .";
const OFFER_ALT: &str = "i would recommend {} .";

fn response(kind: OracleKind, prompt: &Prompt) -> String {
    let user = prompt.last_user().unwrap_or("");
    let domain: DomainName = prompt
        .domain
        .as_deref()
        .and_then(|d| d.parse().ok())
        .unwrap_or(DomainName::General);
    let no_match = prompt.bucket.as_deref() == Some("0");
    if find_phrase(user, "goodbye").is_some() {
        return BYE.to_string();
    }
    if domain == DomainName::General || matches!(domain, DomainName::Taxi | DomainName::Police | DomainName::Hospital) {
        return HELLO.to_string();
    }
    if no_match {
        return NO_MATCH.to_string();
    }
    if user.starts_with("what is the") {
        let slots = requested_slots(user);
        if kind == OracleKind::Lossy || slots.is_empty() {
            return ANYTHING_ELSE.to_string();
        }
        let parts: Vec<String> = slots
            .iter()
            .map(|s| format!("the {} is {}", request_name(s), placeholder(s)))
            .collect();
        return format!("{} .", parts.join(" and "));
    }
    if user.starts_with("can you book it") {
        return BOOKED.to_string();
    }
    let key = placeholder(entity_slot(domain));
    let repeat = prompt.last_system().is_some_and(|s| s.ends_with("is a good choice ."));
    if repeat { OFFER_ALT } else { OFFER }.replace("{}", &key)
}

fn vocabulary(db: &Database) -> Vocab {
    let mut tokens: Vec<String> = Vec::new();
    let mut add = |s: &str| tokens.extend(tokenize(s));
    for d in DomainName::ALL {
        add(d.as_str());
        add(intro(d));
        if let Ok(records) = db.records(d) {
            for r in records {
                for (k, v) in &r.attributes {
                    add(k);
                    add(v);
                }
            }
        }
    }
    for slot in PHRASE_SLOTS {
        add(slot);
        add(&phrase_pattern(slot).unwrap().replace("{}", ""));
    }
    for slot in REQUEST_SLOTS {
        add(slot);
        add(request_name(slot));
        add(&placeholder(slot));
    }
    for s in [
        NO_MATCH, BOOKED, BYE, HELLO, ANYTHING_ELSE, OFFER, OFFER_ALT, GOODBYE, DONT_CARE_REPLY,
        RECOMMEND, "what is the and the ?", "can you book it ?", "i would also like it .",
        "[value_name] [value_id] { } , = : match user system 0 1 2 3 >3 dontcare",
    ] {
        add(s);
    }
    for d in DAYS {
        add(d);
    }
    for n in 0..=20 {
        add(&n.to_string());
    }
    for h in 0..24 {
        for m in 0..60 {
            add(&format!("{h:02}:{m:02}"));
        }
    }
    Vocab::with_specials(tokens)
}

/// A scripted backend that parses simulator utterances with [`understand`]
/// and answers with fixed templates.
pub fn simulator_backend(db: Arc<Database>, kind: OracleKind) -> ScriptedBackend {
    let vocab = vocabulary(&db);
    ScriptedBackend::new(kind.name(), vocab, move |stage, prompt| match stage {
        Stage::Belief => {
            let history = prompt
                .history
                .iter()
                .map(|(r, t)| (*r == crate::seqmodel::Role::User, t.as_str()));
            let (domain, belief) = understand(&db, history);
            let text = if belief.is_empty() {
                domain.to_string()
            } else {
                format!("{domain} {}", serialize_belief(&belief))
            };
            vec![(text, 1.0)]
        }
        Stage::Response => vec![(response(kind, prompt), 1.0)],
    })
}
