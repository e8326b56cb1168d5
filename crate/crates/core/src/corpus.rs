//! Raw dialog loading, cleaning, and construction of training samples and
//! pretraining chunks.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{compute_turn_domain, parse_belief, BeliefError, BeliefState, DomainName};
use crate::kb::{search_constraints, Database, DbMatch, EntityRecord};
use crate::lexicon::{delexicalize, Template};
use crate::seqmodel::{
    belief_block, db_block, fit_history, response_block, Role, TurnSample, MAX_RESPONSE_TOKENS,
    MAX_SEQUENCE_TOKENS,
};
use crate::text::{count_tokens, tokenize, truncate_tail};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("dialog `{0}` has no complete user/system exchange")]
    EmptyDialog(String),
    #[error("dialog `{id}`: bad belief annotation {text:?}: {source}")]
    BadAnnotation {
        id: String,
        text: String,
        #[source]
        source: BeliefError,
    },
    #[error("corpus line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawEvent {
    pub speaker: Role,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub belief: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawDialog {
    pub id: String,
    pub events: Vec<RawEvent>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogTurn {
    pub user: String,
    pub system: String,
    pub belief: BeliefState,
    pub turn_domain: DomainName,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dialog {
    pub id: String,
    pub turns: Vec<DialogTurn>,
}

impl Dialog {
    /// Renders the dialog back as raw events, annotating every system event.
    pub fn to_raw(&self) -> RawDialog {
        let mut events = Vec::new();
        for t in &self.turns {
            events.push(RawEvent {
                speaker: Role::User,
                text: t.user.clone(),
                belief: None,
            });
            events.push(RawEvent {
                speaker: Role::System,
                text: t.system.clone(),
                belief: Some(t.belief.to_string()),
            });
        }
        RawDialog {
            id: self.id.clone(),
            events,
        }
    }
}

/// Maps slot-name aliases onto canonical slot names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotNormalizer {
    pub alias_map: BTreeMap<String, String>,
}

impl Default for SlotNormalizer {
    fn default() -> Self {
        let pairs = [
            ("pickup_location", "departure"),
            ("dropoff_location", "destination"),
            ("leaveat", "leave"),
            ("leave_at", "leave"),
            ("arriveby", "arrive"),
            ("arrive_by", "arrive"),
            ("price_range", "pricerange"),
            ("book_people", "people"),
            ("book_day", "day"),
            ("book_time", "time"),
            ("book_stay", "stay"),
            ("trainid", "id"),
            ("train_id", "id"),
        ];
        SlotNormalizer {
            alias_map: pairs
                .iter()
                .map(|(a, c)| (a.to_string(), c.to_string()))
                .collect(),
        }
    }
}

impl SlotNormalizer {
    pub fn canonical(&self, slot: &str) -> String {
        self.alias_map
            .get(slot)
            .cloned()
            .unwrap_or_else(|| slot.to_string())
    }
}

/// Parses a line-delimited corpus; blank lines are skipped.
pub fn load_corpus(text: &str) -> Result<Vec<RawDialog>, CorpusError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|source| CorpusError::Parse { line: i + 1, source }))
        .collect()
}

fn clean(text: &str) -> String {
    text.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Cleans one raw dialog into strictly alternating user/system turns.
pub fn normalize_dialog(raw: &RawDialog, norm: &SlotNormalizer) -> Result<Dialog, CorpusError> {
    let mut merged: Vec<RawEvent> = Vec::new();
    for ev in &raw.events {
        let text = clean(&ev.text);
        match merged.last_mut() {
            Some(last) if last.speaker == ev.speaker => {
                if !text.is_empty() {
                    if !last.text.is_empty() {
                        last.text.push(' ');
                    }
                    last.text.push_str(&text);
                }
                if ev.belief.is_some() {
                    last.belief = ev.belief.clone();
                }
            }
            None if ev.speaker == Role::System => {}
            _ => merged.push(RawEvent {
                speaker: ev.speaker,
                text,
                belief: ev.belief.clone(),
            }),
        }
    }
    if merged.last().is_some_and(|e| e.speaker == Role::User) {
        merged.pop();
    }
    let mut turns = Vec::new();
    let mut prev = BeliefState::new();
    let mut prev_domain = DomainName::General;
    for pair in merged.chunks(2) {
        let [user, system] = pair else { break };
        let belief = match &system.belief {
            Some(text) => parse_belief(text)
                .and_then(|b| b.map_slots(|s| norm.canonical(s)))
                .map_err(|source| CorpusError::BadAnnotation {
                    id: raw.id.clone(),
                    text: text.clone(),
                    source,
                })?,
            None => prev.clone(),
        };
        let turn_domain = compute_turn_domain(&prev, &belief, prev_domain);
        turns.push(DialogTurn {
            user: user.text.clone(),
            system: system.text.clone(),
            belief: belief.clone(),
            turn_domain,
        });
        prev = belief;
        prev_domain = turn_domain;
    }
    if turns.is_empty() {
        return Err(CorpusError::EmptyDialog(raw.id.clone()));
    }
    Ok(Dialog {
        id: raw.id.clone(),
        turns,
    })
}

/// Matched records of `domain` under the belief, followed by the remaining
/// records of that domain. Domains without a table yield nothing.
pub fn grounding_records<'a>(
    db: &'a Database,
    domain: DomainName,
    belief: &BeliefState,
) -> (DbMatch, Vec<&'a EntityRecord>) {
    let Ok(all) = db.records(domain) else {
        return (DbMatch::new(0), Vec::new());
    };
    let cons = search_constraints(domain, &belief.constraints(domain));
    let (matched, rest): (Vec<&EntityRecord>, Vec<&EntityRecord>) =
        all.iter().partition(|r| r.satisfies(&cons));
    let count = DbMatch::new(matched.len());
    (count, matched.into_iter().chain(rest).collect())
}

/// One sample per turn. Each utterance and template is cut to the response
/// limit from the tail; the history then keeps as many recent turns as fit
/// `max_tokens`, cutting the current user utterance from the head if needed.
pub fn build_training_turns(dialog: &Dialog, db: &Database, max_tokens: usize) -> Vec<TurnSample> {
    let mut history: Vec<(Role, String)> = Vec::new();
    let mut out = Vec::new();
    for turn in &dialog.turns {
        history.push((Role::User, truncate_tail(&turn.user, MAX_RESPONSE_TOKENS)));
        let (db_match, records) = grounding_records(db, turn.turn_domain, &turn.belief);
        let (template, _) = delexicalize(&turn.system, &turn.belief, &records);
        let fixed = belief_block(turn.turn_domain, &turn.belief).len() + db_block(db_match).len();
        let room = max_tokens.saturating_sub(fixed + 3).min(MAX_RESPONSE_TOKENS + 1);
        let template = Template::new(truncate_tail(template.as_str(), room.saturating_sub(1)));
        let budget = max_tokens.saturating_sub(fixed + response_block(&template).len());
        out.push(TurnSample {
            history: fit_history(&history, budget),
            domain: turn.turn_domain,
            belief: turn.belief.clone(),
            db: db_match,
            response: template,
        });
        history.push((Role::System, truncate_tail(&turn.system, MAX_RESPONSE_TOKENS)));
    }
    out
}

/// Consecutive utterances of one dialog, without any markup.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UtteranceChunk {
    pub utterances: Vec<String>,
}

impl UtteranceChunk {
    pub fn text(&self) -> String {
        self.utterances.join(" ")
    }

    pub fn tokens(&self) -> Vec<String> {
        tokenize(&self.text())
    }
}

/// Packs each dialog's utterances into chunks of at most `max_tokens`,
/// splitting only at utterance boundaries. An utterance longer than the
/// limit on its own is cut from the tail.
pub fn build_pretrain_corpus(dialogs: &[Dialog], max_tokens: usize) -> Vec<UtteranceChunk> {
    let mut out = Vec::new();
    for d in dialogs {
        let mut current: Vec<String> = Vec::new();
        let mut used = 0;
        let utterances = d.turns.iter().flat_map(|t| [&t.user, &t.system]);
        for u in utterances {
            let u = truncate_tail(u, max_tokens);
            let n = count_tokens(&u);
            if n == 0 {
                continue;
            }
            if used + n > max_tokens && !current.is_empty() {
                out.push(UtteranceChunk {
                    utterances: std::mem::take(&mut current),
                });
                used = 0;
            }
            used += n;
            current.push(u);
        }
        if !current.is_empty() {
            out.push(UtteranceChunk { utterances: current });
        }
    }
    out
}

/// Default-length training samples for a whole corpus.
pub fn training_samples(dialogs: &[Dialog], db: &Database) -> Vec<TurnSample> {
    dialogs
        .iter()
        .flat_map(|d| build_training_turns(d, db, MAX_SEQUENCE_TOKENS))
        .collect()
}
