//! The per-session dialog loop: belief prediction, DB grounding, template
//! prediction and relexicalization, with decode-time fault tolerance.

use std::collections::HashSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{parse_belief, repair_belief, BeliefState, DomainName};
use crate::kb::{
    booking_request, booking_slots, is_bookable, search_constraints, BookingResult, Database,
    DbMatch, EntityRecord,
};
use crate::lexicon::{relexicalize_with_values, validate_template, Template, ValueMap};
use crate::seqmodel::{
    beam_generate, belief_block, db_block, fit_history, history_tokens, BackendError,
    GeneratorBackend, Role, TokenId, DMN, EOB, EOS, SOB,
};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("backend failure: {0}")]
    Backend(#[from] BackendError),
    #[error("user utterance is empty")]
    EmptyUtterance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    /// Beam sizes tried in order by each stage.
    pub beam_schedule: Vec<usize>,
    pub repetition_threshold: f64,
    pub fallback_response: String,
    pub max_response_tokens: usize,
    /// Token budget for the dialog history in prompts.
    pub history_budget: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            beam_schedule: vec![1, 4, 8],
            repetition_threshold: 0.9,
            fallback_response: "i am sorry , could you rephrase that ?".to_string(),
            max_response_tokens: crate::seqmodel::MAX_RESPONSE_TOKENS,
            history_budget: 384,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToleranceEvent {
    BeliefRepaired,
    BeliefRegenerated,
    TemplateRejected,
    RepetitionRejected,
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    /// User utterances and raw (unpolished) system responses.
    pub history: Vec<(Role, String)>,
    pub last_system_raw: String,
    pub prev_belief: BeliefState,
    pub prev_domain: DomainName,
    pub rng_seed: u64,
}

impl Session {
    pub fn new(id: impl Into<String>, rng_seed: u64) -> Self {
        Session {
            id: id.into(),
            history: Vec::new(),
            last_system_raw: String::new(),
            prev_belief: BeliefState::new(),
            prev_domain: DomainName::General,
            rng_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemTurn {
    pub belief: BeliefState,
    pub domain: DomainName,
    pub db: DbMatch,
    /// First matching entity, in DB order.
    pub record: Option<EntityRecord>,
    /// Present when the response confirmed a booking.
    pub booking: Option<BookingResult>,
    pub template: Template,
    pub raw_response: String,
    /// Values substituted into the template, in order.
    pub values: ValueMap,
    pub tolerance_events: Vec<ToleranceEvent>,
    pub belief_beam: usize,
    pub response_beam: usize,
}

/// Normalized edit similarity `1 - dist / max(len)` over characters reaches
/// `threshold`.
pub fn check_repetition(candidate: &str, last_system: &str, threshold: f64) -> bool {
    strsim::normalized_levenshtein(candidate, last_system) >= threshold
}

pub fn normalize_user(text: &str) -> String {
    text.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

#[derive(Clone)]
pub struct Engine {
    backend: Arc<dyn GeneratorBackend>,
    db: Arc<Database>,
    config: EngineConfig,
}

struct Events(Vec<ToleranceEvent>);

impl Events {
    fn log(&mut self, e: ToleranceEvent) {
        if !self.0.contains(&e) {
            self.0.push(e);
        }
    }
}

struct Grounding {
    db: DbMatch,
    records: Vec<EntityRecord>,
    booking: Option<BookingResult>,
}

impl Engine {
    pub fn new(backend: Arc<dyn GeneratorBackend>, db: Arc<Database>, config: EngineConfig) -> Self {
        Engine { backend, db, config }
    }

    pub fn backend(&self) -> &Arc<dyn GeneratorBackend> {
        &self.backend
    }

    pub fn db(&self) -> &Arc<Database> {
        &self.db
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    fn special(&self, tok: &str) -> Result<TokenId, EngineError> {
        self.backend
            .vocab()
            .id(tok)
            .ok_or_else(|| EngineError::Backend(BackendError::UnknownToken(tok.to_string())))
    }

    /// Produces the next system turn. The session is only updated once the
    /// whole turn succeeded.
    pub fn respond(&self, session: &mut Session, user: &str) -> Result<SystemTurn, EngineError> {
        let user = normalize_user(user);
        if user.is_empty() {
            return Err(EngineError::EmptyUtterance);
        }
        let mut history = session.history.clone();
        history.push((Role::User, user.clone()));
        let context = history_tokens(&fit_history(&history, self.config.history_budget));
        let mut events = Events(Vec::new());

        let (domain, belief, belief_beam) = self.predict_belief(session, &context, &mut events)?;
        let grounding = self.ground(domain, &belief, session.rng_seed);
        let (template, raw, values, response_beam, booked) =
            self.predict_response(session, &context, domain, &belief, &grounding, &mut events)?;

        let turn = SystemTurn {
            record: grounding.records.first().cloned(),
            booking: if booked { grounding.booking } else { None },
            belief,
            domain,
            db: grounding.db,
            template,
            raw_response: raw,
            values,
            tolerance_events: events.0,
            belief_beam,
            response_beam,
        };
        session.history = history;
        session.history.push((Role::System, turn.raw_response.clone()));
        session.last_system_raw = turn.raw_response.clone();
        session.prev_belief = turn.belief.clone();
        session.prev_domain = turn.domain;
        Ok(turn)
    }

    fn predict_belief(
        &self,
        session: &Session,
        context: &[String],
        events: &mut Events,
    ) -> Result<(DomainName, BeliefState, usize), EngineError> {
        let vocab = self.backend.vocab();
        let mut prefix = vocab.encode(context)?;
        prefix.push(self.special(SOB)?);
        prefix.push(self.special(DMN)?);
        let stop = self.special(EOB)?;
        let mut tried = HashSet::new();
        let mut last_beam = 0;
        for (round, &beam) in self.config.beam_schedule.iter().enumerate() {
            last_beam = beam;
            let cands = beam_generate(
                self.backend.as_ref(),
                &prefix,
                stop,
                beam,
                self.config.max_response_tokens,
            )?;
            for cand in cands {
                if !cand.finished || !tried.insert(cand.tokens.clone()) {
                    continue;
                }
                let tokens = vocab.decode(cand.body());
                let Some((domain, text)) = split_domain(&tokens) else {
                    continue;
                };
                let parsed = match parse_belief(&text) {
                    Ok(b) => Some(b),
                    Err(_) => {
                        let repaired = repair_belief(&text);
                        let fixed = (repaired != text).then(|| parse_belief(&repaired).ok()).flatten();
                        if fixed.is_some() {
                            events.log(ToleranceEvent::BeliefRepaired);
                        }
                        fixed
                    }
                };
                if let Some(belief) = parsed {
                    if round > 0 {
                        events.log(ToleranceEvent::BeliefRegenerated);
                    }
                    return Ok((domain, belief, beam));
                }
            }
        }
        events.log(ToleranceEvent::Fallback);
        Ok((session.prev_domain, session.prev_belief.clone(), last_beam))
    }

    fn ground(&self, domain: DomainName, belief: &BeliefState, seed: u64) -> Grounding {
        let constraints = belief.constraints(domain);
        let search = search_constraints(domain, &constraints);
        let Ok((db, hits)) = self.db.query(domain, &search) else {
            return Grounding {
                db: DbMatch::new(0),
                records: Vec::new(),
                booking: None,
            };
        };
        let request = booking_request(domain, &constraints);
        let complete = is_bookable(domain) && request.len() == booking_slots(domain).len();
        let booking = if complete && db.count > 0 {
            self.db
                .book(domain, &search, &request, seed)
                .ok()
                .filter(|b| b.success)
        } else {
            None
        };
        Grounding {
            db,
            records: hits.into_iter().cloned().collect(),
            booking,
        }
    }

    #[allow(clippy::type_complexity)]
    fn predict_response(
        &self,
        session: &Session,
        context: &[String],
        domain: DomainName,
        belief: &BeliefState,
        grounding: &Grounding,
        events: &mut Events,
    ) -> Result<(Template, String, ValueMap, usize, bool), EngineError> {
        let vocab = self.backend.vocab();
        let mut tokens = context.to_vec();
        tokens.extend(belief_block(domain, belief));
        tokens.extend(db_block(grounding.db));
        let prefix = vocab.encode(&tokens)?;
        let stop = self.special(EOS)?;

        let mut available: Vec<&str> = Vec::new();
        if let Some(c) = belief.domain(domain) {
            available.extend(c.keys().map(String::as_str));
        }
        if let Some(r) = grounding.records.first() {
            available.extend(r.attributes.keys().map(String::as_str));
        }
        if let Some(b) = &grounding.booking {
            available.extend(b.slot_names());
        }
        let records: Vec<&EntityRecord> = grounding.records.iter().collect();

        let mut tried = HashSet::new();
        let mut last_beam = 0;
        for &beam in &self.config.beam_schedule {
            last_beam = beam;
            let cands = beam_generate(
                self.backend.as_ref(),
                &prefix,
                stop,
                beam,
                self.config.max_response_tokens,
            )?;
            for cand in cands {
                if !cand.finished || !tried.insert(cand.tokens.clone()) {
                    continue;
                }
                let template = Template::new(vocab.decode(cand.body()).join(" "));
                if template.is_empty()
                    || !template.is_well_formed()
                    || !validate_template(&template, available.iter().copied()).is_empty()
                {
                    events.log(ToleranceEvent::TemplateRejected);
                    continue;
                }
                let Ok((raw, values)) = relexicalize_with_values(
                    &template,
                    belief,
                    domain,
                    &records,
                    grounding.booking.as_ref(),
                ) else {
                    events.log(ToleranceEvent::TemplateRejected);
                    continue;
                };
                if !session.last_system_raw.is_empty()
                    && check_repetition(&raw, &session.last_system_raw, self.config.repetition_threshold)
                {
                    events.log(ToleranceEvent::RepetitionRejected);
                    continue;
                }
                let booked = template.placeholders().iter().any(|s| s == "ref");
                return Ok((template, raw, values, beam, booked));
            }
        }
        events.log(ToleranceEvent::Fallback);
        let text = self.config.fallback_response.clone();
        Ok((Template::new(text.clone()), text, ValueMap::new(), last_beam, false))
    }
}

/// Splits generated belief-stage tokens into the turn domain and the belief
/// text. A bare leading block is attributed to the turn domain.
fn split_domain(tokens: &[String]) -> Option<(DomainName, String)> {
    let (first, rest) = tokens.split_first()?;
    let domain: DomainName = first.parse().ok()?;
    let mut text = rest.join(" ");
    if text.starts_with('{') {
        text = format!("{domain} {text}");
    }
    Some((domain, text))
}
