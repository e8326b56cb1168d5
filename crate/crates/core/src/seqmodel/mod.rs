//! The flattened sequence format, contrastive negatives, training objectives,
//! the generator-backend contract, beam search, and two backends.
//!
//! A turn is rendered as
//!
//! ```text
//! user : u1 system : s1 ... user : uk <SOB> <DMN> domain belief <EOB> match = bucket <EOKB> template <EOS>
//! ```

mod backend;
mod beam;
mod loss;
pub mod ngram;
pub mod scripted;
mod vocab;

pub use backend::{BackendError, FnBackend, GeneratorBackend, UniformBackend};
pub use beam::{beam_generate, BeamCandidate};
pub use loss::{loss_belief, loss_contrastive, loss_response, sequence_nll, total_loss, EPSILON};
pub use vocab::{TokenId, Vocab};

use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{serialize_belief, DomainName};
use crate::kb::DbMatch;
use crate::lexicon::Template;
use crate::text::{tokenize, truncate_head};
use crate::belief::BeliefState;

pub const SOB: &str = "<SOB>";
pub const DMN: &str = "<DMN>";
pub const EOB: &str = "<EOB>";
pub const EOKB: &str = "<EOKB>";
pub const EOS: &str = "<EOS>";
pub const UNK: &str = "<unk>";
pub const SPECIAL_TOKENS: [&str; 6] = [UNK, SOB, DMN, EOB, EOKB, EOS];

/// Upper bound on a flattened sample.
pub const MAX_SEQUENCE_TOKENS: usize = 512;
/// Upper bound on a single utterance or generated response.
pub const MAX_RESPONSE_TOKENS: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    System,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::User => "user",
            Role::System => "system",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnSample {
    /// Dialog context (c1), ending with the current user utterance.
    pub history: Vec<(Role, String)>,
    pub domain: DomainName,
    pub belief: BeliefState,
    pub db: DbMatch,
    pub response: Template,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormatError {
    #[error("sequence is missing delimiter {0}")]
    MissingDelimiter(&'static str),
    #[error("malformed {0} block")]
    BadBlock(&'static str),
}

/// Tokens of one utterance with special-token look-alikes neutralized.
fn utterance_tokens(text: &str) -> Vec<String> {
    tokenize(text)
        .into_iter()
        .map(|t| if SPECIAL_TOKENS.contains(&t.as_str()) { UNK.to_string() } else { t })
        .collect()
}

/// c1 tokens: `role : utterance` for every history entry.
pub fn history_tokens(history: &[(Role, String)]) -> Vec<String> {
    let mut out = Vec::new();
    for (role, text) in history {
        out.push(role.as_str().to_string());
        out.push(":".to_string());
        out.extend(utterance_tokens(text));
    }
    out
}

/// `<SOB> <DMN> domain belief <EOB>`
pub fn belief_block(domain: DomainName, belief: &BeliefState) -> Vec<String> {
    let mut out = vec![SOB.to_string(), DMN.to_string(), domain.to_string()];
    out.extend(tokenize(&serialize_belief(belief)));
    out.push(EOB.to_string());
    out
}

/// `match = bucket <EOKB>`
pub fn db_block(db: DbMatch) -> Vec<String> {
    vec!["match".into(), "=".into(), db.bucket().into(), EOKB.into()]
}

/// `template <EOS>`
pub fn response_block(template: &Template) -> Vec<String> {
    let mut out = utterance_tokens(template.as_str());
    out.push(EOS.to_string());
    out
}

/// Renders a sample as its token sequence.
pub fn flatten(sample: &TurnSample) -> Vec<String> {
    let mut out = history_tokens(&sample.history);
    out.extend(belief_block(sample.domain, &sample.belief));
    out.extend(db_block(sample.db));
    out.extend(response_block(&sample.response));
    out
}

pub fn flatten_text(sample: &TurnSample) -> String {
    flatten(sample).join(" ")
}

/// Token blocks recovered from a flattened sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Blocks {
    pub history: Vec<String>,
    pub domain: String,
    pub belief: Vec<String>,
    pub bucket: String,
    pub response: Vec<String>,
}

impl Blocks {
    pub fn of(sample: &TurnSample) -> Blocks {
        Blocks {
            history: history_tokens(&sample.history),
            domain: sample.domain.to_string(),
            belief: tokenize(&serialize_belief(&sample.belief)),
            bucket: sample.db.bucket().to_string(),
            response: utterance_tokens(sample.response.as_str()),
        }
    }
}

/// Splits a flattened sequence at its delimiters.
pub fn split_blocks<S: AsRef<str>>(tokens: &[S]) -> Result<Blocks, FormatError> {
    let pos = |tok: &'static str| {
        tokens
            .iter()
            .position(|t| t.as_ref() == tok)
            .ok_or(FormatError::MissingDelimiter(tok))
    };
    let owned = |range: &[S]| range.iter().map(|t| t.as_ref().to_string()).collect::<Vec<_>>();
    let sob = pos(SOB)?;
    let dmn = pos(DMN)?;
    let eob = pos(EOB)?;
    let eokb = pos(EOKB)?;
    let eos = pos(EOS)?;
    if !(sob + 1 == dmn && dmn < eob && eob < eokb && eokb < eos && eos + 1 == tokens.len()) {
        return Err(FormatError::BadBlock("delimiter order"));
    }
    if eob - dmn < 2 {
        return Err(FormatError::BadBlock("domain"));
    }
    let kb = owned(&tokens[eob + 1..eokb]);
    if kb.len() != 3 || kb[0] != "match" || kb[1] != "=" {
        return Err(FormatError::BadBlock("db match"));
    }
    Ok(Blocks {
        history: owned(&tokens[..sob]),
        domain: tokens[dmn + 1].as_ref().to_string(),
        belief: owned(&tokens[dmn + 2..eob]),
        bucket: kb[2].clone(),
        response: owned(&tokens[eokb + 1..eos]),
    })
}

/// Keeps the most recent history entries whose c1 rendering fits `budget`
/// tokens. When even the final entry alone is too long it is truncated from
/// the head.
pub fn fit_history(history: &[(Role, String)], budget: usize) -> Vec<(Role, String)> {
    let mut kept: Vec<(Role, String)> = Vec::new();
    let mut used = 0;
    for (i, (role, text)) in history.iter().enumerate().rev() {
        let cost = 2 + utterance_tokens(text).len();
        if used + cost <= budget {
            used += cost;
            kept.push((*role, text.clone()));
        } else {
            if i == history.len() - 1 {
                let room = budget.saturating_sub(2);
                kept.push((*role, truncate_head(text, room)));
            }
            break;
        }
    }
    kept.reverse();
    kept
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Positive,
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwapMode {
    Belief,
    Response,
    Both,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContrastiveSample {
    pub tokens: Vec<String>,
    pub label: Label,
}

impl ContrastiveSample {
    pub fn positive(sample: &TurnSample) -> Self {
        ContrastiveSample {
            tokens: flatten(sample),
            label: Label::Positive,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ContrastiveError {
    #[error("pool has no sample whose blocks differ from the source")]
    PoolTooSmall,
}

/// Builds a negative by swapping the belief block, the response block, or
/// both with those of a random pool sample whose blocks differ. The mode is
/// drawn uniformly; when no pool sample supports it, the remaining modes are
/// tried in random order.
pub fn make_contrastive<R: Rng + ?Sized>(
    sample: &TurnSample,
    pool: &[TurnSample],
    rng: &mut R,
) -> Result<(ContrastiveSample, SwapMode), ContrastiveError> {
    let own_belief = belief_block(sample.domain, &sample.belief);
    let own_response = response_block(&sample.response);
    let donors: Vec<(Vec<String>, Vec<String>)> = pool
        .iter()
        .map(|p| (belief_block(p.domain, &p.belief), response_block(&p.response)))
        .collect();
    let mut modes = [SwapMode::Belief, SwapMode::Response, SwapMode::Both];
    modes.shuffle(rng);
    for mode in modes {
        let usable: Vec<&(Vec<String>, Vec<String>)> = donors
            .iter()
            .filter(|(b, r)| match mode {
                SwapMode::Belief => *b != own_belief,
                SwapMode::Response => *r != own_response,
                SwapMode::Both => *b != own_belief && *r != own_response,
            })
            .collect();
        let Some((b, r)) = usable.choose(rng) else {
            continue;
        };
        let mut tokens = history_tokens(&sample.history);
        tokens.extend(if mode == SwapMode::Response { own_belief.clone() } else { b.clone() });
        tokens.extend(db_block(sample.db));
        tokens.extend(if mode == SwapMode::Belief { own_response.clone() } else { r.clone() });
        return Ok((
            ContrastiveSample {
                tokens,
                label: Label::Negative,
            },
            mode,
        ));
    }
    Err(ContrastiveError::PoolTooSmall)
}
