//! A deterministic oracle backend driven by a script.
//!
//! The script sees the decoded prompt of the current stage and returns
//! weighted continuations: `domain belief` strings for the belief stage and
//! templates for the response stage. Next-token probabilities are the
//! normalized weights of the continuations consistent with what has been
//! generated so far; the scaffolding tokens between stages (`<SOB> <DMN>`,
//! `match = bucket <EOKB>`) are predicted deterministically.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use super::{
    split_blocks, BackendError, GeneratorBackend, Role, TokenId, Vocab, DMN, EOB, EOKB, EOS, SOB,
};
use crate::text::tokenize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Belief,
    Response,
}

/// The decoded context a script decides on.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Prompt {
    pub history: Vec<(Role, String)>,
    /// Set in the response stage.
    pub domain: Option<String>,
    pub belief: Option<String>,
    pub bucket: Option<String>,
}

impl Prompt {
    pub fn last_user(&self) -> Option<&str> {
        self.history
            .iter()
            .rev()
            .find(|(r, _)| *r == Role::User)
            .map(|(_, t)| t.as_str())
    }

    pub fn user_turns(&self) -> impl Iterator<Item = &str> {
        self.history
            .iter()
            .filter(|(r, _)| *r == Role::User)
            .map(|(_, t)| t.as_str())
    }

    pub fn last_system(&self) -> Option<&str> {
        self.history
            .iter()
            .rev()
            .find(|(r, _)| *r == Role::System)
            .map(|(_, t)| t.as_str())
    }
}

/// Splits c1 tokens back into turns at `user :` / `system :` markers.
pub fn parse_history<S: AsRef<str>>(tokens: &[S]) -> Vec<(Role, String)> {
    let mut out: Vec<(Role, Vec<&str>)> = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let t = tokens[i].as_ref();
        let marker = match t {
            "user" => Some(Role::User),
            "system" => Some(Role::System),
            _ => None,
        };
        if let Some(role) = marker.filter(|_| tokens.get(i + 1).map(AsRef::as_ref) == Some(":")) {
            out.push((role, Vec::new()));
            i += 2;
            continue;
        }
        if let Some((_, words)) = out.last_mut() {
            words.push(t);
        }
        i += 1;
    }
    out.into_iter().map(|(r, w)| (r, w.join(" "))).collect()
}

type Policy = dyn Fn(Stage, &Prompt) -> Vec<(String, f64)> + Send + Sync;
type Continuations = Arc<Vec<(Vec<TokenId>, f64)>>;

pub struct ScriptedBackend {
    vocab: Vocab,
    policy: Box<Policy>,
    name: String,
    cache: Mutex<HashMap<(Stage, Vec<TokenId>), Continuations>>,
    prompt_log: Option<Mutex<Vec<String>>>,
}

impl ScriptedBackend {
    pub fn new(
        name: impl Into<String>,
        vocab: Vocab,
        policy: impl Fn(Stage, &Prompt) -> Vec<(String, f64)> + Send + Sync + 'static,
    ) -> Self {
        for tok in [SOB, DMN, EOB, EOKB, EOS, "match", "="] {
            assert!(vocab.id(tok).is_some(), "scripted vocabulary lacks `{tok}`");
        }
        ScriptedBackend {
            vocab,
            policy: Box::new(policy),
            name: name.into(),
            cache: Mutex::new(HashMap::new()),
            prompt_log: None,
        }
    }

    /// Records the decoded context of every distinct prompt the script sees.
    pub fn with_prompt_log(mut self) -> Self {
        self.prompt_log = Some(Mutex::new(Vec::new()));
        self
    }

    pub fn logged_prompts(&self) -> Vec<String> {
        self.prompt_log
            .as_ref()
            .map(|log| log.lock().unwrap().clone())
            .unwrap_or_default()
    }

    fn id(&self, tok: &str) -> TokenId {
        self.vocab.id(tok).expect("checked in constructor")
    }

    fn prompt(&self, stage: Stage, context: &[String]) -> Prompt {
        match stage {
            Stage::Belief => Prompt {
                history: parse_history(&context[..context.len().saturating_sub(2)]),
                ..Prompt::default()
            },
            Stage::Response => {
                let sob = context.iter().rposition(|t| t == SOB).unwrap_or(0);
                let eob = context.iter().rposition(|t| t == EOB).unwrap_or(sob);
                let inner = &context[(sob + 2).min(eob)..eob];
                Prompt {
                    history: parse_history(&context[..sob]),
                    domain: inner.first().cloned(),
                    belief: Some(inner.iter().skip(1).cloned().collect::<Vec<_>>().join(" ")),
                    bucket: context.get(eob + 3).cloned(),
                }
            }
        }
    }

    fn continuations(&self, stage: Stage, context: &[TokenId]) -> Result<Continuations, BackendError> {
        let key = (stage, context.to_vec());
        if let Some(hit) = self.cache.lock().unwrap().get(&key) {
            return Ok(hit.clone());
        }
        let decoded = self.vocab.decode(context);
        if let Some(log) = &self.prompt_log {
            log.lock().unwrap().push(decoded.join(" "));
        }
        let stop = self.id(if stage == Stage::Belief { EOB } else { EOS });
        let mut out = Vec::new();
        for (text, weight) in (self.policy)(stage, &self.prompt(stage, &decoded)) {
            if weight.is_nan() || weight <= 0.0 {
                continue;
            }
            let mut ids = Vec::new();
            for t in tokenize(&text) {
                ids.push(self.vocab.id(&t).ok_or(BackendError::UnknownToken(t))?);
            }
            ids.push(stop);
            out.push((ids, weight));
        }
        let out = Arc::new(out);
        self.cache.lock().unwrap().insert(key, out.clone());
        Ok(out)
    }

    fn point_mass(&self, id: TokenId) -> Vec<f64> {
        let mut lp = vec![f64::NEG_INFINITY; self.vocab.len()];
        lp[id as usize] = 0.0;
        lp
    }

    fn continuation_logprobs(
        &self,
        stage: Stage,
        context: &[TokenId],
        generated: &[TokenId],
    ) -> Result<Vec<f64>, BackendError> {
        let conts = self.continuations(stage, context)?;
        let mut mass = vec![0.0; self.vocab.len()];
        let mut total = 0.0;
        for (ids, w) in conts.iter() {
            if ids.len() > generated.len() && ids.starts_with(generated) {
                mass[ids[generated.len()] as usize] += w;
                total += w;
            }
        }
        if total == 0.0 {
            let stop = if stage == Stage::Belief { EOB } else { EOS };
            return Ok(self.point_mass(self.id(stop)));
        }
        Ok(mass.into_iter().map(|m| (m / total).ln()).collect())
    }

    fn scripted(&self, stage: Stage, context: &[TokenId], generated: &[TokenId]) -> Result<bool, BackendError> {
        let conts = self.continuations(stage, context)?;
        Ok(conts.iter().any(|(ids, _)| ids.as_slice() == generated))
    }
}

impl GeneratorBackend for ScriptedBackend {
    fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    fn next_logprobs(&self, prefix: &[TokenId]) -> Result<Vec<f64>, BackendError> {
        let specials = [SOB, DMN, EOB, EOKB, EOS].map(|t| self.id(t));
        let last = prefix.iter().rposition(|t| specials.contains(t));
        let Some(at) = last else {
            return Ok(self.point_mass(specials[0]));
        };
        let cut = at + 1;
        let since = prefix.len() - cut;
        match self.vocab.token(prefix[at]) {
            Some(DMN) => self.continuation_logprobs(Stage::Belief, &prefix[..cut], &prefix[cut..]),
            Some(EOKB) => self.continuation_logprobs(Stage::Response, &prefix[..cut], &prefix[cut..]),
            Some(SOB) => Ok(self.point_mass(specials[1])),
            Some(EOB) => Ok(match since {
                0 => self.point_mass(self.id("match")),
                1 => self.point_mass(self.id("=")),
                2 => {
                    let buckets: Vec<TokenId> = ["0", "1", "2", "3", ">3"]
                        .iter()
                        .filter_map(|b| self.vocab.id(b))
                        .collect();
                    let mut lp = vec![f64::NEG_INFINITY; self.vocab.len()];
                    for b in &buckets {
                        lp[*b as usize] = -(buckets.len() as f64).ln();
                    }
                    lp
                }
                _ => self.point_mass(specials[3]),
            }),
            _ => Ok(self.point_mass(specials[0])),
        }
    }

    /// 1 when both the belief and the response block are scripted outputs
    /// for their prompts, else 0.
    fn eos_score(&self, sequence: &[TokenId]) -> Result<f64, BackendError> {
        let tokens = self.vocab.decode(sequence);
        let Ok(blocks) = split_blocks(&tokens) else {
            return Ok(0.0);
        };
        let sob = blocks.history.len();
        let eob = sob + 3 + blocks.belief.len();
        let eokb = eob + 4;
        let belief_ok = self.scripted(Stage::Belief, &sequence[..sob + 2], &sequence[sob + 2..=eob])?;
        let response_ok =
            self.scripted(Stage::Response, &sequence[..=eokb], &sequence[eokb + 1..])?;
        Ok(if belief_ok && response_ok { 1.0 } else { 0.0 })
    }

    fn describe(&self) -> String {
        format!("scripted:{}", self.name)
    }
}

type Weighted = Vec<(String, f64)>;

/// Script keyed on the last user utterance, with a default rule.
#[derive(Debug, Clone, Default)]
pub struct ScriptTable {
    rules: HashMap<String, (Weighted, Weighted)>,
    default: (Weighted, Weighted),
}

impl ScriptTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a rule for `user`. Belief continuations are `domain belief` strings.
    pub fn rule(
        mut self,
        user: &str,
        beliefs: &[(&str, f64)],
        templates: &[(&str, f64)],
    ) -> Self {
        let own = |xs: &[(&str, f64)]| xs.iter().map(|(s, w)| (s.to_string(), *w)).collect();
        self.rules
            .insert(tokenize(user).join(" "), (own(beliefs), own(templates)));
        self
    }

    pub fn default_rule(mut self, beliefs: &[(&str, f64)], templates: &[(&str, f64)]) -> Self {
        let own = |xs: &[(&str, f64)]| xs.iter().map(|(s, w)| (s.to_string(), *w)).collect();
        self.default = (own(beliefs), own(templates));
        self
    }

    /// Every token the table can emit or match on.
    pub fn tokens(&self) -> Vec<String> {
        let mut out = Vec::new();
        let all = self.rules.iter().map(|(k, v)| (Some(k), v)).chain([(None, &self.default)]);
        for (key, (b, t)) in all {
            if let Some(k) = key {
                out.extend(tokenize(k));
            }
            for (s, _) in b.iter().chain(t) {
                out.extend(tokenize(s));
            }
        }
        out
    }

    pub fn into_backend(self, name: &str, extra_tokens: &[&str]) -> ScriptedBackend {
        let mut tokens = self.tokens();
        tokens.extend(["match", "=", "0", "1", "2", "3", ">3", "user", "system", ":"].map(String::from));
        tokens.extend(crate::belief::DomainName::ALL.map(|d| d.to_string()));
        tokens.extend(extra_tokens.iter().flat_map(|t| tokenize(t)));
        let vocab = Vocab::with_specials(tokens);
        ScriptedBackend::new(name, vocab, move |stage, prompt| {
            let key = prompt.last_user().unwrap_or("");
            let (b, t) = self.rules.get(key).unwrap_or(&self.default);
            match stage {
                Stage::Belief => b.clone(),
                Stage::Response => t.clone(),
            }
        })
    }
}
