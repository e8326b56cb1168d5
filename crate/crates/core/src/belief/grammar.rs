//! Recursive-descent parser, canonical serializer and best-effort repair for
//! the belief grammar:
//!
//! ```text
//! belief := block*
//! block  := DOMAIN? '{' (pair (',' pair)*)? '}'
//! pair   := SLOT ('=' | ':') WORD+
//! ```
//!
//! A block without a domain name belongs to the nearest preceding domain
//! token, or to `general` when there is none.

use super::{BeliefError, BeliefState, DomainName};

/// Canonical slot order inside a domain block. Unlisted slots follow, sorted.
const SLOT_ORDER: &[&str] = &[
    "name",
    "id",
    "type",
    "area",
    "pricerange",
    "food",
    "stars",
    "parking",
    "internet",
    "department",
    "departure",
    "destination",
    "leave",
    "arrive",
    "day",
    "time",
    "stay",
    "people",
];

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Open,
    Close,
    Comma,
    Sep,
    Word(String),
}

fn lex(text: &str) -> Vec<(usize, Tok)> {
    let mut out = Vec::new();
    let mut word = String::new();
    let mut word_start = 0;
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let flush = |word: &mut String, start: usize, out: &mut Vec<(usize, Tok)>| {
        if !word.is_empty() {
            out.push((start, Tok::Word(std::mem::take(word))));
        }
    };
    for (i, &(pos, c)) in chars.iter().enumerate() {
        let punct = match c {
            '{' => Some(Tok::Open),
            '}' => Some(Tok::Close),
            ',' => Some(Tok::Comma),
            '=' => Some(Tok::Sep),
            ':' => {
                let prev_alnum = i > 0 && chars[i - 1].1.is_alphanumeric();
                let next_alnum = chars.get(i + 1).is_some_and(|(_, n)| n.is_alphanumeric());
                if prev_alnum && next_alnum {
                    None
                } else {
                    Some(Tok::Sep)
                }
            }
            _ => None,
        };
        if let Some(tok) = punct {
            flush(&mut word, word_start, &mut out);
            out.push((pos, tok));
        } else if c.is_whitespace() {
            flush(&mut word, word_start, &mut out);
        } else {
            if word.is_empty() {
                word_start = pos;
            }
            word.push(c);
        }
    }
    flush(&mut word, word_start, &mut out);
    out
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(o, _)| *o)
    }

    fn error(&self, reason: impl Into<String>) -> BeliefError {
        BeliefError::Malformed {
            at: self.offset(),
            reason: reason.into(),
        }
    }

    fn belief(&mut self) -> Result<BeliefState, BeliefError> {
        let mut state = BeliefState::new();
        let mut current = DomainName::General;
        while let Some(tok) = self.peek() {
            match tok {
                Tok::Word(w) => {
                    current = w.parse()?;
                    self.pos += 1;
                    if self.peek() != Some(&Tok::Open) {
                        return Err(self.error("expected `{` after domain name"));
                    }
                }
                Tok::Open => {
                    self.pos += 1;
                    for (slot, value) in self.pairs()? {
                        state
                            .set(current, &slot, &value)
                            .map_err(|e| self.error(e.to_string()))?;
                    }
                }
                Tok::Close => return Err(self.error("unbalanced `}`")),
                Tok::Comma | Tok::Sep => return Err(self.error("unexpected separator outside a block")),
            }
        }
        Ok(state)
    }

    /// Parses pairs up to and including the closing brace.
    fn pairs(&mut self) -> Result<Vec<(String, String)>, BeliefError> {
        let mut pairs = Vec::new();
        if self.peek() == Some(&Tok::Close) {
            self.pos += 1;
            return Ok(pairs);
        }
        loop {
            pairs.push(self.pair()?);
            match self.peek() {
                Some(Tok::Comma) => self.pos += 1,
                Some(Tok::Close) => {
                    self.pos += 1;
                    return Ok(pairs);
                }
                None => return Err(self.error("unbalanced `{`")),
                Some(_) => return Err(self.error("expected `,` or `}`")),
            }
        }
    }

    fn pair(&mut self) -> Result<(String, String), BeliefError> {
        let slot = match self.peek() {
            Some(Tok::Word(w)) => w.clone(),
            Some(Tok::Sep) => return Err(self.error("empty slot name")),
            Some(Tok::Open) => return Err(self.error("nested `{`")),
            None => return Err(self.error("unbalanced `{`")),
            Some(_) => return Err(self.error("expected slot name")),
        };
        self.pos += 1;
        match self.peek() {
            Some(Tok::Sep) => self.pos += 1,
            Some(Tok::Word(_)) => return Err(self.error("slot name must be a single word")),
            _ => return Err(self.error(format!("missing `=` after slot `{slot}`"))),
        }
        let mut words = Vec::new();
        while let Some(Tok::Word(w)) = self.peek() {
            words.push(w.clone());
            self.pos += 1;
        }
        if words.is_empty() {
            return Err(self.error(format!("empty value for slot `{slot}`")));
        }
        match self.peek() {
            Some(Tok::Comma) | Some(Tok::Close) | None => Ok((slot, words.join(" "))),
            Some(Tok::Sep) => Err(self.error("second separator inside a pair")),
            Some(Tok::Open) => Err(self.error("nested `{`")),
            Some(Tok::Word(_)) => unreachable!(),
        }
    }
}

/// Parses the belief grammar. Accepts both `=` and `:` as pair separators.
pub fn parse_belief(text: &str) -> Result<BeliefState, BeliefError> {
    let mut parser = Parser {
        toks: lex(text),
        pos: 0,
        end: text.len(),
    };
    parser.belief()
}

fn slot_rank(slot: &str) -> (usize, &str) {
    let rank = SLOT_ORDER
        .iter()
        .position(|s| *s == slot)
        .unwrap_or(SLOT_ORDER.len());
    (rank, slot)
}

/// Renders the canonical form: domains in enumeration order, slots in the
/// fixed slot order, `=` separators and single spaces.
pub fn serialize_belief(belief: &BeliefState) -> String {
    let blocks: Vec<String> = belief
        .iter()
        .map(|(domain, constraints)| {
            let mut slots: Vec<(&String, &String)> = constraints.iter().collect();
            slots.sort_by(|a, b| slot_rank(a.0).cmp(&slot_rank(b.0)));
            let pairs: Vec<String> = slots.iter().map(|(s, v)| format!("{s} = {v}")).collect();
            format!("{domain} {{ {} }}", pairs.join(" , "))
        })
        .collect();
    blocks.join(" ")
}

fn has_separator(fragment: &str) -> bool {
    lex(fragment).iter().any(|(_, t)| *t == Tok::Sep)
}

/// Rejoins comma-split value fragments into the preceding value.
///
/// A fragment with no `=`/`:` separator cannot be a pair, so it is glued to
/// the previous pair's value. Returns the input unchanged when it already
/// parses or when the rewritten text still fails to parse.
pub fn repair_belief(text: &str) -> String {
    if parse_belief(text).is_ok() {
        return text.to_string();
    }
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        let Some(close_rel) = rest[open + 1..].find('}') else {
            return text.to_string();
        };
        let close = open + 1 + close_rel;
        out.push_str(&rest[..open]);
        let mut merged: Vec<String> = Vec::new();
        for fragment in rest[open + 1..close].split(',').map(str::trim) {
            if fragment.is_empty() {
                continue;
            }
            match merged.last_mut() {
                Some(last) if !has_separator(fragment) => {
                    last.push(' ');
                    last.push_str(fragment);
                }
                _ => merged.push(fragment.to_string()),
            }
        }
        if merged.is_empty() {
            out.push_str("{ }");
        } else {
            out.push_str("{ ");
            out.push_str(&merged.join(" , "));
            out.push_str(" }");
        }
        rest = &rest[close + 1..];
    }
    out.push_str(rest);
    if parse_belief(&out).is_ok() {
        out
    } else {
        text.to_string()
    }
}
