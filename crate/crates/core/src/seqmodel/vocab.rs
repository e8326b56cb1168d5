use std::collections::HashMap;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{BackendError, SPECIAL_TOKENS, UNK};

pub type TokenId = u32;

/// Bidirectional token table. Ids are dense and assigned in insertion order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
}

impl Vocab {
    /// Builds a vocabulary from exactly the given tokens (duplicates ignored).
    pub fn new<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut v = Vocab::default();
        for t in tokens {
            v.insert(t.into());
        }
        v
    }

    /// Like [`Vocab::new`] but with the special tokens and `<unk>` first.
    pub fn with_specials<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut v = Vocab::new(SPECIAL_TOKENS);
        for t in tokens {
            v.insert(t.into());
        }
        v
    }

    pub fn insert(&mut self, token: String) -> TokenId {
        if let Some(&id) = self.index.get(&token) {
            return id;
        }
        let id = self.tokens.len() as TokenId;
        self.index.insert(token.clone(), id);
        self.tokens.push(token);
        id
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn unk(&self) -> Option<TokenId> {
        self.id(UNK)
    }

    /// Maps tokens to ids; unknown tokens become `<unk>` when the vocabulary has one.
    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Vec<TokenId>, BackendError> {
        tokens
            .iter()
            .map(|t| {
                self.id(t.as_ref())
                    .or_else(|| self.unk())
                    .ok_or_else(|| BackendError::UnknownToken(t.as_ref().to_string()))
            })
            .collect()
    }

    pub fn decode(&self, ids: &[TokenId]) -> Vec<String> {
        ids.iter()
            .map(|id| self.token(*id).unwrap_or(UNK).to_string())
            .collect()
    }
}

impl Serialize for Vocab {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.tokens.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Vocab {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let tokens = Vec::<String>::deserialize(deserializer)?;
        let v = Vocab::new(tokens.iter().cloned());
        if v.len() != tokens.len() {
            return Err(serde::de::Error::custom("duplicate token in vocabulary"));
        }
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encode_decode() {
        let v = Vocab::with_specials(["a", "b", "a"]);
        assert_eq!(v.len(), SPECIAL_TOKENS.len() + 2);
        let ids = v.encode(&["a", "zzz", "b"]).unwrap();
        assert_eq!(v.decode(&ids), ["a", UNK, "b"]);
        let bare = Vocab::new(["x"]);
        assert!(bare.encode(&["y"]).is_err());
    }
}
