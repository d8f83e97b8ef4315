//! Token vocabulary with reserved PAD/UNK ids.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::tokenize::{PAD_TOKEN, UNK_TOKEN};
use crate::error::{Error, Result};

/// Id 0 is PAD, id 1 is UNK; everything else is assigned in first-seen
/// order over the training split, which keeps ids stable across runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    tokens: Vec<String>,
    #[serde(skip)]
    ids: HashMap<String, u32>,
}

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;

impl Vocabulary {
    /// Builds from training-split token streams.
    pub fn build<'a, I>(token_streams: I) -> Self
    where
        I: IntoIterator<Item = &'a [String]>,
    {
        let mut vocab = Self::reserved_only();
        for stream in token_streams {
            for token in stream {
                vocab.intern(token);
            }
        }
        vocab
    }

    fn reserved_only() -> Self {
        let tokens = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        let ids = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Vocabulary { tokens, ids }
    }

    fn intern(&mut self, token: &str) -> u32 {
        if let Some(&id) = self.ids.get(token) {
            return id;
        }
        let id = self.tokens.len() as u32;
        self.tokens.push(token.to_string());
        self.ids.insert(token.to_string(), id);
        id
    }

    /// Total entries including the two reserved ids.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    /// Token id, or UNK for out-of-vocabulary tokens.
    pub fn id(&self, token: &str) -> u32 {
        self.ids.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(|s| s.as_str())
    }

    pub fn encode(&self, tokens: &[String]) -> Vec<u32> {
        tokens.iter().map(|t| self.id(t)).collect()
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.tokens
    }
}

impl TryFrom<Vec<String>> for Vocabulary {
    type Error = Error;

    fn try_from(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < 2 || tokens[0] != PAD_TOKEN || tokens[1] != UNK_TOKEN {
            return Err(Error::SchemaMismatch(
                "vocabulary must start with <pad>, <unk>".into(),
            ));
        }
        let mut ids = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if ids.insert(t.clone(), i as u32).is_some() {
                return Err(Error::SchemaMismatch(format!(
                    "duplicate vocabulary token {t:?}"
                )));
            }
        }
        Ok(Vocabulary { tokens, ids })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn streams(texts: &[&str]) -> Vec<Vec<String>> {
        texts
            .iter()
            .map(|t| t.split_whitespace().map(str::to_string).collect())
            .collect()
    }

    #[test]
    fn first_seen_order_is_stable() {
        let s = streams(&["b a c", "a d"]);
        let refs: Vec<&[String]> = s.iter().map(|v| v.as_slice()).collect();
        let v1 = Vocabulary::build(refs.iter().copied());
        let v2 = Vocabulary::build(refs.iter().copied());
        assert_eq!(v1.id("b"), 2);
        assert_eq!(v1.id("a"), 3);
        assert_eq!(v1.id("c"), 4);
        assert_eq!(v1.id("d"), 5);
        for t in ["a", "b", "c", "d"] {
            assert_eq!(v1.id(t), v2.id(t));
        }
    }

    #[test]
    fn unknown_maps_to_unk() {
        let s = streams(&["x"]);
        let refs: Vec<&[String]> = s.iter().map(|v| v.as_slice()).collect();
        let v = Vocabulary::build(refs);
        assert_eq!(v.id("nope"), UNK_ID);
    }

    #[test]
    fn ids_and_tokens_are_a_bijection() {
        let s = streams(&["one two three two one"]);
        let refs: Vec<&[String]> = s.iter().map(|v| v.as_slice()).collect();
        let v = Vocabulary::build(refs);
        for id in 0..v.len() as u32 {
            let t = v.token(id).unwrap();
            assert_eq!(v.id(t), id);
        }
    }

    #[test]
    fn serde_round_trip() {
        let s = streams(&["alpha beta"]);
        let refs: Vec<&[String]> = s.iter().map(|v| v.as_slice()).collect();
        let v = Vocabulary::build(refs);
        let json = serde_json::to_string(&v).unwrap();
        let back: Vocabulary = serde_json::from_str(&json).unwrap();
        assert_eq!(back.id("alpha"), v.id("alpha"));
        assert_eq!(back.len(), v.len());
    }

    #[test]
    fn rejects_malformed_reserved_block() {
        let bad: std::result::Result<Vocabulary, _> =
            serde_json::from_str(r#"["<unk>", "<pad>"]"#);
        assert!(bad.is_err());
    }
}
