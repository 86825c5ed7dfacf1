//! Token vocabulary shared by the translation and quality-estimation scorers.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type TokenId = u32;

pub const BOS: TokenId = 0;
pub const EOS: TokenId = 1;
pub const UNK: TokenId = 2;

const RESERVED: [&str; 3] = ["<s>", "</s>", "<unk>"];

/// Immutable bijection between token strings and dense ids.
///
/// Ids 0, 1 and 2 are always BOS, EOS and UNK.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    tokens: Vec<String>,
    ids: HashMap<String, TokenId>,
}

impl Vocabulary {
    /// Builds a vocabulary from content tokens. Duplicates are kept once, in
    /// first-seen order; reserved strings in the input are ignored.
    pub fn new<I, S>(content: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        let mut ids: HashMap<String, TokenId> = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as TokenId))
            .collect();
        for tok in content {
            let tok = tok.as_ref();
            if tok.is_empty() || tok.chars().any(char::is_whitespace) {
                return Err(Error::Vocabulary(format!("bad token {tok:?}")));
            }
            if !ids.contains_key(tok) {
                ids.insert(tok.to_string(), tokens.len() as TokenId);
                tokens.push(tok.to_string());
            }
        }
        Ok(Vocabulary { tokens, ids })
    }

    /// A new vocabulary keeping every id of `self` and appending unseen tokens.
    pub fn extended<I, S>(&self, content: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let own = self.tokens[RESERVED.len()..].iter().map(String::as_str);
        let extra: Vec<String> = content.into_iter().map(|s| s.as_ref().to_string()).collect();
        Vocabulary::new(own.chain(extra.iter().map(String::as_str)))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, token: &str) -> TokenId {
        self.ids.get(token).copied().unwrap_or(UNK)
    }

    pub fn get(&self, token: &str) -> Option<TokenId> {
        self.ids.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> &str {
        self.tokens
            .get(id as usize)
            .map(String::as_str)
            .unwrap_or(RESERVED[UNK as usize])
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Ids of every non-reserved token.
    pub fn content_ids(&self) -> impl Iterator<Item = TokenId> + '_ {
        (RESERVED.len() as TokenId)..(self.tokens.len() as TokenId)
    }

    pub fn encode(&self, text: &str) -> Vec<TokenId> {
        text.split_whitespace().map(|t| self.id(t)).collect()
    }

    /// Joins tokens with single spaces, dropping BOS and EOS.
    pub fn decode(&self, ids: &[TokenId]) -> String {
        ids.iter()
            .filter(|&&id| id != BOS && id != EOS)
            .map(|&id| self.token(id))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl TryFrom<Vec<String>> for Vocabulary {
    type Error = Error;

    fn try_from(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < RESERVED.len()
            || tokens.iter().zip(RESERVED).any(|(t, r)| t != r)
        {
            return Err(Error::Vocabulary("missing reserved tokens".into()));
        }
        let vocab = Vocabulary::new(&tokens[RESERVED.len()..])?;
        if vocab.len() != tokens.len() {
            return Err(Error::Vocabulary("duplicate tokens".into()));
        }
        Ok(vocab)
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.tokens
    }
}
