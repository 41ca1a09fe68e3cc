use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::chem::TokenSequence;

pub const PAD_ID: u32 = 0;
pub const MASK_ID: u32 = 1;
pub const UNK_ID: u32 = 2;
const SPECIALS: [&str; 3] = ["[PAD]", "[MASK]", "[UNK]"];

/// SMILES token vocabulary with fixed special ids; ordinary tokens follow in
/// sorted order so the mapping depends only on the token set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl From<Vec<String>> for Vocabulary {
    fn from(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
        Vocabulary { tokens, index }
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.tokens
    }
}

impl Vocabulary {
    pub fn build<'a>(sequences: impl IntoIterator<Item = &'a TokenSequence>) -> Self {
        let mut seen: Vec<String> = sequences
            .into_iter()
            .flat_map(|s| s.tokens.iter().map(|t| t.text.clone()))
            .filter(|t| !SPECIALS.contains(&t.as_str()))
            .collect();
        seen.sort();
        seen.dedup();
        let mut tokens: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
        tokens.extend(seen);
        tokens.into()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id_of(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn encode(&self, sequence: &TokenSequence) -> Vec<u32> {
        sequence.tokens.iter().map(|t| self.id_of(&t.text)).collect()
    }
}
