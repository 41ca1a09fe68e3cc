use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::MaskError;
use crate::chem::MolecularGraph;

/// Reserved id for contexts never seen while building the vocabulary.
pub const OTHER_CONTEXT: u32 = 0;

/// One-hop atom environment: the atom's element plus the sorted multiset of
/// `(bond code, neighbor element)` pairs, e.g. `C|1C,1O`.
pub fn context_key(graph: &MolecularGraph, atom: usize) -> String {
    let symbol = |a: usize| {
        let at = &graph.atoms[a];
        if at.aromatic {
            at.element.to_ascii_lowercase()
        } else {
            at.element.clone()
        }
    };
    let mut env: Vec<String> = graph
        .neighbors(atom)
        .map(|(b, e)| format!("{}{}", graph.bonds[e].order.code(), symbol(b)))
        .collect();
    env.sort_unstable();
    format!("{}|{}", symbol(atom), env.join(","))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct ContextVocabulary {
    keys: Vec<String>,
    index: HashMap<String, u32>,
}

impl From<Vec<String>> for ContextVocabulary {
    fn from(keys: Vec<String>) -> Self {
        Self::from_keys(keys)
    }
}

impl From<ContextVocabulary> for Vec<String> {
    fn from(v: ContextVocabulary) -> Self {
        v.keys
    }
}

impl ContextVocabulary {
    /// Ids follow first occurrence in corpus order, starting after `Other`.
    pub fn build<'a>(
        corpus: impl IntoIterator<Item = &'a MolecularGraph>,
    ) -> Result<Self, MaskError> {
        let mut vocab = ContextVocabulary {
            keys: vec!["<other>".to_string()],
            index: HashMap::new(),
        };
        let mut molecules = 0;
        for graph in corpus {
            molecules += 1;
            for a in 0..graph.atom_count() {
                let key = context_key(graph, a);
                if !vocab.index.contains_key(&key) {
                    vocab.index.insert(key.clone(), vocab.keys.len() as u32);
                    vocab.keys.push(key);
                }
            }
        }
        if molecules == 0 {
            return Err(MaskError::EmptyCorpus);
        }
        Ok(vocab)
    }

    /// Rebuilds a vocabulary from its key list, `Other` first.
    pub fn from_keys(keys: Vec<String>) -> Self {
        let index = keys
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, k)| (k.clone(), i as u32))
            .collect();
        ContextVocabulary { keys, index }
    }

    pub fn keys(&self) -> &[String] {
        &self.keys
    }

    /// Number of classes including `Other`.
    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id_of(&self, key: &str) -> u32 {
        self.index.get(key).copied().unwrap_or(OTHER_CONTEXT)
    }

    pub fn atom_ids(&self, graph: &MolecularGraph) -> Vec<u32> {
        (0..graph.atom_count())
            .map(|a| self.id_of(&context_key(graph, a)))
            .collect()
    }
}

pub fn build_context_vocab(corpus: &[MolecularGraph]) -> Result<ContextVocabulary, MaskError> {
    ContextVocabulary::build(corpus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;

    fn graphs(smiles: &[&str]) -> Vec<MolecularGraph> {
        smiles.iter().map(|s| parse_smiles(s).unwrap().0).collect()
    }

    #[test]
    fn methane_has_one_key() {
        let v = build_context_vocab(&graphs(&["C"])).unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!(v.keys()[1], "C|");
    }

    #[test]
    fn ethanol_keys() {
        let v = build_context_vocab(&graphs(&["CCO"])).unwrap();
        assert_eq!(v.keys()[1..], ["C|1C", "C|1C,1O", "O|1C"]);
        assert_eq!(v.atom_ids(&graphs(&["OCC"])[0]), [3, 2, 1]);
        assert_eq!(v.id_of("N|"), OTHER_CONTEXT);
    }

    #[test]
    fn deterministic_and_serializable() {
        let corpus = graphs(&["c1ccccc1O", "CC(=O)N", "CCO"]);
        let a = build_context_vocab(&corpus).unwrap();
        assert_eq!(a, build_context_vocab(&corpus).unwrap());
        let json = serde_json::to_string(&a).unwrap();
        assert_eq!(serde_json::from_str::<ContextVocabulary>(&json).unwrap(), a);
    }

    #[test]
    fn empty_corpus_rejected() {
        assert_eq!(build_context_vocab(&[]), Err(MaskError::EmptyCorpus));
    }
}
