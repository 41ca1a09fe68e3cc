use std::path::Path;

use sha2::{Digest, Sha256};

use super::PipelineError;
use crate::chem::{parse_smiles, MolecularGraph, TokenSequence};
use crate::fragment::{fragment_molecule, FragmentMap};

/// One parsed corpus entry.
#[derive(Debug, Clone)]
pub struct Molecule {
    pub smiles: String,
    /// 1-based source line.
    pub line: usize,
    pub graph: MolecularGraph,
    pub tokens: TokenSequence,
    pub fragments: FragmentMap,
}

impl Molecule {
    pub fn parse(smiles: &str, line: usize) -> Result<Self, PipelineError> {
        let (graph, tokens) = parse_smiles(smiles)?;
        let fragments = fragment_molecule(&graph, &tokens)?;
        Ok(Molecule {
            smiles: smiles.to_string(),
            line,
            graph,
            tokens,
            fragments,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub molecules: Vec<Molecule>,
    /// `(line, reason)` for every skipped line.
    pub skipped: Vec<(usize, String)>,
}

impl Corpus {
    /// Parses one molecule per line: the first whitespace-separated field is
    /// the SMILES, the rest is ignored. Blank lines and `#` comments are
    /// not counted.
    pub fn from_text(text: &str) -> Result<Self, PipelineError> {
        let mut molecules = Vec::new();
        let mut skipped = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let Some(field) = raw.split_whitespace().next() else {
                continue;
            };
            if field.starts_with('#') {
                continue;
            }
            match Molecule::parse(field, i + 1) {
                Ok(m) => molecules.push(m),
                Err(e) => {
                    log::debug!("line {}: skipping {field}: {e}", i + 1);
                    skipped.push((i + 1, e.to_string()));
                }
            }
        }
        if molecules.is_empty() {
            return Err(PipelineError::AllLinesFailed(skipped.len()));
        }
        Ok(Corpus { molecules, skipped })
    }

    pub fn len(&self) -> usize {
        self.molecules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.molecules.is_empty()
    }

    /// Hex SHA-256 over the parsed SMILES and their fragment labels.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for m in &self.molecules {
            h.update(m.smiles.as_bytes());
            h.update([0]);
            for &l in m.fragments.atom_labels.iter().chain(&m.fragments.token_labels) {
                h.update((l as u64).to_le_bytes());
            }
            h.update([1]);
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub fn ingest(path: &Path) -> Result<Corpus, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|e| PipelineError::FileUnreadable {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    Corpus::from_text(&text)
}
