use serde::Serialize;

use super::{encode_molecule, Checkpoint, Corpus, Molecule, PipelineError, PreparedMolecule};
use crate::model::{dump_attention, EncodeOptions};
use crate::nn::{Tape, Tensor};

pub fn prepare_smiles(checkpoint: &Checkpoint, smiles: &str) -> Result<PreparedMolecule, PipelineError> {
    let molecule = Molecule::parse(smiles, 1)?;
    Ok(prepare(checkpoint, &molecule))
}

fn prepare(checkpoint: &Checkpoint, molecule: &Molecule) -> PreparedMolecule {
    PreparedMolecule::new(
        molecule,
        &checkpoint.vocabulary,
        &checkpoint.contexts,
        checkpoint.model.config.fingerprint_width,
    )
}

/// Pooled `x_cls` of one molecule.
pub fn embed_molecule(checkpoint: &Checkpoint, molecule: &PreparedMolecule) -> Result<Vec<f64>, PipelineError> {
    let mut tape = Tape::new();
    let enc = encode_molecule(&checkpoint.model, &mut tape, molecule, EncodeOptions::default())?;
    Ok(tape.value(enc.x_cls).data().to_vec())
}

/// One `x_cls` row per corpus molecule, in corpus order.
pub fn embed_corpus(checkpoint: &Checkpoint, corpus: &Corpus) -> Result<Vec<Vec<f64>>, PipelineError> {
    corpus
        .molecules
        .iter()
        .map(|m| embed_molecule(checkpoint, &prepare(checkpoint, m)))
        .collect()
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Cosine similarity of the pooled embeddings of two molecules.
pub fn similarity(checkpoint: &Checkpoint, a: &str, b: &str) -> Result<f64, PipelineError> {
    let ea = embed_molecule(checkpoint, &prepare_smiles(checkpoint, a)?)?;
    let eb = embed_molecule(checkpoint, &prepare_smiles(checkpoint, b)?)?;
    Ok(cosine(&ea, &eb))
}

/// Per-head attention of one layer, with row labels for the joint sequence.
#[derive(Debug, Clone, Serialize)]
pub struct AttentionDump {
    pub layer: usize,
    /// `"t:<token>"` for SMILES rows, `"a:<element>"` for atom rows.
    pub positions: Vec<String>,
    pub fragments: Vec<usize>,
    pub heads: Vec<Tensor>,
}

pub fn attention_dump(checkpoint: &Checkpoint, smiles: &str, layer: usize) -> Result<AttentionDump, PipelineError> {
    let molecule = Molecule::parse(smiles, 1)?;
    let prepared = prepare(checkpoint, &molecule);
    let mut tape = Tape::new();
    let options = EncodeOptions {
        retain_attention: true,
        ..Default::default()
    };
    let enc = encode_molecule(&checkpoint.model, &mut tape, &prepared, options)?;
    let heads = dump_attention(&enc, layer)?.to_vec();
    let mut positions: Vec<String> = molecule.tokens.tokens.iter().map(|t| format!("t:{}", t.text)).collect();
    positions.extend(molecule.graph.atoms.iter().map(|a| format!("a:{}", a.element)));
    let fragments = molecule
        .fragments
        .token_labels
        .iter()
        .chain(&molecule.fragments.atom_labels)
        .copied()
        .collect();
    Ok(AttentionDump {
        layer,
        positions,
        fragments,
        heads,
    })
}

impl AttentionDump {
    /// Text form: a header per head, then one tab-separated row per query
    /// position, prefixed by its index, label and fragment.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (h, m) in self.heads.iter().enumerate() {
            out.push_str(&format!("# layer {} head {} size {}x{}\n", self.layer, h, m.rows(), m.cols()));
            for r in 0..m.rows() {
                out.push_str(&format!("{r}\t{}\t{}", self.positions[r], self.fragments[r]));
                for v in m.row(r) {
                    out.push_str(&format!("\t{v:.6}"));
                }
                out.push('\n');
            }
        }
        out
    }
}

/// Mean cosine of matched `(f_s[k], f_g[k])` fragment pairs and of all
/// mismatched SMILES/graph fragment pairs across `corpus`.
pub fn fragment_alignment(checkpoint: &Checkpoint, corpus: &Corpus) -> Result<(f64, f64), PipelineError> {
    let model = &checkpoint.model;
    let mut fs = Vec::new();
    let mut fg = Vec::new();
    for m in &corpus.molecules {
        let prepared = prepare(checkpoint, m);
        let mut tape = Tape::new();
        let enc = encode_molecule(model, &mut tape, &prepared, EncodeOptions::default())?;
        let pooled = model.encoder.pool_fragments(&mut tape, &model.store, &enc, &prepared.fragments)?;
        let (s, g) = (tape.value(pooled.f_s), tape.value(pooled.f_g));
        for k in 0..s.rows() {
            fs.push(s.row(k).to_vec());
            fg.push(g.row(k).to_vec());
        }
    }
    let matched = fs.iter().zip(&fg).map(|(a, b)| cosine(a, b)).sum::<f64>() / fs.len() as f64;
    let mut sum = 0.0;
    let mut count = 0usize;
    for (i, a) in fs.iter().enumerate() {
        for (j, b) in fg.iter().enumerate() {
            if i != j {
                sum += cosine(a, b);
                count += 1;
            }
        }
    }
    Ok((matched, if count == 0 { f64::NAN } else { sum / count as f64 }))
}
