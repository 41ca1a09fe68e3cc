use rand::Rng;

use super::{ModelConfig, ModelError};
use crate::chem::MolecularGraph;
use crate::features::{
    featurize, FeaturizedGraph, ATOM_FEATURE_WIDTH, ATOM_MASK_SLOT, BOND_FEATURE_WIDTH, BOND_MASK_SLOT,
};
use crate::fragment::FragmentMap;
use crate::nn::{GcnLayer, GraphOperators, LayerNorm, Linear, MultiHeadAttention, ParamId, ParamStore, Tape, Tensor, Var};

/// Vocabulary id whose embedding replaces masked SMILES tokens.
pub const MASK_TOKEN_ID: u32 = 1;

/// Graph-side encoder input: features plus precomputed message-passing operators.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphInput {
    pub features: FeaturizedGraph,
    pub bonds: Vec<(usize, usize)>,
    pub operators: GraphOperators,
}

impl GraphInput {
    pub fn new(graph: &MolecularGraph) -> Self {
        let bonds: Vec<(usize, usize)> = graph.bonds.iter().map(|b| (b.a, b.b)).collect();
        GraphInput {
            features: featurize(graph),
            operators: GraphOperators::new(graph.atom_count(), &bonds),
            bonds,
        }
    }

    pub fn atom_count(&self) -> usize {
        self.features.atoms.len()
    }

    /// Atom and bond feature matrices with the mask applied to `masked`
    /// atoms and every bond touching them.
    pub fn masked_features(&self, masked: &[usize]) -> (Tensor, Tensor) {
        let mut atoms: Vec<[f64; ATOM_FEATURE_WIDTH]> = self.features.atoms.clone();
        let mut bonds: Vec<[f64; BOND_FEATURE_WIDTH]> = self.features.bonds.clone();
        for &a in masked {
            atoms[a] = [0.0; ATOM_FEATURE_WIDTH];
            atoms[a][ATOM_MASK_SLOT] = 1.0;
        }
        for (row, &(a, b)) in bonds.iter_mut().zip(&self.bonds) {
            if masked.contains(&a) || masked.contains(&b) {
                row[BOND_MASK_SLOT] = 1.0;
            }
        }
        let to_tensor = |rows: Vec<f64>, n: usize, w: usize| Tensor::from_vec(n, w, rows).expect("sized");
        (
            to_tensor(atoms.concat(), atoms.len(), ATOM_FEATURE_WIDTH),
            to_tensor(bonds.concat(), bonds.len(), BOND_FEATURE_WIDTH),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Block {
    attn: MultiHeadAttention,
    norm1: LayerNorm,
    ff1: Linear,
    ff2: Linear,
    norm2: LayerNorm,
}

/// Parameter layout of the joint SMILES/graph encoder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Encoder {
    token_embedding: ParamId,
    position_embedding: ParamId,
    atom_in: Linear,
    gcn: Vec<GcnLayer>,
    graph_out: Linear,
    blocks: Vec<Block>,
    fragment_attention: MultiHeadAttention,
    max_positions: usize,
    vocab_size: usize,
}

/// Forward-pass switches for [`Encoder::joint_encode`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EncodeOptions {
    /// Restrict attention to positions of the same modality.
    pub block_modalities: bool,
    pub retain_attention: bool,
    /// Pad the token and atom segments to these lengths with inert rows.
    pub pad_to: Option<(usize, usize)>,
}

/// Transformer output for one molecule.
#[derive(Debug, Clone)]
pub struct JointEncoding {
    /// All rows, `tokens | token padding | atoms | atom padding`.
    pub x: Var,
    /// Row mean over the real (unpadded) positions.
    pub x_cls: Var,
    pub n: usize,
    pub m: usize,
    /// Row index of the first atom.
    pub atom_offset: usize,
    /// `attention[layer][head]`, when retained.
    pub attention: Option<Vec<Vec<Tensor>>>,
}

impl JointEncoding {
    pub fn token_rows(&self) -> Vec<usize> {
        (0..self.n).collect()
    }

    pub fn atom_rows(&self) -> Vec<usize> {
        (self.atom_offset..self.atom_offset + self.m).collect()
    }

    pub fn real_rows(&self) -> Vec<usize> {
        let mut rows = self.token_rows();
        rows.extend(self.atom_rows());
        rows
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FragmentEmbeddings {
    /// `K × D`, SMILES side.
    pub f_s: Var,
    /// `K × D`, graph side.
    pub f_g: Var,
}

fn averaging_matrix(labels: &[usize], count: usize) -> Tensor {
    let mut sizes = vec![0usize; count];
    for &l in labels {
        sizes[l] += 1;
    }
    let mut p = Tensor::zeros(count, labels.len());
    for (i, &l) in labels.iter().enumerate() {
        p.set(l, i, 1.0 / sizes[l] as f64);
    }
    p
}

impl Encoder {
    pub fn new(store: &mut ParamStore, config: &ModelConfig, rng: &mut impl Rng) -> Result<Self, ModelError> {
        let d = config.d_model;
        let gw = config.gnn_width;
        let token_embedding = store.add_normal("embed.tokens", config.vocab_size, d, rng);
        let position_embedding = store.add_normal("embed.positions", config.max_positions, d, rng);
        let atom_in = Linear::new(store, "graph.input", ATOM_FEATURE_WIDTH, gw, rng);
        let gcn = (0..config.gnn_layers)
            .map(|i| GcnLayer::new(store, &format!("graph.gcn{i}"), gw, BOND_FEATURE_WIDTH, rng))
            .collect();
        let graph_out = Linear::new(store, "graph.output", gw, d, rng);
        let mut blocks = Vec::with_capacity(config.transformer_layers);
        for i in 0..config.transformer_layers {
            let name = format!("blocks.{i}");
            blocks.push(Block {
                attn: MultiHeadAttention::new(store, &format!("{name}.attn"), d, config.heads, rng)?,
                norm1: LayerNorm::new(store, &format!("{name}.norm1"), d),
                ff1: Linear::new(store, &format!("{name}.ff1"), d, config.ffn_width, rng),
                ff2: Linear::new(store, &format!("{name}.ff2"), config.ffn_width, d, rng),
                norm2: LayerNorm::new(store, &format!("{name}.norm2"), d),
            });
        }
        let fragment_attention = MultiHeadAttention::new(store, "fragment.attn", d, config.heads, rng)?;
        Ok(Encoder {
            token_embedding,
            position_embedding,
            atom_in,
            gcn,
            graph_out,
            blocks,
            fragment_attention,
            max_positions: config.max_positions,
            vocab_size: config.vocab_size,
        })
    }

    pub fn layers(&self) -> usize {
        self.blocks.len()
    }

    /// Token embeddings plus learned positions; `masked` rows use the mask token.
    pub fn embed_smiles(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        token_ids: &[u32],
        masked: &[usize],
    ) -> Result<Var, ModelError> {
        let n = token_ids.len();
        if n > self.max_positions {
            return Err(ModelError::PositionOverflow {
                len: n,
                max: self.max_positions,
            });
        }
        if let Some(&id) = token_ids.iter().find(|&&t| t as usize >= self.vocab_size) {
            return Err(ModelError::TokenOutOfRange {
                id,
                vocab: self.vocab_size,
            });
        }
        let mut ids: Vec<usize> = token_ids.iter().map(|&t| t as usize).collect();
        for &p in masked {
            ids[p] = MASK_TOKEN_ID as usize;
        }
        let table = tape.param(store, self.token_embedding)?;
        let positions = tape.param(store, self.position_embedding)?;
        let tok = tape.embedding(table, &ids)?;
        let pos = tape.embedding(positions, &(0..n).collect::<Vec<_>>())?;
        Ok(tape.add(tok, pos)?)
    }

    /// GCN atom states projected to the model width.
    pub fn embed_graph(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        graph: &GraphInput,
        masked: &[usize],
    ) -> Result<Var, ModelError> {
        let (atoms, bonds) = graph.masked_features(masked);
        let atoms = tape.constant(atoms)?;
        let bonds = tape.constant(bonds)?;
        let sn = tape.constant(graph.operators.self_and_neighbors.clone())?;
        let inc = tape.constant(graph.operators.incidence.clone())?;
        let mut h = self.atom_in.forward(tape, store, atoms)?;
        for layer in &self.gcn {
            h = layer.forward(tape, store, h, sn, inc, bonds)?;
        }
        Ok(self.graph_out.forward(tape, store, h)?)
    }

    /// Concatenates token rows then atom rows and runs the post-norm
    /// transformer stack.
    pub fn joint_encode(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        smiles: Var,
        graph: Var,
        options: EncodeOptions,
    ) -> Result<JointEncoding, ModelError> {
        let (s, g) = (tape.value(smiles), tape.value(graph));
        if s.cols() != g.cols() {
            return Err(crate::nn::NnError::ShapeMismatch(format!(
                "SMILES width {} vs graph width {}",
                s.cols(),
                g.cols()
            ))
            .into());
        }
        let (n, m, d) = (s.rows(), g.rows(), s.cols());
        let (pn, pm) = options.pad_to.unwrap_or((n, m));
        if pn < n || pm < m {
            return Err(ModelError::PaddingTooShort);
        }
        let total = pn + pm;
        let mut parts = vec![smiles];
        if pn > n {
            parts.push(tape.constant(Tensor::zeros(pn - n, d))?);
        }
        parts.push(graph);
        if pm > m {
            parts.push(tape.constant(Tensor::zeros(pm - m, d))?);
        }
        let mut z = tape.concat_rows(&parts)?;

        let kind = |row: usize| -> Option<bool> {
            if row < n {
                Some(false)
            } else if row >= pn && row < pn + m {
                Some(true)
            } else {
                None
            }
        };
        let padded = pn > n || pm > m;
        let allowed: Option<Vec<bool>> = (padded || options.block_modalities).then(|| {
            let mut mask = Vec::with_capacity(total * total);
            for i in 0..total {
                for j in 0..total {
                    let ok = match (kind(i), kind(j)) {
                        (_, None) => false,
                        (Some(a), Some(b)) if options.block_modalities => a == b,
                        _ => true,
                    };
                    mask.push(ok);
                }
            }
            mask
        });

        let mut attention = options.retain_attention.then(Vec::new);
        for block in &self.blocks {
            let (a, weights) = block.attn.forward(tape, store, z, z, allowed.as_deref())?;
            if let Some(maps) = attention.as_mut() {
                maps.push(weights.iter().map(|&w| tape.value(w).clone()).collect());
            }
            let r = tape.add(z, a)?;
            let z1 = block.norm1.forward(tape, store, r)?;
            let f = block.ff1.forward(tape, store, z1)?;
            let f = tape.gelu(f)?;
            let f = block.ff2.forward(tape, store, f)?;
            let r = tape.add(z1, f)?;
            z = block.norm2.forward(tape, store, r)?;
        }
        let mut real: Vec<usize> = (0..n).collect();
        real.extend(pn..pn + m);
        let rows = tape.select_rows(z, &real)?;
        let x_cls = tape.mean_rows(rows)?;
        Ok(JointEncoding {
            x: z,
            x_cls,
            n,
            m,
            atom_offset: pn,
            attention,
        })
    }

    /// Per-fragment embeddings. The SMILES side runs the shared fragment
    /// attention within each fragment's tokens and averages; the graph side
    /// averages atom rows.
    pub fn pool_fragments(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        encoding: &JointEncoding,
        fragments: &FragmentMap,
    ) -> Result<FragmentEmbeddings, ModelError> {
        let k = fragments.count;
        if fragments.token_labels.len() != encoding.n || fragments.atom_labels.len() != encoding.m {
            return Err(ModelError::FragmentMismatch);
        }
        if let Some(&bad) = fragments
            .token_labels
            .iter()
            .chain(&fragments.atom_labels)
            .find(|&&l| l >= k)
        {
            return Err(ModelError::FragmentOutOfRange { label: bad, count: k });
        }
        let tokens = tape.select_rows(encoding.x, &encoding.token_rows())?;
        let labels = &fragments.token_labels;
        let n = labels.len();
        let same: Vec<bool> = (0..n * n).map(|i| labels[i / n] == labels[i % n]).collect();
        let (attended, _) = self.fragment_attention.forward(tape, store, tokens, tokens, Some(&same))?;
        let ps = tape.constant(averaging_matrix(labels, k))?;
        let f_s = tape.matmul(ps, attended)?;
        let atoms = tape.select_rows(encoding.x, &encoding.atom_rows())?;
        let pg = tape.constant(averaging_matrix(&fragments.atom_labels, k))?;
        let f_g = tape.matmul(pg, atoms)?;
        Ok(FragmentEmbeddings { f_s, f_g })
    }
}

/// Retained attention weights of one layer: one matrix per head.
pub fn dump_attention(encoding: &JointEncoding, layer: usize) -> Result<&[Tensor], ModelError> {
    let maps = encoding.attention.as_ref().ok_or(ModelError::RetentionDisabled)?;
    maps.get(layer)
        .map(Vec::as_slice)
        .ok_or(ModelError::LayerOutOfRange {
            layer,
            layers: maps.len(),
        })
}
