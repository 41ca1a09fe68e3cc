//! Masked-view sampling: token-level masking, fragment-level cross-modality
//! masking, and the two ablation strategies.

mod context;

pub use context::{build_context_vocab, context_key, ContextVocabulary, OTHER_CONTEXT};

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fragment::FragmentMap;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MaskError {
    #[error("this sampler does not implement the {0:?} strategy")]
    StrategyMismatch(MaskStrategy),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("invalid mask config: {0}")]
    InvalidConfig(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskStrategy {
    Cmm,
    ConditionalMasking,
    SingleModalityMasking,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Smiles,
    Graph,
    /// No single modality was chosen: either nothing or both sides are masked.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskConfig {
    pub r_t: f64,
    pub r_f: f64,
    pub modality_coin: f64,
    pub strategy: MaskStrategy,
    pub seed: u64,
}

impl Default for MaskConfig {
    fn default() -> Self {
        MaskConfig {
            r_t: 0.2,
            r_f: 0.6,
            modality_coin: 0.5,
            strategy: MaskStrategy::Cmm,
            seed: 0,
        }
    }
}

impl MaskConfig {
    pub fn validate(&self) -> Result<(), MaskError> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !unit(self.r_t) || !unit(self.r_f) {
            return Err(MaskError::InvalidConfig("ratios must lie in [0, 1]"));
        }
        if !unit(self.modality_coin) {
            return Err(MaskError::InvalidConfig("modality coin must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// The ids a masked view predicts: SMILES token vocabulary ids and atom
/// context ids of one molecule.
#[derive(Debug, Clone, Copy)]
pub struct MaskInput<'a> {
    pub token_ids: &'a [u32],
    pub context_ids: &'a [u32],
}

/// Masked positions with their prediction targets (aligned index by index).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskedSample {
    pub masked_token_positions: Vec<usize>,
    pub masked_atom_positions: Vec<usize>,
    pub masked_fragment_ids: Vec<usize>,
    pub masked_modality: Modality,
    pub token_targets: Vec<u32>,
    pub atom_context_targets: Vec<u32>,
}

impl MaskedSample {
    fn from_positions(
        input: MaskInput,
        tokens: Vec<usize>,
        atoms: Vec<usize>,
        fragments: Vec<usize>,
        modality: Modality,
    ) -> Self {
        MaskedSample {
            token_targets: tokens.iter().map(|&i| input.token_ids[i]).collect(),
            atom_context_targets: atoms.iter().map(|&i| input.context_ids[i]).collect(),
            masked_token_positions: tokens,
            masked_atom_positions: atoms,
            masked_fragment_ids: fragments,
            masked_modality: modality,
        }
    }
}

/// `max(1, floor(len * ratio))`, capped at `len`; zero for empty input.
pub fn mask_count(len: usize, ratio: f64) -> usize {
    if len == 0 {
        return 0;
    }
    (((len as f64) * ratio + 1e-9).floor() as usize).clamp(1, len)
}

fn choose(rng: &mut impl Rng, len: usize, ratio: f64) -> Vec<usize> {
    let mut picked = sample(rng, len, mask_count(len, ratio)).into_vec();
    picked.sort_unstable();
    picked
}

fn flip(rng: &mut impl Rng, coin: f64) -> Modality {
    if rng.random::<f64>() < coin {
        Modality::Smiles
    } else {
        Modality::Graph
    }
}

/// Independent uniform draws of token and atom positions at ratio `r_t`.
pub fn sample_token_mask(input: MaskInput, config: &MaskConfig, rng: &mut impl Rng) -> MaskedSample {
    let tokens = choose(rng, input.token_ids.len(), config.r_t);
    let atoms = choose(rng, input.context_ids.len(), config.r_t);
    MaskedSample::from_positions(input, tokens, atoms, Vec::new(), Modality::None)
}

/// Masks every token or every atom of a random subset of fragments; the
/// other modality stays intact.
pub fn sample_fragment_mask(
    input: MaskInput,
    fragments: &FragmentMap,
    config: &MaskConfig,
    rng: &mut impl Rng,
) -> MaskedSample {
    let chosen = choose(rng, fragments.count, config.r_f);
    let modality = flip(rng, config.modality_coin);
    let hit = |labels: &[usize]| {
        labels
            .iter()
            .enumerate()
            .filter(|(_, l)| chosen.binary_search(l).is_ok())
            .map(|(i, _)| i)
            .collect::<Vec<_>>()
    };
    let (tokens, atoms) = match modality {
        Modality::Smiles => (hit(&fragments.token_labels), Vec::new()),
        _ => (Vec::new(), hit(&fragments.atom_labels)),
    };
    MaskedSample::from_positions(input, tokens, atoms, chosen, modality)
}

/// Ablation masking. Conditional masking masks tokens of one coin-chosen
/// modality; single-modality masking masks both sides like token-level
/// masking and relies on the encoder keeping attention within a modality.
pub fn sample_ablation_mask(
    input: MaskInput,
    config: &MaskConfig,
    rng: &mut impl Rng,
) -> Result<MaskedSample, MaskError> {
    match config.strategy {
        MaskStrategy::Cmm => Err(MaskError::StrategyMismatch(MaskStrategy::Cmm)),
        MaskStrategy::SingleModalityMasking => Ok(sample_token_mask(input, config, rng)),
        MaskStrategy::ConditionalMasking => {
            let modality = flip(rng, config.modality_coin);
            let (tokens, atoms) = match modality {
                Modality::Smiles => (choose(rng, input.token_ids.len(), config.r_t), Vec::new()),
                _ => (Vec::new(), choose(rng, input.context_ids.len(), config.r_t)),
            };
            Ok(MaskedSample::from_positions(input, tokens, atoms, Vec::new(), modality))
        }
    }
}
