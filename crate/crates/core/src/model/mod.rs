//! The joint SMILES/graph encoder and its configuration.

mod encoder;

pub use encoder::{
    dump_attention, EncodeOptions, Encoder, FragmentEmbeddings, GraphInput, JointEncoding, MASK_TOKEN_ID,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{DEFAULT_WIDTH, GROUP_COUNT};
use crate::nn::{NnError, ParamStore};
use crate::objectives::Heads;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("{len} tokens exceed the {max} learned positions")]
    PositionOverflow { len: usize, max: usize },
    #[error("token id {id} outside vocabulary of {vocab}")]
    TokenOutOfRange { id: u32, vocab: usize },
    #[error("attention retention was not enabled for this pass")]
    RetentionDisabled,
    #[error("layer {layer} out of range for {layers} layers")]
    LayerOutOfRange { layer: usize, layers: usize },
    #[error("fragment label {label} out of range for {count} fragments")]
    FragmentOutOfRange { label: usize, count: usize },
    #[error("fragment map does not match the encoded molecule")]
    FragmentMismatch,
    #[error("padding shorter than the sequence")]
    PaddingTooShort,
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Nn(#[from] NnError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub d_model: usize,
    pub transformer_layers: usize,
    pub heads: usize,
    pub ffn_width: usize,
    pub gnn_layers: usize,
    pub gnn_width: usize,
    pub max_positions: usize,
    pub vocab_size: usize,
    pub context_vocab_size: usize,
    pub fingerprint_width: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d_model: 64,
            transformer_layers: 2,
            heads: 4,
            ffn_width: 128,
            gnn_layers: 3,
            gnn_width: 64,
            max_positions: 128,
            vocab_size: 3,
            context_vocab_size: 1,
            fingerprint_width: DEFAULT_WIDTH,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::InvalidConfig(m.to_string()));
        if self.d_model == 0 || self.heads == 0 || self.d_model % self.heads != 0 {
            return bad("d_model must be a positive multiple of heads");
        }
        if self.gnn_width == 0 || self.ffn_width == 0 || self.max_positions == 0 {
            return bad("widths and max_positions must be positive");
        }
        if self.vocab_size < 3 || self.context_vocab_size == 0 {
            return bad("vocabularies must include their special entries");
        }
        if self.fingerprint_width < 64 || !self.fingerprint_width.is_power_of_two() {
            return bad("fingerprint_width must be a power of two of at least 64");
        }
        Ok(())
    }
}

/// Encoder plus pre-training heads over one parameter store.
#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub store: ParamStore,
    pub encoder: Encoder,
    pub heads: Heads,
}

impl Model {
    /// Deterministic initialization from `seed`.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let encoder = Encoder::new(&mut store, &config, &mut rng)?;
        let heads = Heads::new(&mut store, &config, GROUP_COUNT, &mut rng);
        Ok(Model {
            config,
            store,
            encoder,
            heads,
        })
    }
}
