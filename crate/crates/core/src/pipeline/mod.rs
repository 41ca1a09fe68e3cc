//! Corpus ingestion, pre-training, checkpoints, fine-tuning and metrics.

mod checkpoint;
mod config;
mod corpus;
mod embed;
mod finetune;
pub mod metrics;
mod train;
mod vocab;

pub use checkpoint::{Checkpoint, MANIFEST_FILE, PARAMS_FILE};
pub use config::{parse_mask_strategy, parse_split, parse_task, ConfigFile};
pub use corpus::{ingest, Corpus, Molecule};
pub use embed::{
    attention_dump, cosine, embed_corpus, embed_molecule, fragment_alignment, prepare_smiles, similarity, AttentionDump,
};
pub use finetune::{
    finetune, parse_task_text, read_task_file, split_examples, Example, FinetuneConfig, FinetuneReport, SplitKind,
    TaskKind, TaskMetrics,
};
pub use train::{
    batch_loss, derangement, encode_molecule, initialize, mean_report, pretrain, BatchLoss, LrSchedule, Padding,
    PreparedMolecule, PretrainConfig, PretrainOutcome,
};
pub use vocab::{Vocabulary, MASK_ID, PAD_ID, UNK_ID};

use std::path::Path;

use thiserror::Error;

use crate::chem::ChemError;
use crate::features::FeatureError;
use crate::fragment::FragmentError;
use crate::masking::MaskError;
use crate::model::ModelError;
use crate::nn::NnError;
use crate::objectives::ObjectiveError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("cannot read {path}: {reason}")]
    FileUnreadable { path: String, reason: String },
    #[error("no line parsed ({0} failed)")]
    AllLinesFailed(usize),
    #[error("I/O error on {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("the {0} split is empty")]
    EmptySplit(&'static str),
    #[error("non-finite {term} loss at batch {batch}")]
    NonFiniteLoss { batch: usize, term: &'static str },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Chem(#[from] ChemError),
    #[error(transparent)]
    Fragment(#[from] FragmentError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Mask(#[from] MaskError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Nn(#[from] NnError),
}

impl PipelineError {
    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        PipelineError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        }
    }
}
