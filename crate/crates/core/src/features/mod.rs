//! Graph featurization and the chemistry-derived supervision targets.

mod ecfp;
mod featurize;
mod groups;
mod scaffold;

pub use ecfp::{morgan_fingerprint, Fingerprint, DEFAULT_RADIUS, DEFAULT_WIDTH};
pub use featurize::{
    featurize, FeaturizedGraph, ATOM_FEATURE_WIDTH, ATOM_MASK_SLOT, BOND_FEATURE_WIDTH,
    BOND_MASK_SLOT, ELEMENT_VOCAB,
};
pub use groups::{detect_functional_groups, FunctionalGroup, FunctionalGroupVector, GROUP_COUNT};
pub use scaffold::{murcko_scaffold, scaffold_key, scaffold_split, scaffold_split_keys, SplitIndices};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FeatureError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("split fractions must be non-negative and sum to 1")]
    InvalidFractions,
}
