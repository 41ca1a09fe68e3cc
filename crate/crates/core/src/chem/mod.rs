//! SMILES tokenization, parsing and writing with token/atom provenance.

mod canon;
pub mod element;
mod error;
mod graph;
mod iso;
mod parse;
mod token;
mod write;

pub use canon::{canonical_order, canonical_ranks};
pub use error::ChemError;
pub use graph::{implicit_hydrogens, Atom, Bond, BondOrder, BondStereo, Chirality, MolecularGraph};
pub use iso::{are_isomorphic, ISOMORPHISM_ATOM_LIMIT};
pub use parse::{parse_smiles, parse_tokens};
pub use token::{tokenize, Token, TokenKind, TokenSequence};
pub use write::write_smiles;
