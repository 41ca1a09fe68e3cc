use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChemError {
    #[error("empty SMILES input")]
    EmptyInput,
    #[error("non-ASCII character at byte {0}")]
    NonAscii(usize),
    #[error("unbalanced bracket at byte {0}")]
    UnbalancedBracket(usize),
    #[error("unbalanced parenthesis at token {0}")]
    UnbalancedParenthesis(usize),
    #[error("ring closure {0} never closed")]
    UnclosedRing(u32),
    #[error("bond symbol at token {0} has no atom to attach to")]
    DanglingBond(usize),
    #[error("unknown element `{0}`")]
    UnknownElement(String),
    #[error("unsupported SMILES feature: {0}")]
    Unsupported(&'static str),
    #[error("malformed bracket atom `{0}`")]
    InvalidBracketAtom(String),
    #[error("unexpected token `{text}` at index {index}")]
    UnexpectedToken { index: usize, text: String },
    #[error("conflicting bond orders on ring closure {0}")]
    RingBondConflict(u32),
    #[error("duplicate bond between atoms {0} and {1}")]
    DuplicateBond(usize, usize),
    #[error("aromatic bond between non-aromatic atoms {0} and {1}")]
    InvalidAromaticBond(usize, usize),
    #[error("atom {atom} ({element}) exceeds its allowed valence")]
    ValenceOverflow { atom: usize, element: String },
    #[error("graph with {0} atoms exceeds the isomorphism size limit of {1}")]
    SizeLimitExceeded(usize, usize),
}
