//! Regex-equivalent SMILES tokenizer with byte spans and atom back-links.

use serde::{Deserialize, Serialize};

use super::ChemError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TokenKind {
    Atom,
    RingDigit,
    BondSymbol,
    Branch,
    BracketAtom,
    Dot,
    StereoMark,
    Other,
}

impl TokenKind {
    pub fn is_atom(self) -> bool {
        matches!(self, TokenKind::Atom | TokenKind::BracketAtom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub kind: TokenKind,
    /// Half-open byte range into the source string.
    pub span: (usize, usize),
    /// Index of the parsed atom, set exactly for atom-bearing tokens.
    pub atom_index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub tokens: Vec<Token>,
    pub source: String,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.text.as_str())
    }

    /// Token indices of atom-bearing tokens, in atom order.
    pub fn atom_tokens(&self) -> Vec<usize> {
        self.tokens
            .iter()
            .enumerate()
            .filter(|(_, t)| t.kind.is_atom())
            .map(|(i, _)| i)
            .collect()
    }
}

/// Splits a SMILES string into tokens.
///
/// Bracket atoms, `Cl`/`Br`, `%nn` ring closures and `@@` are single tokens;
/// every other character is its own token.
pub fn tokenize(smiles: &str) -> Result<TokenSequence, ChemError> {
    if smiles.is_empty() {
        return Err(ChemError::EmptyInput);
    }
    if let Some(pos) = smiles.bytes().position(|b| !b.is_ascii()) {
        return Err(ChemError::NonAscii(pos));
    }
    let bytes = smiles.as_bytes();
    let mut tokens = Vec::new();
    let mut atoms = 0usize;
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let next = bytes.get(i + 1).copied();
        let (len, kind) = match c {
            b'[' => {
                let close = bytes[i + 1..]
                    .iter()
                    .position(|&b| b == b']' || b == b'[')
                    .map(|p| p + i + 1);
                match close {
                    Some(j) if bytes[j] == b']' => (j - i + 1, TokenKind::BracketAtom),
                    _ => return Err(ChemError::UnbalancedBracket(i)),
                }
            }
            b']' => return Err(ChemError::UnbalancedBracket(i)),
            b'B' if next == Some(b'r') => (2, TokenKind::Atom),
            b'C' if next == Some(b'l') => (2, TokenKind::Atom),
            b'B' | b'C' | b'N' | b'O' | b'P' | b'S' | b'F' | b'I' | b'b' | b'c' | b'n' | b'o'
            | b'p' | b's' => (1, TokenKind::Atom),
            b'0'..=b'9' => (1, TokenKind::RingDigit),
            b'%' if next.is_some_and(|b| b.is_ascii_digit())
                && bytes.get(i + 2).is_some_and(|b| b.is_ascii_digit()) =>
            {
                (3, TokenKind::RingDigit)
            }
            b'(' | b')' => (1, TokenKind::Branch),
            b'-' | b'=' | b'#' | b'$' | b':' | b'/' | b'\\' => (1, TokenKind::BondSymbol),
            b'.' => (1, TokenKind::Dot),
            b'@' if next == Some(b'@') => (2, TokenKind::StereoMark),
            b'@' => (1, TokenKind::StereoMark),
            _ => (1, TokenKind::Other),
        };
        let atom_index = if kind.is_atom() {
            atoms += 1;
            Some(atoms - 1)
        } else {
            None
        };
        tokens.push(Token {
            text: smiles[i..i + len].to_string(),
            kind,
            span: (i, i + len),
            atom_index,
        });
        i += len;
    }
    Ok(TokenSequence {
        tokens,
        source: smiles.to_string(),
    })
}
