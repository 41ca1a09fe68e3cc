//! SMILES grammar: organic subset, bracket atoms, branches, ring closures,
//! bond symbols, dots and tetrahedral `@`/`@@` marks.

use std::collections::BTreeMap;

use super::element;
use super::graph::{Atom, Bond, BondOrder, BondStereo, Chirality, MolecularGraph};
use super::token::{tokenize, TokenKind, TokenSequence};
use super::ChemError;

/// Parses a SMILES string into its molecular graph and token sequence.
pub fn parse_smiles(smiles: &str) -> Result<(MolecularGraph, TokenSequence), ChemError> {
    let tokens = tokenize(smiles)?;
    let graph = parse_tokens(&tokens)?;
    Ok((graph, tokens))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct BondSpec {
    order: BondOrder,
    stereo: BondStereo,
}

fn bond_spec(symbol: &str) -> BondSpec {
    let (order, stereo) = match symbol {
        "=" => (BondOrder::Double, BondStereo::None),
        "#" => (BondOrder::Triple, BondStereo::None),
        "$" => (BondOrder::Quadruple, BondStereo::None),
        ":" => (BondOrder::Aromatic, BondStereo::None),
        "/" => (BondOrder::Single, BondStereo::Up),
        "\\" => (BondOrder::Single, BondStereo::Down),
        _ => (BondOrder::Single, BondStereo::None),
    };
    BondSpec { order, stereo }
}

struct Builder {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
}

impl Builder {
    fn connect(&mut self, a: usize, b: usize, spec: Option<BondSpec>) -> Result<(), ChemError> {
        if a == b {
            return Err(ChemError::DuplicateBond(a, b));
        }
        if self
            .bonds
            .iter()
            .any(|e| (e.a == a && e.b == b) || (e.a == b && e.b == a))
        {
            return Err(ChemError::DuplicateBond(a.min(b), a.max(b)));
        }
        let spec = spec.unwrap_or(BondSpec {
            order: if self.atoms[a].aromatic && self.atoms[b].aromatic {
                BondOrder::Aromatic
            } else {
                BondOrder::Single
            },
            stereo: BondStereo::None,
        });
        self.bonds.push(Bond {
            a,
            b,
            order: spec.order,
            in_ring: false,
            stereo: spec.stereo,
        });
        Ok(())
    }
}

/// Builds the graph from an already tokenized SMILES string.
pub fn parse_tokens(tokens: &TokenSequence) -> Result<MolecularGraph, ChemError> {
    let mut builder = Builder {
        atoms: Vec::new(),
        bonds: Vec::new(),
    };
    let mut prev: Option<usize> = None;
    let mut pending: Option<(BondSpec, usize)> = None;
    let mut branches: Vec<(usize, usize)> = Vec::new();
    let mut rings: BTreeMap<u32, (usize, Option<BondSpec>)> = BTreeMap::new();

    for (index, token) in tokens.tokens.iter().enumerate() {
        let unexpected = || ChemError::UnexpectedToken {
            index,
            text: token.text.clone(),
        };
        match token.kind {
            TokenKind::Atom | TokenKind::BracketAtom => {
                let atom = if token.kind == TokenKind::Atom {
                    organic_atom(&token.text, index)
                } else {
                    bracket_atom(&token.text, index)?
                };
                builder.atoms.push(atom);
                let id = builder.atoms.len() - 1;
                match (prev, pending.take()) {
                    (Some(p), spec) => builder.connect(p, id, spec.map(|s| s.0))?,
                    (None, Some((_, at))) => return Err(ChemError::DanglingBond(at)),
                    (None, None) => {}
                }
                prev = Some(id);
            }
            TokenKind::BondSymbol => {
                if prev.is_none() {
                    return Err(ChemError::DanglingBond(index));
                }
                if pending.is_some() {
                    return Err(unexpected());
                }
                pending = Some((bond_spec(&token.text), index));
            }
            TokenKind::RingDigit => {
                let Some(atom) = prev else {
                    return Err(unexpected());
                };
                let digit: u32 = token
                    .text
                    .trim_start_matches('%')
                    .parse()
                    .map_err(|_| unexpected())?;
                let spec = pending.take().map(|s| s.0);
                match rings.remove(&digit) {
                    Some((open_atom, open_spec)) => {
                        let spec = match (open_spec, spec) {
                            (Some(x), Some(y)) if x.order != y.order => {
                                return Err(ChemError::RingBondConflict(digit))
                            }
                            (Some(x), _) => Some(x),
                            (None, y) => y,
                        };
                        builder.connect(open_atom, atom, spec)?;
                    }
                    None => {
                        rings.insert(digit, (atom, spec));
                    }
                }
            }
            TokenKind::Branch if token.text == "(" => {
                let Some(atom) = prev else {
                    return Err(ChemError::UnbalancedParenthesis(index));
                };
                if let Some((_, at)) = pending {
                    return Err(ChemError::DanglingBond(at));
                }
                branches.push((atom, index));
            }
            TokenKind::Branch => {
                if let Some((_, at)) = pending {
                    return Err(ChemError::DanglingBond(at));
                }
                let (atom, _) = branches
                    .pop()
                    .ok_or(ChemError::UnbalancedParenthesis(index))?;
                prev = Some(atom);
            }
            TokenKind::Dot => {
                if let Some((_, at)) = pending {
                    return Err(ChemError::DanglingBond(at));
                }
                if prev.is_none() || !branches.is_empty() {
                    return Err(unexpected());
                }
                prev = None;
            }
            TokenKind::StereoMark => return Err(unexpected()),
            TokenKind::Other => {
                return Err(match token.text.as_str() {
                    "*" => ChemError::Unsupported("wildcard atom"),
                    t if t.as_bytes()[0].is_ascii_alphabetic() => {
                        ChemError::UnknownElement(t.to_string())
                    }
                    _ => unexpected(),
                });
            }
        }
    }
    if let Some((_, at)) = pending {
        return Err(ChemError::DanglingBond(at));
    }
    if let Some((&digit, _)) = rings.iter().next() {
        return Err(ChemError::UnclosedRing(digit));
    }
    if let Some(&(_, at)) = branches.last() {
        return Err(ChemError::UnbalancedParenthesis(at));
    }
    let mut graph = MolecularGraph::new(builder.atoms, builder.bonds)?;
    graph.assign_implicit_h()?;
    Ok(graph)
}

fn organic_atom(text: &str, token: usize) -> Atom {
    let aromatic = text.as_bytes()[0].is_ascii_lowercase();
    let symbol = if aromatic {
        text.to_ascii_uppercase()
    } else {
        text.to_string()
    };
    Atom::organic(&symbol, aromatic, token)
}

/// Parses `[...]` contents: symbol, chirality, hydrogen count, charge, class.
fn bracket_atom(text: &str, token: usize) -> Result<Atom, ChemError> {
    let body = &text[1..text.len() - 1];
    let bytes = body.as_bytes();
    let malformed = || ChemError::InvalidBracketAtom(text.to_string());
    let mut i = 0;
    if bytes.first().is_some_and(u8::is_ascii_digit) {
        return Err(ChemError::Unsupported("isotope"));
    }
    if bytes.first() == Some(&b'*') {
        return Err(ChemError::Unsupported("wildcard atom"));
    }
    // element symbol: aromatic lowercase (c, n, se, as, ...) or capitalized
    let (symbol, aromatic) = match bytes.first() {
        Some(c) if c.is_ascii_lowercase() => {
            let two = body.get(0..2).filter(|s| matches!(*s, "se" | "as" | "te"));
            let s = two.unwrap_or(&body[0..1]);
            i += s.len();
            let mut upper = s.to_string();
            upper[0..1].make_ascii_uppercase();
            if !element::can_be_aromatic(&upper) {
                return Err(ChemError::UnknownElement(s.to_string()));
            }
            (upper, true)
        }
        Some(c) if c.is_ascii_uppercase() => {
            let two = body
                .get(0..2)
                .filter(|s| s.as_bytes()[1].is_ascii_lowercase() && element::is_element(s));
            let s = match two {
                Some(s) => s,
                None => {
                    if !element::is_element(&body[0..1]) {
                        let end = if bytes.get(1).is_some_and(u8::is_ascii_lowercase) {
                            2
                        } else {
                            1
                        };
                        return Err(ChemError::UnknownElement(body[0..end].to_string()));
                    }
                    &body[0..1]
                }
            };
            i += s.len();
            (s.to_string(), false)
        }
        _ => return Err(malformed()),
    };

    let mut chirality = Chirality::None;
    if bytes.get(i) == Some(&b'@') {
        if bytes.get(i + 1) == Some(&b'@') {
            chirality = Chirality::Clockwise;
            i += 2;
        } else {
            chirality = Chirality::CounterClockwise;
            i += 1;
        }
        if bytes.get(i).is_some_and(u8::is_ascii_alphabetic) && bytes[i] != b'H' {
            return Err(ChemError::Unsupported("non-tetrahedral chirality class"));
        }
    }

    let mut hydrogens = 0u8;
    if bytes.get(i) == Some(&b'H') {
        i += 1;
        hydrogens = 1;
        if let Some(d) = bytes.get(i).filter(|b| b.is_ascii_digit()) {
            hydrogens = d - b'0';
            i += 1;
        }
    }

    let mut charge: i8 = 0;
    if let Some(&sign) = bytes.get(i).filter(|b| **b == b'+' || **b == b'-') {
        let unit: i8 = if sign == b'+' { 1 } else { -1 };
        i += 1;
        let mut magnitude: i8 = 1;
        if bytes.get(i).is_some_and(u8::is_ascii_digit) {
            let start = i;
            while bytes.get(i).is_some_and(u8::is_ascii_digit) {
                i += 1;
            }
            magnitude = body[start..i].parse().map_err(|_| malformed())?;
        } else {
            while bytes.get(i) == Some(&sign) {
                magnitude += 1;
                i += 1;
            }
        }
        charge = unit * magnitude;
    }

    // atom class `:n` carries no chemistry; accepted and dropped
    if bytes.get(i) == Some(&b':') {
        i += 1;
        let start = i;
        while bytes.get(i).is_some_and(u8::is_ascii_digit) {
            i += 1;
        }
        if i == start {
            return Err(malformed());
        }
    }
    if i != bytes.len() {
        return Err(malformed());
    }

    Ok(Atom {
        element: symbol,
        aromatic,
        formal_charge: charge,
        explicit_h: Some(hydrogens),
        implicit_h: 0,
        degree: 0,
        chirality,
        in_ring: false,
        source_token: token,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> MolecularGraph {
        parse_smiles(s).unwrap().0
    }

    #[test]
    fn ethanol() {
        let g = parse("CCO");
        assert_eq!(g.atom_count(), 3);
        assert_eq!(g.bond_count(), 2);
        assert!(g.bonds.iter().all(|b| b.order == BondOrder::Single));
        let h: Vec<u8> = g.atoms.iter().map(|a| a.implicit_h).collect();
        assert_eq!(h, [3, 2, 1]);
    }

    #[test]
    fn benzene_ring_closure() {
        let g = parse("c1ccccc1");
        assert_eq!(g.atom_count(), 6);
        assert_eq!(g.bond_count(), 6);
        assert!(g.atoms.iter().all(|a| a.aromatic && a.in_ring && a.total_h() == 1));
        assert!(g
            .bonds
            .iter()
            .all(|b| b.order == BondOrder::Aromatic && b.in_ring));
    }

    #[test]
    fn ammonium() {
        let g = parse("[NH4+]");
        assert_eq!(g.atom_count(), 1);
        assert_eq!(g.bond_count(), 0);
        let a = &g.atoms[0];
        assert_eq!((a.formal_charge, a.explicit_h), (1, Some(4)));
    }

    #[test]
    fn bracket_forms() {
        let g = parse("[C@@H](Cl)(F)Br");
        assert_eq!(g.atoms[0].chirality, Chirality::Clockwise);
        assert_eq!(g.atoms[0].explicit_h, Some(1));
        let g = parse("[O-][N+](=O)c1ccccc1");
        assert_eq!(g.atoms[0].formal_charge, -1);
        assert_eq!(g.atoms[1].formal_charge, 1);
        let g = parse("[Fe++]");
        assert_eq!(g.atoms[0].formal_charge, 2);
        let g = parse("[Cu+2]");
        assert_eq!(g.atoms[0].formal_charge, 2);
        let g = parse("c1cc[nH]c1");
        assert_eq!(g.atoms[3].explicit_h, Some(1));
        assert!(g.atoms[3].aromatic);
        let g = parse("[se]1cccc1");
        assert_eq!(g.atoms[0].element, "Se");
        let g = parse("[Sc]");
        assert_eq!(g.atoms[0].element, "Sc");
        assert!(!g.atoms[0].aromatic);
        let g = parse("[CH3:1]C");
        assert_eq!(g.atoms[0].explicit_h, Some(3));
    }

    #[test]
    fn ring_bond_orders_and_two_digit_rings() {
        let g = parse("C=1CCCC1");
        assert_eq!(g.bonds.last().unwrap().order, BondOrder::Double);
        let g = parse("C%10CC%10");
        assert_eq!(g.bond_count(), 3);
        assert!(g.atoms.iter().all(|a| a.in_ring));
        assert_eq!(
            parse_smiles("C=1CC#1").unwrap_err(),
            ChemError::RingBondConflict(1)
        );
    }

    #[test]
    fn disconnected_components() {
        let g = parse("[Na+].[Cl-]");
        assert_eq!(g.atom_count(), 2);
        assert_eq!(g.bond_count(), 0);
    }

    #[test]
    fn stereo_bonds() {
        let g = parse("F/C=C/F");
        assert_eq!(g.bonds[0].stereo, BondStereo::Up);
        assert_eq!(g.bonds[1].order, BondOrder::Double);
    }

    #[test]
    fn hypervalent_organic_atoms() {
        let g = parse("CS(=O)(=O)C");
        assert_eq!(g.atoms[1].implicit_h, 0);
        let g = parse("CN(=O)=O");
        assert_eq!(g.atoms[1].implicit_h, 0);
    }

    #[test]
    fn error_cases() {
        use ChemError::*;
        assert_eq!(parse_smiles("C1CC").unwrap_err(), UnclosedRing(1));
        assert_eq!(parse_smiles("CC=").unwrap_err(), DanglingBond(2));
        assert_eq!(parse_smiles("=CC").unwrap_err(), DanglingBond(0));
        assert_eq!(parse_smiles("C(=)C").unwrap_err(), DanglingBond(2));
        assert_eq!(parse_smiles("[Xx]").unwrap_err(), UnknownElement("Xx".into()));
        assert_eq!(parse_smiles("CX").unwrap_err(), UnknownElement("X".into()));
        assert_eq!(parse_smiles("[13CH4]").unwrap_err(), Unsupported("isotope"));
        assert_eq!(parse_smiles("C*").unwrap_err(), Unsupported("wildcard atom"));
        assert_eq!(parse_smiles("[*]").unwrap_err(), Unsupported("wildcard atom"));
        assert!(matches!(
            parse_smiles("C(C)(C)(C)(C)C").unwrap_err(),
            ValenceOverflow { atom: 0, .. }
        ));
        assert!(matches!(parse_smiles("FF=F").unwrap_err(), ValenceOverflow { .. }));
        assert_eq!(parse_smiles("C(C").unwrap_err(), UnbalancedParenthesis(1));
        assert_eq!(parse_smiles("CC)").unwrap_err(), UnbalancedParenthesis(2));
        assert!(matches!(parse_smiles("C11").unwrap_err(), DuplicateBond(0, 0)));
        assert_eq!(parse_smiles("C:C").unwrap_err(), InvalidAromaticBond(0, 1));
        assert!(matches!(parse_smiles("[C@X]").unwrap_err(), Unsupported(_)));
    }

    #[test]
    fn provenance_is_token_order() {
        let (g, t) = parse_smiles("C[C@@H](N)Cl").unwrap();
        let atom_tokens = t.atom_tokens();
        assert_eq!(atom_tokens.len(), g.atom_count());
        for (atom, &tok) in g.atoms.iter().zip(&atom_tokens) {
            assert_eq!(atom.source_token, tok);
        }
    }
}
