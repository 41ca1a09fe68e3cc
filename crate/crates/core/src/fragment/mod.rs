//! Fragment decomposition on the graph and propagation of fragment labels
//! onto SMILES tokens.

mod brics;

pub use brics::{matching_rule, CleavageRule, Environment, CLEAVAGE_RULES};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chem::{MolecularGraph, TokenKind, TokenSequence};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FragmentError {
    #[error("fragment {k} out of range for {count} fragments")]
    FragmentOutOfRange { k: usize, count: usize },
    #[error("token {0} has no atom to take a fragment label from")]
    OrphanSymbol(usize),
    #[error("{labels} atom labels supplied for {atoms} atoms")]
    LabelLengthMismatch { labels: usize, atoms: usize },
}

/// Fragment labels over the atoms and the tokens of one molecule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FragmentMap {
    pub count: usize,
    pub atom_labels: Vec<usize>,
    pub token_labels: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cleavage {
    pub count: usize,
    pub atom_labels: Vec<usize>,
    /// `(bond id, rule id)` for every cleaved bond, in bond order.
    pub cleaved: Vec<(usize, &'static str)>,
}

/// Cuts every acyclic single bond matched by a BRICS rule and labels atoms
/// by connected component of what remains.
pub fn brics_cleave(graph: &MolecularGraph) -> Cleavage {
    let cleaved: Vec<(usize, &'static str)> = (0..graph.bond_count())
        .filter_map(|e| matching_rule(graph, e).map(|r| (e, r.rule_id)))
        .collect();
    let cut: Vec<bool> = {
        let mut cut = vec![false; graph.bond_count()];
        for &(e, _) in &cleaved {
            cut[e] = true;
        }
        cut
    };
    let (count, atom_labels) = graph.components(|e| cut[e]);
    Cleavage {
        count: count.max(1),
        atom_labels,
        cleaved,
    }
}

/// Assigns every token the fragment label of an atom:
///
/// * atom tokens carry their own atom's label;
/// * bond symbols, dots, ring digits, stereo marks and stray characters take
///   the nearest atom to their left;
/// * `(` takes the first atom inside its branch and `)` the last atom it
///   closes over (falling back to the branch's anchor atom when empty).
pub fn label_smiles_tokens(
    tokens: &TokenSequence,
    graph: &MolecularGraph,
    atom_labels: &[usize],
) -> Result<Vec<usize>, FragmentError> {
    if atom_labels.len() != graph.atom_count() {
        return Err(FragmentError::LabelLengthMismatch {
            labels: atom_labels.len(),
            atoms: graph.atom_count(),
        });
    }
    let toks = &tokens.tokens;
    let atom_label = |t: usize| toks[t].atom_index.map(|a| atom_labels[a]);

    let mut left = vec![None; toks.len()];
    let mut last = None;
    for i in 0..toks.len() {
        if let Some(l) = atom_label(i) {
            last = Some(l);
        }
        left[i] = last;
    }
    let mut right = vec![None; toks.len()];
    let mut next = None;
    for i in (0..toks.len()).rev() {
        if let Some(l) = atom_label(i) {
            next = Some(l);
        }
        right[i] = next;
    }

    // matching parenthesis for each branch token
    let mut partner = vec![usize::MAX; toks.len()];
    let mut stack = Vec::new();
    for (i, t) in toks.iter().enumerate() {
        if t.kind == TokenKind::Branch {
            if t.text == "(" {
                stack.push(i);
            } else if let Some(open) = stack.pop() {
                partner[open] = i;
                partner[i] = open;
            }
        }
    }

    let mut labels = Vec::with_capacity(toks.len());
    for (i, t) in toks.iter().enumerate() {
        let label = match t.kind {
            TokenKind::Atom | TokenKind::BracketAtom => atom_label(i),
            TokenKind::Branch => {
                let close = partner[i];
                if close == usize::MAX {
                    left[i].or(right[i])
                } else if t.text == "(" {
                    right[i].filter(|_| (i..close).any(|j| toks[j].kind.is_atom()))
                        .or(left[i])
                } else {
                    let open = close;
                    left[i]
                        .filter(|_| (open..i).any(|j| toks[j].kind.is_atom()))
                        .or(left[open])
                }
            }
            TokenKind::BondSymbol | TokenKind::Dot | TokenKind::RingDigit | TokenKind::StereoMark => {
                left[i]
            }
            TokenKind::Other => left[i].or(right[i]),
        };
        labels.push(label.ok_or(FragmentError::OrphanSymbol(i))?);
    }
    Ok(labels)
}

/// Full decomposition: BRICS on the graph, then token labeling.
pub fn fragment_molecule(
    graph: &MolecularGraph,
    tokens: &TokenSequence,
) -> Result<FragmentMap, FragmentError> {
    let cleavage = brics_cleave(graph);
    let token_labels = label_smiles_tokens(tokens, graph, &cleavage.atom_labels)?;
    Ok(FragmentMap {
        count: cleavage.count,
        atom_labels: cleavage.atom_labels,
        token_labels,
    })
}

impl FragmentMap {
    /// Atom ids and token ids carrying fragment label `k`.
    pub fn members(&self, k: usize) -> Result<(Vec<usize>, Vec<usize>), FragmentError> {
        if k >= self.count {
            return Err(FragmentError::FragmentOutOfRange {
                k,
                count: self.count,
            });
        }
        let pick = |labels: &[usize]| {
            labels
                .iter()
                .enumerate()
                .filter(|(_, &l)| l == k)
                .map(|(i, _)| i)
                .collect::<Vec<_>>()
        };
        Ok((pick(&self.atom_labels), pick(&self.token_labels)))
    }
}

pub fn fragment_members(
    map: &FragmentMap,
    k: usize,
) -> Result<(Vec<usize>, Vec<usize>), FragmentError> {
    map.members(k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;

    fn cleave(s: &str) -> Cleavage {
        brics_cleave(&parse_smiles(s).unwrap().0)
    }

    #[test]
    fn lone_atom_is_one_fragment() {
        let c = cleave("C");
        assert_eq!((c.count, c.atom_labels), (1, vec![0]));
    }

    #[test]
    fn benzamide_cuts_amide_and_aryl_carbonyl() {
        let c = cleave("c1ccccc1C(=O)NC");
        assert_eq!(c.count, 3);
        assert_eq!(c.atom_labels, [0, 0, 0, 0, 0, 0, 1, 1, 2, 2]);
        assert_eq!(c.cleaved, [(6, "6-16"), (8, "1-5")]);
    }

    #[test]
    fn diethyl_ether_cuts_both_c_o_bonds() {
        let c = cleave("CCOCC");
        assert_eq!(c.count, 3);
        assert_eq!(c.atom_labels, [0, 0, 1, 2, 2]);
        assert_eq!(c.cleaved, [(1, "3-4"), (2, "3-4")]);
    }

    #[test]
    fn ester_cut_between_acyl_and_oxygen() {
        let c = cleave("CC(=O)OC");
        assert_eq!(c.atom_labels, [0, 0, 0, 1, 1]);
        assert_eq!(c.cleaved, [(2, "1-3")]);
    }

    #[test]
    fn ester_token_labels() {
        let (g, t) = parse_smiles("CC(=O)OC").unwrap();
        let ls = label_smiles_tokens(&t, &g, &[0, 0, 0, 1, 1]).unwrap();
        assert_eq!(ls, [0, 0, 0, 0, 0, 0, 1, 1]);
    }

    #[test]
    fn ring_digits_follow_their_atom() {
        let (g, t) = parse_smiles("c1ccccc1O").unwrap();
        let ls = label_smiles_tokens(&t, &g, &[0, 0, 0, 0, 0, 0, 1]).unwrap();
        assert_eq!(ls, [0, 0, 0, 0, 0, 0, 0, 0, 1]);
    }

    #[test]
    fn branch_tokens_take_enclosed_atoms() {
        // tokens: C ( O C ) N
        let (g, t) = parse_smiles("C(OC)N").unwrap();
        let ls = label_smiles_tokens(&t, &g, &[0, 1, 2, 3]).unwrap();
        assert_eq!(ls, [0, 1, 1, 2, 2, 3]);
    }

    #[test]
    fn bond_symbol_takes_left_atom_and_stereo_stays_in_bracket() {
        let (g, t) = parse_smiles("C[C@@H](F)/C=C/C").unwrap();
        let ls = label_smiles_tokens(&t, &g, &[0, 1, 2, 3, 4, 5]).unwrap();
        // C [C@@H] ( F ) / C = C / C
        assert_eq!(ls, [0, 1, 2, 2, 2, 2, 3, 3, 4, 4, 5]);
    }

    #[test]
    fn single_fragment_labels_all_zero() {
        let (g, t) = parse_smiles("CCO").unwrap();
        let map = fragment_molecule(&g, &t).unwrap();
        assert_eq!(map.count, 1);
        assert!(map.token_labels.iter().all(|&l| l == 0));
        let (atoms, toks) = map.members(0).unwrap();
        assert_eq!((atoms, toks), (vec![0, 1, 2], vec![0, 1, 2]));
        assert_eq!(
            map.members(1),
            Err(FragmentError::FragmentOutOfRange { k: 1, count: 1 })
        );
    }

    #[test]
    fn benzamide_members() {
        let (g, t) = parse_smiles("c1ccccc1C(=O)NC").unwrap();
        let map = fragment_molecule(&g, &t).unwrap();
        let (atoms, toks) = map.members(2).unwrap();
        assert_eq!(atoms, [8, 9]);
        // tokens: c 1 c c c c c 1 C ( = O ) N C
        assert_eq!(toks, [13, 14]);
    }

    #[test]
    fn orphan_symbol_detected() {
        let t = crate::chem::tokenize("=C").unwrap();
        let g = parse_smiles("C").unwrap().0;
        assert_eq!(
            label_smiles_tokens(&t, &g, &[0]),
            Err(FragmentError::OrphanSymbol(0))
        );
    }

    #[test]
    fn label_length_checked() {
        let (g, t) = parse_smiles("CC").unwrap();
        assert!(matches!(
            label_smiles_tokens(&t, &g, &[0]),
            Err(FragmentError::LabelLengthMismatch { .. })
        ));
    }
}
